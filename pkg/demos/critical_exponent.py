"""Square-root onset of the magnetisation near the critical curve.

At fixed beta = 2 we approach lambda_c from the ordered side, compare m*
with the leading-order prediction sqrt(6 beta (f - 1) / s4) and fit the
exponent of m* against f - 1.
"""
import numpy as np

from qcw.mean_field import lambda_for_f, predict_m_star, solve_m_star

beta = 2.0
gaps = np.array([1e-5, 1e-4, 3e-4, 1e-3, 1e-2])
ms = []
print(f"{'f - 1':>8} {'lambda':>10} {'m*':>12} {'prediction':>12} {'ratio':>8}")
for gap in gaps:
    lam = lambda_for_f(1 + gap, beta)
    m = solve_m_star(lam, beta).m_star
    ms.append(m)
    pred = predict_m_star(lam, beta)
    print(f"{gap:8.0e} {lam:10.6f} {m:12.6e} {pred:12.6e} {m / pred:8.5f}")

slope = np.polyfit(np.log(gaps[:4]), np.log(ms[:4]), 1)[0]
print(f"\nfitted exponent close to criticality: {slope:.4f} (mean-field value 1/2)")
