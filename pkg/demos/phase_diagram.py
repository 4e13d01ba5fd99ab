"""Phase diagram of the quantum Curie-Weiss model.

Walks across the (lambda, beta) plane, prints the spontaneous magnetisation
and the critical transverse field lambda_c(beta), and checks that the order
parameter switches on exactly where f = tanh(lambda beta) / lambda crosses 1.
"""
import numpy as np

from qcw.mean_field import critical_beta, critical_lambda, f_value, solve_m_star

print("critical curve lambda_c(beta)")
for beta in [1.05, 1.25, 1.5, 2.0, 3.0, 5.0]:
    print(f"  beta = {beta:4.2f}   lambda_c = {critical_lambda(beta):.6f}")

# the classical end point: lambda -> 0 gives beta_c = 1
print("beta_c at lambda = 0:", critical_beta(0.0))

print("\nm* on a coarse grid (rows: beta, columns: lambda)")
lams = np.linspace(0.1, 1.5, 8)
print("        " + " ".join(f"{l:6.2f}" for l in lams))
for beta in [0.5, 1.0, 1.5, 2.0, 3.0]:
    row = [solve_m_star(l, beta).m_star for l in lams]
    print(f"  {beta:4.1f}  " + " ".join(f"{m:6.3f}" for m in row))

# ordered phase <=> f > 1
grid = [(l, b) for l in np.linspace(0.05, 2, 40) for b in np.linspace(0.1, 4, 40)]
agree = all((solve_m_star(l, b).m_star > 0) == (f_value(l, b) > 1) for l, b in grid)
print("\nm* > 0 exactly where f > 1 on a 40x40 grid:", agree)
