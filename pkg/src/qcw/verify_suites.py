"""Randomised verification suites shared by the CLI and the test-suite.

Each suite draws ``cases`` random instances and returns one record per case
with the residuals it checked and a boolean ``pass``.
"""
from __future__ import annotations

import numpy as np

from .fk import connected, domination_check, sample_q_zero
from .mean_field import solve_m_star
from .single_spin import rcb_bound, two_point, ursell3
from .variational import (
    DyadicField,
    PiecewiseLinearProfile,
    check_integral_inequality,
    check_reflection,
    optimize_dual_field,
    rate_lower_bound,
)

SUITES = ["ursell", "rp", "mincons", "rate", "fk"]

URSELL_TOL = 1e-12
RCB_TOL = 1e-9
RP_TOL = 1e-12
MINCONS_TOL = 1e-6


def _ursell(rng):
    c = float(rng.choice([0.1, 0.5]))
    lam = float(rng.choice([0.5, 1.0]))
    beta = float(rng.choice([1.0, 2.0]))
    r, s, t = np.sort(rng.uniform(0, beta, 3))
    u = ursell3(r, s, t, c, lam, beta)
    bound = rcb_bound(r, s, t, c, lam, beta)
    return {"lambda": lam, "beta": beta, "c": c, "times": [r, s, t], "ursell": u, "rcb": bound,
            "pass": bool(u <= URSELL_TOL and u <= bound + RCB_TOL)}


def _rp(rng):
    h = DyadicField.random(4, 1.0, rng)
    refl = check_reflection(h, 1.0)
    integ = check_integral_inequality(h, 1.0)
    return {"lambda": 1.0, "beta": 1.0, "reflection_residual": refl, "integral_residual": integ,
            "pass": bool(refl >= -RP_TOL and integ >= -RP_TOL)}


_MINCONS_POINTS = [(0.5, 2.0), (1.0, 1.0), (0.25, 3.0), (0.8, 1.5), (1.5, 1.0), (0.0, 2.0)]


def _mincons(rng):
    lam, beta = _MINCONS_POINTS[rng.integers(len(_MINCONS_POINTS))]
    level = int(rng.integers(1, 4))
    res = optimize_dual_field(level, lam, beta, starts=1, rng=rng)
    return {"lambda": lam, "beta": beta, "level": level, "excess": res.excess, "inconclusive": res.inconclusive,
            "pass": bool(res.excess <= MINCONS_TOL)}


def _rate(rng):
    lam = float(rng.choice([0.5, 1.0]))
    beta = float(rng.choice([1.0, 2.0]))
    k = int(rng.integers(1, 5))
    knots = np.sort(rng.choice(np.linspace(0, beta, 64, endpoint=False), size=k, replace=False))
    values = rng.uniform(-1, 1, size=k)
    prof = PiecewiseLinearProfile(knots, values, beta)
    extra = rng.uniform(0, beta, size=3)
    part = np.union1d(knots, extra)
    res = rate_lower_bound(prof, part, 2 * lam, lam=lam)
    return {"lambda": lam, "beta": beta, "bound": res.bound_value, "i_r": res.i_r, "pass": bool(res.certified)}


def _fk(rng, samples: int = 4000):
    lam = float(rng.choice([0.5, 1.0, 2.0]))
    beta = float(rng.choice([0.5, 1.0, 2.0]))
    t = float(rng.uniform(0, beta))
    hits = np.array([connected(sample_q_zero(lam, beta, rng), 0.0, t) for _ in range(samples)], dtype=float)
    exact = two_point(t, lam, beta)
    se = max(np.sqrt(exact * (1 - exact) / samples), 1e-12)
    z = (hits.mean() - exact) / se
    dom = domination_check(lam, float(rng.uniform(0, 1)), beta, samples, rng=rng, alpha=1e-4)
    return {"lambda": lam, "beta": beta, "t": t, "connectivity": hits.mean(), "two_point": exact, "z": z,
            "domination_statistic": dom.statistic, "domination_critical": dom.critical_value,
            "pass": bool(abs(z) <= 4.0 and dom.dominated)}


_RUNNERS = {"ursell": _ursell, "rp": _rp, "mincons": _mincons, "rate": _rate, "fk": _fk}


def run(name: str, cases: int, rng: np.random.Generator) -> list[dict]:
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}")
    out = []
    for i in range(cases):
        rec = _RUNNERS[name](rng)
        rec["case"] = i
        out.append(rec)
    return out
