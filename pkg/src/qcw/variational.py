"""Numerical checks of the dual variational problem and its stability bounds.

Everything here evaluates the one-circle functional Lambda exactly through
2x2 segment products (see :mod:`qcw.single_spin`); no Monte Carlo is used,
so residuals are meaningful down to ~1e-12.

Fields h are piecewise constant on the dyadic grid of S_beta. The main
objects are

* the dual functional F(h) = Lambda(h) - ||h||^2 / 2, maximised by a
  constant field +-m* (reflection positivity reduces it to constants);
* the partition bound I^R >= sum_i |dt_i| U_eta(dm_i / |dt_i|) on the rate
  function of the empirical path, with U_eta = eta H*(. / eta).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .circle import PiecewiseField
from .errors import InvariantViolation, ParameterError
from .mean_field import g_value, solve_m_star, stability_coefficient, u_eta
from .single_spin import log_mgf_const, log_mgf_increments, log_mgf_increments_grad, log_mgf_piecewise, log_mgf_piecewise_grad

__all__ = [
    "DyadicField",
    "PiecewiseLinearProfile",
    "PartitionBound",
    "DualOptimum",
    "DualStability",
    "dual_objective",
    "check_reflection",
    "check_integral_inequality",
    "check_fkg",
    "check_constant_bound",
    "optimize_dual_field",
    "rate_lower_bound",
    "dual_stability_check",
]

logger = logging.getLogger(__name__)

MAX_LEVEL = 6


@dataclass(frozen=True)
class DyadicField:
    """Field constant on [k beta / 2^M, (k+1) beta / 2^M), k = 0..2^M - 1."""

    level: int
    values: np.ndarray
    beta: float

    def __post_init__(self):
        if not 0 <= self.level <= MAX_LEVEL:
            raise ParameterError(f"level must lie in [0, {MAX_LEVEL}]")
        v = np.array(self.values, dtype=float).ravel()
        if v.size != 2**self.level:
            raise ParameterError(f"need {2 ** self.level} values at level {self.level}")
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def random(cls, level: int, beta: float, rng: np.random.Generator, low: float = -1.0, high: float = 1.0) -> "DyadicField":
        return cls(level, rng.uniform(low, high, size=2**level), beta)

    @property
    def width(self) -> float:
        return self.beta / 2**self.level

    def to_piecewise(self) -> PiecewiseField:
        bp = np.arange(2**self.level) * self.width
        return PiecewiseField(bp, self.values, self.beta)

    def with_values(self, values) -> "DyadicField":
        return DyadicField(self.level, values, self.beta)

    def norm_sq(self) -> float:
        return float(self.width * np.sum(self.values**2))

    def abs(self) -> "DyadicField":
        return self.with_values(np.abs(self.values))

    def reflections(self) -> tuple["DyadicField", "DyadicField"]:
        """(h_l, h_r): each half of the circle mirrored about the axis through 0 and beta/2."""
        if self.level == 0:
            return self, self
        half = self.values.size // 2
        left, right = self.values[:half], self.values[half:]
        return self.with_values(np.concatenate((left, left[::-1]))), self.with_values(np.concatenate((right[::-1], right)))


def _lam_field(h: DyadicField, lam: float) -> float:
    return log_mgf_piecewise(h.to_piecewise(), lam)


def dual_objective(h: DyadicField, lam: float) -> float:
    """F(h) = Lambda(h) - ||h||^2 / 2."""
    return _lam_field(h, lam) - 0.5 * h.norm_sq()


def check_reflection(h: DyadicField, lam: float, beta: float | None = None) -> float:
    """(1/2)[Lambda(h_l) + Lambda(h_r)] - Lambda(h); nonnegative by reflection positivity."""
    _check_beta(h, beta)
    hl, hr = h.reflections()
    return 0.5 * (_lam_field(hl, lam) + _lam_field(hr, lam)) - _lam_field(h, lam)


def check_integral_inequality(h: DyadicField, lam: float, beta: float | None = None) -> float:
    """(1/beta) sum_k |I_k| Lambda(h_k * 1) - Lambda(h); nonnegative."""
    _check_beta(h, beta)
    consts = np.array([log_mgf_const(v, lam, h.beta) for v in h.values])
    return float(h.width / h.beta * consts.sum()) - _lam_field(h, lam)


def check_fkg(h: DyadicField, lam: float) -> float:
    """Lambda(|h|) - Lambda(h); nonnegative."""
    return _lam_field(h.abs(), lam) - _lam_field(h, lam)


def check_constant_bound(h: DyadicField, lam: float) -> float:
    """(1/beta) int g(h(t)) dt - [Lambda(h) - ||h||^2/2], with g(c) = Lambda(c 1) - beta c^2/2."""
    g = np.array([g_value(v, lam, h.beta) for v in h.values])
    return float(h.width / h.beta * g.sum()) - dual_objective(h, lam)


def _check_beta(h: DyadicField, beta: float | None):
    if beta is not None and not np.isclose(beta, h.beta, rtol=0, atol=1e-14):
        raise ParameterError("field and beta disagree")


# ---------------------------------------------------------------------------
# dual optimisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualOptimum:
    """Result of the multi-start maximisation of F over dyadic fields."""

    field: DyadicField
    value: float
    constant_optimum: float  # sup_c g(c) = g(m*)
    m_star: float
    sup_distance: float  # min over signs of ||h -+ m*||_sup
    excess: float  # value - constant_optimum; must stay <= 1e-6
    starts: int
    converged: int
    inconclusive: bool

    @property
    def consistent(self) -> bool:
        return self.excess <= 1e-6


def optimize_dual_field(
    level: int,
    lam: float,
    beta: float,
    budget: int = 500,
    *,
    starts: int = 4,
    rng: np.random.Generator | None = None,
    spread: float = 1.5,
) -> DualOptimum:
    """Maximise Lambda(h) - ||h||^2/2 over dyadic fields of the given level.

    Each start runs L-BFGS-B with the exact gradient (the integral of the
    tilted magnetisation over each dyadic piece). ``budget`` caps the
    iterations per start; a start that hits the cap marks the result
    inconclusive without invalidating the comparison.
    """
    rng = np.random.default_rng() if rng is None else rng
    if starts < 1:
        raise ParameterError("need at least one start")
    template = DyadicField(level, np.zeros(2**level), beta)
    width = template.width

    def neg(v):
        pf = PiecewiseField(np.arange(v.size) * width, v, beta)
        val, grad = log_mgf_piecewise_grad(pf, lam)
        return -(val - 0.5 * width * v @ v), -(grad - width * v)

    best_v, best_f = None, -np.inf
    converged = 0
    for _ in range(starts):
        x0 = rng.uniform(-spread, spread, size=2**level)
        res = optimize.minimize(
            neg, x0, jac=True, method="L-BFGS-B", options={"maxiter": budget, "ftol": 1e-15, "gtol": 1e-11}
        )
        converged += int(res.success)
        if -res.fun > best_f:
            best_f, best_v = -float(res.fun), res.x
    sol = solve_m_star(lam, beta)
    const_opt = sol.g_value
    dist = float(min(np.max(np.abs(best_v - sol.m_star)), np.max(np.abs(best_v + sol.m_star))))
    return DualOptimum(
        template.with_values(best_v), best_f, const_opt, sol.m_star, dist, best_f - const_opt, starts, converged,
        converged < starts,
    )


# ---------------------------------------------------------------------------
# partition bounds on the rate function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinearProfile:
    """Periodic, piecewise-linear magnetisation profile m(t) on S_beta."""

    knots: np.ndarray
    values: np.ndarray
    beta: float

    def __post_init__(self):
        t = np.array(self.knots, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if t.size == 0 or t.size != v.size:
            raise ParameterError("need one value per knot")
        if t[0] < 0 or t[-1] >= self.beta or np.any(np.diff(t) <= 0):
            raise ParameterError("knots must increase within [0, beta)")
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, beta: float) -> "PiecewiseLinearProfile":
        return cls(np.zeros(1), np.array([value]), beta)

    def __call__(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.beta)
        xp = np.concatenate((self.knots, [self.knots[0] + self.beta]))
        fp = np.concatenate((self.values, [self.values[0]]))
        # shift so that every t sits inside [knots[0], knots[0] + beta)
        t = np.where(t < self.knots[0], t + self.beta, t)
        return np.interp(t, xp, fp)


@dataclass(frozen=True)
class PartitionBound:
    """Lower bounds on the rate function from one partition of the circle."""

    partition: np.ndarray
    increments: np.ndarray
    durations: np.ndarray
    bound_value: float  # sum |dt| U_eta(dm / |dt|)
    i_r: float  # numerically conjugated I^R (a certified lower value of the max)
    eta: float
    certified: bool


def _durations(times: np.ndarray, beta: float) -> np.ndarray:
    return np.diff(np.concatenate(([times[-1] - beta], times)))


def rate_lower_bound(
    m: PiecewiseLinearProfile,
    partition,
    eta: float,
    *,
    lam: float | None = None,
    h: float = 0.0,
    box: float = 20.0,
    tol: float = 1e-8,
) -> PartitionBound:
    """U_eta partition bound and the sharper I^R on the same partition.

    ``partition`` must contain every knot of ``m``. The increment for point
    i is m(t_i) - m(t_{i-1}) with t_0 = t_n - beta. I^R is the maximum over
    g in [-box, box]^n of sum_i g_i z_i - Lambda^R(g); L-BFGS-B is started at
    the maximiser of the U_eta bound, so the reported value can only improve
    on it if Lambda^R <= eta sum |dt_i| H(g_i) holds. ``lam`` defaults to
    eta / 2.
    """
    t = np.asarray(partition, dtype=float)
    if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= m.beta:
        raise ParameterError("partition must be strictly increasing in [0, beta)")
    if not np.all(np.isin(np.round(m.knots, 14), np.round(t, 14))) and m.knots.size > 1:
        raise ParameterError("partition must refine the knots of the profile")
    if not eta > 0:
        raise ParameterError("eta must be positive")
    lam = eta / 2.0 if lam is None else lam
    beta = m.beta
    mt = m(t)
    z = mt - np.roll(mt, 1)
    dt = _durations(t, beta)
    bound = float(np.sum(dt * u_eta(z / dt, eta)))

    g0 = np.clip(0.5 * np.arcsinh(z / (4.0 * eta * dt)), -box, box)

    def neg(g):
        val, grad = log_mgf_increments_grad(t, g, h, lam, beta)
        return val - g @ z, grad - z

    res = optimize.minimize(
        neg, g0, jac=True, method="L-BFGS-B", bounds=[(-box, box)] * t.size, options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12}
    )
    start_val = float(g0 @ z - log_mgf_increments(t, g0, h, lam, beta))
    i_r = max(-float(res.fun), start_val)
    certified = i_r >= bound - tol
    if not certified:
        raise InvariantViolation(f"I^R = {i_r:.10g} falls below the U_eta bound {bound:.10g}")
    return PartitionBound(t, z, dt, bound, i_r, float(eta), certified)


# ---------------------------------------------------------------------------
# dual-side stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualStability:
    """Terms of the L2 stability bound for one field h."""

    residual: float  # {g(m*)} - {Lambda(|h|) - ||h||^2/2} - D(h)
    D: float
    d_coeff: float
    c1: float
    dist_sq: float  # min over signs of ||h -+ m*||^2
    sign_definite: bool

    @property
    def dbound_slack(self) -> float:
        """D(h) - c1 ||h -+ m*||^2."""
        return self.D - self.c1 * self.dist_sq

    @property
    def passed(self) -> bool:
        return self.residual >= -1e-10


def dual_stability_check(h: DyadicField, lam: float, beta: float | None = None) -> DualStability:
    """Evaluate the dual-side stability inequality for one field (supercritical only).

    D(h) = (1/beta) int d_coeff (|h(t)| - m*)^2 dt. The companion bound
    D(h) >= c1 ||h -+ m*||^2 with c1 = d_coeff / beta holds for
    sign-definite fields; ``sign_definite`` records whether it applies.
    """
    _check_beta(h, beta)
    sol = solve_m_star(lam, h.beta)
    stab = stability_coefficient(lam, h.beta)
    m = sol.m_star
    const_term = log_mgf_const(m, lam, h.beta) - 0.5 * h.beta * m**2
    field_term = _lam_field(h.abs(), lam) - 0.5 * h.norm_sq()
    D = float(stab.d_coeff / h.beta * h.width * np.sum((np.abs(h.values) - m) ** 2))
    residual = float(const_term - field_term - D)
    dist = min(np.sum((h.values - m) ** 2), np.sum((h.values + m) ** 2)) * h.width
    definite = bool(np.all(h.values >= 0) or np.all(h.values <= 0))
    return DualStability(residual, D, stab.d_coeff, stab.d_coeff / h.beta, float(dist), definite)
