"""One-dimensional variational problem, phase diagram and stability constants.

For quadratic P the infinite-volume problem reduces to maximising

    g(c) = Lambda(c * 1) - beta c^2 / 2,     Lambda(c * 1) = log cosh(beta R) - log cosh(beta lam),

with R = sqrt(lam^2 + c^2). Critical points solve c = M(c) = (c / R) tanh(beta R),
and the nontrivial branch exists exactly when f = tanh(lam beta) / lam > 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, InvariantViolation, NumericError, ParameterError
from .single_spin import log_mgf_const, magnetization_const, s4 as _s4, variance_const

__all__ = [
    "MfSolution",
    "StabilityData",
    "f_value",
    "g_value",
    "solve_m_star",
    "critical_lambda",
    "critical_beta",
    "lambda_for_f",
    "predict_m_star",
    "dirichlet_gap_integral",
    "chi_value",
    "stability_coefficient",
    "h_conjugate",
    "u_eta",
]

logger = logging.getLogger(__name__)

_MAX_ITER = 200
_NEWTON_SWITCH = 1e-6


@dataclass(frozen=True)
class MfSolution:
    """Solution of the constant-field problem at one (lam, beta)."""

    lam: float
    beta: float
    m_star: float
    f: float
    s4: float
    g_value: float
    supercritical: bool
    m_star_prediction: float
    residual: float = 0.0


@dataclass(frozen=True)
class StabilityData:
    """Constants of the quadratic lower bound g(c*) - g(c) >= d_coeff (c - c*)^2."""

    chi: float
    d_coeff: float
    eta: float
    min_slack: float = 0.0


def _check(lam: float, beta: float) -> tuple[float, float]:
    lam, beta = float(lam), float(beta)
    if not (np.isfinite(lam) and lam >= 0):
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    if not (np.isfinite(beta) and beta > 0):
        raise ParameterError(f"beta must be positive, got {beta}")
    return lam, beta


def f_value(lam: float, beta: float) -> float:
    """f(lam, beta) = tanh(lam beta) / lam, equal to beta at lam = 0."""
    lam, beta = _check(lam, beta)
    if lam == 0.0:
        return beta
    return float(np.tanh(lam * beta) / lam)


def g_value(c, lam: float, beta: float):
    """The one-dimensional objective g(c) = Lambda(c * 1) - beta c^2 / 2."""
    c = np.asarray(c, dtype=float)
    out = np.vectorize(lambda x: log_mgf_const(x, lam, beta))(c) - 0.5 * beta * c**2
    return float(out) if out.ndim == 0 else out


def _psi(c: float, lam: float, beta: float) -> float:
    # M(c)/c - 1; decreasing in c, so its root is the positive fixed point
    R = np.hypot(lam, c)
    x = beta * R
    if x < 1e-8:
        return beta - 1.0
    return float(np.tanh(x) / R - 1.0)


def _dpsi(c: float, lam: float, beta: float) -> float:
    R = np.hypot(lam, c)
    x = beta * R
    sech2 = 1.0 / np.cosh(min(x, 350.0)) ** 2
    return float(c * (beta * sech2 / R**2 - np.tanh(x) / R**3))


def predict_m_star(lam: float, beta: float) -> float:
    """Leading-order amplitude sqrt(6 beta (f - 1) / s4) near the critical curve."""
    f = f_value(lam, beta)
    if f < 1.0:
        raise DomainError(f"subcritical point (f = {f:.6g} < 1) has no positive magnetization")
    return float(np.sqrt(6.0 * beta * (f - 1.0) / _s4(lam, beta)))


def _newton(c0: float, lam: float, beta: float, tol: float) -> float | None:
    c = c0
    for _ in range(50):
        step = _psi(c, lam, beta) / _dpsi(c, lam, beta)
        c_new = c - step
        if not (0.0 < c_new <= 1.0):
            return None
        if abs(c_new - c) <= 1e-15 * c_new:
            return c_new
        c = c_new
    return c if abs(c - magnetization_const(c, lam, beta)) <= tol else None


def solve_m_star(lam: float, beta: float, tol: float = 1e-12) -> MfSolution:
    """Largest nonnegative solution of c = M(c) and the associated constants.

    The root is bracketed in (0, 1] since |M| <= 1. Close to the critical
    curve, where m* ~ sqrt(f - 1) is tiny, Newton's method seeded with the
    leading-order prediction replaces bisection.
    """
    lam, beta = _check(lam, beta)
    if not tol > 0:
        raise ParameterError("tol must be positive")
    f = f_value(lam, beta)
    s4v = _s4(lam, beta)
    if f <= 1.0:
        return MfSolution(lam, beta, 0.0, f, s4v, 0.0, False, 0.0, 0.0)

    pred = predict_m_star(lam, beta)
    m = None
    if f - 1.0 < _NEWTON_SWITCH:
        m = _newton(min(pred, 1.0), lam, beta, tol)
    if m is None:
        # psi(0+) = f - 1 > 0 and psi(1) = tanh(beta R1)/R1 - 1 < 0
        lo = min(pred, 1.0) * 1e-3
        while _psi(lo, lam, beta) <= 0.0:
            lo *= 1e-3
            if lo < 1e-300:
                raise NumericError("could not bracket the positive fixed point")
        try:
            m, info = optimize.brentq(
                _psi, lo, 1.0, args=(lam, beta), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                maxiter=_MAX_ITER, full_output=True,
            )
        except RuntimeError as exc:
            raise NumericError(f"fixed-point solve failed: {exc}") from exc
        if not info.converged:
            raise NumericError("fixed-point solve did not converge")
    residual = abs(m - magnetization_const(m, lam, beta))
    if residual > tol:
        raise NumericError(f"fixed-point residual {residual:.3g} exceeds tol {tol:.3g}")
    return MfSolution(lam, beta, float(m), f, s4v, g_value(m, lam, beta), True, pred, residual)


def critical_lambda(beta: float) -> float | None:
    """Transverse field on the critical curve tanh(lam beta) = lam, or None for beta <= 1."""
    _, beta = _check(0.0, beta)
    if beta <= 1.0:
        return None
    phi = lambda lam: np.tanh(lam * beta) - lam
    return float(optimize.brentq(phi, 1e-300, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=_MAX_ITER))


def critical_beta(lam: float) -> float | None:
    """Inverse temperature on the critical curve, atanh(lam)/lam; None for lam >= 1."""
    lam, _ = _check(lam, 1.0)
    if lam >= 1.0:
        return None
    if lam == 0.0:
        return 1.0
    return float(np.arctanh(lam) / lam)


def lambda_for_f(f_target: float, beta: float) -> float:
    """The lam with f(lam, beta) = f_target; f decreases from beta to 0 in lam."""
    _, beta = _check(0.0, beta)
    if not 0.0 < f_target < beta:
        raise DomainError(f"f_target must lie in (0, beta) = (0, {beta})")
    # work with lam * f(lam) - lam * f_target to avoid dividing by small lam
    phi = lambda lam: np.tanh(lam * beta) - f_target * lam
    hi = 1.0 / f_target
    return float(optimize.brentq(phi, 1e-300, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=_MAX_ITER))


def dirichlet_gap_integral(beta: float) -> float:
    """Integral of (s-r)^2 + (t-s)^2 + (beta+r-t)^2 over 0 < r < s < t < beta.

    The four spacings of (r, s, t) on the circle are uniform on the simplex;
    the three terms contribute beta^5/60, beta^5/60 and beta^5/20.
    """
    return beta**5 / 12.0


def chi_value(lam: float, beta: float, c_max: float = 1.0) -> float:
    """Explicit constant with dv/dc <= -chi M(c) for 0 <= c <= c_max.

    dv/dc is (1/beta) times the integral of the third Ursell function over
    the cube [0, beta)^3, i.e. 6/beta times the ordered integral. Integrating
    the random-current bound U <= -M(c) (lam^2/2) e^{-(4 lam + 2c) beta} * gaps
    gives chi = lam^2 beta^4 e^{-(4 lam + 2 c_max) beta} / 4.
    """
    lam, beta = _check(lam, beta)
    if c_max < 0:
        raise ParameterError("c_max must be nonnegative")
    return float(6.0 / beta * 0.5 * lam**2 * np.exp(-(4 * lam + 2 * c_max) * beta) * dirichlet_gap_integral(beta))


def stability_coefficient(lam: float, beta: float, *, grid: int = 101) -> StabilityData:
    """d_coeff = chi beta (c*)^3 / 24, checked on a grid of c in [0, 1].

    Raises InvariantViolation if g(c*) - g(c) >= d_coeff (c - c*)^2 fails
    anywhere on the grid.
    """
    sol = solve_m_star(lam, beta)
    if not sol.supercritical:
        raise DomainError("stability constants need a supercritical point")
    if sol.lam == 0.0:
        raise DomainError("the random-current constant vanishes at lam = 0")
    chi = chi_value(lam, beta)
    c_star = sol.m_star
    d_coeff = chi * beta * c_star**3 / 24.0
    cs = np.union1d(np.linspace(0.0, 1.0, grid), [c_star])
    slack = (sol.g_value - g_value(cs, lam, beta)) - d_coeff * (cs - c_star) ** 2
    min_slack = float(slack.min())
    # the point c* itself gives zero up to rounding
    if min_slack < -1e-12:
        bad = cs[np.argmin(slack)]
        raise InvariantViolation(f"quadratic stability fails at c = {bad:.6g} (slack {min_slack:.3g})")
    return StabilityData(chi, d_coeff, 2.0 * lam, min_slack)


def h_conjugate(z):
    """Legendre transform of H(g) = e^{2g} + e^{-2g}: (z/2) asinh(z/4) - 2 sqrt(1 + z^2/16)."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * z * np.arcsinh(z / 4.0) - 2.0 * np.sqrt(1.0 + z**2 / 16.0)
    return float(out) if out.ndim == 0 else out


def u_eta(z, eta: float):
    """U_eta(z) = eta H*(z / eta); even, strictly convex, U_eta(0) = -2 eta."""
    if not eta > 0:
        raise ParameterError("eta must be positive")
    return eta * h_conjugate(np.asarray(z, dtype=float) / eta)
