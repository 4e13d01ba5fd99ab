"""Exact computations for the one-circle spin measure.

The one-circle measure with a time-dependent longitudinal field b(t) is the
path-integral representation of a single spin with generator
``lam * X + b(t) * Z``. Every quantity here is computed from ordered products
of 2x2 matrix exponentials, which are exact for piecewise-constant fields:

    Lambda(b) = log Tr T-exp( int (lam X + b(t) Z) dt ) - log Tr exp(beta lam X)

Each segment exponential is stored scaled by ``exp(-d R)`` (R the spectral
radius of the generator) and chain products are renormalised at every step,
so nothing overflows for beta up to at least 50.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .circle import PiecewiseField
from .errors import ParameterError

__all__ = [
    "PiecewiseField",
    "SegmentChain",
    "CorrelationRequest",
    "log_cosh",
    "segment_matrices",
    "log_mgf_const",
    "log_mgf_piecewise",
    "log_mgf_piecewise_grad",
    "log_mgf_increments",
    "log_mgf_increments_grad",
    "magnetization_const",
    "variance_const",
    "variance_derivative",
    "third_derivative",
    "s4",
    "two_point",
    "correlation",
    "evaluate",
    "ursell3",
    "rcb_bound",
]

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)

_SMALL = 1e-8


def log_cosh(x):
    """log(cosh(x)) without overflow."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


# ---------------------------------------------------------------------------
# 2x2 chain kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _chain(mats):
    """Ordered product of (K, 2, 2) matrices, renormalised; returns (prod, log_scale)."""
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    for k in range(mats.shape[0]):
        m00 = mats[k, 0, 0]
        m01 = mats[k, 0, 1]
        m10 = mats[k, 1, 0]
        m11 = mats[k, 1, 1]
        na = a * m00 + b * m10
        nb = a * m01 + b * m11
        nc = c * m00 + d * m10
        nd = c * m01 + d * m11
        s = max(abs(na), abs(nb), abs(nc), abs(nd))
        if s > 0.0:
            na /= s
            nb /= s
            nc /= s
            nd /= s
            log_scale += np.log(s)
        a, b, c, d = na, nb, nc, nd
    out = np.empty((2, 2))
    out[0, 0] = a
    out[0, 1] = b
    out[1, 0] = c
    out[1, 1] = d
    return out, log_scale


@numba.njit(cache=True)
def _replacement_ratios(mats, alts):
    """For every k: Tr(M_0..M_{k-1} A_k M_{k+1}..) / Tr(M_0..M_{K-1})."""
    K = mats.shape[0]
    pre = np.empty((K + 1, 2, 2))
    pre_log = np.zeros(K + 1)
    pre[0] = np.eye(2)
    for k in range(K):
        p = pre[k] @ mats[k]
        s = np.max(np.abs(p))
        pre[k + 1] = p / s
        pre_log[k + 1] = pre_log[k] + np.log(s)
    suf = np.empty((K + 1, 2, 2))
    suf_log = np.zeros(K + 1)
    suf[K] = np.eye(2)
    for k in range(K - 1, -1, -1):
        p = mats[k] @ suf[k + 1]
        s = np.max(np.abs(p))
        suf[k] = p / s
        suf_log[k] = suf_log[k + 1] + np.log(s)
    total = pre[K, 0, 0] + pre[K, 1, 1]
    out = np.empty(K)
    for k in range(K):
        q = pre[k] @ alts[k] @ suf[k + 1]
        out[k] = (q[0, 0] + q[1, 1]) / total * np.exp(
            pre_log[k] + suf_log[k + 1] - pre_log[K]
        )
    return out


def _seg_parts(durations, fields, lam):
    d = np.asarray(durations, dtype=float)
    b = np.asarray(fields, dtype=float)
    R = np.hypot(lam, b)
    x = d * R
    e2 = np.exp(-2.0 * x)
    ch = 0.5 * (1.0 + e2)
    # q = e^{-x} sinh(x) / R = d * (1 - e^{-2x}) / (2x)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(x > _SMALL, -np.expm1(-2.0 * x) / (2.0 * np.where(x > 0, x, 1.0)), 1.0 - x) * d
    return d, b, R, x, ch, q


def segment_matrices(durations, fields, lam: float):
    """Scaled segment exponentials exp(d(lam X + b Z)) * exp(-d R) and their log scales."""
    d, b, R, x, ch, q = _seg_parts(durations, fields, lam)
    mats = np.empty((d.size, 2, 2))
    mats[:, 0, 0] = ch + q * b
    mats[:, 1, 1] = ch - q * b
    mats[:, 0, 1] = q * lam
    mats[:, 1, 0] = q * lam
    return mats, x


def _segment_field_derivatives(durations, fields, lam: float):
    """d/db of the segment exponential, with the same exp(-d R) scaling."""
    d, b, R, x, ch, q = _seg_parts(durations, fields, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        Rs = np.where(R > 0, R, 1.0)
        big = (d * ch * R - 0.5 * (1.0 - np.exp(-2.0 * x))) / Rs**3
    small = np.exp(-x) * d**3 * (1.0 / 3.0 + x**2 / 30.0)
    dq_over_b = np.where(x > 1e-4, big, small)
    dq = b * dq_over_b
    out = np.empty((d.size, 2, 2))
    diag = d * b * q
    out[:, 0, 0] = diag + dq * b + q
    out[:, 1, 1] = diag - dq * b - q
    out[:, 0, 1] = dq * lam
    out[:, 1, 0] = dq * lam
    return out


def _log_trace(mats, logs) -> tuple[float, float]:
    """(sign, log|trace|) of the ordered product."""
    prod, ls = _chain(np.ascontiguousarray(mats))
    tr = prod[0, 0] + prod[1, 1]
    if tr == 0:
        return 0.0, -np.inf
    return float(np.sign(tr)), float(np.log(abs(tr)) + ls + np.sum(logs))


def _log_norm(lam: float, beta: float, c: float = 0.0) -> float:
    """log Tr exp(beta (lam X + c Z)) = log 2 cosh(beta R)."""
    return float(np.log(2.0) + log_cosh(beta * np.hypot(lam, c)))


# ---------------------------------------------------------------------------
# log-moment generating functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentChain:
    """Sequence of (duration, field) pieces with a common transverse field.

    Each piece stands for the generator ``lam X + b Z`` acting for ``duration``.
    """

    durations: np.ndarray
    fields: np.ndarray
    lam: float

    @classmethod
    def from_field(cls, h: PiecewiseField, lam: float) -> "SegmentChain":
        return cls(h.durations, h.values, float(lam))

    @property
    def beta(self) -> float:
        return float(np.sum(self.durations))

    def log_trace(self) -> float:
        mats, logs = segment_matrices(self.durations, self.fields, self.lam)
        return _log_trace(mats, logs)[1]


def log_mgf_const(c: float, lam: float, beta: float) -> float:
    """Lambda(c * 1) = log cosh(beta sqrt(lam^2 + c^2)) - log cosh(beta lam)."""
    return float(log_cosh(beta * np.hypot(lam, c)) - log_cosh(beta * lam))


def log_mgf_piecewise(h: PiecewiseField, lam: float) -> float:
    """Lambda(h) for a piecewise-constant field, exact up to rounding."""
    chain = SegmentChain.from_field(h, lam)
    return chain.log_trace() - _log_norm(lam, h.beta)


def log_mgf_piecewise_grad(h: PiecewiseField, lam: float) -> tuple[float, np.ndarray]:
    """Lambda(h) and its gradient with respect to the piece values.

    The k-th gradient entry is the integral of <sigma(t)>_h over piece k.
    """
    mats, logs = segment_matrices(h.durations, h.values, lam)
    value = _log_trace(mats, logs)[1] - _log_norm(lam, h.beta)
    dmats = _segment_field_derivatives(h.durations, h.values, lam)
    grad = _replacement_ratios(np.ascontiguousarray(mats), np.ascontiguousarray(dmats))
    return value, grad


def _increment_chain(times, g, c, lam, beta):
    t = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=float)
    if t.ndim != 1 or t.size < 1 or t.size != g.size:
        raise ParameterError("need n >= 1 partition times and n coefficients")
    if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= beta:
        raise ParameterError("partition must be strictly increasing in [0, beta)")
    a = g - np.roll(g, -1)
    durations = np.diff(np.concatenate(([0.0], t, [beta])))
    seg, seg_logs = segment_matrices(durations, np.full(durations.size, c), lam)
    n = t.size
    mats = np.empty((2 * n + 1, 2, 2))
    logs = np.zeros(2 * n + 1)
    mats[0::2] = seg
    logs[0::2] = seg_logs
    # diag(e^a, e^-a), scaled by e^-|a|
    ins = np.zeros((n, 2, 2))
    ins[:, 0, 0] = np.exp(a - np.abs(a))
    ins[:, 1, 1] = np.exp(-a - np.abs(a))
    mats[1::2] = ins
    logs[1::2] = np.abs(a)
    return mats, logs


def log_mgf_increments(times, g, c: float, lam: float, beta: float) -> float:
    """log E[exp(sum_i g_i (sigma(t_i) - sigma(t_{i-1})))] under the field-c measure.

    ``times`` are n sorted points on the circle; the increment for i = 1 uses
    t_0 = t_n, so a constant ``g`` telescopes to zero.
    """
    mats, logs = _increment_chain(times, g, c, lam, beta)
    return _log_trace(mats, logs)[1] - _log_norm(lam, beta, c)


def log_mgf_increments_grad(times, g, c: float, lam: float, beta: float):
    """Value and gradient of :func:`log_mgf_increments` with respect to g."""
    mats, logs = _increment_chain(times, g, c, lam, beta)
    value = _log_trace(mats, logs)[1] - _log_norm(lam, beta, c)
    alts = mats.copy()
    alts[1::2] = mats[1::2] @ Z
    ratios = _replacement_ratios(np.ascontiguousarray(mats), np.ascontiguousarray(alts))
    spins = ratios[1::2]  # tilted <sigma(t_i)>
    return value, spins - np.roll(spins, 1)


# ---------------------------------------------------------------------------
# constant-field derivatives
# ---------------------------------------------------------------------------


def _tanh_over(beta, R):
    """tanh(beta R) / R with the limit beta at R = 0."""
    R = np.asarray(R, dtype=float)
    x = beta * R
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(x) > 1e-6, np.tanh(x) / np.where(R != 0, R, 1.0), beta * (1 - x**2 / 3))
    return out


def magnetization_const(c, lam: float, beta: float):
    """M(c) = (1/beta) dLambda/dc = (c / R) tanh(beta R)."""
    c = np.asarray(c, dtype=float)
    out = c * _tanh_over(beta, np.hypot(lam, c))
    return float(out) if out.ndim == 0 else out


def variance_const(c, lam: float, beta: float):
    """v(c) = (1/beta) Var[(sigma, 1)] = M'(c).

    Closed form lam^2 tanh(beta R) / R^3 + beta c^2 sech^2(beta R) / R^2,
    equal to tanh(lam beta)/lam at c = 0.
    """
    c = np.asarray(c, dtype=float)
    R = np.hypot(lam, c)
    x = beta * R
    sech2 = 1.0 / np.cosh(np.minimum(x, 350.0)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        Rs = np.where(R > 0, R, 1.0)
        out = lam**2 * _tanh_over(beta, R) / Rs**2 + beta * c**2 * sech2 / Rs**2
    # series for small beta R, where lam^2 / R^2 may underflow
    series = beta - beta**3 * (lam**2 / 3 + c**2)
    out = np.where(x > 1e-4, out, series)
    return float(out) if out.ndim == 0 else out


def variance_derivative(c, lam: float, beta: float):
    """dv/dc, i.e. Lambda'''(c) / beta."""
    c = np.asarray(c, dtype=float)
    R = np.hypot(lam, c)
    x = beta * R
    T = np.tanh(x)
    S2 = 1.0 / np.cosh(np.minimum(x, 350.0)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        Rs = np.where(R > 0, R, 1.0)
        first = lam**2 * c * (beta * S2 / Rs**4 - 3 * T / Rs**5)
        second = beta * (2 * c * S2 / Rs**2 - 2 * beta * c**3 * S2 * T / Rs**3 - 2 * c**3 * S2 / Rs**4)
        out = first + second
    # lam = 0 small-c branch: beta * d/dc sech^2(beta c) = -2 beta^2 sech^2 tanh
    out = np.where(R > _SMALL, out, -2 * beta**3 * c)
    return float(out) if out.ndim == 0 else out


def third_derivative(h0, lam: float, beta: float):
    """d^3/dh^3 Lambda(h * 1) at h0."""
    return beta * variance_derivative(h0, lam, beta)


def s4(lam: float, beta: float) -> float:
    """Fourth semi-invariant s4 = -d^4/dh^4 Lambda(h * 1) at h = 0.

    With x = beta lam this is 3 beta^4 (tanh(x)/x - sech^2(x)) / x^2, and
    tends to 2 beta^4 as lam -> 0.
    """
    x = beta * lam
    if x < 1e-2:
        x2 = x * x
        g = 2 / 3 - 8 / 15 * x2 + 34 / 105 * x2**2 - 496 / 2835 * x2**3
    else:
        g = (np.tanh(x) / x - 1.0 / np.cosh(min(x, 350.0)) ** 2) / (x * x)
    return float(3 * beta**4 * g)


# ---------------------------------------------------------------------------
# correlation functions
# ---------------------------------------------------------------------------


def two_point(t: float, lam: float, beta: float) -> float:
    """<sigma_0 sigma_t> at zero field: cosh(lam (beta - 2t)) / cosh(lam beta)."""
    if not 0 <= t <= beta:
        raise ParameterError("t must lie in [0, beta]")
    return float(np.exp(log_cosh(lam * (beta - 2 * t)) - log_cosh(lam * beta)))


def correlation(times: Sequence[float], c: float, lam: float, beta: float) -> float:
    """<sigma(t_1) ... sigma(t_k)> under the constant-field-c measure.

    ``times`` must be sorted in [0, beta]; coincident times are allowed.
    """
    t = np.asarray(times, dtype=float)
    if t.size and (np.any(np.diff(t) < 0) or t[0] < 0 or t[-1] > beta):
        raise ParameterError("insertion times must be sorted in [0, beta]")
    durations = np.diff(np.concatenate(([0.0], t, [beta])))
    seg, seg_logs = segment_matrices(durations, np.full(durations.size, c), lam)
    k = t.size
    mats = np.empty((2 * k + 1, 2, 2))
    mats[0::2] = seg
    mats[1::2] = Z
    logs = np.zeros(2 * k + 1)
    logs[0::2] = seg_logs
    sign, lt = _log_trace(mats, logs)
    return float(sign * np.exp(lt - _log_norm(lam, beta, c)))


@dataclass(frozen=True)
class CorrelationRequest:
    """Insertion times and the kind of correlator wanted from :func:`evaluate`."""

    insertion_times: tuple[float, ...]
    kind: str  # one-point, two-point, three-point, ursell3

    _arity = {"one-point": 1, "two-point": 2, "three-point": 3, "ursell3": 3}

    def __post_init__(self):
        if self.kind not in self._arity:
            raise ParameterError(f"unknown correlator kind {self.kind!r}")
        if len(self.insertion_times) != self._arity[self.kind]:
            raise ParameterError(f"{self.kind} needs {self._arity[self.kind]} times")


def evaluate(request: CorrelationRequest, c: float, lam: float, beta: float) -> float:
    if request.kind == "ursell3":
        return ursell3(*request.insertion_times, c=c, lam=lam, beta=beta)
    return correlation(sorted(request.insertion_times), c, lam, beta)


def ursell3(r: float, s: float, t: float, c: float, lam: float, beta: float) -> float:
    """Third Ursell function U(r, s, t) of the constant-field-c measure."""
    if not 0 <= r <= s <= t < beta:
        raise ParameterError("need 0 <= r <= s <= t < beta")
    if c < 0:
        raise ParameterError("c must be nonnegative")
    m = magnetization_const(c, lam, beta)
    rs = correlation((r, s), c, lam, beta)
    st = correlation((s, t), c, lam, beta)
    rt = correlation((r, t), c, lam, beta)
    rst = correlation((r, s, t), c, lam, beta)
    return rst - (rs + st + rt) * m + 2 * m**3


def rcb_bound(r: float, s: float, t: float, c: float, lam: float, beta: float) -> float:
    """Right-hand side of the random-current upper bound on U(r, s, t)."""
    m = magnetization_const(c, lam, beta)
    gaps = (s - r) ** 2 + (t - s) ** 2 + (beta + r - t) ** 2
    return float(-m * np.exp(-(4 * lam + 2 * c) * beta) * lam**2 / 2 * gaps)
