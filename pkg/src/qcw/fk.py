"""Samplers for the random-cluster (FK) puncture measure and the one-circle spins.

The puncture process xi on S_beta has law proportional to

    prod_j 2 cosh(h |I_j|) * Poisson(lam)[d xi],

where I_j are the arcs of S_beta minus xi (the empty set leaves a single arc
of length beta). Spins are recovered by painting each arc independently
(Edwards-Sokal coupling).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .circle import PointSet, SpinPath, components
from .errors import InvariantViolation, NumericError, ParameterError
from .single_spin import log_cosh

__all__ = [
    "FkConfig",
    "Envelope",
    "DominationReport",
    "empty_probability",
    "sample_q_zero",
    "sample_q_field",
    "paint",
    "sample_spin_path",
    "domination_check",
    "connected",
]

logger = logging.getLogger(__name__)

_MAX_REJECTIONS = 100_000


@dataclass(frozen=True)
class FkConfig:
    """One unweighted draw from the puncture measure."""

    xi: PointSet


@dataclass(frozen=True)
class Envelope:
    """Intensity of a Poisson process that stochastically dominates the punctures."""

    eta: float

    @classmethod
    def for_field(cls, lam: float, h: float = 0.0) -> "Envelope":
        # splitting an arc multiplies the weight by at most 2, whatever h is
        return cls(2.0 * lam)


def empty_probability(lam: float, h: float, beta: float) -> float:
    """Probability that the puncture process is empty.

    The total mass of the measure is 2 cosh(beta sqrt(lam^2 + h^2)) and the
    empty configuration carries exp(-lam beta) * 2 cosh(h beta).
    """
    R = np.hypot(lam, h)
    return float(np.exp(-lam * beta + log_cosh(h * beta) - log_cosh(beta * R)))


def _zero_truncated_poisson(mean: float, rng: np.random.Generator) -> int:
    if mean > 0.5:
        while True:
            n = rng.poisson(mean)
            if n > 0:
                return int(n)
    # inversion; p_n proportional to mean^n / n!, n >= 1
    u = rng.uniform() * -np.expm1(-mean)
    n, p = 1, mean * np.exp(-mean)
    acc = p
    while acc < u:
        n += 1
        p *= mean / n
        acc += p
    return n


def _uniform_points(n: int, beta: float, rng: np.random.Generator) -> PointSet:
    while True:
        times = np.sort(rng.uniform(0.0, beta, size=n))
        if times[0] > 0.0 and np.all(np.diff(times) > 0):
            return PointSet(times, beta)


def sample_q_zero(lam: float, beta: float, rng: np.random.Generator) -> PointSet:
    """Exact draw of the puncture process at zero longitudinal field."""
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    if lam == 0 or rng.uniform() < empty_probability(lam, 0.0, beta):
        return PointSet(np.empty(0), beta)
    return _uniform_points(_zero_truncated_poisson(2 * lam * beta, rng), beta, rng)


def sample_q_field(
    lam: float, h: float, beta: float, rng: np.random.Generator, *, stats_out: dict | None = None
) -> PointSet:
    """Exact draw of the puncture process with longitudinal field h >= 0.

    The empty configuration is drawn with its exact probability. Otherwise a
    nonempty proposal from Poisson(2 lam) is accepted with probability
    prod_j (1 + exp(-2 h |I_j|)) / 2, which is at most one term by term.
    """
    if h < 0:
        raise ParameterError("h must be nonnegative; flip spins for h < 0")
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    if lam == 0 or rng.uniform() < empty_probability(lam, h, beta):
        return PointSet(np.empty(0), beta)
    for attempt in range(1, _MAX_REJECTIONS + 1):
        xi = _uniform_points(_zero_truncated_poisson(2 * lam * beta, rng), beta, rng)
        lengths = np.diff(np.append(xi.times, xi.times[0] + beta))
        log_acc = np.sum(np.log1p(np.exp(-2 * h * lengths)) - np.log(2.0))
        if log_acc > 1e-12:
            raise InvariantViolation(f"acceptance probability exp({log_acc}) exceeds one")
        if np.log(rng.uniform()) < log_acc:
            if stats_out is not None:
                stats_out["proposals"] = stats_out.get("proposals", 0) + attempt
                stats_out["accepted"] = stats_out.get("accepted", 0) + 1
            return xi
    raise NumericError("rejection sampler exceeded its proposal cap")


def paint(xi: PointSet, h: float, beta: float, rng: np.random.Generator) -> SpinPath:
    """Colour every arc of S_beta minus xi independently.

    An arc I becomes +1 with probability e^{h|I|} / (e^{h|I|} + e^{-h|I|}).
    The resulting path jumps exactly at the arrivals that separate arcs of
    different colour.
    """
    arcs = components(xi)
    lengths = np.array([a.length for a in arcs])
    p_up = 0.5 * (1.0 + np.tanh(h * lengths))
    colours = np.where(rng.uniform(size=lengths.size) < p_up, 1, -1)
    if xi.times.size == 0:
        return SpinPath.constant(int(colours[0]), beta)
    # arc k starts at times[k]; the last arc wraps through 0
    left = np.roll(colours, 1)
    jumps = xi.times[colours != left]
    return SpinPath(int(colours[-1]), jumps, beta)


def sample_spin_path(lam: float, h: float, beta: float, rng: np.random.Generator) -> SpinPath:
    """Draw from the one-circle spin measure with constant field h."""
    if h < 0:
        return sample_spin_path(lam, -h, beta, rng).flip()
    xi = sample_q_field(lam, h, beta, rng)
    return paint(xi, h, beta, rng)


def connected(xi: PointSet, s: float, t: float) -> bool:
    """True iff s and t (0 <= s <= t < beta) lie in the same arc of S_beta minus xi."""
    times = xi.times
    inner = np.any((times > s) & (times < t))
    outer = np.any((times > t) | (times < s))
    return not (inner and outer)


@dataclass
class DominationReport:
    """Outcome of the empirical stochastic-domination test."""

    lam: float
    h: float
    beta: float
    eta: float
    samples: int
    statistic: float
    critical_value: float
    mean_count: float
    poisson_mean: float

    @property
    def dominated(self) -> bool:
        return self.statistic <= self.critical_value


def domination_check(
    lam: float, h: float, beta: float, samples: int, *, rng: np.random.Generator | None = None, alpha: float = 0.01
) -> DominationReport:
    """Test that arrival counts are stochastically below Poisson(eta beta), eta = 2 lam.

    Domination of the counts means F_Q(k) >= F_Poisson(k) for every k. The
    statistic is the one-sided Kolmogorov-Smirnov distance
    max_k (F_Poisson(k) - F_Q(k)), compared with sqrt(-log(alpha) / (2 n)).
    """
    rng = np.random.default_rng() if rng is None else rng
    eta = Envelope.for_field(lam, h).eta
    counts = np.array([len(sample_q_field(lam, abs(h), beta, rng)) for _ in range(samples)])
    kmax = int(max(counts.max(initial=0), stats.poisson.ppf(1 - 1e-12, eta * beta) if eta > 0 else 0))
    ks = np.arange(kmax + 1)
    emp = np.searchsorted(np.sort(counts), ks, side="right") / samples
    ref = stats.poisson.cdf(ks, eta * beta) if eta > 0 else np.ones_like(ks, dtype=float)
    stat = float(max(0.0, np.max(ref - emp)))
    crit = float(np.sqrt(-np.log(alpha) / (2 * samples)))
    return DominationReport(lam, h, beta, eta, samples, stat, crit, float(counts.mean()), eta * beta)
