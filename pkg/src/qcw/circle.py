"""Value types and elementary operations on the time circle S_beta.

Everything here is an immutable value. Arrays stored on the dataclasses are
copied and marked read-only on construction, so instances may be shared
freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "ModelParams",
    "PointSet",
    "SpinPath",
    "Arc",
    "PiecewiseField",
    "sample_poisson",
    "components",
    "compatible",
    "time_integral",
    "mean_path",
]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).ravel()
    arr.setflags(write=False)
    return arr


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    return beta


@dataclass(frozen=True)
class ModelParams:
    """One model instance: inverse temperature, transverse and longitudinal field, P.

    ``p_coeffs`` holds the coefficients of the polynomial P, constant term
    first. The default ``(0, 0, 0.5)`` is the Curie-Weiss choice P(x) = x**2/2.
    """

    beta: float
    lam: float = 0.0
    h: float = 0.0
    p_coeffs: tuple[float, ...] = (0.0, 0.0, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_beta(self.beta))
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise ParameterError(f"lambda must be nonnegative, got {lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "h", float(self.h))
        coeffs = tuple(float(c) for c in self.p_coeffs)
        # strip trailing zeros so the degree is meaningful
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        if len(coeffs) < 3 or coeffs[-1] <= 0:
            raise ParameterError(
                "P must have degree >= 2 with a positive leading coefficient"
            )
        object.__setattr__(self, "p_coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.p_coeffs) - 1

    @property
    def is_quadratic(self) -> bool:
        return self.degree == 2

    def P(self, x):
        """Evaluate the interaction polynomial."""
        return np.polynomial.polynomial.polyval(x, self.p_coeffs)

    def replace(self, **changes) -> "ModelParams":
        kwargs = dict(beta=self.beta, lam=self.lam, h=self.h, p_coeffs=self.p_coeffs)
        kwargs.update(changes)
        return ModelParams(**kwargs)


@dataclass(frozen=True)
class PointSet:
    """Sorted arrival times of a point process on [0, beta)."""

    times: np.ndarray
    beta: float

    def __post_init__(self):
        beta = _check_beta(self.beta)
        times = _frozen(self.times)
        if times.size:
            if times[0] < 0 or times[-1] >= beta:
                raise ParameterError("point times must lie in [0, beta)")
            if np.any(np.diff(times) <= 0):
                raise ParameterError("point times must be strictly increasing")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return int(self.times.size)

    def count_in(self, a: float, b: float) -> int:
        """Number of points in [a, b), with wrap-around when a > b."""
        t = self.times
        if a <= b:
            return int(np.count_nonzero((t >= a) & (t < b)))
        return int(np.count_nonzero((t >= a) | (t < b)))


@dataclass(frozen=True)
class SpinPath:
    """Piecewise-constant +-1 trajectory on the circle.

    Only the sign changes are stored. ``sigma(t)`` is right-continuous and
    periodic with period ``beta``.
    """

    initial_sign: int
    jumps: np.ndarray
    beta: float

    def __post_init__(self):
        beta = _check_beta(self.beta)
        if self.initial_sign not in (1, -1):
            raise ParameterError("initial_sign must be +1 or -1")
        jumps = _frozen(self.jumps)
        if jumps.size:
            if jumps[0] <= 0 or jumps[-1] >= beta:
                raise ParameterError("jump times must lie in (0, beta)")
            if np.any(np.diff(jumps) <= 0):
                raise ParameterError("jump times must be strictly increasing")
        if jumps.size % 2:
            raise ParameterError("a closed path needs an even number of jumps")
        object.__setattr__(self, "initial_sign", int(self.initial_sign))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "jumps", jumps)

    @classmethod
    def constant(cls, sign: int, beta: float) -> "SpinPath":
        return cls(sign, np.empty(0), beta)

    def __call__(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.beta)
        n = np.searchsorted(self.jumps, t, side="right")
        return self.initial_sign * np.where(n % 2 == 0, 1, -1)

    def flip(self) -> "SpinPath":
        return SpinPath(-self.initial_sign, self.jumps, self.beta)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (durations, signs) of the constant pieces starting at time 0."""
        edges = np.concatenate(([0.0], self.jumps, [self.beta]))
        signs = self.initial_sign * (1 - 2 * (np.arange(edges.size - 1) % 2))
        return np.diff(edges), signs


@dataclass(frozen=True)
class Arc:
    """Arc of the circle starting at ``start`` with the given length (wraps mod beta)."""

    start: float
    length: float

    def __post_init__(self):
        if self.length <= 0:
            raise ParameterError("arc length must be positive")


@dataclass(frozen=True)
class PiecewiseField:
    """Real field on S_beta, constant on [breakpoints[k], breakpoints[k+1]).

    The first breakpoint is always 0 and the last piece runs up to beta.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    beta: float

    def __post_init__(self):
        beta = _check_beta(self.beta)
        bp = _frozen(self.breakpoints)
        vals = _frozen(self.values)
        if bp.size == 0 or bp.size != vals.size:
            raise ParameterError("need one value per breakpoint")
        if bp[0] != 0.0 or bp[-1] >= beta or np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must start at 0, increase, and stay below beta")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, beta: float) -> "PiecewiseField":
        return cls(np.zeros(1), np.array([value]), beta)

    @classmethod
    def from_durations(cls, durations: Sequence[float], values: Sequence[float]) -> "PiecewiseField":
        d = np.asarray(durations, dtype=float)
        if np.any(d <= 0):
            raise ParameterError("durations must be positive")
        beta = float(d.sum())
        bp = np.concatenate(([0.0], np.cumsum(d)[:-1]))
        return cls(bp, np.asarray(values, dtype=float), beta)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(np.append(self.breakpoints, self.beta))

    def __call__(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.beta)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        return self.values[k]

    def integral(self) -> float:
        return float(self.durations @ self.values)

    def norm_sq(self) -> float:
        """Squared L2(S_beta) norm."""
        return float(self.durations @ self.values**2)

    def abs(self) -> "PiecewiseField":
        return PiecewiseField(self.breakpoints, np.abs(self.values), self.beta)

    def scaled(self, a: float) -> "PiecewiseField":
        return PiecewiseField(self.breakpoints, a * self.values, self.beta)

    def refine(self, extra_points: Sequence[float]) -> "PiecewiseField":
        """Same function on a finer breakpoint set."""
        pts = np.union1d(self.breakpoints, np.mod(np.asarray(extra_points, float), self.beta))
        return PiecewiseField(pts, self(pts), self.beta)

    def shifted(self, s: float) -> "PiecewiseField":
        """The rotated field t -> h(t + s)."""
        pts = np.mod(self.breakpoints - s, self.beta)
        pts = np.union1d(pts[pts < self.beta], [0.0])
        # sample at midpoints so rounding in the shift cannot hit a breakpoint
        mids = 0.5 * (pts + np.append(pts[1:], self.beta))
        return PiecewiseField(pts, self(mids + s), self.beta)


def sample_poisson(intensity: float, beta: float, rng: np.random.Generator) -> PointSet:
    """Homogeneous Poisson process of the given intensity on [0, beta).

    Draws containing a point at exactly 0 or two coincident points (both
    probability-zero events in exact arithmetic) are redrawn.
    """
    beta = _check_beta(beta)
    if not intensity >= 0:
        raise ParameterError(f"intensity must be nonnegative, got {intensity}")
    n = rng.poisson(intensity * beta)
    while True:
        times = np.sort(rng.uniform(0.0, beta, size=n))
        if n == 0 or (times[0] > 0.0 and np.all(np.diff(times) > 0)):
            return PointSet(times, beta)


def components(xi: PointSet) -> list[Arc]:
    """Connected components of the punctured circle S_beta minus xi.

    The empty set leaves the whole circle, which counts as one component.
    """
    t = xi.times
    if t.size == 0:
        return [Arc(0.0, xi.beta)]
    gaps = np.diff(np.append(t, t[0] + xi.beta))
    return [Arc(float(s), float(g)) for s, g in zip(t, gaps)]


def compatible(sigma: SpinPath, xi: PointSet) -> bool:
    """True iff every jump of ``sigma`` is an arrival of ``xi``."""
    if sigma.beta != xi.beta:
        raise ParameterError("path and point set live on circles of different length")
    return bool(np.all(np.isin(sigma.jumps, xi.times)))


def time_integral(sigma: SpinPath) -> float:
    """Exact value of the integral of sigma(t) over [0, beta)."""
    d, s = sigma.segments()
    return float(d @ s)


def mean_path(paths: Sequence[SpinPath]) -> PiecewiseField:
    """Average m_N(t) of N spin paths, as a step function."""
    if len(paths) == 0:
        raise ParameterError("need at least one path")
    beta = paths[0].beta
    if any(p.beta != beta for p in paths):
        raise ParameterError("paths must share beta")
    bp = np.unique(np.concatenate([[0.0]] + [p.jumps for p in paths]))
    vals = np.mean([p(bp) for p in paths], axis=0)
    return PiecewiseField(bp, vals, beta)
