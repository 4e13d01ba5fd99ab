"""Path-integral Monte Carlo for the finite-N quantum Curie-Weiss model.

The N circles carry +-1 paths sigma_i(t) on [0, beta) with weight

    exp( int_0^beta [ N P(m_N(t)) + h N m_N(t) ] dt )

relative to independent Poisson(lam) jump processes. Two samplers are
provided and are meant to be checked against each other:

* a Trotter lattice of N x n classical spins, updated by single-site
  Metropolis sweeps and by exact heat-bath resampling of whole time lines;
* a continuous-time sampler that redraws one circle at a time from its exact
  conditional law, a single spin in a piecewise-constant longitudinal field.

The basic observable is the path average qbar = (1/beta) int m_N(t) dt.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .circle import ModelParams, SpinPath
from .errors import DomainError, NumericError, ParameterError

__all__ = [
    "TrotterLattice",
    "PathEnsemble",
    "ChainConfig",
    "McParams",
    "McStats",
    "Estimate",
    "BinderScan",
    "trotter_coupling",
    "trotter_log_weight",
    "flip_log_ratio",
    "trotter_sweep",
    "line_heat_bath",
    "ct_resample_circle",
    "effective_field",
    "run_chain",
    "binder_scan",
    "binder_scan_beta",
    "binder_cumulant",
]

logger = logging.getLogger(__name__)

_MAX_UNIFORMIZATION = 100_000
_MIN_BATCHES = 32


def trotter_coupling(lam: float, beta: float, n_slices: int) -> float:
    """Imaginary-time coupling J = (1/2) ln coth(lam beta / n), so e^{-2J} = tanh(lam beta / n)."""
    if n_slices < 2:
        raise ParameterError("need at least two slices")
    if beta <= 0:
        raise ParameterError("beta must be positive")
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    if lam == 0:
        raise DomainError("lam = 0 decouples the slices; use the classical single-slice chain")
    return float(-0.5 * np.log(np.tanh(lam * beta / n_slices)))


# ---------------------------------------------------------------------------
# Trotter lattice
# ---------------------------------------------------------------------------


@dataclass
class TrotterLattice:
    """N x n array of +-1 spins, periodic along the slice axis.

    ``slice_sum[k]`` caches the column sums and is kept in step by the
    update kernels.
    """

    params: ModelParams
    spins: np.ndarray
    slice_sum: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.spins)
        if s.ndim != 2:
            raise ParameterError("spins must be a 2-d array")
        n = s.shape[1]
        if n < 2 or n & (n - 1):
            raise ParameterError("n_slices must be a power of two and at least 2")
        if not np.all(np.abs(s) == 1):
            raise ParameterError("spins must be +-1")
        self.spins = np.ascontiguousarray(s, dtype=np.int8)
        self.slice_sum = self.spins.sum(axis=0, dtype=np.int64)

    @classmethod
    def random(cls, params: ModelParams, n_spins: int, n_slices: int, rng: np.random.Generator) -> "TrotterLattice":
        spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n_spins, n_slices))
        return cls(params, spins)

    @property
    def n_spins(self) -> int:
        return self.spins.shape[0]

    @property
    def n_slices(self) -> int:
        return self.spins.shape[1]

    @property
    def coupling(self) -> float:
        return trotter_coupling(self.params.lam, self.params.beta, self.n_slices)

    def qbar(self) -> float:
        return float(self.slice_sum.sum() / self.spins.size)


def _coeffs(params: ModelParams) -> np.ndarray:
    return np.asarray(params.p_coeffs, dtype=float)


@numba.njit(cache=True)
def _poly(c, x):
    out = 0.0
    for k in range(c.size - 1, -1, -1):
        out = out * x + c[k]
    return out


def trotter_log_weight(lattice: TrotterLattice) -> float:
    """log of exp{sum_k (beta/n)(N P(m_k) + h N m_k) + J sum of time bonds}."""
    p = lattice.params
    N, n = lattice.spins.shape
    m = lattice.spins.sum(axis=0) / N
    s = lattice.spins.astype(float)
    bonds = float(np.sum(s * np.roll(s, -1, axis=1)))
    return float(np.sum(p.beta / n * (N * p.P(m) + p.h * N * m)) + lattice.coupling * bonds)


@numba.njit(cache=True)
def _flip_delta(spins, slice_sum, c, bn, J, h, i, k):
    N, n = spins.shape
    s = spins[i, k]
    m = slice_sum[k] / N
    m_new = (slice_sum[k] - 2 * s) / N
    d = bn * (N * (_poly(c, m_new) - _poly(c, m)) - 2.0 * h * s)
    if n > 1:
        d -= 2.0 * J * s * (spins[i, k - 1] + spins[i, (k + 1) % n])
    return d


def flip_log_ratio(lattice: TrotterLattice, i: int, k: int) -> float:
    """log W(flipped) - log W(current) for the single site (i, k)."""
    p = lattice.params
    return float(
        _flip_delta(lattice.spins, lattice.slice_sum, _coeffs(p), p.beta / lattice.n_slices, lattice.coupling, p.h, i, k)
    )


@numba.njit(cache=True)
def _metropolis(spins, slice_sum, c, bn, J, h, rng):
    N, n = spins.shape
    accepted = 0
    for k in range(n):
        for i in range(N):
            d = _flip_delta(spins, slice_sum, c, bn, J, h, i, k)
            if d >= 0.0 or rng.random() < np.exp(d):
                s = spins[i, k]
                spins[i, k] = -s
                slice_sum[k] -= 2 * s
                accepted += 1
    return accepted


@numba.njit(cache=True)
def _line_heat_bath(spins, slice_sum, c, bn, J, h, rng):
    """Resample each time line exactly from its conditional law (forward filtering on the ring)."""
    N, n = spins.shape
    eJ = np.exp(J)
    emJ = np.exp(-J)
    M = np.empty((n, 2, 2))
    R = np.empty((n + 1, 2, 2))
    for i in range(N):
        for k in range(n):
            rest = slice_sum[k] - spins[i, k]
            up = bn * (N * _poly(c, (rest + 1.0) / N) + h)
            dn = bn * (N * _poly(c, (rest - 1.0) / N) - h)
            top = max(up, dn)
            wu = np.exp(up - top)
            wd = np.exp(dn - top)
            M[k, 0, 0] = wu * eJ
            M[k, 0, 1] = wu * emJ
            M[k, 1, 0] = wd * emJ
            M[k, 1, 1] = wd * eJ
        R[n, 0, 0] = 1.0
        R[n, 0, 1] = 0.0
        R[n, 1, 0] = 0.0
        R[n, 1, 1] = 1.0
        for k in range(n - 1, -1, -1):
            a = M[k, 0, 0] * R[k + 1, 0, 0] + M[k, 0, 1] * R[k + 1, 1, 0]
            b = M[k, 0, 0] * R[k + 1, 0, 1] + M[k, 0, 1] * R[k + 1, 1, 1]
            cc = M[k, 1, 0] * R[k + 1, 0, 0] + M[k, 1, 1] * R[k + 1, 1, 0]
            d = M[k, 1, 0] * R[k + 1, 0, 1] + M[k, 1, 1] * R[k + 1, 1, 1]
            sc = max(max(a, b), max(cc, d))
            R[k, 0, 0] = a / sc
            R[k, 0, 1] = b / sc
            R[k, 1, 0] = cc / sc
            R[k, 1, 1] = d / sc
        # the trace picks the closing state: s_0 ~ R[0][s, s]
        p0 = R[0, 0, 0] / (R[0, 0, 0] + R[0, 1, 1])
        s0 = 0 if rng.random() < p0 else 1
        prev = s0
        new = 1 - 2 * s0
        slice_sum[0] += new - spins[i, 0]
        spins[i, 0] = new
        for k in range(1, n):
            w0 = M[k - 1, prev, 0] * R[k, 0, s0]
            w1 = M[k - 1, prev, 1] * R[k, 1, s0]
            cur = 0 if rng.random() * (w0 + w1) < w0 else 1
            new = 1 - 2 * cur
            slice_sum[k] += new - spins[i, k]
            spins[i, k] = new
            prev = cur


def trotter_sweep(lattice: TrotterLattice, rng: np.random.Generator) -> TrotterLattice:
    """One Metropolis sweep over all N * n sites, in place. Returns the lattice."""
    p = lattice.params
    _metropolis(lattice.spins, lattice.slice_sum, _coeffs(p), p.beta / lattice.n_slices, lattice.coupling, p.h, rng)
    return lattice


def line_heat_bath(lattice: TrotterLattice, rng: np.random.Generator) -> TrotterLattice:
    """Exact resampling of every spin's time line given the others, in place."""
    p = lattice.params
    _line_heat_bath(lattice.spins, lattice.slice_sum, _coeffs(p), p.beta / lattice.n_slices, lattice.coupling, p.h, rng)
    return lattice


# ---------------------------------------------------------------------------
# continuous-time circles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathEnsemble:
    """N spin paths on a common circle."""

    paths: tuple[SpinPath, ...]

    def __post_init__(self):
        if len(self.paths) == 0:
            raise ParameterError("need at least one path")
        beta = self.paths[0].beta
        if any(p.beta != beta for p in self.paths):
            raise ParameterError("all paths must share beta")
        object.__setattr__(self, "paths", tuple(self.paths))

    @property
    def beta(self) -> float:
        return self.paths[0].beta

    @property
    def n_spins(self) -> int:
        return len(self.paths)

    def qbar(self) -> float:
        from .circle import time_integral

        return float(sum(time_integral(p) for p in self.paths) / (self.n_spins * self.beta))

    def _arrays(self):
        N = self.n_spins
        cap = max(8, max(p.jumps.size for p in self.paths) * 2)
        jumps = np.zeros((N, cap))
        counts = np.zeros(N, dtype=np.int64)
        signs = np.zeros(N, dtype=np.int64)
        for i, p in enumerate(self.paths):
            jumps[i, : p.jumps.size] = p.jumps
            counts[i] = p.jumps.size
            signs[i] = p.initial_sign
        return signs, jumps, counts

    @classmethod
    def _from_arrays(cls, signs, jumps, counts, beta) -> "PathEnsemble":
        return cls(tuple(SpinPath(int(signs[i]), jumps[i, : counts[i]].copy(), beta) for i in range(signs.size)))


def effective_field(params: ModelParams, n_spins: int, mbar):
    """Field felt by one circle: h + (N/2)[P(mbar + 1/N) - P(mbar - 1/N)].

    ``mbar`` is the sum of the other N - 1 spins divided by N, so that
    N P(mbar + s/N) is the interaction energy when the circle sits at s.
    """
    N = n_spins
    mbar = np.asarray(mbar, dtype=float)
    return params.h + 0.5 * N * (params.P(mbar + 1.0 / N) - params.P(mbar - 1.0 / N))


@numba.njit(cache=True)
def _seg_scaled(d, b, lam, out):
    """exp(d (lam X + b Z)) * exp(-d R) into ``out``; returns d R."""
    R = np.sqrt(lam * lam + b * b)
    x = d * R
    e2 = np.exp(-2.0 * x)
    ch = 0.5 * (1.0 + e2)
    if x > 1e-12:
        q = d * (1.0 - e2) / (2.0 * x)
    else:
        q = d * (1.0 - x)
    out[0, 0] = ch + q * b
    out[1, 1] = ch - q * b
    out[0, 1] = q * lam
    out[1, 0] = q * lam
    return x


@numba.njit(cache=True)
def _bridge(d, b, lam, a, c, t0, rng, buf, nbuf):
    """Fill a path of the two-state weight process on [t0, t0 + d) from a to c.

    Uniformization: with Omega = 2 lam + |b| the matrix B = Omega I + (lam X + b Z)
    is nonnegative, exp(d A) = e^{-Omega d} sum_n d^n B^n / n!, so the number of
    clock events and the state sequence can be drawn exactly. Jump times are
    appended to ``buf``; returns the new fill level (or -1 on overflow).
    """
    omega = 2.0 * lam + abs(b)
    rho = omega + abs(b) + lam
    B00 = (omega + b) / rho
    B11 = (omega - b) / rho
    B01 = lam / rho
    tmp = np.empty((2, 2))
    x = _seg_scaled(d, b, lam, tmp)
    total = np.exp((omega - rho) * d + x) * tmp[a, c]
    u = rng.random() * total
    # running power P = Bh^n, Poisson weight w_n
    P00, P01, P10, P11 = 1.0, 0.0, 0.0, 1.0
    rd = rho * d
    logw = -rd
    n = 0
    acc = np.exp(logw) * (P00 if a == c else 0.0)
    while acc < u:
        n += 1
        if n > _MAX_UNIFORMIZATION:
            return -2
        n00 = P00 * B00 + P01 * B01
        n01 = P00 * B01 + P01 * B11
        n10 = P10 * B00 + P11 * B01
        n11 = P10 * B01 + P11 * B11
        P00, P01, P10, P11 = n00, n01, n10, n11
        logw += np.log(rd) - np.log(n)
        if a == 0:
            term = np.exp(logw) * (P00 if c == 0 else P01)
        else:
            term = np.exp(logw) * (P10 if c == 0 else P11)
        acc += term
        if n > rd and term < 1e-17 * acc:
            break  # rounding: the remaining mass is negligible
    if n == 0:
        return nbuf
    # v[r] = Bh^r e_c, used to steer the state sequence to c
    v = np.empty((n + 1, 2))
    v[0, 0] = 1.0 if c == 0 else 0.0
    v[0, 1] = 1.0 - v[0, 0]
    for r in range(1, n + 1):
        v[r, 0] = B00 * v[r - 1, 0] + B01 * v[r - 1, 1]
        v[r, 1] = B01 * v[r - 1, 0] + B11 * v[r - 1, 1]
    times = np.sort(rng.random(n)) * d + t0
    state = a
    for e in range(n):
        r = n - e - 1
        if state == 0:
            w0 = B00 * v[r, 0]
            w1 = B01 * v[r, 1]
        else:
            w0 = B01 * v[r, 0]
            w1 = B11 * v[r, 1]
        nxt = 0 if rng.random() * (w0 + w1) < w0 else 1
        if nxt != state:
            if nbuf >= buf.size:
                return -1
            buf[nbuf] = times[e]
            nbuf += 1
            state = nxt
    return nbuf


@numba.njit(cache=True)
def _ct_resample(i, signs, jumps, counts, beta, lam, h, c, rng):
    """Redraw circle i from its exact conditional law. Returns the new jump count or a negative code."""
    N = signs.size
    total = 0
    for j in range(N):
        if j != i:
            total += counts[j]
    times = np.empty(total)
    owner = np.empty(total, dtype=np.int64)
    pos = 0
    for j in range(N):
        if j != i:
            for q in range(counts[j]):
                times[pos] = jumps[j, q]
                owner[pos] = j
                pos += 1
    order = np.argsort(times)
    K = total + 1
    tau = np.empty(K + 1)
    tau[0] = 0.0
    for q in range(total):
        tau[q + 1] = times[order[q]]
    tau[K] = beta
    cur = signs.copy()
    ssum = 0
    for j in range(N):
        if j != i:
            ssum += cur[j]
    bfield = np.empty(K)
    for k in range(K):
        if k > 0:
            o = owner[order[k - 1]]
            ssum -= 2 * cur[o]
            cur[o] = -cur[o]
        mbar = ssum / N
        bfield[k] = h + 0.5 * N * (_poly(c, mbar + 1.0 / N) - _poly(c, mbar - 1.0 / N))
    E = np.empty((K, 2, 2))
    for k in range(K):
        _seg_scaled(tau[k + 1] - tau[k], bfield[k], lam, E[k])
    R = np.empty((K + 1, 2, 2))
    R[K, 0, 0] = 1.0
    R[K, 0, 1] = 0.0
    R[K, 1, 0] = 0.0
    R[K, 1, 1] = 1.0
    for k in range(K - 1, -1, -1):
        a = E[k, 0, 0] * R[k + 1, 0, 0] + E[k, 0, 1] * R[k + 1, 1, 0]
        b = E[k, 0, 0] * R[k + 1, 0, 1] + E[k, 0, 1] * R[k + 1, 1, 1]
        cc = E[k, 1, 0] * R[k + 1, 0, 0] + E[k, 1, 1] * R[k + 1, 1, 0]
        d = E[k, 1, 0] * R[k + 1, 0, 1] + E[k, 1, 1] * R[k + 1, 1, 1]
        sc = max(max(a, b), max(cc, d))
        R[k, 0, 0] = a / sc
        R[k, 0, 1] = b / sc
        R[k, 1, 0] = cc / sc
        R[k, 1, 1] = d / sc
    st = np.empty(K + 1, dtype=np.int64)
    p0 = R[0, 0, 0] / (R[0, 0, 0] + R[0, 1, 1])
    st[0] = 0 if rng.random() < p0 else 1
    st[K] = st[0]
    for k in range(1, K):
        w0 = E[k - 1, st[k - 1], 0] * R[k, 0, st[0]]
        w1 = E[k - 1, st[k - 1], 1] * R[k, 1, st[0]]
        st[k] = 0 if rng.random() * (w0 + w1) < w0 else 1
    buf = np.empty(jumps.shape[1])
    nbuf = 0
    for k in range(K):
        d = tau[k + 1] - tau[k]
        if d <= 0.0:
            if st[k] != st[k + 1]:
                return -3
            continue
        nbuf = _bridge(d, bfield[k], lam, st[k], st[k + 1], tau[k], rng, buf, nbuf)
        if nbuf < 0:
            return nbuf
    for q in range(nbuf):
        if buf[q] <= 0.0 or (q > 0 and buf[q] <= buf[q - 1]):
            return -4
    signs[i] = 1 - 2 * st[0]
    for q in range(nbuf):
        jumps[i, q] = buf[q]
    counts[i] = nbuf
    return nbuf


def _ct_step(i, signs, jumps, counts, params: ModelParams, rng: np.random.Generator):
    """Resample circle i, growing the jump storage as needed. Returns the (possibly new) jump array."""
    c = _coeffs(params)
    for _ in range(60):
        state = rng.bit_generator.state
        code = _ct_resample(i, signs, jumps, counts, params.beta, params.lam, params.h, c, rng)
        if code >= 0:
            return jumps
        if code == -1:
            # buffer too small: enlarge and replay the same random numbers
            bigger = np.zeros((jumps.shape[0], 2 * jumps.shape[1]))
            bigger[:, : jumps.shape[1]] = jumps
            jumps = bigger
            rng.bit_generator.state = state
            continue
        if code == -2:
            raise NumericError("uniformization exceeded its event cap")
        # -3 / -4: coincident times, a probability-zero event; redraw
        logger.debug("redrawing circle %d after degenerate draw (code %d)", i, code)
    raise NumericError("continuous-time resampling failed repeatedly")


def ct_resample_circle(ensemble: PathEnsemble, i: int, params: ModelParams, rng: np.random.Generator) -> PathEnsemble:
    """New ensemble in which path i is an exact draw from its conditional law."""
    if params.beta != ensemble.beta:
        raise ParameterError("ensemble and parameters disagree on beta")
    if not 0 <= i < ensemble.n_spins:
        raise ParameterError("circle index out of range")
    signs, jumps, counts = ensemble._arrays()
    jumps = _ct_step(i, signs, jumps, counts, params, rng)
    return PathEnsemble._from_arrays(signs, jumps, counts, ensemble.beta)


@numba.njit(cache=True)
def _ct_qbar(signs, jumps, counts, beta):
    N = signs.size
    tot = 0.0
    for i in range(N):
        s = signs[i]
        prev = 0.0
        acc = 0.0
        for q in range(counts[i]):
            acc += s * (jumps[i, q] - prev)
            prev = jumps[i, q]
            s = -s
        acc += s * (beta - prev)
        tot += acc
    return tot / (N * beta)


# ---------------------------------------------------------------------------
# chains and statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainConfig:
    """Model instance plus system size and (for the Trotter sampler) slice count."""

    params: ModelParams
    n_spins: int
    n_slices: int = 256

    def __post_init__(self):
        if self.n_spins < 1:
            raise ParameterError("n_spins must be positive")


@dataclass(frozen=True)
class McParams:
    """Run-length and sampler settings.

    ``sampler`` is ``"trotter"`` or ``"ct"`` (continuous time). A Trotter
    sweep is one Metropolis pass (if ``metropolis``) followed by one
    heat-bath pass over the time lines (if ``line_updates``).
    ``burn_in=None`` measures the autocorrelation time on a pilot run and
    discards ten times that.
    """

    sweeps: int
    burn_in: int | None = 0
    seed: int = 0
    sampler: str = "trotter"
    n_batches: int = _MIN_BATCHES
    line_updates: bool = True
    metropolis: bool = True

    def __post_init__(self):
        if self.sampler not in ("trotter", "ct"):
            raise ParameterError(f"unknown sampler {self.sampler!r}")
        if not (self.metropolis or self.line_updates):
            raise ParameterError("a Trotter sweep needs Metropolis or line updates")
        if self.n_batches < _MIN_BATCHES:
            raise ParameterError(f"need at least {_MIN_BATCHES} batches")
        if self.burn_in is not None and not 0 <= self.burn_in < self.sweeps:
            raise ParameterError("need sweeps > burn_in >= 0")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    tau_int: float
    ess: float


@dataclass(frozen=True)
class McStats:
    """Batch-means summary of one chain."""

    n_samples: int
    n_batches: int
    q: Estimate
    abs_q: Estimate
    q2: Estimate
    q4: Estimate
    binder: Estimate
    acceptance: float = float("nan")

    def as_dict(self) -> dict:
        out = {"n_samples": self.n_samples, "n_batches": self.n_batches, "acceptance": self.acceptance}
        for name in ("q", "abs_q", "q2", "q4", "binder"):
            e = getattr(self, name)
            out[name] = {"mean": e.mean, "stderr": e.stderr, "tau_int": e.tau_int, "ess": e.ess}
        return out


def binder_cumulant(q2: float, q4: float) -> float:
    """U4 = 1 - <q^4> / (3 <q^2>^2); at most 2/3 by Cauchy-Schwarz."""
    return float(1.0 - q4 / (3.0 * q2**2))


def _batch_estimate(x: np.ndarray, n_batches: int) -> Estimate:
    n = x.size
    size = n // n_batches
    used = x[n - size * n_batches :]
    means = used.reshape(n_batches, size).mean(axis=1)
    mean = float(used.mean())
    se = float(means.std(ddof=1) / np.sqrt(n_batches))
    var = float(used.var())
    if var > 0:
        tau = max(0.5, used.size * se**2 / (2 * var))
    else:
        tau = 0.5
    return Estimate(mean, se, float(tau), float(used.size / (2 * tau)))


def _binder_estimate(q: np.ndarray, n_batches: int) -> Estimate:
    """U4 with a jackknife error over batches."""
    size = q.size // n_batches
    used = q[q.size - size * n_batches :]
    q2 = (used**2).reshape(n_batches, size).mean(axis=1)
    q4 = (used**4).reshape(n_batches, size).mean(axis=1)
    full = binder_cumulant(q2.mean(), q4.mean())
    jk = np.array(
        [binder_cumulant((q2.sum() - q2[b]) / (n_batches - 1), (q4.sum() - q4[b]) / (n_batches - 1)) for b in range(n_batches)]
    )
    se = float(np.sqrt((n_batches - 1) / n_batches * np.sum((jk - jk.mean()) ** 2)))
    return Estimate(full, se, float("nan"), float("nan"))


def _summarise(q: np.ndarray, n_batches: int, acceptance: float) -> McStats:
    if q.size < n_batches:
        raise ParameterError(f"{q.size} samples cannot fill {n_batches} batches")
    return McStats(
        int(q.size),
        n_batches,
        _batch_estimate(q, n_batches),
        _batch_estimate(np.abs(q), n_batches),
        _batch_estimate(q**2, n_batches),
        _batch_estimate(q**4, n_batches),
        _binder_estimate(q, n_batches),
        acceptance,
    )


@numba.njit(cache=True)
def _trotter_run(spins, slice_sum, c, bn, J, h, rng, sweeps, metropolis, line_updates, out):
    N, n = spins.shape
    acc = 0
    for t in range(sweeps):
        if metropolis:
            acc += _metropolis(spins, slice_sum, c, bn, J, h, rng)
        if line_updates:
            _line_heat_bath(spins, slice_sum, c, bn, J, h, rng)
        out[t] = slice_sum.sum() / (N * n)
    return acc


class _Chain:
    """Mutable sampler state shared by run_chain and the pilot run."""

    def __init__(self, config: ChainConfig, mc: McParams, rng: np.random.Generator):
        self.config = config
        self.mc = mc
        self.rng = rng
        p = config.params
        N = config.n_spins
        self.accepted = 0
        self.proposed = 0
        if mc.sampler == "trotter":
            if p.lam == 0:
                # classical chain: one slice, no time bonds
                self.n = 1
                self.J = 0.0
            else:
                self.n = config.n_slices
                self.J = trotter_coupling(p.lam, p.beta, self.n)
                TrotterLattice(p, np.ones((1, self.n)))  # validates the slice count
            self.spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(N, self.n))
            self.slice_sum = self.spins.sum(axis=0, dtype=np.int64)
        else:
            self.signs = rng.choice(np.array([-1, 1], dtype=np.int64), size=N)
            self.jumps = np.zeros((N, 16))
            self.counts = np.zeros(N, dtype=np.int64)

    def advance(self, sweeps: int) -> np.ndarray:
        p = self.config.params
        out = np.empty(sweeps)
        if self.mc.sampler == "trotter":
            c = _coeffs(p)
            acc = _trotter_run(
                self.spins, self.slice_sum, c, p.beta / self.n, self.J, p.h, self.rng, sweeps,
                self.mc.metropolis, self.mc.line_updates, out,
            )
            if self.mc.metropolis:
                self.accepted += acc
                self.proposed += sweeps * self.spins.size
        else:
            N = self.config.n_spins
            for t in range(sweeps):
                for i in range(N):
                    self.jumps = _ct_step(i, self.signs, self.jumps, self.counts, p, self.rng)
                out[t] = _ct_qbar(self.signs, self.jumps, self.counts, p.beta)
        return out


def run_chain(config: ChainConfig, mc: McParams) -> McStats:
    """Run one chain and summarise qbar, |qbar|, qbar^2, qbar^4 and U4.

    Bit-for-bit deterministic given ``mc.seed``.
    """
    rng = np.random.default_rng(mc.seed)
    chain = _Chain(config, mc, rng)
    burn = mc.burn_in
    if burn is None:
        pilot = chain.advance(max(_MIN_BATCHES * 4, min(2000, mc.sweeps // 10)))
        tau = _batch_estimate(pilot**2, _MIN_BATCHES).tau_int
        burn = int(np.ceil(10 * tau))
        logger.info("pilot tau_int %.1f, burn-in %d sweeps", tau, burn)
        if burn >= mc.sweeps:
            raise ParameterError(f"pilot burn-in {burn} leaves no samples out of {mc.sweeps}")
    if mc.sweeps - burn < mc.n_batches:
        raise ParameterError(f"{mc.sweeps - burn} post-burn-in sweeps cannot fill {mc.n_batches} batches")
    if burn:
        chain.advance(burn)
    chain.accepted = chain.proposed = 0
    q = chain.advance(mc.sweeps - burn)
    acceptance = chain.accepted / chain.proposed if chain.proposed else float("nan")
    return _summarise(q, mc.n_batches, acceptance)


# ---------------------------------------------------------------------------
# Binder crossing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinderScan:
    """U4 curves on a grid and the crossing estimate derived from them.

    ``pair_crossings`` maps each pair of consecutive sizes to the root of a
    weighted polynomial fit of their U4 difference. ``crossing`` is the
    estimate of the infinite-N crossing: with three or more sizes the two
    largest pair crossings are extrapolated assuming a shift proportional to
    1/N; with two sizes it is the single pair crossing.
    """

    axis: str
    grid: np.ndarray
    sizes: tuple[int, ...]
    u4: np.ndarray  # shape (len(sizes), len(grid))
    u4_err: np.ndarray
    crossing: float | None
    crossing_err: float | None
    pair_crossings: dict
    message: str = ""


def _fit_crossing(x: np.ndarray, diff: np.ndarray, err: np.ndarray, degree: int) -> float | None:
    """Root inside [x_min, x_max] of a weighted polynomial fit to ``diff``."""
    sgn = np.sign(diff)
    if np.all(sgn == sgn[0]):
        return None
    deg = min(degree, x.size - 1)
    xc = x.mean()
    w = 1.0 / np.maximum(err, 1e-12)
    coef = np.polynomial.polynomial.polyfit(x - xc, diff, deg, w=w)
    roots = np.polynomial.polynomial.polyroots(coef)
    roots = roots[np.abs(roots.imag) < 1e-12].real + xc
    roots = roots[(roots >= x.min()) & (roots <= x.max())]
    if roots.size == 0:
        return None
    # the root closest to the sign change of the raw data
    k = np.nonzero(sgn[:-1] * sgn[1:] <= 0)[0][0]
    return float(roots[np.argmin(np.abs(roots - 0.5 * (x[k] + x[k + 1])))])


def _combine(sizes, crossings) -> float | None:
    """Infinite-size crossing from consecutive pair crossings, assuming a 1/N shift."""
    if any(c is None for c in crossings[-2:]):
        return None
    if len(crossings) == 1:
        return crossings[0]
    n1, n2 = sizes[-3], sizes[-2]
    x12, x23 = crossings[-2], crossings[-1]
    return (n2 * x23 - n1 * x12) / (n2 - n1)


def _estimate(grid, sizes, u4, err, degree):
    crossings = [
        _fit_crossing(grid, u4[a + 1] - u4[a], np.hypot(err[a], err[a + 1]), degree) for a in range(len(sizes) - 1)
    ]
    return crossings, _combine(sizes, crossings)


def _scan(axis, grid, sizes, make_config, mc: McParams, n_boot: int, degree: int) -> BinderScan:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ParameterError("need at least two grid points")
    order = np.argsort(sizes)
    sizes = tuple(int(sizes[k]) for k in order)
    if len(sizes) < 2:
        raise ParameterError("need at least two system sizes")
    u4 = np.empty((len(sizes), grid.size))
    err = np.empty_like(u4)
    for a, N in enumerate(sizes):
        for b, x in enumerate(grid):
            # distinct, reproducible seeds per grid point
            seed = int(np.random.SeedSequence([mc.seed, N, b]).generate_state(1)[0])
            params = McParams(mc.sweeps, mc.burn_in, seed, mc.sampler, mc.n_batches, mc.line_updates, mc.metropolis)
            stats = run_chain(make_config(N, x), params)
            u4[a, b] = stats.binder.mean
            err[a, b] = stats.binder.stderr
            logger.info("%s=%.4f N=%d U4=%.4f +- %.4f", axis, x, N, u4[a, b], err[a, b])
    crossings, est = _estimate(grid, sizes, u4, err, degree)
    pairs = {(sizes[a], sizes[a + 1]): crossings[a] for a in range(len(sizes) - 1)}
    if est is None:
        return BinderScan(axis, grid, sizes, u4, err, None, None, pairs, "no crossing of consecutive sizes in the grid")
    rng = np.random.default_rng(mc.seed)
    boots = []
    for _ in range(n_boot):
        fake = u4 + err * rng.standard_normal(u4.shape)
        x = _estimate(grid, sizes, fake, err, degree)[1]
        if x is not None:
            boots.append(x)
    cerr = float(np.std(boots, ddof=1)) if len(boots) > 1 else float("nan")
    msg = "" if len(boots) > 0.9 * n_boot else f"crossing found in only {len(boots)} of {n_boot} bootstrap replicas"
    return BinderScan(axis, grid, sizes, u4, err, est, cerr, pairs, msg)


def binder_scan(
    beta: float,
    lambda_grid: Sequence[float],
    n_list: Sequence[int],
    mc: McParams,
    *,
    n_slices: int = 128,
    n_boot: int = 500,
    degree: int = 2,
) -> BinderScan:
    """U4(lam) for several N at fixed beta, and the extrapolated crossing."""
    base = ModelParams(beta=beta)
    make = lambda N, x: ChainConfig(base.replace(lam=x), N, n_slices)
    return _scan("lambda", lambda_grid, list(n_list), make, mc, n_boot, degree)


def binder_scan_beta(
    lam: float,
    beta_grid: Sequence[float],
    n_list: Sequence[int],
    mc: McParams,
    *,
    n_slices: int = 128,
    n_boot: int = 500,
    degree: int = 2,
) -> BinderScan:
    """U4(beta) for several N at fixed lam (lam = 0 gives the classical model)."""
    make = lambda N, x: ChainConfig(ModelParams(beta=x, lam=lam), N, n_slices)
    return _scan("beta", beta_grid, list(n_list), make, mc, n_boot, degree)
