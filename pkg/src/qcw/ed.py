"""Exact diagonalisation of the finite-N quantum Curie-Weiss Hamiltonian.

    H_N = -N P(m_N) - h sum_i sigma^z_i - lam sum_i sigma^x_i,   m_N = (1/N) sum_i sigma^z_i.

Two routes are provided. The dense route works in the 2^N product basis and
handles any polynomial P, up to N = 12. For quadratic P the Hamiltonian is a
function of the total-spin operators only, so it splits into (2j+1)-dimensional
tridiagonal blocks, each repeated d_{N,j} times; this reaches N in the thousands.

Besides thermal (KMS) expectations, both routes give the moments of the
path-averaged magnetisation qbar = (1/beta) int m_N(t) dt, which is what the
path-integral samplers measure. Since h couples to N beta qbar,

    <qbar^k> = Z^{(k)}(h) / Z(h) / (N beta)^k,

and the derivatives are taken with a Cauchy integral on a small circle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp

from .circle import ModelParams
from .errors import CapacityError, ParameterError, UnsupportedOperation

__all__ = [
    "DenseHamiltonian",
    "SpinBlock",
    "SpinBlockDecomposition",
    "EdResult",
    "MAX_DENSE_SPINS",
    "build_dense",
    "kms_expectation",
    "diag_distribution",
    "dense_ed",
    "multiplicity",
    "log_multiplicity",
    "block_decomposition",
    "block_free_energy",
    "path_moments",
]

logger = logging.getLogger(__name__)

MAX_DENSE_SPINS = 12
# blocks whose total Boltzmann weight is below exp(-_PRUNE) of the largest are dropped
_PRUNE = 45.0
_CONTOUR_POINTS = 32
_CONTOUR_RADIUS = 2.0


# ---------------------------------------------------------------------------
# dense route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DenseHamiltonian:
    """H_N in the sigma^z product basis; bit i of the index set means sigma_i = -1."""

    n_spins: int
    matrix: np.ndarray
    params: ModelParams

    @property
    def magnetization(self) -> np.ndarray:
        """m_N of every basis state."""
        return _basis_magnetization(self.n_spins)


def _basis_magnetization(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    down = np.zeros(idx.size, dtype=np.int64)
    for i in range(n):
        down += (idx >> i) & 1
    return (n - 2 * down) / n


def build_dense(params: ModelParams, n_spins: int) -> DenseHamiltonian:
    """Dense 2^N x 2^N Hamiltonian for any polynomial P."""
    n = int(n_spins)
    if n < 1:
        raise ParameterError("n_spins must be at least 1")
    if n > MAX_DENSE_SPINS:
        raise CapacityError(f"dense Hamiltonian limited to {MAX_DENSE_SPINS} spins, got {n}")
    dim = 2**n
    m = _basis_magnetization(n)
    H = np.zeros((dim, dim))
    H[np.diag_indices(dim)] = -n * params.P(m) - params.h * n * m
    idx = np.arange(dim)
    for i in range(n):
        H[idx, idx ^ (1 << i)] = -params.lam
    return DenseHamiltonian(n, H, params)


@dataclass(frozen=True)
class _Spectrum:
    energies: np.ndarray
    vectors: np.ndarray
    log_z: float  # log Tr exp(-beta H)
    weights: np.ndarray  # Boltzmann probabilities of the eigenstates


def _spectrum(H: DenseHamiltonian, beta: float) -> _Spectrum:
    E, V = linalg.eigh(H.matrix)
    logw = -beta * E
    log_z = float(logsumexp(logw))
    return _Spectrum(E, V, log_z, np.exp(logw - log_z))


def _sx_total_diag(vectors: np.ndarray, n: int) -> np.ndarray:
    """<a| sum_i sigma^x_i |a> for every column of ``vectors``."""
    idx = np.arange(vectors.shape[0])
    out = np.zeros(vectors.shape[1])
    for i in range(n):
        out += np.einsum("sa,sa->a", vectors, vectors[idx ^ (1 << i)])
    return out


def kms_expectation(H: DenseHamiltonian, A, beta: float) -> float:
    """Thermal expectation Tr(A e^{-beta H}) / Tr(e^{-beta H}).

    ``A`` is one of the tags ``"mz^k"`` (k a positive integer), ``"mx"``, a
    length-2^N vector read as a diagonal observable, or a full matrix.
    """
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    spec = _spectrum(H, beta)
    V, w = spec.vectors, spec.weights
    if isinstance(A, str):
        if A == "mx":
            return float(w @ _sx_total_diag(V, H.n_spins) / H.n_spins)
        if A.startswith("mz^"):
            k = int(A[3:])
            diag = H.magnetization**k
        else:
            raise ParameterError(f"unknown observable tag {A!r}")
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim == 2:
            return float(w @ np.einsum("sa,st,ta->a", V, A, V))
        diag = A
    return float(w @ ((V**2).T @ diag))


def diag_distribution(H: DenseHamiltonian, beta: float) -> dict[float, float]:
    """Law of m_N under the diagonal of the Gibbs state, as {level: probability}."""
    spec = _spectrum(H, beta)
    p_state = (spec.vectors**2) @ spec.weights
    n = H.n_spins
    down = np.rint((1 - H.magnetization) * n / 2).astype(int)
    probs = np.bincount(down, weights=p_state, minlength=n + 1)
    return {(n - 2 * k) / n: float(probs[k]) for k in range(n + 1)}


@dataclass(frozen=True)
class EdResult:
    """Thermodynamics of one finite-N instance."""

    n_spins: int
    beta: float
    free_energy_density: float  # (beta N)^-1 log Tr e^{-beta H}
    mz_moments: tuple[float, ...]  # <m_z^k>, k = 1..4
    mx_mean: float
    diag_pmf: dict[float, float]


def dense_ed(params: ModelParams, n_spins: int) -> EdResult:
    """All EdResult fields from a single dense diagonalisation."""
    H = build_dense(params, n_spins)
    beta = params.beta
    spec = _spectrum(H, beta)
    p_state = (spec.vectors**2) @ spec.weights
    m = H.magnetization
    moments = tuple(float(p_state @ m**k) for k in range(1, 5))
    mx = float(spec.weights @ _sx_total_diag(spec.vectors, n_spins) / n_spins)
    return EdResult(n_spins, beta, spec.log_z / (beta * n_spins), moments, mx, diag_distribution(H, beta))


# ---------------------------------------------------------------------------
# total-spin blocks
# ---------------------------------------------------------------------------


def multiplicity(n: int, j: float) -> int:
    """Number of spin-j irreducible copies in (C^2)^{otimes n}."""
    from math import comb

    k = n / 2 - j
    if k < 0 or abs(k - round(k)) > 1e-9:
        raise ParameterError(f"j = {j} is not allowed for n = {n}")
    k = int(round(k))
    return comb(n, k) - (comb(n, k - 1) if k >= 1 else 0)


def log_multiplicity(n: int, j: float) -> float:
    """log d_{n,j} = log C(n, k) + log(2j + 1) - log(n/2 + j + 1), k = n/2 - j."""
    k = n / 2 - j
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + np.log(2 * j + 1) - np.log(n / 2 + j + 1))


@dataclass(frozen=True)
class SpinBlock:
    """Restriction of H_N to one copy of the spin-j representation.

    Basis |j, M>, M = -j, ..., j. ``diag`` and ``offdiag`` define the
    tridiagonal matrix.
    """

    j: float
    multiplicity: int
    log_multiplicity: float
    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    @property
    def sz(self) -> np.ndarray:
        return np.arange(self.diag.size) - self.j


@dataclass(frozen=True)
class SpinBlockDecomposition:
    n_spins: int
    params: ModelParams
    blocks: tuple[SpinBlock, ...]

    def dimension(self) -> int:
        """Sum of d_{N,j} (2j + 1); equals 2^N when no block was pruned."""
        return sum(b.multiplicity * b.diag.size for b in self.blocks)


def _quadratic_coeffs(params: ModelParams) -> tuple[float, float, float]:
    if not params.is_quadratic:
        raise UnsupportedOperation("the total-spin block method needs quadratic P; use the dense route")
    a0, a1, a2 = params.p_coeffs
    return a0, a1, a2


def _block(params: ModelParams, n: int, j: float, with_multiplicity: bool = True) -> SpinBlock:
    a0, a1, a2 = _quadratic_coeffs(params)
    M = np.arange(int(round(2 * j)) + 1) - j
    # sum sigma^z = 2 S_z, sum sigma^x = 2 S_x
    diag = -n * a0 - 2 * a1 * M - 4 * a2 * M**2 / n - 2 * params.h * M
    Mo = M[:-1]
    off = -params.lam * np.sqrt(j * (j + 1) - Mo * (Mo + 1))
    mult = multiplicity(n, j) if with_multiplicity else 0
    return SpinBlock(float(j), mult, log_multiplicity(n, j), diag, off)


def _j_values(n: int) -> np.ndarray:
    return np.arange(n // 2 + 1)[::-1] * -1.0 + n / 2  # n/2, n/2 - 1, ..., 0 or 1/2


def block_decomposition(params: ModelParams, n_spins: int, *, exact_multiplicities: bool = True) -> SpinBlockDecomposition:
    """All total-spin blocks of H_N (quadratic P only)."""
    n = int(n_spins)
    if n < 1:
        raise ParameterError("n_spins must be at least 1")
    _quadratic_coeffs(params)
    blocks = tuple(_block(params, n, j, exact_multiplicities) for j in _j_values(n))
    return SpinBlockDecomposition(n, params, blocks)


def _block_spectra(params: ModelParams, n: int):
    """(block, energies, vectors) for every block that carries non-negligible weight.

    All eigenvalues are computed (cheap for tridiagonal matrices); eigenvectors
    only for states within exp(-_PRUNE) of the heaviest one, so ``vectors``
    may have fewer columns than ``energies`` has entries.
    """
    beta = params.beta
    blocks, spectra = [], []
    for j in _j_values(n):
        blk = _block(params, n, j, with_multiplicity=False)
        if blk.diag.size == 1:
            E = blk.diag.copy()
        else:
            E = linalg.eigvalsh_tridiagonal(blk.diag, blk.offdiag)
        blocks.append(blk)
        spectra.append(E)
    best = max(b.log_multiplicity - beta * E[0] for b, E in zip(blocks, spectra))
    out = []
    for blk, E in zip(blocks, spectra):
        keep = int(np.count_nonzero(blk.log_multiplicity - beta * E > best - _PRUNE))
        if keep == 0:
            if blk.log_multiplicity + np.log(E.size) - beta * E[0] > best - _PRUNE:
                keep = 1
            else:
                continue
        if blk.diag.size == 1:
            V = np.ones((1, 1))
        else:
            _, V = linalg.eigh_tridiagonal(blk.diag, blk.offdiag, select="i", select_range=(0, keep - 1))
        out.append((blk, E, V))
    logger.debug("kept %d of %d spin blocks", len(out), len(blocks))
    return out


def block_free_energy(params: ModelParams, n_spins: int) -> EdResult:
    """EdResult assembled from the total-spin blocks (quadratic P only)."""
    n = int(n_spins)
    if n < 1:
        raise ParameterError("n_spins must be at least 1")
    _quadratic_coeffs(params)
    beta = params.beta
    spectra = _block_spectra(params, n)
    logw = [b.log_multiplicity - beta * E for b, E, V in spectra]
    # pruned blocks are below exp(-_PRUNE) of the largest term and are omitted here too
    log_z = float(logsumexp(np.concatenate(logw)))
    moments = np.zeros(4)
    mx = 0.0
    pmf = np.zeros(n + 1)
    for (b, E, V), lw in zip(spectra, logw):
        w = np.exp(lw[: V.shape[1]] - log_z)
        M = b.sz
        pM = (V**2) @ w  # weight of each S_z level, summed over copies
        m = 2 * M / n
        moments += [pM @ m**k for k in range(1, 5)]
        Mo = M[:-1]
        sx_off = 0.5 * np.sqrt(b.j * (b.j + 1) - Mo * (Mo + 1))
        mx += float(w @ (2 * np.sum(V[:-1] * V[1:] * sx_off[:, None], axis=0))) * 2 / n
        down = np.rint(n / 2 - M).astype(int)
        np.add.at(pmf, down, pM)
    pmf_dict = {(n - 2 * k) / n: float(pmf[k]) for k in range(n + 1)}
    return EdResult(n, beta, log_z / (beta * n), tuple(float(x) for x in moments), mx, pmf_dict)


# ---------------------------------------------------------------------------
# path-averaged magnetisation
# ---------------------------------------------------------------------------


def _log_trace_expm(A: np.ndarray) -> complex:
    """log Tr exp(A) for a complex matrix whose spectrum has real parts <= ~0."""
    return complex(np.log(np.trace(linalg.expm(A))))


def _contour_moments(log_ratio: Callable[[complex], complex], kmax: int) -> np.ndarray:
    """Taylor coefficients of exp(log_ratio(zeta)) at 0, times k!, for k = 1..kmax."""
    K = _CONTOUR_POINTS
    r = _CONTOUR_RADIUS
    theta = 2 * np.pi * np.arange(K) / K
    zs = r * np.exp(1j * theta)
    vals = np.array([np.exp(log_ratio(z)) for z in zs])
    coeffs = np.fft.fft(vals) / K  # c_k r^k
    from math import factorial

    return np.array([(coeffs[k] / r**k).real * factorial(k) for k in range(1, kmax + 1)])


def path_moments(params: ModelParams, n_spins: int, kmax: int = 4, *, method: str = "auto") -> np.ndarray:
    """Exact <qbar^k>, k = 1..kmax, with qbar = (1/beta) int_0^beta m_N(t) dt.

    ``method`` is ``"dense"``, ``"blocks"`` or ``"auto"`` (blocks whenever P
    is quadratic).
    """
    n = int(n_spins)
    beta = params.beta
    if method == "auto":
        method = "blocks" if params.is_quadratic else "dense"
    scale = 1.0 / (n * beta)  # h -> h + zeta / (N beta)
    if method == "dense":
        H = build_dense(params, n)
        Sz = n * H.magnetization
        E0 = linalg.eigvalsh(H.matrix, subset_by_index=[0, 0])[0]
        base = -beta * (H.matrix - E0 * np.eye(H.matrix.shape[0]))
        log0 = _log_trace_expm(base).real

        def log_ratio(z):
            return _log_trace_expm(base + np.diag(beta * z * scale * Sz)) - log0

    elif method == "blocks":
        spectra = _block_spectra(params, n)
        E0 = min(E[0] for _, E, _ in spectra)
        bases = []
        for b, E, V in spectra:
            bases.append((b.log_multiplicity, -beta * (b.matrix - E0 * np.eye(b.diag.size)), 2 * b.sz))
        logw0 = [lm + logsumexp(-beta * (E - E0)) for (b, E, V), (lm, _, _) in zip(spectra, bases)]
        log0 = float(logsumexp(logw0))

        def log_ratio(z):
            terms = [lm + _log_trace_expm(A + np.diag(beta * z * scale * sz)) for lm, A, sz in bases]
            terms = np.array(terms)
            top = terms.real.max()
            return top + np.log(np.sum(np.exp(terms - top))) - log0

    else:
        raise ParameterError(f"unknown method {method!r}")
    return _contour_moments(log_ratio, kmax)
