import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from qcw.circle import ModelParams
from qcw.ed import (
    block_decomposition,
    block_free_energy,
    build_dense,
    dense_ed,
    diag_distribution,
    kms_expectation,
    log_multiplicity,
    multiplicity,
    path_moments,
)
from qcw.errors import CapacityError, ParameterError, UnsupportedOperation
from qcw.mean_field import solve_m_star


def classical_log_weights(params, n):
    """Brute-force classical Curie-Weiss: log e^{-beta H} for every configuration."""
    out, mags = [], []
    for spins in itertools.product([1, -1], repeat=n):
        m = sum(spins) / n
        out.append(params.beta * (n * params.P(m) + params.h * n * m))
        mags.append(m)
    return np.array(out), np.array(mags)


def duhamel_q2(params, n, nodes=80):
    """<qbar^2> from the Duhamel two-time integral in the energy eigenbasis."""
    H = build_dense(params, n)
    beta = params.beta
    E, V = np.linalg.eigh(H.matrix)
    E = E - E[0]
    A = V.T @ np.diag(n * H.magnetization) @ V
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * beta * (x + 1)
    w = 0.5 * beta * w
    # int_0^beta int_0^beta f(|t - s|) = 2 int_0^beta (beta - u) f(u) du
    kern = np.einsum("k,kab->ab", 2 * w * (beta - u),
                     np.exp(-np.multiply.outer(beta - u, E)[:, :, None] - np.multiply.outer(u, E)[:, None, :]))
    Z = np.exp(-beta * E).sum()
    return float(np.sum(A**2 * kern) / Z / (n * beta) ** 2)


# dense Hamiltonian


def test_single_spin_matrix():
    H = build_dense(ModelParams(1.0, lam=0.7, h=0.3), 1)
    assert np.allclose(H.matrix, [[-0.5 - 0.3, -0.7], [-0.7, -0.5 + 0.3]])


@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0, 2.5])
def test_two_spin_spectrum(lam):
    H = build_dense(ModelParams(1.0, lam=lam), 2)
    root = np.sqrt(1 + 16 * lam**2)
    expected = np.sort([0.0, -1.0, (-1 + root) / 2, (-1 - root) / 2])
    assert np.allclose(np.linalg.eigvalsh(H.matrix), expected, atol=1e-13)


def test_dense_structure():
    p = ModelParams(1.0, lam=0.4, h=0.2, p_coeffs=(0.1, 0.0, 0.3, 0.0, 0.2))
    H = build_dense(p, 5)
    assert np.array_equal(H.matrix, H.matrix.T)
    assert np.allclose(np.diag(H.matrix), -5 * p.P(H.magnetization) - 0.2 * 5 * H.magnetization)
    off = H.matrix - np.diag(np.diag(H.matrix))
    # each state connects to exactly n single-flip neighbours with amplitude -lam
    assert np.all(np.count_nonzero(off, axis=1) == 5)
    assert set(np.unique(off)) == {-0.4, 0.0}


def test_dense_capacity():
    with pytest.raises(CapacityError):
        build_dense(ModelParams(1.0), 13)
    with pytest.raises(ParameterError):
        build_dense(ModelParams(1.0), 0)


def test_classical_gibbs_weights():
    p = ModelParams(1.3, lam=0.0, h=0.2, p_coeffs=(0, 0.1, 0.5, 0.3))
    H = build_dense(p, 6)
    assert np.count_nonzero(H.matrix - np.diag(np.diag(H.matrix))) == 0
    logw, mags = classical_log_weights(p, 6)
    res = dense_ed(p, 6)
    assert res.free_energy_density == pytest.approx(logsumexp(logw) / (1.3 * 6), rel=1e-13)
    prob = np.exp(logw - logsumexp(logw))
    for k in range(1, 5):
        assert res.mz_moments[k - 1] == pytest.approx(prob @ mags**k, rel=1e-12, abs=1e-14)


# KMS expectations


def test_kms_infinite_temperature():
    H = build_dense(ModelParams(1.0, lam=0.8, h=0.5), 5)
    assert abs(kms_expectation(H, "mz^1", 0.0)) <= 1e-14
    assert kms_expectation(H, "mz^2", 0.0) == pytest.approx(1 / 5, rel=1e-12)


@pytest.mark.parametrize("lam, h, beta", [(1.0, 0.5, 1.0), (0.3, -0.7, 2.5), (0.0, 0.4, 1.0)])
def test_kms_single_spin(lam, h, beta):
    H = build_dense(ModelParams(beta, lam=lam, h=h), 1)
    R = np.hypot(lam, h)
    assert kms_expectation(H, "mz^1", beta) == pytest.approx(h / R * np.tanh(beta * R), rel=1e-12)
    assert kms_expectation(H, "mx", beta) == pytest.approx(lam / R * np.tanh(beta * R), rel=1e-12, abs=1e-15)


def test_kms_zero_field_symmetry():
    H = build_dense(ModelParams(2.0, lam=0.5), 8)
    assert abs(kms_expectation(H, "mz^1", 2.0)) <= 1e-12
    assert abs(kms_expectation(H, "mz^3", 2.0)) <= 1e-12


def test_kms_observable_forms_agree():
    H = build_dense(ModelParams(1.5, lam=0.6, h=0.1), 4)
    diag = H.magnetization**2
    assert kms_expectation(H, diag, 1.5) == pytest.approx(kms_expectation(H, "mz^2", 1.5), rel=1e-13)
    assert kms_expectation(H, np.diag(diag), 1.5) == pytest.approx(kms_expectation(H, "mz^2", 1.5), rel=1e-13)
    with pytest.raises(ParameterError):
        kms_expectation(H, "my", 1.5)


def test_kms_large_beta_stable():
    H = build_dense(ModelParams(50.0, lam=0.5), 6)
    val = kms_expectation(H, "mz^2", 50.0)
    assert np.isfinite(val) and 0 < val <= 1


# diagonal distribution


def test_pmf_infinite_temperature_is_binomial():
    H = build_dense(ModelParams(1.0, lam=0.9), 6)
    pmf = diag_distribution(H, 0.0)
    for k in range(7):
        assert pmf[(6 - 2 * k) / 6] == pytest.approx(comb(6, k) / 64, rel=1e-12)


def test_pmf_classical():
    p = ModelParams(1.2, lam=0.0, h=0.3)
    pmf = diag_distribution(build_dense(p, 7), 1.2)
    w = np.array([comb(7, k) * np.exp(1.2 * 7 * (((7 - 2 * k) / 7) ** 2 / 2 + 0.3 * (7 - 2 * k) / 7))
                  for k in range(8)])
    w /= w.sum()
    for k in range(8):
        assert pmf[(7 - 2 * k) / 7] == pytest.approx(w[k], rel=1e-12)


def test_pmf_symmetric_and_normalised():
    res = dense_ed(ModelParams(2.0, lam=0.7), 9)
    assert sum(res.diag_pmf.values()) == pytest.approx(1.0, abs=1e-13)
    for m, p in res.diag_pmf.items():
        assert p == pytest.approx(res.diag_pmf[-m], rel=1e-10)


def test_pmf_mode_near_m_star():
    res = dense_ed(ModelParams(3.0, lam=0.5), 12)
    m_star = solve_m_star(0.5, 3.0).m_star
    mode = max((m for m in res.diag_pmf if m >= 0), key=res.diag_pmf.get)
    assert abs(mode - m_star) <= 2 / 12
    # bimodal: the centre is a local minimum
    assert res.diag_pmf[0.0] < res.diag_pmf[1 / 6] < res.diag_pmf[mode]


# total-spin blocks


@pytest.mark.parametrize("n", range(2, 21))
def test_block_dimension_audit(n):
    dec = block_decomposition(ModelParams(1.0, lam=0.5), n)
    assert dec.dimension() == 2**n
    for b in dec.blocks:
        assert np.log(b.multiplicity) == pytest.approx(log_multiplicity(n, b.j), rel=1e-12, abs=1e-12)


def test_multiplicity_examples():
    assert multiplicity(4, 2) == 1
    assert multiplicity(4, 1) == 3
    assert multiplicity(4, 0) == 2
    assert multiplicity(5, 0.5) == 5
    with pytest.raises(ParameterError):
        multiplicity(4, 0.5)


def test_block_requires_quadratic():
    p = ModelParams(1.0, lam=0.5, p_coeffs=(0, 0, 0.5, 0.1))
    with pytest.raises(UnsupportedOperation):
        block_free_energy(p, 8)
    with pytest.raises(UnsupportedOperation):
        block_decomposition(p, 8)


def test_block_spectrum_matches_dense():
    p = ModelParams(1.0, lam=0.8, h=0.3, p_coeffs=(0.2, 0.1, 0.7))
    dense = np.linalg.eigvalsh(build_dense(p, 5).matrix)
    dec = block_decomposition(p, 5)
    blocks = np.sort(np.concatenate([np.repeat(np.linalg.eigvalsh(b.matrix), b.multiplicity)
                                     for b in dec.blocks]))
    assert np.allclose(blocks, dense, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 11, 12])
@pytest.mark.parametrize("lam, h, beta", [(0.5, 0.0, 2.0), (1.2, 0.3, 1.0), (0.25, -0.1, 3.0)])
def test_block_agrees_with_dense(n, lam, h, beta):
    p = ModelParams(beta, lam=lam, h=h)
    d = dense_ed(p, n)
    b = block_free_energy(p, n)
    assert abs(d.free_energy_density - b.free_energy_density) <= 1e-10
    assert np.allclose(d.mz_moments, b.mz_moments, atol=1e-10)
    assert abs(d.mx_mean - b.mx_mean) <= 1e-10
    for m in d.diag_pmf:
        assert abs(d.diag_pmf[m] - b.diag_pmf[m]) <= 1e-10


@given(st.floats(0.05, 2.0), st.floats(0.0, 1.0), st.floats(0.2, 4.0), st.integers(1, 40))
@settings(max_examples=30, deadline=None)
def test_free_energy_even_in_h(lam, h, beta, n):
    up = block_free_energy(ModelParams(beta, lam=lam, h=h), n)
    down = block_free_energy(ModelParams(beta, lam=lam, h=-h), n)
    assert up.free_energy_density == pytest.approx(down.free_energy_density, rel=1e-12, abs=1e-13)


def test_free_energy_converges_to_variational_value():
    # (beta N)^-1 log Tr e^{-beta H} -> g(m*) / beta + (1/beta) log(2 cosh(beta lam))
    p = ModelParams(2.0, lam=0.5)
    sol = solve_m_star(0.5, 2.0)
    limit = (sol.g_value + np.log(2 * np.cosh(1.0))) / 2.0
    errs = [block_free_energy(p, n).free_energy_density - limit for n in (32, 64, 128, 256)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.6) & (ratios < 2.4))


def test_field_derivative_approaches_m_star():
    # one-sided difference at h = 1e-3 matches the two-peak picture
    # m* log cosh(x) / x with x = N beta h m*, which tends to m* as N grows
    beta, lam, h = 2.0, 0.5, 1e-3
    m_star = solve_m_star(lam, beta).m_star
    prev = 0.0
    for n in (256, 1024):
        f0 = block_free_energy(ModelParams(beta, lam=lam), n).free_energy_density
        f1 = block_free_energy(ModelParams(beta, lam=lam, h=h), n).free_energy_density
        fd = (f1 - f0) / h
        x = n * beta * h * m_star
        assert fd == pytest.approx(m_star * np.log(np.cosh(x)) / x, rel=0.02)
        assert prev < fd < m_star
        prev = fd
    rms = np.sqrt(block_free_energy(ModelParams(beta, lam=lam), 1024).mz_moments[1])
    assert abs(rms - m_star) < 1e-3


# path-averaged moments


@pytest.mark.parametrize("n", [1, 3, 6])
def test_path_moments_dense_vs_blocks(n):
    p = ModelParams(1.5, lam=0.7, h=0.2)
    d = path_moments(p, n, method="dense")
    b = path_moments(p, n, method="blocks")
    assert np.allclose(d, b, atol=1e-10)


def test_path_moments_single_spin():
    # N = 1: qbar is the time average of one spin, whose mean is M(h)
    from qcw.single_spin import magnetization_const, variance_const

    p = ModelParams(1.5, lam=0.7, h=0.2)
    q = path_moments(p, 1, kmax=2)
    assert q[0] == pytest.approx(magnetization_const(0.2, 0.7, 1.5), rel=1e-10)
    var = variance_const(0.2, 0.7, 1.5) / 1.5
    assert q[1] - q[0] ** 2 == pytest.approx(var, rel=1e-9)


def test_path_moments_duhamel():
    p = ModelParams(1.3, lam=0.9, h=0.0)
    q = path_moments(p, 3, kmax=2, method="dense")
    assert q[1] == pytest.approx(duhamel_q2(p, 3), rel=1e-10)


def test_path_moments_classical_limit():
    p = ModelParams(1.4, lam=0.0, h=0.1)
    q = path_moments(p, 6, method="dense")
    assert np.allclose(q, dense_ed(p, 6).mz_moments, rtol=1e-10, atol=1e-13)


def test_path_moments_general_polynomial():
    p = ModelParams(1.0, lam=0.5, p_coeffs=(0, 0, 0.5, 0.0, 0.2))
    q = path_moments(p, 4)
    assert abs(q[0]) < 1e-12 and abs(q[2]) < 1e-12
    assert 0 < q[3] <= q[1] <= 1


def test_path_moments_bad_method():
    with pytest.raises(ParameterError):
        path_moments(ModelParams(1.0, lam=0.5), 3, method="lanczos")
