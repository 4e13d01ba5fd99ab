import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qcw.circle import (
    Arc,
    ModelParams,
    PiecewiseField,
    PointSet,
    SpinPath,
    compatible,
    components,
    mean_path,
    sample_poisson,
    time_integral,
)
from qcw.errors import ParameterError


def sorted_times(beta, max_size=12):
    return st.lists(st.floats(0.0, beta, exclude_max=True), max_size=max_size, unique=True).map(sorted)


# model parameters


def test_model_params_defaults_to_curie_weiss():
    p = ModelParams(beta=2.0, lam=0.5)
    assert p.p_coeffs == (0.0, 0.0, 0.5)
    assert p.is_quadratic
    assert p.P(0.4) == pytest.approx(0.08)


@pytest.mark.parametrize(
    "kwargs",
    [dict(beta=0.0), dict(beta=-1.0), dict(beta=1.0, lam=-0.1), dict(beta=1.0, p_coeffs=(0, 1)),
     dict(beta=1.0, p_coeffs=(0, 0, -1))],
)
def test_model_params_rejects_invalid(kwargs):
    with pytest.raises(ParameterError):
        ModelParams(**kwargs)


def test_model_params_strips_trailing_zeros():
    p = ModelParams(beta=1.0, p_coeffs=(0, 0, 0, 0.25, 0))
    assert p.degree == 3
    assert not p.is_quadratic


# sample_poisson


def test_zero_intensity_gives_empty_set():
    assert len(sample_poisson(0.0, 3.0, np.random.default_rng(0))) == 0


def test_poisson_mean_count():
    rng = np.random.default_rng(1)
    counts = np.array([len(sample_poisson(2.0, 1.0, rng)) for _ in range(100_000)])
    assert abs(counts.mean() - 2.0) < 3 * np.sqrt(2.0 / counts.size)


def test_poisson_count_pmf_chi_square():
    rng = np.random.default_rng(2)
    counts = np.array([len(sample_poisson(1.0, 2.0, rng)) for _ in range(20_000)])
    kmax = 7
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    pmf = stats.poisson.pmf(np.arange(kmax), 2.0)
    expected = counts.size * np.append(pmf, 1 - pmf.sum())
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_poisson_rejects_bad_input():
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        sample_poisson(-1.0, 1.0, rng)
    with pytest.raises(ParameterError):
        sample_poisson(1.0, 0.0, rng)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_poisson_reproducible_bit_for_bit(seed):
    a = sample_poisson(3.0, 2.0, np.random.default_rng(seed))
    b = sample_poisson(3.0, 2.0, np.random.default_rng(seed))
    assert a.times.tobytes() == b.times.tobytes()


def test_point_set_validation():
    with pytest.raises(ParameterError):
        PointSet([0.5, 0.2], 1.0)
    with pytest.raises(ParameterError):
        PointSet([0.2, 1.0], 1.0)
    assert PointSet([0.2, 0.7], 1.0).count_in(0.5, 0.3) == 2


# components


def test_components_of_empty_set_is_whole_circle():
    arcs = components(PointSet([], 1.0))
    assert arcs == [Arc(0.0, 1.0)]


def test_components_single_point():
    arcs = components(PointSet([0.3], 1.0))
    assert len(arcs) == 1
    assert arcs[0].start == 0.3
    assert arcs[0].length == pytest.approx(1.0)


def test_components_two_points():
    arcs = components(PointSet([0.2, 0.7], 1.0))
    assert [a.length for a in arcs] == pytest.approx([0.5, 0.5])


@given(sorted_times(2.5))
def test_component_lengths_sum_to_beta(times):
    xi = PointSet(times, 2.5)
    arcs = components(xi)
    assert len(arcs) == max(len(times), 1)
    assert abs(sum(a.length for a in arcs) - 2.5) <= 1e-12


# compatibility


def test_constant_path_is_compatible_with_everything():
    assert compatible(SpinPath.constant(1, 1.0), PointSet([0.1, 0.4], 1.0))
    assert compatible(SpinPath.constant(-1, 1.0), PointSet([], 1.0))


def test_compatibility_requires_jump_subset():
    assert not compatible(SpinPath(1, [0.5, 0.9], 1.0), PointSet([0.3], 1.0))
    assert compatible(SpinPath(1, [0.3, 0.7], 1.0), PointSet([0.3, 0.5, 0.7], 1.0))


def test_compatibility_rejects_mismatched_beta():
    with pytest.raises(ParameterError):
        compatible(SpinPath.constant(1, 1.0), PointSet([], 2.0))


# spin paths


def test_spin_path_needs_even_jumps():
    with pytest.raises(ParameterError):
        SpinPath(1, [0.5], 1.0)


def test_time_integral_examples():
    assert time_integral(SpinPath.constant(1, 2.0)) == 2.0
    # up for a total of 0.75, down for 0.25
    path = SpinPath(1, [0.25, 0.5], 1.0)
    assert time_integral(path) == pytest.approx(0.5)


@given(st.sampled_from([1, -1]), sorted_times(1.0, 10).filter(lambda t: len(t) % 2 == 0 and (not t or t[0] > 0)))
def test_time_integral_flip_antisymmetry(sign, jumps):
    path = SpinPath(sign, jumps, 1.0)
    assert time_integral(path) + time_integral(path.flip()) == pytest.approx(0.0, abs=1e-14)


dyadic_jumps = st.lists(st.integers(1, 1023), max_size=10, unique=True).map(sorted).filter(
    lambda k: len(k) % 2 == 0).map(lambda k: [x / 1024 for x in k])


@given(dyadic_jumps, st.integers(0, 1023))
def test_spin_path_periodic_and_right_continuous(jumps, k):
    # dyadic times keep t + beta exact
    path = SpinPath(1, jumps, 1.0)
    t = k / 1024
    assert path(t) == path(t + 1.0)
    for j in jumps:
        assert path(j) == path(j + 1 / 4096)
        assert path(j) != path(j - 1 / 4096)


# mean path


def test_mean_path_single_path_is_itself():
    path = SpinPath(1, [0.2, 0.6], 1.0)
    m = mean_path([path])
    grid = np.linspace(0, 1, 101, endpoint=False)
    assert np.array_equal(m(grid), path(grid))


def test_mean_path_opposite_constants_vanish():
    m = mean_path([SpinPath.constant(1, 1.0), SpinPath.constant(-1, 1.0)])
    assert np.all(m.values == 0)


def test_mean_path_all_up():
    m = mean_path([SpinPath.constant(1, 1.0)] * 3)
    assert np.all(m.values == 1)


def test_mean_path_rejects_empty():
    with pytest.raises(ParameterError):
        mean_path([])


@given(st.lists(sorted_times(1.0, 8).filter(lambda t: len(t) % 2 == 0 and (not t or t[0] > 0)), min_size=1,
                max_size=5))
def test_mean_path_bounded(jump_sets):
    m = mean_path([SpinPath(1, j, 1.0) for j in jump_sets])
    assert np.all(np.abs(m.values) <= 1)


# piecewise fields


def test_piecewise_field_basics():
    h = PiecewiseField.from_durations([0.25, 0.75], [2.0, -1.0])
    assert h.beta == 1.0
    assert h.integral() == pytest.approx(-0.25)
    assert h.norm_sq() == pytest.approx(1.75)
    assert h(0.1) == 2.0 and h(1.1) == 2.0 and h(0.5) == -1.0
    assert h.shifted(0.25)(0.0) == -1.0
    r = h.refine([0.1, 0.9])
    assert r.breakpoints.size == 4
    assert np.array_equal(r(np.linspace(0, 1, 50, endpoint=False)), h(np.linspace(0, 1, 50, endpoint=False)))
