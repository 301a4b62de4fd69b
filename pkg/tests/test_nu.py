import math
import warnings

import numpy as np
import pytest

from gsekit import (
    DataError,
    DistanceSet,
    NonConvergenceWarning,
    NuSearchConfig,
    find_nu_star,
    kernel_variance,
    lipschitz_rate,
    variance_gradient,
)


def _random_distance_set(rng, shape_kind=None):
    size = int(rng.integers(3, 40))
    kind = shape_kind if shape_kind is not None else int(rng.integers(0, 3))
    if kind == 0:
        d = rng.uniform(0.05, 5.0, size)
    elif kind == 1:
        d = rng.lognormal(0.0, 1.0, size)
    else:
        d = np.abs(rng.standard_normal(size)) ** 2 * rng.uniform(0.2, 4.0)
    return DistanceSet(d)


def _grid_search(ds, lo=1e-3, hi=20.0, points=4000):
    grid = np.linspace(lo, hi, points)
    variances = np.array([kernel_variance(ds, nu) for nu in grid])
    best = int(np.argmax(variances))
    return grid[best], variances[best], grid[1] - grid[0]


def test_variance_single_distance_is_zero():
    ds = DistanceSet(np.array([1.7]))
    for nu in (0.1, 1.0, 10.0):
        assert kernel_variance(ds, nu) == 0.0


def test_variance_equal_distances_is_zero():
    ds = DistanceSet(np.full(6, 2.5))
    assert kernel_variance(ds, 1.3) == pytest.approx(0.0, abs=1e-15)


def test_variance_two_point_hand_case():
    ds = DistanceSet(np.array([0.5, 4.0]))
    expected = float(np.var([math.exp(-0.5), math.exp(-4.0)]))
    assert kernel_variance(ds, 1.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(((math.exp(-0.5) - math.exp(-4.0)) / 2) ** 2)


def test_variance_bounded():
    rng = np.random.default_rng(40)
    for _ in range(200):
        ds = _random_distance_set(rng)
        nu = float(rng.uniform(0.01, 20.0))
        v = kernel_variance(ds, nu)
        assert 0.0 <= v <= 0.25


def test_variance_vanishing_tails():
    rng = np.random.default_rng(41)
    for _ in range(20):
        ds = _random_distance_set(rng)
        positive = ds.values[ds.values > 0]
        assert kernel_variance(ds, 1e-9 / ds.d_max) < 1e-6
        assert kernel_variance(ds, 1e9 / positive.min()) < 1e-6


def test_gradient_zero_for_equal_distances():
    ds = DistanceSet(np.full(5, 1.2))
    assert variance_gradient(ds, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    h = 1e-6
    for _ in range(60):
        ds = _random_distance_set(rng)
        for scale in (0.01, 0.1, 1.0, 10.0):
            nu = scale / float(np.mean(ds.values))
            fd = (kernel_variance(ds, nu + h) - kernel_variance(ds, nu - h)) / (2 * h)
            grad = variance_gradient(ds, nu)
            assert grad == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_gradient_vanishes_at_large_nu():
    ds = DistanceSet(np.array([0.2, 1.0, 3.0]))
    nu = 1e6 / 0.2
    assert abs(variance_gradient(ds, nu)) < 1e-12


def test_lipschitz_rate_values():
    assert lipschitz_rate(DistanceSet(np.array([0.4, 1.0]))) == pytest.approx(1.0)
    big = DistanceSet(np.linspace(0.001, 1.0, 20000))
    assert lipschitz_rate(big) == pytest.approx(0.5, rel=1e-3)
    ten = DistanceSet(np.linspace(0.1, 4.0, 10))
    assert lipschitz_rate(ten) == pytest.approx(10.0 / 72.0)


def test_lipschitz_rate_errors():
    with pytest.raises(DataError):
        lipschitz_rate(DistanceSet(np.array([1.0])))
    with pytest.raises(DataError):
        lipschitz_rate(DistanceSet(np.zeros(4)))


def test_find_nu_star_rejects_degenerate_input():
    with pytest.raises(DataError):
        find_nu_star(DistanceSet(np.array([1.0, 1.0, 1.0])))
    with pytest.raises(DataError, match="D < 2"):
        find_nu_star(DistanceSet(np.array([1.0])))


def test_find_nu_star_two_point_matches_grid():
    ds = DistanceSet(np.array([0.5, 4.0]))
    result = find_nu_star(ds)
    nu_grid, var_grid, spacing = _grid_search(ds)
    assert result.converged
    assert abs(result.nu_star - nu_grid) <= spacing
    assert result.variance_at_star >= var_grid - 1e-9


def test_find_nu_star_matches_grid_on_random_sets():
    rng = np.random.default_rng(43)
    for _ in range(15):
        ds = _random_distance_set(rng)
        result = find_nu_star(ds, NuSearchConfig(max_iters=100_000, tolerance=1e-15))
        nu_grid, var_grid, spacing = _grid_search(ds)
        assert result.variance_at_star >= var_grid - 1e-6
        if 1e-3 + spacing < nu_grid < 20.0 - spacing:
            assert abs(result.nu_star - nu_grid) <= spacing


def test_find_nu_star_scale_covariance():
    ds = DistanceSet(np.array([0.3, 0.9, 2.7, 5.0]))
    base = find_nu_star(ds, NuSearchConfig(tolerance=1e-15, max_iters=20000))
    for s in (0.25, 4.0):
        scaled = find_nu_star(
            DistanceSet(ds.values * s), NuSearchConfig(tolerance=1e-15, max_iters=20000)
        )
        assert scaled.nu_star * s == pytest.approx(base.nu_star, rel=1e-6)


@pytest.mark.filterwarnings("ignore::gsekit.NonConvergenceWarning")
def test_monotone_ascent_at_lipschitz_rate():
    rng = np.random.default_rng(44)
    for _ in range(300):
        ds = _random_distance_set(rng)
        if np.unique(ds.values).size < 2:
            continue
        result = find_nu_star(ds, NuSearchConfig(max_iters=500))
        variances = [v for _, v in result.trace]
        diffs = np.diff(variances)
        assert diffs.min() >= -1e-12


@pytest.mark.filterwarnings("ignore::gsekit.NonConvergenceWarning")
def test_variance_never_below_start():
    rng = np.random.default_rng(45)
    for _ in range(50):
        ds = _random_distance_set(rng)
        if np.unique(ds.values).size < 2:
            continue
        result = find_nu_star(ds)
        assert result.variance_at_star >= result.trace[0][1]


def test_adam_reaches_near_optimum():
    ds = DistanceSet(np.array([0.2, 0.9, 1.4, 3.3, 6.0]))
    ga = find_nu_star(ds, NuSearchConfig(tolerance=1e-15, max_iters=20000))
    adam = find_nu_star(
        ds, NuSearchConfig(optimizer="adam", tolerance=1e-15, max_iters=20000)
    )
    assert adam.variance_at_star == pytest.approx(ga.variance_at_star, abs=1e-6)


def test_non_convergence_warns_and_keeps_trace():
    ds = DistanceSet(np.array([0.5, 4.0]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = find_nu_star(ds, NuSearchConfig(max_iters=2, nu_init=1e-6))
    assert not result.converged
    assert any(issubclass(w.category, NonConvergenceWarning) for w in caught)
    assert len(result.trace) == 3  # init plus two steps


def test_result_to_json():
    ds = DistanceSet(np.array([0.5, 4.0]))
    payload = find_nu_star(ds).to_json()
    assert set(payload) == {"nu_star", "variance", "iterations", "converged", "trace"}
    assert payload["trace"][0][0] > 0


def test_config_validation():
    with pytest.raises(DataError):
        NuSearchConfig(optimizer="sgd")
    with pytest.raises(DataError):
        NuSearchConfig(learning_rate=-1.0)
    with pytest.raises(DataError):
        NuSearchConfig(nu_init=0.0)
