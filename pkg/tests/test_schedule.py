import numpy as np
import pytest

from analogbits.errors import ConfigError
from analogbits.schedule import Schedule, forward_diffuse, gamma


def test_default_endpoint_values():
    sched = Schedule()
    assert abs(gamma(0.0, sched) - (1.0 - 9.86e-8)) < 1e-9
    assert abs(gamma(1.0, sched) - 6.2e-9) < 1e-9


def test_gamma_matches_direct_formula():
    # independent evaluation of the cosine form at scattered points
    sched = Schedule()
    for t in np.linspace(0.0, 1.0, 37):
        arg = (t + sched.ns) / (1.0 + sched.ds) * np.pi / 2.0
        assert gamma(float(t), sched) == pytest.approx(np.cos(arg) ** 2, abs=1e-15)


def test_strictly_decreasing():
    sched = Schedule()
    grid = gamma(np.linspace(0.0, 1.0, 1001), sched)
    assert np.all(np.diff(grid) < 0)


def test_stays_inside_unit_interval():
    sched = Schedule()
    grid = gamma(np.linspace(0.0, 1.0, 1001), sched)
    assert grid.min() >= 0.0 and grid.max() <= 1.0


def test_zero_offsets_reach_exact_one():
    assert gamma(0.0, Schedule(ns=0.0, ds=0.0)) == 1.0


def test_scalar_in_scalar_out():
    value = gamma(0.25, Schedule())
    assert isinstance(value, float)


def test_domain_is_validated():
    sched = Schedule()
    for bad in (-0.001, 1.001, 2.0):
        with pytest.raises(ValueError):
            gamma(bad, sched)


def test_offset_validation():
    with pytest.raises(ConfigError):
        Schedule(ns=-0.1)
    with pytest.raises(ConfigError):
        Schedule(ds=-0.1)
    with pytest.raises(ConfigError):
        Schedule(ns=0.5, ds=0.1)  # would break monotonicity


def test_forward_diffuse_is_exact_at_time_zero_without_offset():
    sched = Schedule(ns=0.0, ds=0.0)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((4, 6))
    noise = rng.standard_normal((4, 6))
    assert np.array_equal(forward_diffuse(x0, 0.0, noise, sched), x0)


def test_forward_diffuse_per_row_times():
    sched = Schedule()
    rng = np.random.default_rng(1)
    x0 = rng.standard_normal((3, 5))
    noise = rng.standard_normal((3, 5))
    t = np.array([0.1, 0.5, 0.9])
    got = forward_diffuse(x0, t, noise, sched)
    for i in range(3):
        g = gamma(float(t[i]), sched)
        expect = np.sqrt(g) * x0[i] + np.sqrt(1.0 - g) * noise[i]
        np.testing.assert_allclose(got[i], expect, rtol=0, atol=1e-15)


def test_forward_diffuse_shape_mismatch():
    sched = Schedule()
    with pytest.raises(ValueError):
        forward_diffuse(np.zeros((2, 3)), 0.5, np.zeros((2, 4)), sched)


def test_forward_diffuse_monte_carlo_moments():
    # x_t should have mean sqrt(g) x0 and per-coordinate variance 1 - g
    sched = Schedule()
    rng = np.random.default_rng(42)
    n = 100_000
    x0 = np.ones((n, 2))
    t = 0.5
    g = gamma(t, sched)
    xt = forward_diffuse(x0, t, rng.standard_normal((n, 2)), sched)
    sigma_mean = np.sqrt((1.0 - g) / n)
    assert np.all(np.abs(xt.mean(axis=0) - np.sqrt(g)) < 3.0 * sigma_mean)
    assert np.all(np.abs(xt.var(axis=0) / (1.0 - g) - 1.0) < 0.02)
