import math

import numpy as np
import pytest
from scipy.special import j0

from amfcc import simgen
from amfcc.errors import ConfigError
from amfcc.simgen import (
    ScenarioSpec, bessel_j0_series, build_covariance, correlation_rho, covariance_jitter, generate, generate_values,
    shift_mean,
)


@pytest.mark.parametrize("scenario", ["bessel", "gaussian"])
@pytest.mark.parametrize("dc", [1.0, 2.0, 3.0])
def test_rho_at_zero_and_bound(scenario, dc):
    assert correlation_rho(scenario, 0.0, dc) == 1.0
    zs = np.linspace(-1, 1, 2001)
    assert max(abs(correlation_rho(scenario, z, dc)) for z in zs) <= 1.05


def test_gaussian_rho_value():
    for dc in (1.0, 2.0, 3.0):
        assert correlation_rho("gaussian", dc / 40, dc) == pytest.approx(math.exp(-1), rel=1e-15)


def test_bessel_series_matches_library():
    assert bessel_j0_series(5 / 3) == pytest.approx(j0(5 / 3), abs=1e-10)
    for x in np.linspace(0, 50 / 3, 41):
        assert bessel_j0_series(x) == pytest.approx(j0(x), abs=1e-13)
    # at z = 0.1, delta_c = 1 the prefactor is 2, so rho is half the series
    assert correlation_rho("bessel", 0.1, 1.0) * 2 == pytest.approx(j0(5 / 3), abs=1e-10)


def test_covariance_entries():
    cov = build_covariance(ScenarioSpec(delta_c=1.0))
    assert covariance_jitter(ScenarioSpec(delta_c=1.0)) == 0
    np.testing.assert_array_equal(np.diag(cov), 0.01)
    assert np.array_equal(cov, cov.T)
    cov2 = build_covariance(ScenarioSpec(delta_c=2.0))
    n = 100
    block13 = cov2[0:n, 2 * n:3 * n]
    assert block13[0, 0] == pytest.approx(0.01 / 9, rel=1e-14)
    np.testing.assert_allclose(np.diag(block13), 0.01 / 9, rtol=1e-14)
    assert np.linalg.eigvalsh(cov2).min() >= -1e-10


@pytest.mark.parametrize("scenario,dc", [("bessel", 2.0), ("bessel", 3.0), ("gaussian", 1.0), ("gaussian", 3.0)])
def test_all_scenarios_factorize(scenario, dc):
    spec = ScenarioSpec(scenario=scenario, delta_c=dc)
    assert covariance_jitter(spec) <= 1e-6 * 0.01
    vals = generate_values(spec.with_(seed=1), 3)
    assert vals.shape == (3, 5, 100) and np.all(np.isfinite(vals))


def test_shift_anchors():
    assert shift_mean("A", 1, 0.5) == pytest.approx(-0.07, abs=1e-12)
    assert shift_mean("A", 3, 0.5) == pytest.approx(-0.21, abs=1e-12)
    assert abs(shift_mean("A", 1, 0.25)) <= 1e-12
    assert abs(shift_mean("A", 1, 0.75)) <= 1e-12
    assert shift_mean("C", 2, 0.25) == pytest.approx(0.1, abs=1e-12)
    assert shift_mean("C", 1, 0.25) == pytest.approx(0.05, abs=1e-12)
    assert shift_mean("B", 1, 1.0) == pytest.approx(-0.09, abs=1e-12)
    assert shift_mean("B", 1, 0.3) == 0
    assert shift_mean("D", 1, 0.0) == pytest.approx(-0.06, abs=1e-12)
    assert shift_mean("D", 1, 1.0) == pytest.approx(0.06, abs=1e-12)
    assert shift_mean("none", 4, 0.3) == 0


@pytest.mark.parametrize("shift,edges", [("A", (0.25, 0.75)), ("B", (0.5,))])
def test_shift_continuity(shift, edges):
    for e in edges:
        left, right = shift_mean(shift, 2, e - 1e-9), shift_mean(shift, 2, e + 1e-9)
        assert abs(left - right) < 1e-8


def test_determinism_and_streams():
    spec = ScenarioSpec(seed=9)
    a = generate_values(spec, 10)
    b = generate_values(spec, 10)
    assert a.tobytes() == b.tobytes()
    tail = generate_values(spec, 5, start=5)
    assert tail.tobytes() == a[5:].tobytes()
    assert not np.array_equal(a, generate_values(spec.with_(seed=10), 10))
    s = generate(spec, 3, id_prefix="x")
    assert [o.obs_id for o in s] == ["x0", "x1", "x2"]
    np.testing.assert_array_equal(s[1].values[2], a[1, 2])


def test_pointwise_variance_monte_carlo():
    vals = generate_values(ScenarioSpec(noise_sd=0.0, seed=21), 10_000)
    var = vals.var(axis=0, ddof=1)
    np.testing.assert_allclose(var, 0.01, rtol=0.15)


def test_shift_c_mean():
    spec = ScenarioSpec(noise_sd=0.0, shift="C", severity=4, n_points=101, seed=22)
    vals = generate_values(spec, 4000)
    m = vals[:, :, 25].mean(axis=0)  # t = 0.25
    se = 0.1 / math.sqrt(4000)
    np.testing.assert_allclose(m, 0.2, atol=4 * se)


def test_empirical_covariance_within_three_se():
    spec = ScenarioSpec(noise_sd=0.0, seed=23)
    n = 10_000
    vals = generate_values(spec, n)
    idx = [0, 24, 49, 74, 99]
    x = vals[:, 0, idx]
    emp = np.cov(x, rowvar=False)
    true = build_covariance(spec)[np.ix_(idx, idx)]
    se = np.sqrt((np.outer(np.diag(true), np.diag(true)) + true**2) / (n - 1))
    assert np.all(np.abs(emp - true) <= 3 * se)


def test_noise_added():
    a = generate_values(ScenarioSpec(seed=5, noise_sd=0.0), 2000)
    b = generate_values(ScenarioSpec(seed=5, noise_sd=0.1), 2000)
    assert np.var(b - a) == pytest.approx(0.01, rel=0.05)


def test_spec_validation():
    for bad in (dict(scenario="cauchy"), dict(shift="E"), dict(delta_c=0), dict(n_points=1), dict(noise_sd=-1)):
        with pytest.raises(ConfigError):
            ScenarioSpec(**bad)
    assert ScenarioSpec(scenario="1").scenario == "bessel"
    assert ScenarioSpec(shift="c").shift == "C"
    with pytest.raises(ConfigError):
        correlation_rho("bessel", 1.5, 1.0)
    with pytest.raises(ConfigError):
        simgen.generate(ScenarioSpec(), 0)
