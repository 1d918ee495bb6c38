import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfg_broker import ModelParams, TraderType, TypeDistribution, make_grid, validate_params


def test_default_parameters_pass():
    report = validate_params(ModelParams())
    assert report.ok, str(report)


def test_default_values():
    p = ModelParams()
    assert (p.k_alpha, p.sigma_alpha, p.sigma_S) == (5.0, 1.0, 1.0)
    assert (p.b, p.eta_I, p.eta_B) == (1e-3, 1e-3, 1.2e-3)
    assert (p.a_B, p.phi_B, p.a_bar, p.phi_bar) == (1.0, 1e-2, 1.0, 1e-2)
    assert (p.T, p.S0) == (1.0, 100.0)


def test_zero_impact_is_admissible():
    assert validate_params(ModelParams(b=0.0)).ok


def test_impact_above_trader_cost_is_reported():
    report = validate_params(ModelParams(b=3e-3, eta_I=1e-3))
    assert not report.ok
    names = [c.name for c in report.violations]
    assert "b <= 2 eta_I" in names
    assert "b <= 2 eta_I" in str(report)


@pytest.mark.parametrize("field,value", [
    ("eta_I", 0.0), ("eta_B", -1.0), ("a_B", 0.0), ("phi_bar", -1e-3), ("T", 0.0),
    ("k_alpha", math.inf), ("sigma_S", -0.1), ("b", math.nan), ("S0", math.inf),
])
def test_invalid_fields_are_reported(field, value):
    report = validate_params(ModelParams().replace(**{field: value}))
    assert not report.ok


def test_validation_is_pure():
    p = ModelParams(b=5e-2)
    assert validate_params(p) == validate_params(p)


@given(b=st.floats(0, 1e-2), eta_I=st.floats(1e-4, 1e-2), eta_B=st.floats(1e-4, 1e-2),
       phi=st.floats(1e-4, 1e-1))
def test_validation_matches_inequalities(b, eta_I, eta_B, phi):
    p = ModelParams(b=b, eta_I=eta_I, eta_B=eta_B, phi_B=phi, phi_bar=phi)
    expected = b <= min(2 * eta_B, 2 * eta_I, 4 * phi)
    assert validate_params(p).ok == expected


@pytest.mark.parametrize("T,M,expected", [
    (1.0, 2, [0.0, 0.5, 1.0]),
    (2.0, 4, [0.0, 0.5, 1.0, 1.5, 2.0]),
])
def test_small_grids(T, M, expected):
    g = make_grid(T, M)
    np.testing.assert_array_equal(g.times, expected)


def test_study_grid():
    g = make_grid(1.0, 10_000)
    assert g.h == 1e-4
    assert g.times.size == 10_001
    assert g.times[-1] == 1.0


@given(T=st.floats(1e-3, 50), M=st.integers(2, 5000))
def test_grid_invariants(T, M):
    g = make_grid(T, M)
    t = g.times
    assert t[0] == 0.0 and t[-1] == T
    assert np.all(np.diff(t) > 0)
    assert g.index(T) == M


@pytest.mark.parametrize("T,M", [(1.0, 1), (0.0, 10), (-1.0, 10), (1.0, 2.5)])
def test_bad_grids(T, M):
    with pytest.raises(ValueError):
        make_grid(T, M)


def test_grid_index_outside_horizon():
    with pytest.raises(ValueError):
        make_grid(1.0, 10).index(1.5)


@pytest.mark.parametrize("kwargs", [dict(k_I=0.0), dict(a_I=-1.0), dict(phi_I=math.nan),
                                    dict(sigma_I=-0.1)])
def test_trader_type_rejects(kwargs):
    with pytest.raises(ValueError):
        TraderType(**kwargs)


def test_trader_type_accepts_zero_volatility():
    assert TraderType(sigma_I=0.0).sigma_I == 0.0


def test_representative_type_matches_population_penalties():
    p = ModelParams(a_bar=2.0, phi_bar=0.05)
    tt = p.representative_type()
    assert (tt.a_I, tt.phi_I, tt.k_I, tt.sigma_I) == (2.0, 0.05, p.k_alpha, 0.5)


def test_point_mass_sample_is_constant():
    tt = TraderType(4.0, 0.3, 1.5, 0.02)
    d = TypeDistribution.point_mass(tt)
    draws = d.sample(7, np.random.default_rng(0))
    assert draws.shape == (7, 4)
    np.testing.assert_array_equal(draws, np.tile([4.0, 0.3, 1.5, 0.02], (7, 1)))
    assert d.mean_type == tt


@settings(max_examples=25, deadline=None)
@given(mean=st.floats(0.1, 10), scale=st.floats(0.0, 1.0))
def test_lognormal_locations_match_means(mean, scale):
    d = TypeDistribution("lognormal", mean, mean, mean, mean, scale, scale, scale, scale)
    for loc in d.locations:
        assert math.exp(loc + 0.5 * scale ** 2) == pytest.approx(mean, rel=1e-12)


def test_lognormal_sample_mean():
    d = TypeDistribution("lognormal", 5.0, 0.5, 1.0, 0.01, 0.3, 0.3, 0.2, 0.2)
    draws = d.sample(200_000, np.random.default_rng(1))
    assert np.all(draws > 0)
    np.testing.assert_allclose(draws.mean(axis=0), [5.0, 0.5, 1.0, 0.01], rtol=5e-3)


def test_distribution_consistency_with_population():
    p = ModelParams()
    assert TypeDistribution.point_mass(p.representative_type()).consistent_with(p)
    assert not TypeDistribution(mean_a=2.0).consistent_with(p)


@pytest.mark.parametrize("kwargs", [dict(kind="uniform"), dict(mean_k=0.0), dict(mean_sigma=-1.0),
                                    dict(kind="lognormal", mean_sigma=0.0),
                                    dict(kind="lognormal", scale_a=-0.1)])
def test_distribution_rejects(kwargs):
    with pytest.raises(ValueError):
        TypeDistribution(**kwargs)
