import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfg_broker import ModelParams, SimConfig, make_grid, simulate_equilibrium
from mfg_broker import _kernels as K
from mfg_broker.equilibrium import solve_mean_field, solve_traders
from mfg_broker.simulator import paths_from_normals
from mfg_broker.verification import (
    CheckReport,
    PerturbationDirection,
    SuiteSettings,
    _integrate,
    _objective,
    check_concavity,
    check_constant_fbI,
    check_fbI_closed_form,
    check_fbsde_drift,
    check_gateaux,
    check_gateaux_negative_control,
    check_ode_residuals,
    concavity_form,
    cross_check_solvers,
    default_directions,
    fbsde_order_study,
    fbsde_residuals,
    ode_rates,
    reports_json,
    run_suite,
    scaled_gb_coefficients,
    stiff_trader_demo,
    suite_passed,
)


# ---------------------------------------------------------------------------
# report semantics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("stat,tol,cmp,expected", [
    (0.5, 1.0, "<=", True), (1.5, 1.0, "<=", False), (1.0, 1.0, "<=", True),
    (0.5, 1.0, ">=", False), (2.0, 1.0, ">=", True), (math.nan, 1.0, "<=", False),
    (math.inf, 1.0, ">=", False),
])
def test_report_comparison(stat, tol, cmp, expected):
    assert CheckReport("x", stat, tol, comparison=cmp).passed is expected


def test_report_parts_must_pass():
    bad = CheckReport("part", 2.0, 1.0)
    assert not CheckReport("whole", 0.0, 1.0, parts=[bad]).passed


def test_negative_control_counts_when_detected():
    caught = CheckReport("nc", 9.0, 3.0, negative_control=True, diagnostics={"detected": True})
    missed = CheckReport("nc", 4.0, 3.0, negative_control=True, diagnostics={"detected": False})
    assert not caught.passed and caught.suite_ok
    assert not missed.suite_ok
    assert suite_passed([CheckReport("a", 0.0, 1.0), caught])
    assert not suite_passed([CheckReport("a", 0.0, 1.0), missed])
    assert "negative control" in caught.line()


def test_reports_serialise():
    r = CheckReport("x", math.nan, 1.0, diagnostics={"arr": np.arange(3.0), "n": np.int64(4),
                                                     "nested": {1: math.inf}})
    data = json.loads(reports_json([r]))
    assert data[0]["statistic"] == "nan"
    assert data[0]["diagnostics"]["arr"] == [0.0, 1.0, 2.0]
    assert data[0]["diagnostics"]["nested"] == {"1": "inf"}
    assert data[0]["passed"] is False


# ---------------------------------------------------------------------------
# ODE residuals and solver cross-checks
# ---------------------------------------------------------------------------

def test_rates_vanish_where_expected(params, mf, tc):
    """At ``T`` the closed-form loading obeys its equation with the exact
    terminal value."""
    rates = ode_rates(mf, tc, params)
    assert set(rates) == {"g_a", "h_a", "g_b", "h_b", "g_c", "h_c", "f_a", "f_aI", "f_b", "f_bI", "f_c"}
    assert rates["f_bI"][-1] == pytest.approx(1000.0 ** 2 - 10.0)


def test_ode_residuals_away_from_terminal_layer(params, mf, tc):
    """Outside the terminal layer the centered-difference residual is small;
    what remains is the truncation of the difference quotient itself."""
    rep = check_ode_residuals(mf, tc, params)
    assert rep.diagnostics["sup_away_from_T"] <= 2e-3
    res = check_ode_residuals(mf, tc, params, layer=0.5).diagnostics["sup_away_from_T"]
    assert res <= 2e-6


def test_cross_checks(params, grid):
    rep = cross_check_solvers(params, grid)
    assert rep.passed, rep.diagnostics
    assert {p.name for p in rep.parts} == {"mrde_direct_vs_linearized", "fbI_closed_vs_rk4",
                                           "fbI_constant_case", "fbI_stiff_trader"}


def test_constant_fbI(params, grid):
    assert check_constant_fbI(params, grid).statistic <= 1e-10


def test_closed_form_against_fine_rk4(params, small_grid):
    assert check_fbI_closed_form(params.representative_type(), params.eta_I, small_grid, params.T).passed


def test_stiff_trader(params, small_grid):
    rep = stiff_trader_demo(params, small_grid)
    assert rep.diagnostics["closed_form_finite"]
    assert rep.diagnostics["naive_rk4_diverged"]
    assert rep.passed


# ---------------------------------------------------------------------------
# FBSDE
# ---------------------------------------------------------------------------

def test_fbsde_drift_on_ensemble(params, small_mf, small_tc):
    cfg = SimConfig(n_paths=8, grid=small_mf.grid, seed=0, n_full=8, record_every=small_mf.grid.M)
    ens, _ = simulate_equilibrium(params, small_mf, small_tc, cfg)
    rep = check_fbsde_drift(ens, small_mf, params, small_tc)
    assert rep.passed
    assert set(rep.diagnostics["rms_residual_rate"]) == {"broker", "trader"}


def test_fbsde_needs_stored_normals(params, small_mf, small_tc):
    cfg = SimConfig(n_paths=4, grid=small_mf.grid, seed=0, n_full=0, record_every=small_mf.grid.M)
    ens, _ = simulate_equilibrium(params, small_mf, small_tc, cfg)
    with pytest.raises(ValueError):
        check_fbsde_drift(ens, small_mf, params, small_tc)


def test_deterministic_signals_give_first_order_residuals():
    """Without noise the residual per node is pure discretisation error:
    ``max |r_k| / h`` is O(h)."""
    p = ModelParams(sigma_alpha=0.0, sigma_S=0.0, alpha0=1.0)
    tt = p.representative_type(sigma_I=0.0)
    rates = []
    for M in (1000, 2000):
        g = make_grid(1.0, M)
        mf = solve_mean_field(p, g)
        tc = solve_traders(p, [tt], mf)[0]
        z = np.zeros((1, M))
        paths = paths_from_normals(p, mf, tc, z, z, z)
        res = fbsde_residuals(paths, mf, p, tc)
        rates.append({k: np.abs(v).max() / g.h for k, v in res.items()})
    for k in ("broker", "trader"):
        assert rates[1][k] < rates[0][k]
        assert 1.6 <= rates[0][k] / rates[1][k] <= 2.6


def test_fbsde_order(params):
    res = fbsde_order_study(params, 2000, n_paths=8)
    for r in res["ratio"].values():
        assert 1.7 <= r <= 2.3
    assert res["terminal_identity"] <= 1e-10


# ---------------------------------------------------------------------------
# concavity
# ---------------------------------------------------------------------------

def test_identical_controls_have_zero_gap():
    assert np.all(concavity_form(np.zeros((3, 21)), 0.05, 1e-3, 1.0, 1e-2, c1=1e-3) == 0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), rho=st.floats(0.01, 0.99), c1=st.sampled_from([0.0, 1e-3]))
def test_sum_of_squares_identity(seed, rho, c1):
    """Direct evaluation of the discrete objective at three points equals
    ``rho (1 - rho)`` times the quadratic form."""
    gen = np.random.default_rng(seed)
    n, M1, h = 4, 41, 0.025
    zeta, nu, e, m, r = (gen.standard_normal((n, M1)) for _ in range(5))
    mix = rho * zeta + (1 - rho) * nu
    eta, a, phi = 1.2e-3, 1.0, 1e-2
    vals = [_objective(x, _integrate(x, h, r), c1, e, m, r, eta, a, phi, h) for x in (zeta, nu, mix)]
    direct = vals[2] - rho * vals[0] - (1 - rho) * vals[1]
    form = rho * (1 - rho) * concavity_form(zeta - nu, h, eta, a, phi, c1)
    np.testing.assert_allclose(direct, form, rtol=1e-8, atol=1e-12)
    assert np.all(form >= 0)


def test_concavity_check(params, small_grid):
    rep = check_concavity(params, SimConfig(n_paths=1, grid=small_grid, seed=3), n_pairs=100)
    assert rep.passed
    assert rep.diagnostics["identity_rel_error"] <= 1e-8


def test_concavity_at_broker_boundary(small_grid):
    """``2 a_B = b``: the terminal square drops out, the others remain."""
    p = ModelParams(a_B=5e-4)
    rep = check_concavity(p, SimConfig(n_paths=1, grid=small_grid, seed=0), n_pairs=50)
    assert rep.diagnostics["min_gap"]["broker_sos"] >= 0.0
    assert rep.passed


# ---------------------------------------------------------------------------
# Gateaux derivatives
# ---------------------------------------------------------------------------

def test_zero_direction_gives_zero():
    gen = np.random.default_rng(0)
    n, M1 = 5, 31
    nu, Q, e, m, r = (gen.standard_normal((n, M1)) for _ in range(5))
    out = np.empty((n, 3))
    K.gateaux_paths(np.zeros((n, M1)), nu, Q, 1e-3, e, m, r, 1e-3, 1.0, 1e-2, 0.03,
                    np.array([1e-2, 1e-3]), out)
    assert np.all(out == 0.0)


def _gateaux_smooth(M):
    t = np.linspace(0.0, 1.0, M + 1)[None, :]
    h = 1.0 / M
    nu, r, e, m, w = np.sin(3 * t), 0.5 * np.cos(t), t, 0.1 * t, 1.0 + t * t
    Q = _integrate(nu, h, r)
    out = np.empty((1, 3))
    K.gateaux_paths(w, nu, Q, 1e-3, e, m, r, 1.2e-3, 1.0, 1e-2, h, np.array([1e-2, 1e-3]), out)
    return out[0]


def test_bracket_approximates_the_secant():
    """The secants agree with each other to rounding (the objective is
    quadratic in the control) and the bracket is within O(h) of them."""
    gaps = []
    for M in (200, 400, 800):
        bracket, s1, s2 = _gateaux_smooth(M)
        assert s1 == pytest.approx(s2, rel=1e-9)
        gaps.append(abs(bracket - s2))
    assert 1.7 <= gaps[0] / gaps[1] <= 2.3
    assert 1.7 <= gaps[1] / gaps[2] <= 2.3


@pytest.mark.parametrize("kwargs", [dict(kind="ramp"), dict(kind="constant", scale=0.0),
                                    dict(kind="interval-indicator", start=0.5, end=0.5)])
def test_bad_directions(kwargs):
    with pytest.raises(ValueError):
        PerturbationDirection(**kwargs)


def test_default_directions():
    dirs = default_directions(1.0)
    assert [d.label for d in dirs] == ["indicator[0,0.25]", "indicator[0.75,1]", "signal-mimic",
                                       "constant", "white-noise"]


def test_gateaux_small(params, small_mf, small_tc):
    cfg = SimConfig(n_paths=2000, grid=small_mf.grid, seed=0, record_every=small_mf.grid.M, n_full=0)
    rep = check_gateaux(params, small_mf, small_tc, cfg=cfg)
    assert rep.passed, rep.diagnostics["worst"]
    assert len(rep.diagnostics["directions"]) == 10
    neg = check_gateaux_negative_control(params, small_mf, small_tc, cfg=cfg)
    assert neg.negative_control and neg.suite_ok
    assert neg.statistic > 5.0


def test_scaled_coefficients_keep_aggregation(params, small_mf, small_tc):
    mf_bad, tc_bad = scaled_gb_coefficients(params, small_mf, small_tc, 1.1)
    np.testing.assert_allclose(mf_bad.g_b, 1.1 * small_mf.g_b)
    np.testing.assert_allclose(tc_bad.f_b + tc_bad.f_bI, mf_bad.g_b, rtol=1e-14)
    assert small_mf.g_b[0] != mf_bad.g_b[0]


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

def test_small_suite(params):
    s = SuiteSettings(M=1000, gateaux_paths=1000, concavity_pairs=50, fbsde_paths=4,
                      negative_control_paths=1000)
    reports = run_suite(params, s)
    names = [r.name for r in reports]
    assert names == ["ode_residuals", "cross_check_solvers", "fbsde_drift", "concavity", "gateaux",
                     "gateaux_negative_control"]
    by_name = {r.name: r for r in reports}
    for name in names[1:]:
        assert by_name[name].suite_ok, name
    json.loads(reports_json(reports))
