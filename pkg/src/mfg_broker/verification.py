"""Executable checks of the equilibrium.

Each check returns a :class:`CheckReport`.  The statistical checks measure
their statistic in standard errors of the same Monte Carlo run, so the
tolerances do not depend on the parameter scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from . import rng
from ._backend import USE_NUMBA
from .equilibrium import (
    MeanFieldCoefficients,
    TraderCoefficients,
    solve_mean_field,
    solve_traders,
    speed_dispersion,
)
from .model import ModelParams, TimeGrid, TraderType, make_grid
from .ode import (
    THETA,
    MatrixRiccatiProblem,
    closed_form_fbI,
    solve_mrde_direct,
    solve_mrde_linearized,
    substep_schedule,
)
from .simulator import (
    PathEnsemble,
    SimConfig,
    coarsen_bm_normals,
    coarsen_ou_normals,
    ou_noise_scale,
    paths_from_normals,
    player_inputs,
    simulate_equilibrium,
)

EQUATIONS = ("g_a", "h_a", "g_b", "h_b", "g_c", "h_c", "f_a", "f_aI", "f_b", "f_bI", "f_c")


@dataclass
class CheckReport:
    """Outcome of one check.

    ``comparison`` is ``"<="`` when the statistic must stay below the
    tolerance and ``">="`` when it must reach it.  A report built with
    ``negative_control=True`` runs a check on deliberately wrong inputs:
    its own ``passed`` flag is expected to be ``False``.
    """

    name: str
    statistic: float
    tolerance: float
    comparison: str = "<="
    diagnostics: dict = field(default_factory=dict)
    negative_control: bool = False
    parts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        s = self.statistic
        if not math.isfinite(s):
            return False
        ok = s <= self.tolerance if self.comparison == "<=" else s >= self.tolerance
        return ok and all(p.passed for p in self.parts)

    @property
    def suite_ok(self) -> bool:
        """Whether this report counts as a success inside a suite; a negative
        control succeeds when its failure was detected."""
        if self.negative_control:
            return bool(self.diagnostics.get("detected", not self.passed))
        return self.passed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": _jsonable(self.statistic),
            "tolerance": self.tolerance,
            "comparison": self.comparison,
            "passed": self.passed,
            "negative_control": self.negative_control,
            "diagnostics": _jsonable(self.diagnostics),
            "parts": [p.to_dict() for p in self.parts],
        }

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.negative_control:
            tag += " (negative control, expected FAIL)"
        return f"{tag:4s} {self.name}: {self.statistic:.6g} {self.comparison} {self.tolerance:g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def reports_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def suite_passed(reports) -> bool:
    return all(r.suite_ok for r in reports)


# ---------------------------------------------------------------------------
# ODE residuals
# ---------------------------------------------------------------------------

def ode_rates(mf: MeanFieldCoefficients, tc: TraderCoefficients, p: ModelParams) -> dict:
    """The term ``F`` of each coefficient equation written as ``0 = dy + F dt``,
    evaluated at every node."""
    ga, gb, gc, ha, hb, hc = mf.g_a, mf.g_b, mf.g_c, mf.h_a, mf.h_b, mf.h_c
    fa, faI, fb, fbI, fc = tc.f_a, tc.f_aI, tc.f_b, tc.f_bI, tc.f_c
    tt = tc.trader_type
    ka, b, eI, eB = p.k_alpha, p.b, p.eta_I, p.eta_B
    return {
        "g_a": -ka * ga + gb * ga + gc * (ha - ga) + (b * ha + 1) / (2 * eI),
        "h_a": -ka * ha + hb * ga + hc * (ha - ga) + (b * ga + 1) / (2 * eB),
        "g_b": gb * gb + gc * (hb - gb) + (b * hb - 2 * p.phi_bar) / (2 * eI),
        "h_b": hb * gb + hc * (hb - gb) + b * gb / (2 * eB),
        "g_c": gb * gc + gc * (hc - gc) + b * hc / (2 * eI),
        "h_c": hb * gc + hc * (hc - gc) + (b * gc - 2 * p.phi_B) / (2 * eB),
        "f_a": -ka * fa + fb * ga + fbI * fa + fc * (ha - ga) + (b * ha + 1) / (2 * eI),
        "f_aI": -tt.k_I * faI + fbI * faI + 1 / (2 * eI),
        "f_b": fb * gb + fbI * fb + fc * (hb - gb) + b * hb / (2 * eI),
        "f_bI": fbI * fbI - tt.phi_I / eI,
        "f_c": fb * gc + fbI * fc + fc * (hc - gc) + b * hc / (2 * eI),
    }


def _values(mf, tc, name):
    return getattr(tc, name) if name.startswith("f_") else getattr(mf, name)


def ode_residuals(mf: MeanFieldCoefficients, tc: TraderCoefficients, p: ModelParams) -> dict:
    """Centered-difference residual of every equation at interior nodes."""
    h = mf.grid.h
    rates = ode_rates(mf, tc, p)
    out = {}
    for name in EQUATIONS:
        y = _values(mf, tc, name)
        out[name] = (y[2:] - y[:-2]) / (2 * h) + rates[name][1:-1]
    return out


def check_ode_residuals(mf: MeanFieldCoefficients, tc: TraderCoefficients, p: ModelParams,
                        tolerance: float = 1e-6, layer: float = 0.05) -> CheckReport:
    """Sup over interior nodes and all eleven equations of the centered
    finite-difference residual.

    The difference quotient itself carries an ``h^2 y'''/6`` error, which is
    large inside the terminal boundary layer; the diagnostics also report
    the sup over ``t <= T - layer`` to separate that from solver error.
    """
    res = ode_residuals(mf, tc, p)
    t = mf.grid.times[1:-1]
    away = t <= mf.grid.T - layer
    per_eq, worst = {}, (None, -1.0, -1)
    for name, r in res.items():
        a = np.abs(r)
        k = int(np.argmax(a))
        per_eq[name] = float(a[k])
        if a[k] > worst[1]:
            worst = (name, float(a[k]), k + 1)
    sup_away = max(float(np.abs(r[away]).max()) for r in res.values()) if away.any() else 0.0
    return CheckReport(
        "ode_residuals", worst[1], tolerance,
        diagnostics={"per_equation": per_eq, "worst_equation": worst[0], "worst_node": worst[2],
                     "worst_t": float(mf.grid.times[worst[2]]),
                     "sup_away_from_T": sup_away, "layer": layer, "M": mf.grid.M})


def ode_residual_refinement(p: ModelParams, M: int, tt: TraderType | None = None) -> dict:
    """Sup residual at ``M`` and ``2M`` nodes and their ratio."""
    tt = tt or p.representative_type()
    sups = []
    for m in (M, 2 * M):
        mf = solve_mean_field(p, make_grid(p.T, m))
        tc = solve_traders(p, [tt], mf)[0]
        sups.append(max(float(np.abs(r).max()) for r in ode_residuals(mf, tc, p).values()))
    return {"M": M, "sup_M": sups[0], "sup_2M": sups[1], "ratio": sups[0] / sups[1]}


def mrde_residual(prob: MatrixRiccatiProblem, P: np.ndarray) -> np.ndarray:
    """Centered-difference residual of ``dP/dt + Y P - P U P - Q = 0``."""
    h = prob.grid.h
    Pi = P[1:-1]
    dP = (P[2:] - P[:-2]) / (2 * h)
    return dP + prob.Y @ Pi - Pi @ prob.U @ Pi - prob.Q


# ---------------------------------------------------------------------------
# FBSDE drift
# ---------------------------------------------------------------------------

def fbsde_residuals(paths: dict, mf: MeanFieldCoefficients, p: ModelParams,
                    tc: TraderCoefficients) -> dict:
    """Per-node residuals ``r_k`` of both backward equations on
    full-resolution paths (column dict with the driving normals; arrays of
    shape ``(n, M)``).

    The Brownian increment over a step is represented by the exact OU
    innovation ``z * sqrt((1 - exp(-2 k h)) / (2 k))``, which is the noise
    the signals were driven by.
    """
    if not all(c in paths for c in ("z_alpha", "z_I")) or paths["z_alpha"].shape[0] == 0:
        raise ValueError("ensemble carries no stored Brownian increments")
    if mf.grid != tc.grid or paths["z_alpha"].shape[1] != mf.grid.M:
        raise ValueError("coefficients and paths must share the grid")
    h = mf.grid.h
    tt = tc.trader_type
    L = slice(0, -1)
    dWa = paths["z_alpha"] * ou_noise_scale(p.k_alpha, h)
    dWI = paths["z_I"] * ou_noise_scale(tt.k_I, h)
    a, aI = paths["alpha"], paths["alpha_I"]
    nuB, nub, nuI = paths["nu_B"], paths["nu_bar"], paths["nu_I"]
    QB, QI = paths["Q_barB"], paths["Q_I"]
    broker = (2 * p.eta_B * np.diff(nuB, axis=1)
              + (p.b * nub[:, L] + a[:, L] - 2 * p.phi_B * QB[:, L]) * h
              - 2 * p.eta_B * p.sigma_alpha * mf.h_a[1:] * dWa)
    trader = (2 * p.eta_I * np.diff(nuI, axis=1)
              + (p.b * nuB[:, L] + aI[:, L] + a[:, L] - 2 * tt.phi_I * QI[:, L]) * h
              - 2 * p.eta_I * (p.sigma_alpha * tc.f_a[1:] * dWa + tt.sigma_I * tc.f_aI[1:] * dWI))
    return {"broker": broker, "trader": trader}


def _residual_summary(res: dict, h: float) -> tuple[dict, dict]:
    rms = {k: float(np.sqrt(np.mean((v / h) ** 2))) for k, v in res.items()}
    worst = {}
    for k, v in res.items():
        i, j = np.unravel_index(int(np.argmax(np.abs(v))), v.shape)
        worst[k] = {"path": int(i), "node": int(j), "value": float(v[i, j])}
    return rms, worst


def check_fbsde_drift(ensemble: PathEnsemble, mf: MeanFieldCoefficients, p: ModelParams,
                      tc: TraderCoefficients | None = None,
                      terminal_tolerance: float = 1e-10) -> CheckReport:
    """Drift residuals of both FBSDEs and the trader's terminal identity.

    The statistic is the worst per-path terminal identity
    ``|2 eta_I nu_T + 2 a_I Q_T|``; the residual level (RMS of ``r_k / h``,
    which is O(h)) is reported in the diagnostics.  Its order is checked
    by :func:`fbsde_order_study`.
    """
    if tc is None:
        tc = solve_traders(p, [ensemble.trader_type], mf)[0]
    if mf.grid != ensemble.grid:
        raise ValueError("coefficients and ensemble must share the grid")
    res = fbsde_residuals(ensemble.full, mf, p, tc)
    rms, worst = _residual_summary(res, ensemble.grid.h)
    ident = np.abs(ensemble.per_path["terminal_identity"])
    return CheckReport(
        "fbsde_drift", float(ident.max()), terminal_tolerance,
        diagnostics={"rms_residual_rate": rms, "worst": worst, "h": ensemble.grid.h,
                     "terminal_worst_path": int(np.argmax(ident)),
                     "n_paths_residual": int(res["broker"].shape[0])})


def fbsde_order_study(p: ModelParams, M: int, n_paths: int = 16, seed: int = 0,
                      tt: TraderType | None = None) -> dict:
    """RMS drift residual rate (RMS of ``r_k / h``) on ``M`` and ``2M``
    steps and their ratio.

    Both grids are driven by the same Brownian paths: the ``2M``-step
    normals are drawn and aggregated pairwise (exactly, for the OU signals)
    to drive the ``M``-step run, so the ratio compares discretisations of
    identical paths.
    """
    tt = tt or p.representative_type()
    idx = np.arange(n_paths)
    fine = [rng.normals(seed, purpose, idx, 2 * M) for purpose in (rng.ALPHA, rng.PRIVATE, rng.PRICE)]
    h_fine = p.T / (2 * M)
    coarse = [coarsen_ou_normals(fine[0], p.k_alpha, h_fine),
              coarsen_ou_normals(fine[1], tt.k_I, h_fine),
              coarsen_bm_normals(fine[2])]
    rms, ident = [], 0.0
    for m, z in ((M, coarse), (2 * M, fine)):
        grid = make_grid(p.T, m)
        mf = solve_mean_field(p, grid)
        tc = solve_traders(p, [tt], mf)[0]
        paths = paths_from_normals(p, mf, tc, *z)
        rms.append(_residual_summary(fbsde_residuals(paths, mf, p, tc), grid.h)[0])
        ident = max(ident, float(np.abs(2 * p.eta_I * paths["nu_I"][:, -1]
                                        + 2 * tt.a_I * paths["Q_I"][:, -1]).max()))
    ratios = {k: rms[0][k] / rms[1][k] for k in rms[0]}
    return {"M": M, "rms_M": rms[0], "rms_2M": rms[1], "ratio": ratios, "terminal_identity": ident}


# ---------------------------------------------------------------------------
# concavity
# ---------------------------------------------------------------------------

def _random_controls(gen: np.random.Generator, n: int, grid: TimeGrid, scale: float,
                     rough: bool = True) -> np.ndarray:
    """Random paths: a level and a sinusoid with random amplitudes, plus a
    Brownian path and white noise when ``rough``."""
    M, h = grid.M, grid.h
    t = grid.times
    amp = gen.normal(size=(n, 4)) * scale
    freq = gen.uniform(0.5, 6.0, size=(n, 1))
    if not rough:
        return amp[:, :1] + amp[:, 1:2] * np.sin(2 * math.pi * freq * t[None, :] + amp[:, 2:3])
    bm = np.concatenate([np.zeros((n, 1)), np.cumsum(gen.standard_normal((n, M)) * math.sqrt(h), axis=1)],
                        axis=1)
    noise = gen.standard_normal((n, M + 1))
    return (amp[:, :1] + amp[:, 1:2] * bm + amp[:, 2:3] * noise
            + amp[:, 3:4] * np.sin(2 * math.pi * freq * t[None, :]))


def _integrate(nu: np.ndarray, h: float, r: np.ndarray | None = None) -> np.ndarray:
    rate = nu if r is None else nu - r
    Q = np.zeros_like(nu)
    np.cumsum(rate[:, :-1] * h, axis=1, out=Q[:, 1:])
    return Q


def _objective(nu, Q, c1, e, m, r, eta, a, phi, h):
    out = np.empty(nu.shape[0])
    args = [np.ascontiguousarray(x) for x in (nu, Q)]
    rest = [np.ascontiguousarray(x) for x in (e, m, r)]
    if USE_NUMBA:
        K.objective_paths(args[0], args[1], c1, rest[0], rest[1], rest[2], eta, a, phi, h, out)
    else:
        K.objective_paths_np(args[0], args[1], c1, rest[0], rest[1], rest[2], eta, a, phi, h, out)
    return out


def concavity_form(d: np.ndarray, h: float, eta: float, a: float, phi: float,
                   c1: float = 0.0) -> np.ndarray:
    """Sum of squares ``(eta + c1 h / 2) h sum d^2 + (a - c1/2) D_M^2 +
    phi h sum D^2``, ``D`` the left-point integral of the control difference
    ``d``.

    This is the exact loss of the discrete objective along the segment
    between two controls divided by ``rho (1 - rho)``; ``c1`` is the
    coefficient of the own-impact term (``b`` for the broker, ``0`` for a
    trader).
    """
    D = _integrate(d, h)
    L = slice(0, -1)
    return ((eta + 0.5 * c1 * h) * h * (d[:, L] ** 2).sum(axis=1) + (a - 0.5 * c1) * D[:, -1] ** 2
            + phi * h * (D[:, L] ** 2).sum(axis=1))


def check_concavity(p: ModelParams, cfg: SimConfig, n_pairs: int = 1000,
                    tt: TraderType | None = None, tolerance: float = -1e-12,
                    batch: int = 50, scale: float = 1.0) -> CheckReport:
    """Pathwise concavity gap for random pairs of controls.

    For each pair ``(zeta, nu)`` and ``rho`` in (0, 1) the gap
    ``H(rho zeta + (1-rho) nu) - rho H(zeta) - (1-rho) H(nu)`` is computed
    twice: directly from the discrete objective, and as ``rho (1-rho)``
    times the sum of squares of :func:`concavity_form`.  The statistic is
    the smallest gap over pairs, players and both forms.  The two forms
    must agree, which is reported as ``identity_rel_error``.
    """
    tt = tt or p.representative_type()
    grid = cfg.grid
    M, h = grid.M, grid.h
    mins = {"trader_direct": math.inf, "trader_sos": math.inf,
            "broker_direct": math.inf, "broker_sos": math.inf}
    rel_err = 0.0
    worst_pair = {}
    for start in range(0, n_pairs, batch):
        n = min(batch, n_pairs - start)
        gen = rng.stream(cfg.seed, rng.CONCAVITY, 0, start // batch)
        rho = gen.uniform(0.0, 1.0, size=n)
        rho = np.where(rho == 0.0, 0.5, rho)
        zeta = _random_controls(gen, n, grid, scale)
        nu = _random_controls(gen, n, grid, scale)
        # exogenous environment: random but common to the three points
        alpha, e_I, nub, m = (_random_controls(gen, n, grid, scale, rough=False) for _ in range(4))
        zeros = np.zeros((n, M + 1))
        mix = rho[:, None] * zeta + (1 - rho[:, None]) * nu
        w = rho * (1 - rho)
        # trader
        vals = [_objective(x, _integrate(x, h), 0.0, e_I, zeros, zeros,
                           p.eta_I, tt.a_I, tt.phi_I, h) for x in (zeta, nu, mix)]
        direct_I = vals[2] - rho * vals[0] - (1 - rho) * vals[1]
        sos_I = w * concavity_form(zeta - nu, h, p.eta_I, tt.a_I, tt.phi_I)
        # broker: the net inventory integrates nu_B - nu_bar
        vals = [_objective(x, _integrate(x, h, nub), p.b, alpha, m, nub,
                           p.eta_B, p.a_B, p.phi_B, h) for x in (zeta, nu, mix)]
        direct_B = vals[2] - rho * vals[0] - (1 - rho) * vals[1]
        sos_B = w * concavity_form(zeta - nu, h, p.eta_B, p.a_B, p.phi_B, c1=p.b)
        for key, arr in (("trader_direct", direct_I), ("trader_sos", sos_I),
                         ("broker_direct", direct_B), ("broker_sos", sos_B)):
            k = int(np.argmin(arr))
            if arr[k] < mins[key]:
                mins[key] = float(arr[k])
                worst_pair[key] = start + k
        for d, s in ((direct_I, sos_I), (direct_B, sos_B)):
            rel_err = max(rel_err, float(np.max(np.abs(d - s) / np.maximum(np.abs(s), 1e-300))))
    stat = min(mins.values())
    return CheckReport("concavity", stat, tolerance, comparison=">=",
                       diagnostics={"min_gap": mins, "worst_pair": worst_pair,
                                    "identity_rel_error": rel_err, "n_pairs": n_pairs,
                                    "terminal_weight": {"trader": tt.a_I,
                                                        "broker": (2 * p.a_B - p.b) / 2}})


# ---------------------------------------------------------------------------
# Gateaux derivatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationDirection:
    """A direction ``w`` in the space of controls, realized per path.

    ``kind`` is one of ``interval-indicator`` (``scale`` on ``[start, end]``),
    ``signal-mimic`` (``scale`` times the common signal), ``constant`` and
    ``white-noise`` (independent standard normals at every node).
    """

    kind: str
    start: float = 0.0
    end: float = 0.0
    scale: float = 1.0

    KINDS = ("interval-indicator", "signal-mimic", "constant", "white-noise")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown direction kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale != 0):
            raise ValueError("direction scale must be finite and nonzero")
        if self.kind == "interval-indicator" and not self.start < self.end:
            raise ValueError("interval-indicator needs start < end")

    @property
    def label(self) -> str:
        if self.kind == "interval-indicator":
            return f"indicator[{self.start:g},{self.end:g}]"
        return self.kind

    def realize(self, chunk: dict, idx: np.ndarray, grid: TimeGrid, seed: int) -> np.ndarray:
        n = idx.size
        t = grid.times
        if self.kind == "interval-indicator":
            row = ((t >= self.start) & (t <= self.end)).astype(float)
            return np.broadcast_to(self.scale * row, (n, t.size))
        if self.kind == "signal-mimic":
            return self.scale * chunk["alpha"]
        if self.kind == "constant":
            return np.full((n, t.size), self.scale)
        return self.scale * rng.normals(seed, rng.DIRECTION, idx, t.size)


def default_directions(T: float) -> list[PerturbationDirection]:
    return [
        PerturbationDirection("interval-indicator", 0.0, T / 4),
        PerturbationDirection("interval-indicator", 3 * T / 4, T),
        PerturbationDirection("signal-mimic"),
        PerturbationDirection("constant"),
        PerturbationDirection("white-noise"),
    ]


EPSILONS = (1e-2, 1e-3)


def _gateaux_hook(p, tt, V, directions, grid, seed, eps):
    eps_arr = np.asarray(eps, dtype=float)

    def hook(chunk, idx, z):
        players = player_inputs(chunk, p, tt, V)
        out = np.empty((idx.size, len(directions), 2, 1 + eps_arr.size))
        for d, direction in enumerate(directions):
            w = np.ascontiguousarray(direction.realize(chunk, idx, grid, seed))
            for j, key in enumerate(("trader", "broker")):
                args = tuple(np.ascontiguousarray(x) if isinstance(x, np.ndarray) else x
                             for x in players[key].args())
                res = np.empty((idx.size, 1 + eps_arr.size))
                if USE_NUMBA:
                    K.gateaux_paths(w, *args, grid.h, eps_arr, res)
                else:
                    K.gateaux_paths_np(w, *args, grid.h, eps_arr, res)
                out[:, d, j] = res
        return out

    return hook


def scaled_gb_coefficients(p: ModelParams, mf: MeanFieldCoefficients, tc: TraderCoefficients,
                           factor: float = 1.1):
    """Copies of the coefficients with ``g_b`` scaled and the trader's
    ``f_b`` rebuilt from the aggregation identity ``f_b + f_bI = g_b``."""
    from dataclasses import replace

    gb = mf.g_b * factor
    mf_bad = replace(mf, g_b=gb)
    tc_bad = replace(tc, f_b=gb - tc.f_bI)
    return mf_bad, tc_bad


def check_gateaux(p: ModelParams, mf: MeanFieldCoefficients, tc: TraderCoefficients,
                  directions=None, cfg: SimConfig | None = None, eps=EPSILONS,
                  tolerance: float = 3.0, negative_control: bool = False,
                  control_threshold: float = 5.0) -> CheckReport:
    """First-order optimality of both players along each direction.

    For every direction and player the per-path value of the first-order
    bracket integrated against ``w`` is averaged over ``cfg.n_paths``
    paths; the statistic is the largest ``|mean| / SE``, including the
    symmetric difference quotients of the discrete objectives with step
    ``eps`` (common random numbers).  With ``negative_control=True`` the
    supplied coefficients are treated as deliberately wrong: the report is
    flagged as a negative control and ``diagnostics["detected"]`` records
    whether the statistic exceeds ``control_threshold``.
    """
    if cfg is None:
        cfg = SimConfig(n_paths=10_000, grid=mf.grid, seed=0, record_every=mf.grid.M, n_full=0)
    directions = list(directions) if directions is not None else default_directions(p.T)
    tt = tc.trader_type
    V = speed_dispersion(tc, mf)
    hook = _gateaux_hook(p, tt, V, directions, cfg.grid, cfg.seed, eps)
    ens, _ = simulate_equilibrium(p, mf, tc, cfg, hooks={"gateaux": hook})
    vals = ens.per_path["gateaux"]                    # (n, dirs, players, 1+eps)
    n = vals.shape[0]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n)
    z = np.where(se > 0, np.abs(mean) / np.where(se > 0, se, 1.0), np.where(mean == 0, 0.0, np.inf))
    table = {}
    for d, direction in enumerate(directions):
        for j, who in enumerate(("trader", "broker")):
            entry = {"estimate": float(mean[d, j, 0]), "se": float(se[d, j, 0]),
                     "z": float(z[d, j, 0])}
            for e_i, ep in enumerate(eps):
                entry[f"secant_{ep:g}"] = float(mean[d, j, 1 + e_i])
                entry[f"secant_{ep:g}_z"] = float(z[d, j, 1 + e_i])
            table[f"{who}/{direction.label}"] = entry
    stat = float(z.max())
    worst = np.unravel_index(int(np.argmax(z)), z.shape)
    diag = {"directions": table, "n_paths": n,
            "worst": {"direction": directions[worst[0]].label,
                      "player": ("trader", "broker")[worst[1]],
                      "quantity": "bracket" if worst[2] == 0 else f"secant_{eps[worst[2] - 1]:g}"}}
    name = "gateaux"
    if negative_control:
        name = "gateaux_negative_control"
        diag["threshold"] = control_threshold
        diag["detected"] = stat > control_threshold
    return CheckReport(name, stat, tolerance, diagnostics=diag, negative_control=negative_control)


def check_gateaux_negative_control(p: ModelParams, mf: MeanFieldCoefficients,
                                   tc: TraderCoefficients, directions=None,
                                   cfg: SimConfig | None = None, factor: float = 1.1,
                                   threshold: float = 5.0) -> CheckReport:
    """Gateaux check at coefficients with ``g_b`` scaled by ``factor``.

    The report counts as a suite success only when the check fails by more
    than ``threshold`` standard errors.
    """
    mf_bad, tc_bad = scaled_gb_coefficients(p, mf, tc, factor)
    rep = check_gateaux(p, mf_bad, tc_bad, directions, cfg, negative_control=True,
                        control_threshold=threshold)
    rep.diagnostics["factor"] = factor
    return rep


# ---------------------------------------------------------------------------
# cross-solver oracles
# ---------------------------------------------------------------------------

def reference_fbI(tt: TraderType, eta_I: float, grid: TimeGrid, theta: float = THETA / 4) -> np.ndarray:
    """``f_bI`` by RK4 on the Riccati equation itself, on a stiffness-graded
    sub-grid; ``theta=None`` means one RK4 step per grid interval."""
    c = tt.a_I / eta_I
    gamma2 = tt.phi_I / eta_I
    if theta is None:
        nsub = np.ones(grid.M, dtype=np.int64)
    else:
        nsub = substep_schedule(grid, [c], math.sqrt(gamma2), theta)
    return K.scalar_riccati_rk4(gamma2, -c, grid.h, grid.M, nsub)


def check_fbI_closed_form(tt: TraderType, eta_I: float, grid: TimeGrid, T: float,
                          name: str = "fbI_closed_vs_rk4", rel_tol: float = 1e-6) -> CheckReport:
    """Closed-form ``f_bI`` against the fine-grid RK4 reference, relative
    error over ``[0, T - 10 h]``."""
    closed = closed_form_fbI(grid.times, tt, eta_I, T)
    ref = reference_fbI(tt, eta_I, grid)
    keep = grid.times <= T - 10 * grid.h
    rel = np.abs(closed[keep] - ref[keep]) / np.abs(closed[keep])
    k = int(np.argmax(rel)) if rel.size else 0
    return CheckReport(name, float(rel.max()) if rel.size else 0.0, rel_tol,
                       diagnostics={"worst_node": k, "worst_t": float(grid.times[k]),
                                    "ratio_a_over_eta": tt.a_I / eta_I})


def stiff_trader_demo(p: ModelParams, grid: TimeGrid, ratio: float = 1e6) -> CheckReport:
    """A trader with ``a_I / eta_I = ratio``: the closed form must be finite
    at every node while one-step-per-interval RK4 is flagged as diverged;
    the closed form is compared against a fine-grid RK4 oracle."""
    base = p.representative_type()
    tt = TraderType(base.k_I, base.sigma_I, ratio * p.eta_I, base.phi_I)
    closed = closed_form_fbI(grid.times, tt, p.eta_I, p.T)
    bound = 10 * max(ratio, math.sqrt(tt.phi_I / p.eta_I))
    naive = reference_fbI(tt, p.eta_I, grid, theta=None)
    diverged = bool(not np.isfinite(naive).all() or np.abs(naive).max() > bound)
    oracle = check_fbI_closed_form(tt, p.eta_I, grid, p.T, "fbI_stiff_vs_fine_rk4")
    finite = bool(np.isfinite(closed).all())
    return CheckReport("fbI_stiff_trader", float(finite and diverged), 1.0, comparison=">=",
                       diagnostics={"closed_form_finite": finite, "naive_rk4_diverged": diverged,
                                    "naive_first_bad_t": _first_bad_t(naive, bound, grid)},
                       parts=[oracle])


def _first_bad_t(y, bound, grid):
    bad = np.flatnonzero(~(np.abs(y) <= bound))
    return float(grid.times[bad.max()]) if bad.size else None


def check_constant_fbI(p: ModelParams, grid: TimeGrid, tolerance: float = 1e-10) -> CheckReport:
    """With ``a_I = sqrt(phi_I eta_I)`` the loading is constant ``-sqrt(phi_I/eta_I)``."""
    base = p.representative_type()
    tt = TraderType(base.k_I, base.sigma_I, math.sqrt(base.phi_I * p.eta_I), base.phi_I)
    f = closed_form_fbI(grid.times, tt, p.eta_I, p.T)
    dev = float(np.abs(f + math.sqrt(tt.phi_I / p.eta_I)).max())
    return CheckReport("fbI_constant_case", dev, tolerance)


def check_mrde_pair(p: ModelParams, grid: TimeGrid, tolerance: float = 1e-8) -> CheckReport:
    prob = MatrixRiccatiProblem.from_params(p, grid)
    direct = solve_mrde_direct(prob).values
    lin = solve_mrde_linearized(prob).values
    diff = np.abs(direct - lin).reshape(grid.M + 1, -1).max(axis=1)
    k = int(np.argmax(diff))
    return CheckReport("mrde_direct_vs_linearized", float(diff[k]), tolerance,
                       diagnostics={"worst_node": k, "worst_t": float(grid.times[k])})


def cross_check_solvers(p: ModelParams, grid: TimeGrid,
                        tt: TraderType | None = None) -> CheckReport:
    """MRDE by two methods and ``f_bI`` closed form against RK4.

    The statistic is the worst discrepancy measured in units of its own
    tolerance (so it passes at ``<= 1``); the individual comparisons are
    in ``parts``.
    """
    tt = tt or p.representative_type()
    parts = [
        check_mrde_pair(p, grid),
        check_fbI_closed_form(tt, p.eta_I, grid, p.T, "fbI_closed_vs_rk4"),
        check_constant_fbI(p, grid),
        stiff_trader_demo(p, grid),
    ]
    ratios = [r.statistic / r.tolerance for r in parts if r.comparison == "<="]
    return CheckReport("cross_check_solvers", max(ratios), 1.0,
                       diagnostics={r.name: r.statistic for r in parts}, parts=parts)


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

@dataclass
class SuiteSettings:
    M: int = 10_000
    seed: int = 0
    gateaux_paths: int = 10_000
    concavity_pairs: int = 1000
    fbsde_paths: int = 16
    negative_control: bool = True
    negative_control_paths: int = 2500

    def to_dict(self):
        return asdict(self)


def run_suite(p: ModelParams, settings: SuiteSettings | None = None,
              tt: TraderType | None = None, mf: MeanFieldCoefficients | None = None) -> list:
    """Every check at one grid size; returns the list of reports."""
    s = settings or SuiteSettings()
    tt = tt or p.representative_type()
    grid = make_grid(p.T, s.M)
    if mf is None or mf.grid != grid:
        mf = solve_mean_field(p, grid)
    tc = solve_traders(p, [tt], mf)[0]
    reports = [check_ode_residuals(mf, tc, p), cross_check_solvers(p, grid, tt)]
    fb_cfg = SimConfig(n_paths=s.fbsde_paths, grid=grid, seed=s.seed, n_full=s.fbsde_paths,
                       record_every=grid.M)
    ens, _ = simulate_equilibrium(p, mf, tc, fb_cfg)
    reports.append(check_fbsde_drift(ens, mf, p, tc))
    reports.append(check_concavity(p, SimConfig(n_paths=1, grid=grid, seed=s.seed),
                                   s.concavity_pairs, tt))
    g_cfg = SimConfig(n_paths=s.gateaux_paths, grid=grid, seed=s.seed, record_every=grid.M,
                      n_full=0)
    reports.append(check_gateaux(p, mf, tc, cfg=g_cfg))
    if s.negative_control:
        n_cfg = SimConfig(n_paths=s.negative_control_paths, grid=grid, seed=s.seed,
                          record_every=grid.M, n_full=0)
        reports.append(check_gateaux_negative_control(p, mf, tc, cfg=n_cfg))
    return reports
