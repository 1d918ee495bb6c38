"""Monte Carlo engine for the equilibrium and for finite trader populations.

Signals move by their exact Ornstein-Uhlenbeck transition; inventories, cash
and the price use explicit Euler steps on the same grid.  Each path draws
from its own counter-based streams (see :mod:`mfg_broker.rng`), and paths are
processed in fixed-size chunks whose statistics are merged in a fixed order,
so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from . import rng
from ._backend import USE_NUMBA
from .equilibrium import (
    MeanFieldCoefficients,
    TraderCoefficients,
    solve_traders,
    speed_dispersion,
)
from .model import ModelParams, TimeGrid, TraderType, TypeDistribution

COLUMNS = ("alpha", "alpha_I", "S", "nu_bar", "nu_B", "nu_I",
           "Q_bar", "Q_barB", "Q_I", "X_I", "X_barB")
MEASURES = {"reference": 0, "broker": 1, "trader": 2}
CHUNK = 64


def ou_step(x, k: float, sigma: float, h: float, z):
    """Exact OU transition over a step ``h``."""
    if not (k > 0 and h > 0):
        raise ValueError("ou_step needs k > 0 and h > 0")
    decay = math.exp(-k * h)
    scale = sigma * math.sqrt(-math.expm1(-2 * k * h) / (2 * k))
    return x * decay + scale * z


def ou_noise_scale(k: float, h: float) -> float:
    """Standard deviation of the unit-volatility OU noise over one step."""
    return math.sqrt(-math.expm1(-2 * k * h) / (2 * k))


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    grid: TimeGrid
    seed: int = 0
    measure: str = "broker"
    record_every: int = 1
    n_full: int = 10
    N: int | None = None
    type_dist: TypeDistribution | None = None
    feedback: str = "theoretical"

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.record_every < 1 or self.grid.M % self.record_every:
            raise ValueError("record_every must divide M")
        if self.measure not in MEASURES:
            raise ValueError(f"measure must be one of {sorted(MEASURES)}")
        if self.feedback not in ("theoretical", "empirical"):
            raise ValueError("feedback must be 'theoretical' or 'empirical'")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def record_idx(self) -> np.ndarray:
        return np.arange(0, self.grid.M + 1, self.record_every)


@dataclass
class EnsembleStats:
    t: np.ndarray
    columns: tuple
    mean: np.ndarray  # (n_rec, n_cols)
    sd: np.ndarray
    n: int
    objectives: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return self.sd / math.sqrt(self.n)

    def column(self, name: str):
        j = self.columns.index(name)
        return self.mean[:, j], self.sd[:, j], self.se[:, j]


@dataclass
class PathEnsemble:
    """Thinned records for every path plus full-resolution leading paths."""

    grid: TimeGrid
    config: SimConfig
    t_rec: np.ndarray
    records: dict           # column -> (n_paths, n_rec)
    full: dict              # column -> (n_full, M+1); also z_alpha, z_I, z_S (n_full, M)
    per_path: dict          # name -> (n_paths, ...) functionals
    params: ModelParams
    trader_type: TraderType

    @property
    def n_paths(self) -> int:
        return self.config.n_paths


def _coef_matrix(mf: MeanFieldCoefficients, tc: TraderCoefficients) -> np.ndarray:
    return np.ascontiguousarray(np.vstack([mf.g_a, mf.g_b, mf.g_c, mf.h_a, mf.h_b, mf.h_c,
                                           tc.f_a, tc.f_aI, tc.f_b, tc.f_bI, tc.f_c]))


def _sim_consts(p: ModelParams, tt: TraderType, grid: TimeGrid, measure: str) -> np.ndarray:
    h = grid.h
    return np.array([
        h,
        math.exp(-p.k_alpha * h), p.sigma_alpha * ou_noise_scale(p.k_alpha, h),
        math.exp(-tt.k_I * h), tt.sigma_I * ou_noise_scale(tt.k_I, h),
        p.b, p.eta_I, p.eta_B, p.sigma_S * math.sqrt(h), p.S0, p.alpha0,
        float(MEASURES[measure]),
    ])


def run_chunk(coef, V, consts, zA, zI, zS) -> np.ndarray:
    n, M = zA.shape
    out = np.empty((K.N_SIM_COLS, n, M + 1))
    if USE_NUMBA:
        K.simulate_paths(coef, V, consts, zA, zI, zS, out)
    else:
        K.simulate_paths_np(coef, V, consts, zA, zI, zS, out)
    return out


def paths_from_normals(p: ModelParams, mf: MeanFieldCoefficients, tc: TraderCoefficients,
                       zA: np.ndarray, zI: np.ndarray, zS: np.ndarray,
                       measure: str = "broker") -> dict:
    """Full-resolution paths driven by the given standard normals
    (each of shape ``(n, M)``), as a column dict that also carries the
    normals under ``z_alpha``, ``z_I`` and ``z_S``."""
    grid = mf.grid
    coef = _coef_matrix(mf, tc)
    V = speed_dispersion(tc, mf)
    consts = _sim_consts(p, tc.trader_type, grid, measure)
    zA, zI, zS = (np.ascontiguousarray(z, dtype=float) for z in (zA, zI, zS))
    out = run_chunk(coef, V, consts, zA, zI, zS)
    paths = {c: out[j] for j, c in enumerate(COLUMNS)}
    paths.update(z_alpha=zA, z_I=zI, z_S=zS)
    return paths


def coarsen_ou_normals(z: np.ndarray, k: float, h: float) -> np.ndarray:
    """Normals driving an exact OU chain on step ``2h`` that reproduce the
    chain driven by ``z`` on step ``h`` at every other node."""
    if z.shape[-1] % 2:
        raise ValueError("need an even number of fine steps")
    z1, z2 = z[..., 0::2], z[..., 1::2]
    s1 = ou_noise_scale(k, h)
    s2 = ou_noise_scale(k, 2 * h)
    return s1 * (math.exp(-k * h) * z1 + z2) / s2


def coarsen_bm_normals(z: np.ndarray) -> np.ndarray:
    """Brownian counterpart of :func:`coarsen_ou_normals`."""
    if z.shape[-1] % 2:
        raise ValueError("need an even number of fine steps")
    return (z[..., 0::2] + z[..., 1::2]) / math.sqrt(2.0)


def draw_chunk(seed: int, idx: np.ndarray, M: int):
    zA = rng.normals(seed, rng.ALPHA, idx, M)
    zI = rng.normals(seed, rng.PRIVATE, idx, M)
    zS = rng.normals(seed, rng.PRICE, idx, M)
    return zA, zI, zS


def _merge(acc, n_b, mean_b, m2_b):
    """Chan et al. pairwise update of (n, mean, M2)."""
    if acc is None:
        return (n_b, mean_b, m2_b)
    n_a, mean_a, m2_a = acc
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    m2 = m2_a + m2_b + delta * delta * (n_a * n_b / n)
    return (n, mean, m2)


@dataclass(frozen=True)
class PlayerInputs:
    """One player's control, inventory and exogenous terms along a batch of
    paths, in the common quadratic form evaluated by the objective kernels."""

    nu: np.ndarray
    Q: np.ndarray
    c1: float
    e: np.ndarray
    m: np.ndarray
    r: np.ndarray
    eta: float
    a: float
    phi: float

    def args(self):
        return (self.nu, self.Q, self.c1, self.e, self.m, self.r, self.eta, self.a, self.phi)


def player_inputs(chunk: dict, p: ModelParams, tt: TraderType, V: np.ndarray) -> dict:
    """Trader and broker inputs for the objective kernels."""
    zeros = np.zeros_like(chunk["nu_I"])
    trader = PlayerInputs(
        chunk["nu_I"], chunk["Q_I"], 0.0,
        np.ascontiguousarray(p.b * chunk["nu_B"] + chunk["alpha_I"] + chunk["alpha"]),
        zeros, zeros, p.eta_I, tt.a_I, tt.phi_I)
    nub = chunk["nu_bar"]
    broker = PlayerInputs(
        chunk["nu_B"], chunk["Q_barB"], p.b, chunk["alpha"],
        np.ascontiguousarray(p.eta_I * (nub * nub + V[None, :])), nub,
        p.eta_B, p.a_B, p.phi_B)
    return {"trader": trader, "broker": broker}


def objective_values(inputs: PlayerInputs, h: float) -> np.ndarray:
    """Objective on every path: left-point Riemann sum of the running reward
    minus the terminal inventory penalty ``a Q_M^2``."""
    out = np.empty(inputs.nu.shape[0])
    args = tuple(np.ascontiguousarray(x) if isinstance(x, np.ndarray) else x for x in inputs.args())
    if USE_NUMBA:
        K.objective_paths(*args, h, out)
    else:
        K.objective_paths_np(*args, h, out)
    return out


def path_functionals(chunk: dict, p: ModelParams, tt: TraderType, V: np.ndarray, h: float) -> dict:
    """Per-path objective values and accounting checks from full paths."""
    players = player_inputs(chunk, p, tt, V)
    nuB, nub, nuI = chunk["nu_B"], chunk["nu_bar"], chunk["nu_I"]
    QB, QI, S, XI = chunk["Q_barB"], chunk["Q_I"], chunk["S"], chunk["X_I"]
    L = slice(0, -1)
    sq = (nuI[:, L] ** 2).sum(axis=1) * h
    wealth = XI[:, -1] + QI[:, -1] * S[:, -1] - XI[:, 0] - QI[:, 0] * S[:, 0]
    pnl = (QI[:, L] * np.diff(S, axis=1)).sum(axis=1) - p.eta_I * sq
    QB_rebuilt = np.cumsum((nuB[:, L] - nub[:, L]) * h, axis=1)
    return {
        "H_I": objective_values(players["trader"], h),
        "H_B": objective_values(players["broker"], h),
        "int_nuI_sq": sq,
        "terminal_identity": 2 * p.eta_I * nuI[:, -1] + 2 * tt.a_I * QI[:, -1],
        "cash_gap": wealth - pnl,
        "QB_gap": np.abs(QB[:, 1:] - QB_rebuilt).max(axis=1),
    }


def simulate_equilibrium(p: ModelParams, mf: MeanFieldCoefficients, tc: TraderCoefficients,
                         cfg: SimConfig, hooks: dict[str, Callable] | None = None,
                         coef_override: np.ndarray | None = None):
    """Simulate ``cfg.n_paths`` independent markets with one representative
    trader of type ``tc.trader_type`` each.

    ``hooks`` maps a name to ``fn(chunk, idx, z)`` returning per-path values;
    ``chunk`` holds full-resolution columns for the paths ``idx`` and ``z`` the
    driving normals.  Results land in ``ensemble.per_path[name]``.
    """
    grid = cfg.grid
    if mf.grid != grid or tc.grid != grid:
        raise ValueError("coefficients and simulation must share the grid")
    tt = tc.trader_type
    coef = _coef_matrix(mf, tc) if coef_override is None else np.ascontiguousarray(coef_override)
    V = speed_dispersion(tc, mf)
    consts = _sim_consts(p, tt, grid, cfg.measure)
    rec = cfg.record_idx
    n_rec = rec.size
    n_full = min(cfg.n_full, cfg.n_paths)
    records = {c: np.empty((cfg.n_paths, n_rec)) for c in COLUMNS}
    full = {c: np.empty((n_full, grid.M + 1)) for c in COLUMNS}
    for c in ("z_alpha", "z_I", "z_S"):
        full[c] = np.empty((n_full, grid.M))
    per_path: dict = {}
    acc = None
    hooks = hooks or {}
    for start in range(0, cfg.n_paths, CHUNK):
        idx = np.arange(start, min(start + CHUNK, cfg.n_paths))
        zA, zI, zS = draw_chunk(cfg.seed, idx, grid.M)
        out = run_chunk(coef, V, consts, zA, zI, zS)
        chunk = {c: out[j] for j, c in enumerate(COLUMNS)}
        for c in COLUMNS:
            records[c][idx] = chunk[c][:, rec]
        lead = idx[idx < n_full]
        if lead.size:
            for c in COLUMNS:
                full[c][lead] = chunk[c][: lead.size]
            full["z_alpha"][lead] = zA[: lead.size]
            full["z_I"][lead] = zI[: lead.size]
            full["z_S"][lead] = zS[: lead.size]
        values = path_functionals(chunk, p, tt, V, grid.h)
        z = {"alpha": zA, "I": zI, "S": zS}
        for name, fn in hooks.items():
            values[name] = fn(chunk, idx, z)
        for name, v in values.items():
            if name not in per_path:
                per_path[name] = np.empty((cfg.n_paths,) + np.shape(v)[1:])
            per_path[name][idx] = v
        stacked = out[:, :, rec]                       # (cols, n, n_rec)
        m = stacked.mean(axis=1)
        m2 = ((stacked - m[:, None, :]) ** 2).sum(axis=1)
        acc = _merge(acc, idx.size, m, m2)
    n, mean, m2 = acc
    sd = np.sqrt(m2 / (n - 1)) if n > 1 else np.zeros_like(m2)
    stats = EnsembleStats(grid.times[rec], COLUMNS, mean.T.copy(), sd.T.copy(), n)
    ens = PathEnsemble(grid, cfg, grid.times[rec], records, full, per_path, p, tt)
    stats.objectives = estimate_objectives(ens, p, tt)
    return ens, stats


def estimate_objectives(ensemble: PathEnsemble, p: ModelParams, tt: TraderType) -> dict:
    """Monte Carlo means and standard errors of both objective functionals.

    The broker's mean-field moments are those of the conditional law of
    individual speeds given the common signal path: its mean is the path's
    own mean-field speed and its second moment adds the conditional
    dispersion computed from the trader loadings.
    """
    if tt != ensemble.trader_type or p != ensemble.params:
        raise ValueError("ensemble was simulated with a different trader type or parameters")
    out = {}
    for name in ("H_I", "H_B"):
        v = ensemble.per_path[name]
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        out[name] = (float(v.mean()), se)
    return out


def stats_csv(stats: EnsembleStats) -> str:
    lines = ["t,column,mean,sd,se"]
    se = stats.se
    for r, t in enumerate(stats.t):
        for j, c in enumerate(stats.columns):
            lines.append(f"{float(t)!r},{c},{float(stats.mean[r, j])!r},"
                         f"{float(stats.sd[r, j])!r},{float(se[r, j])!r}")
    return "\n".join(lines) + "\n"


def column_csv(ens: PathEnsemble, column: str) -> str:
    vals = ens.records[column]
    t = [repr(float(x)) for x in ens.t_rec]
    lines = ["path_id,t,value"]
    for i in range(vals.shape[0]):
        row = vals[i]
        lines.extend(f"{i},{t[k]},{float(row[k])!r}" for k in range(row.size))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# finite population
# ---------------------------------------------------------------------------

@dataclass
class ChaosReport:
    N: int
    rep: int
    t: np.ndarray
    mean_speed: np.ndarray
    mf_speed: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.mean_speed - self.mf_speed

    @property
    def sup(self) -> float:
        return float(np.abs(self.gap).max())

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.gap ** 2)))


BLOCK = 256


def mean_field_path(p: ModelParams, mf: MeanFieldCoefficients, zA: np.ndarray):
    """Common signal and mean-field states along one draw of ``W^alpha``."""
    grid = mf.grid
    M, h = grid.M, grid.h
    dA = math.exp(-p.k_alpha * h)
    sA = p.sigma_alpha * ou_noise_scale(p.k_alpha, h)
    alpha = np.empty(M + 1)
    Qb = np.zeros(M + 1)
    QB = np.zeros(M + 1)
    nub = np.empty(M + 1)
    alpha[0] = p.alpha0
    for k in range(M + 1):
        nub[k] = mf.g_a[k] * alpha[k] + mf.g_b[k] * Qb[k] + mf.g_c[k] * QB[k]
        if k == M:
            break
        nuB = mf.h_a[k] * alpha[k] + mf.h_b[k] * Qb[k] + mf.h_c[k] * QB[k]
        Qb[k + 1] = Qb[k] + nub[k] * h
        QB[k + 1] = QB[k] + (nuB - nub[k]) * h
        alpha[k + 1] = alpha[k] * dA + sA * zA[k]
    return alpha, Qb, QB, nub


def _type_block(p, mf, dist: TypeDistribution, seed, rep, block, n, cache):
    """Loadings for the traders of one block."""
    if dist.kind == "point-mass":
        tt = dist.mean_type
        if tt.key() not in cache:
            cache[tt.key()] = solve_traders(p, [tt], mf)[0]
        tcs = [cache[tt.key()]]
        tidx = np.zeros(n, dtype=np.int64)
        types = [tt]
    else:
        draws = dist.sample(n, rng.stream(seed, rng.TYPES, rep, block))
        types = [TraderType(*row) for row in draws]
        tcs = solve_traders(p, types, mf)
        tidx = np.arange(n, dtype=np.int64)
    coefT = np.ascontiguousarray(np.stack([np.vstack([tc.f_a, tc.f_aI, tc.f_b, tc.f_bI, tc.f_c]) for tc in tcs]))
    h = mf.grid.h
    dI = np.array([math.exp(-tt.k_I * h) for tt in types])
    sI = np.array([tt.sigma_I * ou_noise_scale(tt.k_I, h) for tt in types])
    return coefT, tidx, dI, sI


def simulate_finite_N(p: ModelParams, mf: MeanFieldCoefficients, cfg: SimConfig, rep: int = 0,
                      cache: dict | None = None) -> ChaosReport:
    """``cfg.N`` traders play the mean-field strategy on one common market.

    With ``feedback="theoretical"`` each trader sees the mean-field inventory
    path, so traders are conditionally independent and are processed in
    fixed blocks of 256.  ``feedback="empirical"`` replaces it by the
    population average (point-mass types only).
    """
    if cfg.N is None:
        raise ValueError("simulate_finite_N needs cfg.N")
    dist = cfg.type_dist or TypeDistribution.point_mass(p.representative_type())
    grid = mf.grid
    M, h = grid.M, grid.h
    cache = {} if cache is None else cache
    zA = rng.stream(cfg.seed, rng.ALPHA, rep, 0).standard_normal(M)
    alpha, Qb, QB, nub = mean_field_path(p, mf, zA)
    if cfg.feedback == "empirical":
        if dist.kind != "point-mass":
            raise ValueError("empirical feedback is implemented for point-mass types only")
        coefT, tidx, dI, sI = _type_block(p, mf, dist, cfg.seed, rep, 0, cfg.N, cache)
        zI = rng.stream(cfg.seed, rng.PRIVATE_BLOCK, rep, 0).standard_normal((cfg.N, M))
        mean = np.empty(M + 1)
        mfc = np.ascontiguousarray(np.vstack([mf.h_a, mf.h_b, mf.h_c]))
        K.population_feedback(coefT, tidx, dI, sI, mfc, alpha, zI, h, mean)
        return ChaosReport(cfg.N, rep, grid.times, mean, nub)
    sums = []
    for block, start in enumerate(range(0, cfg.N, BLOCK)):
        n = min(BLOCK, cfg.N - start)
        coefT, tidx, dI, sI = _type_block(p, mf, dist, cfg.seed, rep, block, n, cache)
        zI = rng.stream(cfg.seed, rng.PRIVATE_BLOCK, rep, block).standard_normal((n, M))
        nu = np.empty((n, M + 1))
        if USE_NUMBA:
            K.population_speeds(coefT, tidx, dI, sI, alpha, Qb, QB, zI, h, nu)
        else:
            K.population_speeds_np(coefT, tidx, dI, sI, alpha, Qb, QB, zI, h, nu)
        sums.append(nu.sum(axis=0))
    total = np.zeros(M + 1)
    for s in sums:
        total += s
    return ChaosReport(cfg.N, rep, grid.times, total / cfg.N, nub)


def chaos_study(p: ModelParams, mf: MeanFieldCoefficients, Ns, n_reps: int, seed: int = 0,
                type_dist: TypeDistribution | None = None) -> dict:
    """RMS gap per population size, pooled over macro-replications."""
    cache: dict = {}
    out = {}
    for N in Ns:
        cfg = SimConfig(n_paths=1, grid=mf.grid, seed=seed, N=N, type_dist=type_dist)
        sq = [simulate_finite_N(p, mf, cfg, rep, cache).rms ** 2 for rep in range(n_reps)]
        out[N] = float(math.sqrt(np.mean(sq)))
    return out
