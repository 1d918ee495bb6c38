"""Closed-form equilibrium: mean-field loadings, individual trader loadings,
strategy evaluators and the externalisation rate.

Conventions
-----------
The mean-field speed and the broker speed are

    nu_bar = g_a alpha + g_b Qbar + g_c QbarB
    nu_B   = h_a alpha + h_b Qbar + h_c QbarB

and an individual trader of type ``tt`` trades

    nu_I = f_a alpha + f_aI alpha_I + f_b Qbar + f_bI Q_I + f_c QbarB.

The trader system is integrated in deviation form,
``f_a = g_a + d_a``, ``f_b = g_b - f_bI + d_b``, ``f_c = g_c + d_c``.
The deviations solve a linear system driven only by ``phi_I - phi_bar`` and
``a_I - a_bar``, so for the representative trader they vanish identically and
the aggregation identities hold to the last bit instead of to integration
accuracy.  ``solve_trader(..., method="printed")`` integrates the equations
for ``(f_b, f_c)`` and ``f_a`` literally instead; it is kept as a cross-check.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .model import ModelParams, TimeGrid, TraderType, make_grid, validate_params
from .ode import (
    BlowUpError,
    CoefficientPath,
    MatrixRiccatiProblem,
    closed_form_fbI,
    integrate_linear_backward,
    substep_schedule,
)


class InvalidParameters(ValueError):
    def __init__(self, report):
        super().__init__("standing assumptions violated:\n" + "\n".join(
            f"  {c.name}: {c.detail}" for c in report.violations))
        self.report = report


class UndefinedRateError(ArithmeticError):
    """``g_a`` vanishes at an interior node, so ``h_a / g_a`` is undefined."""


MF_COLUMNS = ("g_a", "g_b", "g_c", "h_a", "h_b", "h_c", "q_a")
TRADER_COLUMNS = ("f_a", "f_aI", "f_b", "f_bI", "f_c")


@dataclass(frozen=True, eq=False)
class MeanFieldCoefficients:
    grid: TimeGrid
    params: ModelParams
    g_a: np.ndarray
    g_b: np.ndarray
    g_c: np.ndarray
    h_a: np.ndarray
    h_b: np.ndarray
    h_c: np.ndarray
    q_a: np.ndarray

    @property
    def P(self) -> CoefficientPath:
        P = -np.stack([np.stack([self.h_c, self.h_b], -1), np.stack([self.g_c, self.g_b], -1)], -2)
        return CoefficientPath(self.grid, P)

    def path(self, name: str) -> CoefficientPath:
        return CoefficientPath(self.grid, getattr(self, name))

    def table(self) -> np.ndarray:
        return np.column_stack([self.grid.times] + [getattr(self, c) for c in MF_COLUMNS])


@dataclass(frozen=True, eq=False)
class TraderCoefficients:
    grid: TimeGrid
    trader_type: TraderType
    f_a: np.ndarray
    f_aI: np.ndarray
    f_b: np.ndarray
    f_bI: np.ndarray
    f_c: np.ndarray

    def path(self, name: str) -> CoefficientPath:
        return CoefficientPath(self.grid, getattr(self, name))

    def table(self) -> np.ndarray:
        return np.column_stack([self.grid.times] + [getattr(self, c) for c in TRADER_COLUMNS])


@dataclass(frozen=True)
class MarketState:
    t: float
    alpha: float = 0.0
    alpha_I: float = 0.0
    Q_bar: float = 0.0
    Q_I: float = 0.0
    Q_barB: float = 0.0

    def __post_init__(self):
        for name in ("t", "alpha", "alpha_I", "Q_bar", "Q_I", "Q_barB"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"MarketState.{name} must be finite")


def _types_array(types) -> np.ndarray:
    return np.array([[tt.k_I, tt.sigma_I, tt.a_I, tt.phi_I] for tt in types], dtype=float).reshape(-1, 4)


def _run_kernel(p: ModelParams, grid: TimeGrid, types, nsub=None):
    prob = MatrixRiccatiProblem.from_params(p, grid)
    rates = prob.stiffness_constants() + [tt.a_I / p.eta_I for tt in types]
    background = prob.background_rate() + p.k_alpha + max([tt.k_I for tt in types], default=0.0)
    if nsub is None:
        nsub = substep_schedule(grid, rates, background)
    consts = np.array([p.k_alpha, p.b, p.eta_I, p.eta_B, p.phi_bar])
    out = K.coefficients_rk4(prob.U, prob.Y, prob.Q, prob.S, consts, _types_array(types),
                             p.a_bar, grid.h, grid.M, nsub)
    if not np.isfinite(out).all():
        bad = np.flatnonzero(~np.isfinite(out).all(axis=1)).max()
        raise BlowUpError("coefficient system", int(bad), float(grid.times[bad]))
    return out


def solve_mean_field(p: ModelParams, grid: TimeGrid, substeps: int | None = None) -> MeanFieldCoefficients:
    """Mean-field loadings ``g`` and broker loadings ``h`` on ``grid``.

    Terminal values are assigned, not integrated.  ``q_a`` is ``h_a/g_a`` at
    nodes before ``T`` (NaN where ``g_a`` vanishes) and ``eta_I/eta_B`` at
    ``T``, the common limit of both sides by l'Hopital.
    """
    report = validate_params(p)
    if not report.ok:
        raise InvalidParameters(report)
    if abs(grid.T - p.T) > 1e-12 * p.T:
        raise ValueError(f"grid horizon {grid.T} differs from model horizon {p.T}")
    nsub = None if substeps is None else np.full(grid.M, int(substeps), dtype=np.int64)
    out = _run_kernel(p, grid, [], nsub)
    h_c, h_b, g_c, g_b = (-out[:, i] for i in range(4))
    h_a, g_a = out[:, 4].copy(), out[:, 5].copy()
    # exact terminal data
    g_a[-1] = h_a[-1] = g_c[-1] = h_b[-1] = 0.0
    g_b[-1] = -p.a_bar / p.eta_I
    h_c[-1] = -(2 * p.a_B - p.b) / (2 * p.eta_B)
    with np.errstate(divide="ignore", invalid="ignore"):
        q_a = np.where(g_a != 0.0, h_a / np.where(g_a != 0.0, g_a, 1.0), np.nan)
    q_a[-1] = p.eta_I / p.eta_B
    return MeanFieldCoefficients(grid, p, g_a, g_b, g_c, h_a, h_b, h_c, q_a)


def externalisation_limit(p: ModelParams, tau: float = 1e-8) -> float:
    """``q_a`` evaluated a distance ``tau`` before ``T``.

    The loadings depend on ``t`` only through ``T - t``, so a short-horizon
    solve gives the one-sided limit without a dense full-horizon grid.
    """
    short = p.replace(T=10 * tau)
    mf = solve_mean_field(short, make_grid(short.T, 10))
    return float(mf.q_a[-2])


def _assemble(p, tt, mf, y) -> TraderCoefficients:
    grid = mf.grid
    f_bI = closed_form_fbI(grid.times, tt, p.eta_I, grid.T)
    f_bI[-1] = -tt.a_I / p.eta_I
    f_aI, d_a, d_b, d_c = (y[:, i].copy() for i in range(4))
    f_a = mf.g_a + d_a
    f_b = mf.g_b - f_bI + d_b
    f_c = mf.g_c + d_c
    f_a[-1] = f_aI[-1] = f_b[-1] = f_c[-1] = 0.0
    return TraderCoefficients(grid, tt, f_a, f_aI, f_b, f_bI, f_c)


def solve_traders(p: ModelParams, types, mf: MeanFieldCoefficients) -> list[TraderCoefficients]:
    """Batch version of :func:`solve_trader` (one integration for all types)."""
    types = list(types)
    if not types:
        return []
    out = _run_kernel(p, mf.grid, types)
    return [_assemble(p, tt, mf, out[:, 6 + 4 * j: 10 + 4 * j]) for j, tt in enumerate(types)]


def solve_trader(p: ModelParams, tt: TraderType, mf: MeanFieldCoefficients,
                 method: str = "deviation") -> TraderCoefficients:
    """Loadings of an individual trader of type ``tt`` against ``mf``.

    ``method="deviation"`` (default) integrates the deviation system jointly
    with the mean-field system on the stiffness-graded sub-grid.
    ``method="printed"`` integrates the equations for ``f_aI``, ``(f_b, f_c)``
    and ``f_a`` as written, on the user grid with linearly interpolated
    coefficients; it is less accurate inside the terminal layer.
    """
    if mf.params != p:
        raise ValueError("mean-field coefficients were solved for different parameters")
    if method == "deviation":
        return solve_traders(p, [tt], mf)[0]
    if method != "printed":
        raise ValueError(f"unknown method {method!r}")
    grid = mf.grid
    f_bI = closed_form_fbI(grid.times, tt, p.eta_I, grid.T)
    mid_t = grid.times[:-1] + 0.5 * grid.h
    f_bI_mid = closed_form_fbI(mid_t, tt, p.eta_I, grid.T)
    inv = 1.0 / (2 * p.eta_I)
    f_aI = integrate_linear_backward((tt.k_I - f_bI)[:, None, None], np.full((grid.M + 1, 1), -inv),
                                     [0.0], grid, A_mid=(tt.k_I - f_bI_mid)[:, None, None]).values[:, 0]

    def lerp(v):
        return 0.5 * (v[:-1] + v[1:])

    A = -np.stack([np.stack([mf.g_b + f_bI, mf.h_b - mf.g_b], -1),
                   np.stack([mf.g_c, mf.h_c - mf.g_c + f_bI], -1)], -2)
    A_mid = -np.stack([np.stack([lerp(mf.g_b) + f_bI_mid, lerp(mf.h_b - mf.g_b)], -1),
                       np.stack([lerp(mf.g_c), lerp(mf.h_c - mf.g_c) + f_bI_mid], -1)], -2)
    c = -p.b * inv * np.column_stack([mf.h_b, mf.h_c])
    F = integrate_linear_backward(A, c, [0.0, 0.0], grid, A_mid=A_mid).values
    f_b, f_c = F[:, 0], F[:, 1]
    b_a = -f_b * mf.g_a - f_c * (mf.h_a - mf.g_a) - (p.b * mf.h_a + 1) * inv
    f_a = integrate_linear_backward((p.k_alpha - f_bI)[:, None, None], b_a[:, None], [0.0], grid,
                                    A_mid=(p.k_alpha - f_bI_mid)[:, None, None]).values[:, 0]
    f_bI = f_bI.copy()
    f_bI[-1] = -tt.a_I / p.eta_I
    return TraderCoefficients(grid, tt, f_a, f_aI, f_b.copy(), f_bI, f_c.copy())


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------

def _weights(grid: TimeGrid, t: float):
    if not (0.0 <= t <= grid.T):
        raise ValueError(f"t={t!r} outside [0, {grid.T}]")
    x = t / grid.h
    k = min(int(math.floor(x)), grid.M - 1)
    w = x - k
    return k, w


def coefficient_at(values: np.ndarray, grid: TimeGrid, t: float) -> float:
    """Linear interpolation of node values; exact at nodes."""
    k, w = _weights(grid, t)
    if w == 0.0:
        return float(values[k])
    if w == 1.0:
        return float(values[k + 1])
    return float((1.0 - w) * values[k] + w * values[k + 1])


def broker_speed(mf: MeanFieldCoefficients, s: MarketState) -> float:
    g = mf.grid
    return (coefficient_at(mf.h_a, g, s.t) * s.alpha + coefficient_at(mf.h_b, g, s.t) * s.Q_bar
            + coefficient_at(mf.h_c, g, s.t) * s.Q_barB)


def mean_field_speed(mf: MeanFieldCoefficients, s: MarketState) -> float:
    g = mf.grid
    return (coefficient_at(mf.g_a, g, s.t) * s.alpha + coefficient_at(mf.g_b, g, s.t) * s.Q_bar
            + coefficient_at(mf.g_c, g, s.t) * s.Q_barB)


def trader_speed(tc: TraderCoefficients, s: MarketState) -> float:
    g = tc.grid
    return (coefficient_at(tc.f_a, g, s.t) * s.alpha + coefficient_at(tc.f_aI, g, s.t) * s.alpha_I
            + coefficient_at(tc.f_b, g, s.t) * s.Q_bar + coefficient_at(tc.f_bI, g, s.t) * s.Q_I
            + coefficient_at(tc.f_c, g, s.t) * s.Q_barB)


def externalisation_rate(mf: MeanFieldCoefficients, t: float) -> float:
    """``h_a / g_a`` at ``t``; the stored limit ``eta_I / eta_B`` at ``T``."""
    k, w = _weights(mf.grid, t)
    if w == 1.0:
        k, w = k + 1, 0.0
    if w == 0.0:
        val = mf.q_a[k]
        if not math.isfinite(val):
            raise UndefinedRateError(f"g_a vanishes at node {k} (t={mf.grid.times[k]!r})")
        return float(val)
    ga = coefficient_at(mf.g_a, mf.grid, t)
    if ga == 0.0:
        raise UndefinedRateError(f"g_a vanishes at t={t!r}")
    if k + 1 == mf.grid.M:
        # the ratio is smooth up to T; interpolate it rather than 0/0 pieces
        return float((1 - w) * mf.q_a[k] + w * mf.q_a[k + 1])
    return coefficient_at(mf.h_a, mf.grid, t) / ga


# ---------------------------------------------------------------------------
# conditional dispersion of individual speeds around the mean field
# ---------------------------------------------------------------------------

def speed_dispersion(tc: TraderCoefficients, mf: MeanFieldCoefficients) -> np.ndarray:
    """``Var(nu_I - nu_bar | common information)`` at every node.

    For a trader whose type equals the population mean, ``nu_I - nu_bar =
    f_aI alpha_I + f_bI D`` with ``D = Q_I - Qbar``, and ``(alpha_I, D)``
    is a linear Gaussian system started at zero; its covariance solves a
    Lyapunov equation, integrated here forward with RK4 on the grid.
    """
    grid = tc.grid
    out = np.empty(grid.M + 1)
    K.lyapunov_rk4(np.ascontiguousarray(tc.f_aI), np.ascontiguousarray(tc.f_bI),
                   tc.trader_type.k_I, tc.trader_type.sigma_I ** 2, grid.h, grid.M, out)
    return out


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def table_to_csv(header, table: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in table:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def mean_field_csv(mf: MeanFieldCoefficients) -> str:
    return table_to_csv(("t",) + MF_COLUMNS, mf.table())


def trader_csv(tc: TraderCoefficients) -> str:
    return table_to_csv(("t",) + TRADER_COLUMNS, tc.table())


def read_csv(text: str) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data
