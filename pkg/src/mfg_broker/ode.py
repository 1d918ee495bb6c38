"""Backward integrators: matrix Riccati, time-varying linear systems and the
closed-form scalar Riccati solution.

All integrators march from ``T`` to ``0`` with classical RK4.  Terminal data
in this model are large (``a/eta ~ 1e3``), so the solutions have a boundary
layer of width ``eta/a`` at ``T``.  To keep the user grid uniform while still
resolving that layer, each grid interval is crossed in ``n_k`` equal RK4
sub-steps, where ``n_k`` is chosen from an a-priori bound on the local
stiffness (see :func:`substep_schedule`).  Away from ``T`` this gives
``n_k = 1``, i.e. plain RK4 on the user grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .model import ModelParams, TimeGrid, TraderType

#: target bound on ``h_sub * lambda`` for a sub-step; 0.002 keeps direct and
#: linearised MRDE solutions within ~1e-10 at a cost of a few thousand steps.
THETA = 0.002


class BlowUpError(ArithmeticError):
    """Integration produced a non-finite value."""

    def __init__(self, what: str, node: int, t: float):
        super().__init__(f"{what}: non-finite value at node {node} (t={t!r}); "
                         "check the standing parameter assumptions")
        self.node = node
        self.t = t


class RepresentationBreakdown(ArithmeticError):
    """``R_t`` in ``P = T R^{-1}`` became numerically singular."""

    def __init__(self, node: int, t: float, cond: float):
        super().__init__(f"R_t is numerically singular at node {node} (t={t!r}, cond={cond:.3e})")
        self.node = node
        self.t = t
        self.cond = cond


@dataclass(frozen=True)
class CoefficientPath:
    """Values of a coefficient (scalar, vector or matrix) at every node."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[0] != self.grid.M + 1:
            raise ValueError("CoefficientPath needs one value per grid node")

    @property
    def t(self) -> np.ndarray:
        return self.grid.times

    def __call__(self, t):
        """Linear interpolation between nodes (scalar paths only)."""
        return np.interp(t, self.grid.times, self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class MatrixRiccatiProblem:
    """``dP/dt + Y P - P U P - Q = 0`` on ``[0, T]`` with ``P_T = S``."""

    U: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    grid: TimeGrid

    @classmethod
    def from_params(cls, p: ModelParams, grid: TimeGrid) -> "MatrixRiccatiProblem":
        U = np.array([[1.0, -1.0], [0.0, 1.0]])
        Y = np.array([[0.0, p.b / (2 * p.eta_B)], [p.b / (2 * p.eta_I), 0.0]])
        Q = np.diag([-p.phi_B / p.eta_B, -p.phi_bar / p.eta_I])
        S = np.diag([(2 * p.a_B - p.b) / (2 * p.eta_B), p.a_bar / p.eta_I])
        return cls(U, Y, Q, S, grid)

    def stiffness_constants(self) -> list[float]:
        return [float(abs(x)) for x in np.linalg.eigvals(self.S)]

    def background_rate(self) -> float:
        return float(np.abs(self.Y).sum() + math.sqrt(np.abs(self.Q).sum() * np.abs(self.U).sum()))


def substep_schedule(grid: TimeGrid, terminal_rates, background: float = 0.0,
                     theta: float = THETA) -> np.ndarray:
    """Per-interval RK4 sub-step counts.

    For a Riccati-type coefficient started at ``c`` the linearised rate at
    distance ``tau`` from ``T`` is bounded by ``2c / (1 + c tau)``.  Interval
    ``k`` gets ``ceil(h * lambda / theta)`` sub-steps, with ``lambda``
    evaluated at the interval end closest to ``T``.
    """
    h = grid.h
    tau_near = grid.T - grid.times[1:]
    lam = np.full(grid.M, float(background))
    for c in terminal_rates:
        if c > 0:
            lam = np.maximum(lam, 2 * c / (1 + c * tau_near) + background)
    n = np.ceil(h * lam / theta)
    return np.maximum(n, 1).astype(np.int64)


def _uniform(grid: TimeGrid, substeps: int) -> np.ndarray:
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    return np.full(grid.M, int(substeps), dtype=np.int64)


def _first_bad(values: np.ndarray) -> int:
    flat = values.reshape(values.shape[0], -1)
    bad = np.flatnonzero(~np.isfinite(flat).all(axis=1))
    return int(bad.max())


def solve_mrde_direct(prob: MatrixRiccatiProblem, substeps: int | None = None) -> CoefficientPath:
    """RK4 on the quadratic equation itself.

    ``substeps=None`` uses the stiffness-graded schedule; an integer forces
    that many uniform sub-steps per interval (``1`` = textbook RK4 on the
    grid, which is what convergence-order studies need).
    """
    g = prob.grid
    nsub = (substep_schedule(g, prob.stiffness_constants(), prob.background_rate())
            if substeps is None else _uniform(g, substeps))
    raw = K.mrde_direct_rk4(np.asarray(prob.U, float), np.asarray(prob.Y, float),
                            np.asarray(prob.Q, float), np.asarray(prob.S, float),
                            g.h, g.M, nsub)
    if not np.isfinite(raw).all():
        k = _first_bad(raw)
        raise BlowUpError("MRDE", k, float(g.times[k]))
    return CoefficientPath(g, raw.reshape(g.M + 1, 2, 2))


def solve_mrde_linearized(prob: MatrixRiccatiProblem, substeps: int | None = None,
                          cond_limit: float = 1e12) -> CoefficientPath:
    """``P = T R^{-1}`` from the linear 4x2 system.

    With ``P = T R^{-1}`` the pair must satisfy ``R' = -U T`` and
    ``T' = Q R - Y T`` (derivatives in ``t``) for ``P`` to solve the MRDE;
    the system is non-stiff, so plain RK4 on the grid is already accurate.
    """
    g = prob.grid
    nsub = _uniform(g, 1 if substeps is None else substeps)
    U, Y, Q, S = (np.asarray(m, float) for m in (prob.U, prob.Y, prob.Q, prob.S))
    G = np.block([[np.zeros((2, 2)), -U], [Q, -Y]])
    terminal = np.vstack([np.eye(2), S])
    Z = K.linear_hamiltonian_rk4(G, terminal, g.h, g.M, nsub)
    R = Z[:, :2, :]
    Tm = Z[:, 2:, :]
    if not np.isfinite(Z).all():
        k = _first_bad(Z)
        raise BlowUpError("linearised MRDE", k, float(g.times[k]))
    cond = np.linalg.cond(R)
    bad = np.flatnonzero(~(cond <= cond_limit))
    if bad.size:
        k = int(bad.max())
        raise RepresentationBreakdown(k, float(g.times[k]), float(cond[k]))
    P = np.linalg.solve(np.transpose(R, (0, 2, 1)), np.transpose(Tm, (0, 2, 1)))
    return CoefficientPath(g, np.transpose(P, (0, 2, 1)))


def _as_node_array(f, grid: TimeGrid, tail: tuple) -> np.ndarray:
    """Per-node array of shape ``(M+1,) + tail`` from a callable, a per-node
    array or a constant."""
    if callable(f):
        arr = np.asarray([f(t) for t in grid.times], dtype=float)
    else:
        arr = np.asarray(f, dtype=float)
    size = int(np.prod(tail))
    if arr.ndim >= 1 and arr.shape[0] == grid.M + 1 and arr.size == (grid.M + 1) * size:
        return np.ascontiguousarray(arr.reshape((grid.M + 1,) + tail))
    if arr.size == size:
        return np.ascontiguousarray(np.broadcast_to(arr.reshape(tail), (grid.M + 1,) + tail))
    raise ValueError(f"cannot interpret coefficient of shape {arr.shape} as {tail} per node")


def integrate_linear_backward(A, c, terminal, grid: TimeGrid,
                              A_mid=None, c_mid=None) -> CoefficientPath:
    """Solve ``dX/dt = A_t X + c_t`` backward from ``X_T = terminal``.

    ``A`` and ``c`` may be callables of ``t``, per-node arrays of shape
    ``(M+1, n, n)`` / ``(M+1, n)``, or constants.  RK4 stages at interval
    midpoints use ``A_mid``/``c_mid`` when given and otherwise the linear
    interpolant of the node values.
    """
    terminal = np.atleast_1d(np.asarray(terminal, dtype=float))
    n = terminal.shape[0]
    if callable(A) and A_mid is None:
        mids = grid.times[:-1] + 0.5 * grid.h
        A_mid = [A(t) for t in mids]
    if callable(c) and c_mid is None:
        mids = grid.times[:-1] + 0.5 * grid.h
        c_mid = [c(t) for t in mids]
    A_nodes = _as_node_array(A, grid, (n, n))
    c_nodes = _as_node_array(c, grid, (n,))
    if not (np.isfinite(A_nodes).all() and np.isfinite(c_nodes).all()):
        raise ValueError("linear system coefficients must be finite at every node")
    Am = (0.5 * (A_nodes[:-1] + A_nodes[1:]) if A_mid is None
          else np.ascontiguousarray(np.asarray(A_mid, float).reshape(grid.M, n, n)))
    cm = (0.5 * (c_nodes[:-1] + c_nodes[1:]) if c_mid is None
          else np.ascontiguousarray(np.asarray(c_mid, float).reshape(grid.M, n)))
    X = K.linear_backward_rk4(A_nodes, c_nodes, Am, cm, terminal, grid.h, grid.M)
    if not np.isfinite(X).all():
        k = _first_bad(X)
        raise BlowUpError("linear system", k, float(grid.times[k]))
    return CoefficientPath(grid, X)


def closed_form_fbI(t, tt: TraderType, eta_I: float, T: float):
    """Inventory loading ``f^{b,I}_t`` of an individual trader.

    Solves ``df/dt = phi/eta - f^2`` with ``f_T = -a/eta``; equal to
    ``-g tanh(g tau) - sech^2(g tau) / (eta/a + tanh(g tau)/g)``,
    ``g = sqrt(phi/eta)``, evaluated in an overflow-free form.  Accepts
    scalar or array ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > T):
        raise ValueError("t must lie in [0, T]")
    gamma = math.sqrt(tt.phi_I / eta_I)
    c = tt.a_I / eta_I
    tau = T - t_arr
    e = np.exp(-2.0 * gamma * tau)
    val = -gamma * (gamma * (1 - e) + c * (1 + e)) / (gamma * (1 + e) + c * (1 - e))
    if np.ndim(val) == 0:
        return float(val)
    return val
