"""Hot loops.

Every function here is written so that it compiles under ``numba.njit`` and
also runs unchanged as plain Python/numpy when the numba backend is switched
off.  The Monte Carlo kernels additionally have a vectorised numpy twin
(suffix ``_np``) because a pure-Python path loop would be unusably slow.

Conventions shared by the ODE kernels
-------------------------------------
* Time runs backward: ``tau = T - t``.  Node ``k`` of the user grid sits at
  ``tau = (M - k) h``.
* Interval ``[t_k, t_{k+1}]`` is crossed in ``nsub[k]`` equal RK4 steps, so
  the terminal boundary layer is resolved without changing the output grid.
* The 2x2 Riccati unknown is flattened as ``P = (P00, P01, P10, P11)``.
"""

import math

import numpy as np

from ._backend import njit, prange


# ---------------------------------------------------------------------------
# scalar Riccati closed form
# ---------------------------------------------------------------------------

@njit(cache=True)
def fbI_closed(tau, gamma, c):
    """Solution of ``df/dtau = f^2 - gamma^2`` (``tau = T - t``) with ``f = -c`` at ``tau = 0``.

    ``gamma = sqrt(phi/eta)``, ``c = a/eta``.  Uses overflow-free hyperbolic
    ratios: ``-gamma (gamma s + c k) / (gamma k + c s)`` with
    ``k = 1 + e^{-2x}``, ``s = 1 - e^{-2x}``, ``x = gamma tau``.
    """
    e = math.exp(-2.0 * gamma * tau)
    k = 1.0 + e
    s = 1.0 - e
    return -gamma * (gamma * s + c * k) / (gamma * k + c * s)


# ---------------------------------------------------------------------------
# matrix Riccati, direct form
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mrde_rhs_tau(P, U, Y, Q, out):
    # dP/dt = -Y P + P U P + Q   =>   dP/dtau = Y P - P U P - Q
    p00, p01, p10, p11 = P[0], P[1], P[2], P[3]
    # PU
    a00 = p00 * U[0, 0] + p01 * U[1, 0]
    a01 = p00 * U[0, 1] + p01 * U[1, 1]
    a10 = p10 * U[0, 0] + p11 * U[1, 0]
    a11 = p10 * U[0, 1] + p11 * U[1, 1]
    # PUP
    b00 = a00 * p00 + a01 * p10
    b01 = a00 * p01 + a01 * p11
    b10 = a10 * p00 + a11 * p10
    b11 = a10 * p01 + a11 * p11
    # YP
    c00 = Y[0, 0] * p00 + Y[0, 1] * p10
    c01 = Y[0, 0] * p01 + Y[0, 1] * p11
    c10 = Y[1, 0] * p00 + Y[1, 1] * p10
    c11 = Y[1, 0] * p01 + Y[1, 1] * p11
    out[0] = c00 - b00 - Q[0, 0]
    out[1] = c01 - b01 - Q[0, 1]
    out[2] = c10 - b10 - Q[1, 0]
    out[3] = c11 - b11 - Q[1, 1]


@njit(cache=True)
def mrde_direct_rk4(U, Y, Q, S, h, M, nsub):
    """Backward RK4 for the MRDE; returns ``(M+1, 4)`` node values.

    A non-finite state stops the sweep; the caller finds the first bad
    node by scanning for NaN.
    """
    out = np.full((M + 1, 4), np.nan)
    y = np.empty(4)
    y[0] = S[0, 0]
    y[1] = S[0, 1]
    y[2] = S[1, 0]
    y[3] = S[1, 1]
    out[M, :] = y
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    for k in range(M - 1, -1, -1):
        n = nsub[k]
        s = h / n
        for _ in range(n):
            _mrde_rhs_tau(y, U, Y, Q, k1)
            for i in range(4):
                tmp[i] = y[i] + 0.5 * s * k1[i]
            _mrde_rhs_tau(tmp, U, Y, Q, k2)
            for i in range(4):
                tmp[i] = y[i] + 0.5 * s * k2[i]
            _mrde_rhs_tau(tmp, U, Y, Q, k3)
            for i in range(4):
                tmp[i] = y[i] + s * k3[i]
            _mrde_rhs_tau(tmp, U, Y, Q, k4)
            for i in range(4):
                y[i] = y[i] + s / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        ok = True
        for i in range(4):
            if not math.isfinite(y[i]):
                ok = False
        if not ok:
            return out
        out[k, :] = y
    return out


@njit(cache=True)
def linear_hamiltonian_rk4(G, terminal, h, M, nsub):
    """Backward RK4 for ``Z' = G Z`` (in t) with a constant square ``G``.

    ``terminal`` has shape ``(n, m)``; returns ``(M+1, n, m)``.
    """
    n_rows, n_cols = terminal.shape
    out = np.empty((M + 1, n_rows, n_cols))
    Z = terminal.copy()
    out[M] = Z
    Gt = -G
    for k in range(M - 1, -1, -1):
        nk = nsub[k]
        s = h / nk
        for _ in range(nk):
            k1 = Gt @ Z
            k2 = Gt @ (Z + 0.5 * s * k1)
            k3 = Gt @ (Z + 0.5 * s * k2)
            k4 = Gt @ (Z + s * k3)
            Z = Z + s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = Z
    return out


# ---------------------------------------------------------------------------
# full coefficient system: MRDE + (h^a, g^a) + per-type trader deviations
# ---------------------------------------------------------------------------
#
# consts = (k_alpha, b, eta_I, eta_B, phi_bar)
# types[j] = (k_I, sigma_I, a_I, phi_I)
# state    = P(4), X = (h^a, g^a), then per type (f^{a,I}, d_a, d_b, d_c)
# where f^a = g^a + d_a, f^b = g^b - f^{b,I} + d_b, f^c = g^c + d_c.


@njit(cache=True)
def _coeff_rhs_tau(tau, y, U, Y, Q, consts, gam, cI, kI, dphi, out):
    _mrde_rhs_tau(y, U, Y, Q, out)
    k_alpha = consts[0]
    eta_I = consts[2]
    eta_B = consts[3]
    hc = -y[0]
    hb = -y[1]
    gc = -y[2]
    gb = -y[3]
    ha = y[4]
    ga = y[5]
    yB = Y[0, 1]
    yI = Y[1, 0]
    # dX/dt = A + B X
    dha = -0.5 / eta_B + (k_alpha - hc) * ha + (hc - hb - yB) * ga
    dga = -0.5 / eta_I + (-gc - yI) * ha + (k_alpha + gc - gb) * ga
    out[4] = -dha
    out[5] = -dga
    n_types = gam.shape[0]
    for j in range(n_types):
        base = 6 + 4 * j
        f = fbI_closed(tau, gam[j], cI[j])
        faI = y[base]
        da = y[base + 1]
        db = y[base + 2]
        dc = y[base + 3]
        out[base] = -((kI[j] - f) * faI - 0.5 / eta_I)
        out[base + 1] = -((k_alpha - f) * da - ga * db - (ha - ga) * dc)
        out[base + 2] = -(-(gb + f) * db - (hb - gb) * dc + dphi[j])
        out[base + 3] = -(-gc * db - (f + hc - gc) * dc)


@njit(cache=True)
def coefficients_rk4(U, Y, Q, S, consts, types, abar, h, M, nsub):
    """Integrate the whole coefficient system backward on the user grid.

    Returns ``(M+1, 6 + 4 n_types)`` node values, NaN from the first
    non-finite node onward.
    """
    n_types = types.shape[0]
    dim = 6 + 4 * n_types
    eta_I = consts[2]
    phi_bar = consts[4]
    gam = np.empty(n_types)
    cI = np.empty(n_types)
    kI = np.empty(n_types)
    dphi = np.empty(n_types)
    y = np.zeros(dim)
    y[0] = S[0, 0]
    y[1] = S[0, 1]
    y[2] = S[1, 0]
    y[3] = S[1, 1]
    for j in range(n_types):
        kI[j] = types[j, 0]
        gam[j] = math.sqrt(types[j, 3] / eta_I)
        cI[j] = types[j, 2] / eta_I
        dphi[j] = (types[j, 3] - phi_bar) / eta_I
        y[6 + 4 * j + 2] = (abar - types[j, 2]) / eta_I
    out = np.full((M + 1, dim), np.nan)
    out[M, :] = y
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    for k in range(M - 1, -1, -1):
        n = nsub[k]
        s = h / n
        tau0 = (M - 1 - k) * h
        for m in range(n):
            tau = tau0 + m * s
            _coeff_rhs_tau(tau, y, U, Y, Q, consts, gam, cI, kI, dphi, k1)
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * s * k1[i]
            _coeff_rhs_tau(tau + 0.5 * s, tmp, U, Y, Q, consts, gam, cI, kI, dphi, k2)
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * s * k2[i]
            _coeff_rhs_tau(tau + 0.5 * s, tmp, U, Y, Q, consts, gam, cI, kI, dphi, k3)
            for i in range(dim):
                tmp[i] = y[i] + s * k3[i]
            _coeff_rhs_tau(tau + s, tmp, U, Y, Q, consts, gam, cI, kI, dphi, k4)
            for i in range(dim):
                y[i] = y[i] + s / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(dim):
            if not math.isfinite(y[i]):
                return out
        out[k, :] = y
    return out


# ---------------------------------------------------------------------------
# generic time-varying linear system with interpolated coefficients
# ---------------------------------------------------------------------------

@njit(cache=True)
def linear_backward_rk4(A, c, A_mid, c_mid, terminal, h, M):
    """RK4 for ``dX/dt = A_t X + c_t`` backward from ``X_T = terminal``.

    ``A``/``c`` are node values, ``A_mid``/``c_mid`` values at interval
    midpoints (callers pass linear interpolants or exact samples).
    """
    n = terminal.shape[0]
    out = np.full((M + 1, n), np.nan)
    x = terminal.copy()
    out[M] = x
    for k in range(M - 1, -1, -1):
        # stages in tau: start at t_{k+1}, end at t_k
        k1 = -(A[k + 1] @ x + c[k + 1])
        k2 = -(A_mid[k] @ (x + 0.5 * h * k1) + c_mid[k])
        k3 = -(A_mid[k] @ (x + 0.5 * h * k2) + c_mid[k])
        k4 = -(A[k] @ (x + h * k3) + c[k])
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(n):
            if not math.isfinite(x[i]):
                return out
        out[k] = x
    return out


@njit(cache=True)
def scalar_riccati_rk4(gamma2, f_T, h, M, nsub):
    """RK4 for ``df/dt = gamma2 - f^2`` backward from ``f_T``; reference
    solver for the closed form."""
    out = np.full(M + 1, np.nan)
    f = f_T
    out[M] = f
    for k in range(M - 1, -1, -1):
        hs = h / nsub[k]
        for _ in range(nsub[k]):
            # d/dtau = f^2 - gamma2
            k1 = f * f - gamma2
            y = f + 0.5 * hs * k1
            k2 = y * y - gamma2
            y = f + 0.5 * hs * k2
            k3 = y * y - gamma2
            y = f + hs * k3
            k4 = y * y - gamma2
            f = f + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(f):
            return out
        out[k] = f
    return out


@njit(cache=True)
def _lyap_rhs(a, b, kI, s2, s11, s12, s22):
    return (-2.0 * kI * s11 + s2,
            (b - kI) * s12 + a * s11,
            2.0 * (a * s12 + b * s22))


@njit(cache=True)
def lyapunov_rk4(fa, fb, kI, s2, h, M, out):
    """Forward RK4 for the covariance of ``(alpha_I, D)`` with
    ``d alpha_I = -kI alpha_I dt + sigma dW`` and ``dD = (fa alpha_I + fb D) dt``;
    ``out[k] = Var(fa alpha_I + fb D)`` at node ``k``."""
    s11 = 0.0
    s12 = 0.0
    s22 = 0.0
    out[0] = 0.0
    for k in range(M):
        a0 = fa[k]
        b0 = fb[k]
        a1 = fa[k + 1]
        b1 = fb[k + 1]
        am = 0.5 * (a0 + a1)
        bm = 0.5 * (b0 + b1)
        p1, q1, r1 = _lyap_rhs(a0, b0, kI, s2, s11, s12, s22)
        p2, q2, r2 = _lyap_rhs(am, bm, kI, s2, s11 + 0.5 * h * p1, s12 + 0.5 * h * q1, s22 + 0.5 * h * r1)
        p3, q3, r3 = _lyap_rhs(am, bm, kI, s2, s11 + 0.5 * h * p2, s12 + 0.5 * h * q2, s22 + 0.5 * h * r2)
        p4, q4, r4 = _lyap_rhs(a1, b1, kI, s2, s11 + h * p3, s12 + h * q3, s22 + h * r3)
        s11 += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        s12 += h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        s22 += h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        out[k + 1] = a1 * a1 * s11 + 2.0 * a1 * b1 * s12 + b1 * b1 * s22


# ---------------------------------------------------------------------------
# Monte Carlo: equilibrium paths
# ---------------------------------------------------------------------------
#
# coef rows: g_a g_b g_c h_a h_b h_c f_a f_aI f_b f_bI f_c
# consts:    h, decay_a, scale_a, decay_I, scale_I, b, eta_I, eta_B,
#            price_scale, S0, alpha0, measure (0 reference, 1 broker, 2 trader)
# out rows:  alpha alpha_I S nu_bar nu_B nu_I Q_bar Q_barB Q_I X_I X_barB

N_SIM_COLS = 11


@njit(parallel=True, cache=True)
def simulate_paths(coef, V, consts, zA, zI, zS, out):
    n_paths, M = zA.shape
    h = consts[0]
    dA = consts[1]
    sA = consts[2]
    dI = consts[3]
    sI = consts[4]
    b = consts[5]
    eta_I = consts[6]
    eta_B = consts[7]
    sS = consts[8]
    measure = int(consts[11])
    for i in prange(n_paths):
        a = consts[10]
        aI = 0.0
        S = consts[9]
        Qb = 0.0
        QB = 0.0
        QI = 0.0
        XI = 0.0
        XB = 0.0
        for k in range(M + 1):
            nub = coef[0, k] * a + coef[1, k] * Qb + coef[2, k] * QB
            nuB = coef[3, k] * a + coef[4, k] * Qb + coef[5, k] * QB
            nuI = (coef[6, k] * a + coef[7, k] * aI + coef[8, k] * Qb
                   + coef[9, k] * QI + coef[10, k] * QB)
            out[0, i, k] = a
            out[1, i, k] = aI
            out[2, i, k] = S
            out[3, i, k] = nub
            out[4, i, k] = nuB
            out[5, i, k] = nuI
            out[6, i, k] = Qb
            out[7, i, k] = QB
            out[8, i, k] = QI
            out[9, i, k] = XI
            out[10, i, k] = XB
            if k == M:
                break
            if measure == 1:
                drift = b * nuB + a
            elif measure == 2:
                drift = b * nuB + aI + a
            else:
                drift = 0.0
            XI = XI - nuI * (S + eta_I * nuI) * h
            XB = XB + (nub * S + eta_I * (nub * nub + V[k]) - nuB * (S + eta_B * nuB)) * h
            S = S + drift * h + sS * zS[i, k]
            Qb = Qb + nub * h
            QB = QB + (nuB - nub) * h
            QI = QI + nuI * h
            a = a * dA + sA * zA[i, k]
            aI = aI * dI + sI * zI[i, k]


def simulate_paths_np(coef, V, consts, zA, zI, zS, out):
    """Vectorised-over-paths twin of :func:`simulate_paths`."""
    n_paths, M = zA.shape
    h, dA, sA, dI, sI, b, eta_I, eta_B, sS, S0, a0, measure = consts
    a = np.full(n_paths, a0)
    aI = np.zeros(n_paths)
    S = np.full(n_paths, S0)
    Qb = np.zeros(n_paths)
    QB = np.zeros(n_paths)
    QI = np.zeros(n_paths)
    XI = np.zeros(n_paths)
    XB = np.zeros(n_paths)
    for k in range(M + 1):
        nub = coef[0, k] * a + coef[1, k] * Qb + coef[2, k] * QB
        nuB = coef[3, k] * a + coef[4, k] * Qb + coef[5, k] * QB
        nuI = (coef[6, k] * a + coef[7, k] * aI + coef[8, k] * Qb
               + coef[9, k] * QI + coef[10, k] * QB)
        for c, v in enumerate((a, aI, S, nub, nuB, nuI, Qb, QB, QI, XI, XB)):
            out[c, :, k] = v
        if k == M:
            break
        if measure == 1:
            drift = b * nuB + a
        elif measure == 2:
            drift = b * nuB + aI + a
        else:
            drift = 0.0
        XI = XI - nuI * (S + eta_I * nuI) * h
        XB = XB + (nub * S + eta_I * (nub * nub + V[k]) - nuB * (S + eta_B * nuB)) * h
        S = S + drift * h + sS * zS[:, k]
        Qb = Qb + nub * h
        QB = QB + (nuB - nub) * h
        QI = QI + nuI * h
        a = a * dA + sA * zA[:, k]
        aI = aI * dI + sI * zI[:, k]


# ---------------------------------------------------------------------------
# Monte Carlo: finite population playing the mean-field strategy
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def population_speeds(coefT, tidx, dI, sI, alpha, Qbar, QbarB, zI, h, out):
    """Speeds of ``len(tidx)`` traders facing the theoretical mean field.

    ``coefT[j]`` holds rows ``f_a f_aI f_b f_bI f_c`` of type ``j``;
    ``out`` has shape ``(n_traders, M+1)``.
    """
    n, M = zI.shape
    for i in prange(n):
        j = tidx[i]
        aI = 0.0
        QI = 0.0
        for k in range(M + 1):
            nu = (coefT[j, 0, k] * alpha[k] + coefT[j, 1, k] * aI + coefT[j, 2, k] * Qbar[k]
                  + coefT[j, 3, k] * QI + coefT[j, 4, k] * QbarB[k])
            out[i, k] = nu
            if k < M:
                QI = QI + nu * h
                aI = aI * dI[j] + sI[j] * zI[i, k]


def population_speeds_np(coefT, tidx, dI, sI, alpha, Qbar, QbarB, zI, h, out):
    n, M = zI.shape
    C = coefT[tidx]
    aI = np.zeros(n)
    QI = np.zeros(n)
    d = dI[tidx]
    s = sI[tidx]
    for k in range(M + 1):
        nu = (C[:, 0, k] * alpha[k] + C[:, 1, k] * aI + C[:, 2, k] * Qbar[k]
              + C[:, 3, k] * QI + C[:, 4, k] * QbarB[k])
        out[:, k] = nu
        if k < M:
            QI = QI + nu * h
            aI = aI * d + s * zI[:, k]


@njit(cache=True)
def population_feedback(coefT, tidx, dI, sI, mfcoef, alpha, zI, h, out_mean):
    """Finite population where every trader sees the empirical average
    inventory and the broker reacts to the empirical average speed.

    Trader loop order is fixed, so the empirical averages are reproducible.
    ``mfcoef`` rows: h_a h_b h_c.  Writes the empirical mean speed.
    """
    n, M = zI.shape
    aI = np.zeros(n)
    QI = np.zeros(n)
    nu = np.zeros(n)
    Qe = 0.0
    QB = 0.0
    for k in range(M + 1):
        total = 0.0
        for i in range(n):
            j = tidx[i]
            nu[i] = (coefT[j, 0, k] * alpha[k] + coefT[j, 1, k] * aI[i] + coefT[j, 2, k] * Qe
                     + coefT[j, 3, k] * QI[i] + coefT[j, 4, k] * QB)
            total += nu[i]
        mean_nu = total / n
        out_mean[k] = mean_nu
        if k == M:
            break
        nuB = mfcoef[0, k] * alpha[k] + mfcoef[1, k] * Qe + mfcoef[2, k] * QB
        tq = 0.0
        for i in range(n):
            j = tidx[i]
            QI[i] = QI[i] + nu[i] * h
            tq += QI[i]
            aI[i] = aI[i] * dI[j] + sI[j] * zI[i, k]
        Qe = tq / n
        QB = QB + (nuB - mean_nu) * h


# ---------------------------------------------------------------------------
# objective functionals and their directional derivatives
# ---------------------------------------------------------------------------
#
# Both players' objectives have the form
#     sum_k h [Q (c1 nu + e) + m - eta nu^2 - phi Q^2]  -  a Q_M^2
# (left-point sums over k < M) with dQ = (nu - r) dt: for a trader c1 = 0,
# r = 0, e = b nu_B + alpha_I + alpha, m = 0; for the broker Q is the net
# inventory, c1 = b, e = alpha, r = nu_bar and m is the client-flow revenue.


@njit(cache=True)
def _objective_row(nu, Q, c1, e, m, eta, a, phi, h):
    M = nu.shape[0] - 1
    s = 0.0
    for k in range(M):
        s += Q[k] * (c1 * nu[k] + e[k]) + m[k] - eta * nu[k] * nu[k] - phi * Q[k] * Q[k]
    return s * h - a * Q[M] * Q[M]


@njit(parallel=True, cache=True)
def objective_paths(nu, Q, c1, e, m, r, eta, a, phi, h, out):
    for i in prange(nu.shape[0]):
        out[i] = _objective_row(nu[i], Q[i], c1, e[i], m[i], eta, a, phi, h)


def objective_paths_np(nu, Q, c1, e, m, r, eta, a, phi, h, out):
    L = slice(0, -1)
    run = (Q[:, L] * (c1 * nu[:, L] + e[:, L]) + m[:, L] - eta * nu[:, L] ** 2
           - phi * Q[:, L] ** 2)
    out[:] = run.sum(axis=1) * h - a * Q[:, -1] ** 2


@njit(cache=True)
def _gateaux_row(w, nu, Q, c1, e, m, r, eta, a, phi, h, eps, out):
    M = nu.shape[0] - 1
    QM = Q[M]
    # bracket, using sum_k w_k tail_k = sum_j x_j (sum_{k<=j} w_k)
    g = 0.0
    cw = 0.0
    for k in range(M):
        cw += w[k]
        g += w[k] * (-2.0 * eta * nu[k] + (c1 - 2.0 * a) * QM) + (c1 * r[k] + e[k] - 2.0 * phi * Q[k]) * cw * h
    out[0] = g * h
    for j in range(eps.shape[0]):
        ep = eps[j]
        hp = 0.0
        hm = 0.0
        W = 0.0
        for k in range(M):
            x = nu[k] + ep * w[k]
            q = Q[k] + ep * W
            hp += q * (c1 * x + e[k]) + m[k] - eta * x * x - phi * q * q
            x = nu[k] - ep * w[k]
            q = Q[k] - ep * W
            hm += q * (c1 * x + e[k]) + m[k] - eta * x * x - phi * q * q
            W += w[k] * h
        qp = QM + ep * W
        qm = QM - ep * W
        out[1 + j] = ((hp - hm) * h - a * (qp * qp - qm * qm)) / (2.0 * ep)


@njit(parallel=True, cache=True)
def gateaux_paths(w, nu, Q, c1, e, m, r, eta, a, phi, h, eps, out):
    """Per path: ``out[i, 0]`` is ``h sum_k w_k B_k`` with the first-order
    bracket ``B_k = -2 eta nu_k + (c1 - 2a) Q_M + h sum_{j>=k} (c1 r + e -
    2 phi Q)_j``; ``out[i, 1 + j]`` is the symmetric difference quotient of
    the objective along ``(w, W)`` with step ``eps[j]``, ``W`` the
    left-point integral of ``w``."""
    for i in prange(nu.shape[0]):
        _gateaux_row(w[i], nu[i], Q[i], c1, e[i], m[i], r[i], eta, a, phi, h, eps, out[i])


def gateaux_paths_np(w, nu, Q, c1, e, m, r, eta, a, phi, h, eps, out):
    L = slice(0, -1)
    run = c1 * r[:, L] + e[:, L] - 2.0 * phi * Q[:, L]
    tail = np.cumsum(run[:, ::-1], axis=1)[:, ::-1] * h
    bracket = -2.0 * eta * nu[:, L] + (c1 - 2.0 * a) * Q[:, -1:] + tail
    out[:, 0] = (w[:, L] * bracket).sum(axis=1) * h
    W = np.concatenate([np.zeros((w.shape[0], 1)), np.cumsum(w[:, :-1], axis=1) * h], axis=1)
    for j, ep in enumerate(eps):
        vals = []
        for s in (ep, -ep):
            x = nu[:, L] + s * w[:, L]
            q = Q + s * W
            v = (q[:, L] * (c1 * x + e[:, L]) + m[:, L] - eta * x * x - phi * q[:, L] ** 2)
            vals.append(v.sum(axis=1) * h - a * q[:, -1] ** 2)
        out[:, 1 + j] = (vals[0] - vals[1]) / (2.0 * ep)
