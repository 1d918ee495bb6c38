"""Regenerate ``coefficients_oracle.json``.

Independent oracle: the eleven coefficient equations are integrated
backward with scipy's implicit Radau method at tight tolerances, directly
in their printed form (``f_b`` included as printed, no deviation variables
and no closed form for ``f_bI``).  Run from the repository root:

    python3 tests/fixtures/generate.py
"""

import json
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

k_alpha, b, eta_I, eta_B = 5.0, 1e-3, 1e-3, 1.2e-3
a_B, phi_B, a_bar, phi_bar, T = 1.0, 1e-2, 1.0, 1e-2, 1.0
k_I, a_I, phi_I = 5.0, 1.0, 1e-2
TIMES = (0.0, 0.25, 0.5, 0.9, 0.99, 0.999)
NAMES = ("g_a", "h_a", "g_b", "h_b", "g_c", "h_c", "f_a", "f_aI", "f_b", "f_bI", "f_c")


def rates(y):
    """``F`` in ``0 = dy + F dt``."""
    ga, ha, gb, hb, gc, hc, fa, faI, fb, fbI, fc = y
    return np.array([
        -k_alpha * ga + gb * ga + gc * (ha - ga) + (b * ha + 1) / (2 * eta_I),
        -k_alpha * ha + hb * ga + hc * (ha - ga) + (b * ga + 1) / (2 * eta_B),
        gb * gb + gc * (hb - gb) + (b * hb - 2 * phi_bar) / (2 * eta_I),
        hb * gb + hc * (hb - gb) + b * gb / (2 * eta_B),
        gb * gc + gc * (hc - gc) + b * hc / (2 * eta_I),
        hb * gc + hc * (hc - gc) + (b * gc - 2 * phi_B) / (2 * eta_B),
        -k_alpha * fa + fb * ga + fbI * fa + fc * (ha - ga) + (b * ha + 1) / (2 * eta_I),
        -k_I * faI + fbI * faI + 1 / (2 * eta_I),
        fb * gb + fbI * fb + fc * (hb - gb) + b * hb / (2 * eta_I),
        fbI * fbI - phi_I / eta_I,
        fb * gc + fbI * fc + fc * (hc - gc) + b * hc / (2 * eta_I),
    ])


def main():
    # terminal values: P_T = S gives h_c = -(2 a_B - b) / (2 eta_B), g_b = -a_bar / eta_I
    y_T = np.zeros(11)
    y_T[NAMES.index("g_b")] = -a_bar / eta_I
    y_T[NAMES.index("h_c")] = -(2 * a_B - b) / (2 * eta_B)
    y_T[NAMES.index("f_bI")] = -a_I / eta_I
    y_T[NAMES.index("f_b")] = -a_bar / eta_I + a_I / eta_I
    taus = sorted(T - t for t in TIMES)
    # in tau = T - t: dy/dtau = F(y)
    sol = solve_ivp(lambda tau, y: rates(y), (0.0, T), y_T, method="Radau",
                    rtol=1e-12, atol=1e-12, t_eval=taus, dense_output=False)
    assert sol.success, sol.message
    out = {"params": {"k_alpha": k_alpha, "b": b, "eta_I": eta_I, "eta_B": eta_B, "a_B": a_B,
                      "phi_B": phi_B, "a_bar": a_bar, "phi_bar": phi_bar, "T": T,
                      "k_I": k_I, "a_I": a_I, "phi_I": phi_I},
           "method": "scipy Radau, rtol=atol=1e-12, printed equations",
           "values": {}}
    for j, tau in enumerate(sol.t):
        t = round(float(T - tau), 12)
        out["values"][repr(t)] = {n: float(sol.y[i, j]) for i, n in enumerate(NAMES)}
    path = Path(__file__).with_name("coefficients_oracle.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
