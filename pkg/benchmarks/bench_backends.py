"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own subprocess because the choice is made at import
time from ``MFG_NO_NUMBA``.  The first call in each process is reported
separately so that JIT compilation does not pollute the steady-state timing.

Usage::

    python3 benchmarks/bench_backends.py [--M 10000] [--paths 2000] [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from mfg_broker import ModelParams, SimConfig, make_grid, simulate_equilibrium, solve_mean_field, solve_traders
from mfg_broker._backend import USE_NUMBA

M, paths, repeats = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
p = ModelParams()
g = make_grid(p.T, M)

def solve():
    mf = solve_mean_field(p, g)
    return mf, solve_traders(p, [p.representative_type()], mf)[0]

def simulate(mf, tc):
    cfg = SimConfig(n_paths=paths, grid=g, record_every=M // 10, seed=1)
    return simulate_equilibrium(p, mf, tc, cfg)[0]

def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0

(mf, tc), solve_first = timed(solve)
res, sim_first = timed(simulate, mf, tc)
solve_t = min(timed(solve)[1] for _ in range(repeats))
sim_t = min(timed(simulate, mf, tc)[1] for _ in range(repeats))
print(json.dumps({
    "numba": USE_NUMBA,
    "solve_first_s": solve_first, "solve_s": solve_t,
    "simulate_first_s": sim_first, "simulate_s": sim_t,
    "checksum": float(np.mean(res.records["nu_I"][:, -1])),
    "h_b0": float(mf.h_b[0]),
}))
"""


def run_backend(no_numba, args):
    env = dict(os.environ, MFG_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(args.M), str(args.paths), str(args.repeats)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=10_000)
    ap.add_argument("--paths", type=int, default=2_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    fast = run_backend(False, args)
    slow = run_backend(True, args)
    print(f"grid M={args.M}, paths={args.paths}, best of {args.repeats}")
    print(f"{'stage':<10}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for stage in ("solve", "simulate"):
        a, b = fast[f"{stage}_s"], slow[f"{stage}_s"]
        print(f"{stage:<10}{a:>12.3f}{b:>12.3f}{b / a:>10.1f}")
    print(f"first call including JIT: solve {fast['solve_first_s']:.2f} s, "
          f"simulate {fast['simulate_first_s']:.2f} s")
    if not fast["numba"]:
        print("warning: numba unavailable, both runs used the numpy fallback")
    drift = abs(fast["h_b0"] - slow["h_b0"]) / abs(slow["h_b0"])
    print(f"relative difference in h_b(0) between backends: {drift:.2e}")
    print(f"difference in mean terminal trader speed: {abs(fast['checksum'] - slow['checksum']):.2e}")


if __name__ == "__main__":
    main()
