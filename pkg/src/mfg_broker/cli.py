"""Command line: ``mfg-broker {solve,simulate,verify,report}``.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 a check
failed, 4 input/output problem.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name, configure_threads
from .config import ConfigError, RunConfig, load_config, parse_value
from .equilibrium import (
    InvalidParameters,
    mean_field_csv,
    solve_mean_field,
    solve_traders,
    trader_csv,
)
from .report import MF_FILE, SAMPLE_FILE, MissingArtifact, make_figures, trader_file
from .simulator import COLUMNS, column_csv, simulate_equilibrium, simulate_finite_N, stats_csv
from .verification import (
    check_gateaux,
    reports_json,
    run_suite,
    scaled_gb_coefficients,
    suite_passed,
)

EXIT_OK, EXIT_INVALID, EXIT_CHECKS, EXIT_IO = 0, 2, 3, 4


class Run:
    """Output directory, stage timer and file inventory of one command."""

    def __init__(self, command: str, rc: RunConfig):
        self.command = command
        self.rc = rc
        self.out = rc.outputs
        self.out.mkdir(parents=True, exist_ok=True)
        self.stages: dict[str, float] = {}
        self.files: dict[str, str] = {}

    def stage(self, name: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.stages[name] = round(time.perf_counter() - self.t0, 6)

        return _Timer()

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def manifest(self) -> None:
        """Merge this command's section into ``manifest.json``.

        ``content_hash`` covers the configuration, the code version, the
        backend and the output hashes, and is therefore identical for
        identical runs; wall-clock timings and the output location are
        recorded but not hashed.
        """
        config = {k: v for k, v in self.rc.raw.items() if k != "outputs"}
        body = {"command": self.command, "tool": "mfg-broker", "version": __version__,
                "backend": backend_name(), "config": config,
                "seeds": {"sim": self.rc.sim.seed}, "files": dict(sorted(self.files.items()))}
        digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
        path = self.out / "manifest.json"
        manifest = {}
        if path.is_file():
            try:
                manifest = json.loads(path.read_text())
            except json.JSONDecodeError:
                manifest = {}
        manifest[self.command] = {**body, "content_hash": digest, "outputs": str(self.out),
                                  "wall_clock_s": self.stages}
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _solve(run: Run):
    rc = run.rc
    with run.stage("solve"):
        mf = solve_mean_field(rc.params, rc.grid)
        tcs = solve_traders(rc.params, list(rc.trader_types), mf)
    with run.stage("write_coefficients"):
        run.write(MF_FILE, mean_field_csv(mf))
        for i, tc in enumerate(tcs):
            run.write(trader_file(i), trader_csv(tc))
    return mf, tcs


def cmd_solve(rc: RunConfig) -> int:
    run = Run("solve", rc)
    _solve(run)
    run.manifest()
    print(f"wrote {len(run.files)} coefficient files to {run.out}")
    return EXIT_OK


def _sample_csv(ens) -> str:
    full = ens.full
    t = [repr(float(x)) for x in ens.grid.times]
    lines = ["path_id,t," + ",".join(COLUMNS)]
    for i in range(full[COLUMNS[0]].shape[0]):
        rows = zip(*(full[c][i] for c in COLUMNS))
        lines.extend(f"{i},{t[k]}," + ",".join(repr(float(v)) for v in row) for k, row in enumerate(rows))
    return "\n".join(lines) + "\n"


def cmd_simulate(rc: RunConfig, path_csv: bool = False) -> int:
    run = Run("simulate", rc)
    mf, tcs = _solve(run)
    p, cfg = rc.params, rc.sim
    if cfg.N is not None:
        with run.stage("finite_population"):
            rep = simulate_finite_N(p, mf, cfg)
        lines = ["t,mean_speed,mean_field_speed"]
        lines.extend(f"{float(t)!r},{float(a)!r},{float(b)!r}"
                     for t, a, b in zip(rep.t, rep.mean_speed, rep.mf_speed))
        run.write("finite_population.csv", "\n".join(lines) + "\n")
        print(f"N={cfg.N}: sup gap {rep.sup:.6g}, rms gap {rep.rms:.6g}")
    else:
        with run.stage("simulate"):
            ens, stats = simulate_equilibrium(p, mf, tcs[0], cfg)
        with run.stage("write_paths"):
            run.write("stats.csv", stats_csv(stats))
            run.write(SAMPLE_FILE, _sample_csv(ens))
            summary = {"n_paths": stats.n,
                       "objectives": {k: {"mean": m, "se": s} for k, (m, s) in stats.objectives.items()},
                       "int_nuI_sq": {"mean": float(np.mean(ens.per_path["int_nuI_sq"]))},
                       "terminal_identity_max": float(np.abs(ens.per_path["terminal_identity"]).max())}
            run.write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
            if path_csv:
                for c in COLUMNS:
                    run.write(f"paths_{c}.csv", column_csv(ens, c))
        H = stats.objectives
        print(f"{stats.n} paths: H_I = {H['H_I'][0]:.6g} +- {H['H_I'][1]:.2g}, "
              f"H_B = {H['H_B'][0]:.6g} +- {H['H_B'][1]:.2g}")
    run.manifest()
    return EXIT_OK


def cmd_verify(rc: RunConfig, negative_control_only: bool = False) -> int:
    run = Run("verify", rc)
    mf, tcs = _solve(run)
    with run.stage("checks"):
        if negative_control_only:
            # the deliberately wrong coefficients checked as if they were the equilibrium
            mf_bad, tc_bad = scaled_gb_coefficients(rc.params, mf, tcs[0])
            cfg = rc.sim.__class__(n_paths=rc.verify.negative_control_paths, grid=rc.grid,
                                   seed=rc.sim.seed, record_every=rc.grid.M, n_full=0)
            reports = [check_gateaux(rc.params, mf_bad, tc_bad, cfg=cfg)]
            reports[0].name = "gateaux_at_scaled_g_b"
        else:
            reports = run_suite(rc.params, rc.verify, rc.trader_types[0], mf)
    run.write("checks.json", reports_json(reports))
    for r in reports:
        print(r.line())
    ok = suite_passed(reports)
    print("suite: " + ("PASS" if ok else "FAIL"))
    run.manifest()
    return EXIT_OK if ok else EXIT_CHECKS


def cmd_report(rc: RunConfig) -> int:
    run = Run("report", rc)
    with run.stage("figures"):
        figs = make_figures(rc.outputs, rc.figures)
    for name, text in figs.items():
        run.write(f"{name}.svg", text)
    run.manifest()
    print(f"wrote {', '.join(f'{n}.svg' for n in figs)} to {run.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfg-broker",
        description="Broker / informed-trader mean-field equilibrium: solve, simulate, verify, report.",
        epilog="Any config entry can be overridden as --section.key VALUE (VALUE parsed as JSON).")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="simulation seed (sim.seed)")
    common.add_argument("--out", help="output directory (outputs)")
    common.add_argument("--grid.M", dest="grid_M", type=int, help="number of grid intervals")
    common.add_argument("--sim.n_paths", dest="sim_n_paths", type=int, help="Monte Carlo paths")
    sub.add_parser("solve", parents=[common], help="solve the coefficient ODEs")
    sim = sub.add_parser("simulate", parents=[common], help="simulate the equilibrium")
    sim.add_argument("--path-csv", action="store_true",
                     help="also write one long-format CSV per recorded column")
    ver = sub.add_parser("verify", parents=[common], help="run the check suite")
    ver.add_argument("--negative-control", action="store_true",
                     help="only run the first-order check at deliberately wrong coefficients")
    sub.add_parser("report", parents=[common], help="write SVG figures")
    return parser


def _overrides(args, extra: list[str]) -> dict:
    out = {}
    it = iter(range(len(extra)))
    for i in it:
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognised argument {tok!r}")
        key, sep, val = tok[2:].partition("=")
        if not sep:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            val = extra[i + 1]
            next(it)
        out[key] = parse_value(val)
    if args.seed is not None:
        out["sim.seed"] = args.seed
    if args.out is not None:
        out["outputs"] = args.out
    if args.grid_M is not None:
        out["grid.M"] = args.grid_M
    if args.sim_n_paths is not None:
        out["sim.n_paths"] = args.sim_n_paths
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    configure_threads()
    try:
        rc = RunConfig.from_dict(load_config(args.config, _overrides(args, extra)))
        if args.command == "solve":
            return cmd_solve(rc)
        if args.command == "simulate":
            return cmd_simulate(rc, path_csv=args.path_csv)
        if args.command == "verify":
            return cmd_verify(rc, negative_control_only=args.negative_control)
        return cmd_report(rc)
    except (ConfigError, InvalidParameters, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MissingArtifact, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
