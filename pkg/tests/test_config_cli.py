import json
import subprocess
import sys

import numpy as np
import pytest

from mfg_broker.cli import main
from mfg_broker.config import ConfigError, RunConfig, load_config, parse_value, set_path
from mfg_broker.equilibrium import read_csv

SMALL = ["--grid.M", "200", "--sim.n_paths", "20", "--sim.record_every", "10"]


def _exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse rejects malformed flags itself
        return exc.code


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_defaults_build_a_run_config():
    rc = RunConfig.from_dict(load_config())
    assert rc.grid.M == 10_000 and rc.sim.n_paths == 10_000
    assert rc.params.b == 1e-3
    assert rc.trader_types[0] == rc.params.representative_type()
    assert rc.verify.negative_control


def test_file_then_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"model": {"b": 0.0}, "grid": {"M": 500}}))
    cfg = load_config(path, {"grid.M": 400, "sim.seed": 9})
    assert cfg["model"]["b"] == 0.0
    assert cfg["grid"]["M"] == 400
    assert cfg["sim"]["seed"] == 9


def test_horizon_is_carried_over():
    assert load_config(None, {"model.T": 2.0})["grid"]["T"] == 2.0
    assert load_config(None, {"grid.T": 0.5})["model"]["T"] == 0.5
    with pytest.raises(ConfigError):
        load_config(None, {"grid.T": 0.5, "model.T": 1.0})


@pytest.mark.parametrize("overrides", [
    {"model.zzz": 1}, {"grid.M": 1}, {"sim.measure": "physical"}, {"sim.record_every": 7},
    {"figures": ["fig9"]}, {"sim.n_paths": 0},
])
def test_invalid_configs(overrides):
    with pytest.raises(ConfigError):
        load_config(None, overrides)


def test_unknown_section():
    with pytest.raises(ConfigError):
        set_path({"model": {}}, "nothing.here", 1)


@pytest.mark.parametrize("text,value", [("3", 3), ("1e-3", 1e-3), ("true", True), ("null", None),
                                        ("[1, 2]", [1, 2]), ("out/dir", "out/dir")])
def test_parse_value(text, value):
    assert parse_value(text) == value


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def test_solve_writes_coefficients(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--out", str(out), "--grid.M", "2000"]) == 0
    for name in ("g_h_coefficients.csv", "trader_0_coefficients.csv"):
        header, data = read_csv((out / name).read_text())
        assert data.shape[0] == 2001
        assert data[0, 0] == 0.0 and data[-1, 0] == 1.0
    assert "solve" in _manifest(out)


def test_rerun_is_byte_identical(tmp_path):
    hashes = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["simulate", "--out", str(out), *SMALL, "--seed", "3"]) == 0
        m = _manifest(out)["simulate"]
        hashes.append((m["content_hash"], m["files"]))
    assert hashes[0] == hashes[1]


def test_seed_changes_outputs(tmp_path):
    files = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        main(["simulate", "--out", str(out), *SMALL, "--seed", seed])
        files.append(_manifest(out)["simulate"]["files"]["stats.csv"])
    assert files[0] != files[1]


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--out", str(out), *SMALL, "--path-csv"]) == 0
    lines = (out / "stats.csv").read_text().splitlines()
    assert len(lines) == 1 + (200 // 10 + 1) * 11
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_paths"] == 20
    assert summary["terminal_identity_max"] <= 1e-10
    path_lines = (out / "paths_nu_I.csv").read_text().splitlines()
    assert len(path_lines) == 1 + 20 * 21
    sample = (out / "sample_paths.csv").read_text().splitlines()
    assert len(sample) == 1 + 10 * 201


def test_zero_volatility_run(tmp_path):
    out = tmp_path / "still"
    cfg = tmp_path / "still.json"
    cfg.write_text(json.dumps({"model": {"sigma_alpha": 0.0, "sigma_S": 0.0},
                               "trader_types": [{"k_I": 5.0, "sigma_I": 0.0, "a_I": 1.0, "phi_I": 0.01}]}))
    assert main(["simulate", "--config", str(cfg), "--out", str(out), *SMALL]) == 0
    for line in (out / "stats.csv").read_text().splitlines()[1:]:
        t, col, mean, sd, se = line.split(",")
        if col.startswith("nu_"):
            assert float(mean) == 0.0 and float(sd) == 0.0


def test_finite_population_run(tmp_path):
    out = tmp_path / "pop"
    assert main(["simulate", "--out", str(out), *SMALL, "--sim.N", "100"]) == 0
    header, data = read_csv((out / "finite_population.csv").read_text())
    assert header == ["t", "mean_speed", "mean_field_speed"]
    assert data.shape == (201, 3)


def test_invalid_parameters_exit_2(tmp_path, capsys):
    code = main(["solve", "--out", str(tmp_path / "x"), "--grid.M", "100", "--model.b", "0.01"])
    assert code == 2
    assert "b <= 2 eta_I" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [["--model.nope", "1"], ["--grid.M=abc"], ["stray"], ["--sim.seed"]])
def test_bad_arguments_exit_2(tmp_path, extra):
    assert _exit_code(["solve", "--out", str(tmp_path / "x"), *extra]) == 2


def test_missing_inputs_exit_4(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path / "empty")]) == 4
    assert "g_h_coefficients.csv" in capsys.readouterr().err


def test_report_figures(tmp_path):
    out = tmp_path / "rep"
    main(["simulate", "--out", str(out), *SMALL])
    assert main(["report", "--out", str(out), *SMALL]) == 0
    for k in range(1, 5):
        text = (out / f"fig{k}.svg").read_text()
        assert text.startswith("<svg") and "nan" not in text
    assert "on [0.95, 1]" in (out / "fig2.svg").read_text()
    first = (out / "fig2.svg").read_bytes()
    main(["report", "--out", str(out), *SMALL])
    assert (out / "fig2.svg").read_bytes() == first


def test_negative_control_only_exits_nonzero(tmp_path):
    out = tmp_path / "nc"
    code = main(["verify", "--out", str(out), "--grid.M", "500", "--sim.record_every", "500",
                 "--verify.negative_control_paths", "1000", "--negative-control"])
    assert code == 3
    checks = json.loads((out / "checks.json").read_text())
    assert checks[0]["name"] == "gateaux_at_scaled_g_b"
    assert checks[0]["passed"] is False


def test_verify_solves_first(tmp_path):
    out = tmp_path / "ver"
    code = main(["verify", "--out", str(out), "--grid.M", "500", "--sim.record_every", "500",
                 "--verify.gateaux_paths", "500", "--verify.negative_control_paths", "500",
                 "--verify.concavity_pairs", "20", "--verify.fbsde_paths", "2"])
    assert code in (0, 3)
    assert (out / "g_h_coefficients.csv").is_file()
    names = [c["name"] for c in json.loads((out / "checks.json").read_text())]
    assert "gateaux_negative_control" in names
    assert set(_manifest(out)) == {"verify"}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mfg_broker", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "simulate", "verify", "report"):
        assert cmd in res.stdout


def test_manifest_sections_merge(tmp_path):
    out = tmp_path / "m"
    main(["solve", "--out", str(out), "--grid.M", "100"])
    main(["simulate", "--out", str(out), "--grid.M", "100", "--sim.n_paths", "4", "--sim.record_every", "10"])
    m = _manifest(out)
    assert set(m) == {"solve", "simulate"}
    assert m["solve"]["files"]["g_h_coefficients.csv"] == m["simulate"]["files"]["g_h_coefficients.csv"]
    assert np.isfinite(sum(m["simulate"]["wall_clock_s"].values()))
