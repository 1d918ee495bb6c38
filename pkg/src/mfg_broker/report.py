"""Figures from solve/simulate artifacts."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .equilibrium import read_csv
from .svg import Figure

MF_FILE = "g_h_coefficients.csv"
SAMPLE_FILE = "sample_paths.csv"
ZOOM = (0.95, 1.0)


def trader_file(i: int) -> str:
    return f"trader_{i}_coefficients.csv"


class MissingArtifact(FileNotFoundError):
    pass


def _load(outdir: Path, name: str) -> dict:
    path = outdir / name
    if not path.is_file():
        raise MissingArtifact(f"missing input {path} (run the command that writes {name} first)")
    header, data = read_csv(path.read_text())
    return {h: data[:, j] for j, h in enumerate(header)}


def _sample(outdir: Path) -> dict:
    cols = _load(outdir, SAMPLE_FILE)
    ids = cols["path_id"].astype(int)
    return {int(i): {c: v[ids == i] for c, v in cols.items()} for i in np.unique(ids)}


def figure_inputs(name: str) -> tuple[str, ...]:
    return {"fig1": (SAMPLE_FILE,), "fig2": (MF_FILE,), "fig3": (trader_file(0),),
            "fig4": (SAMPLE_FILE,)}[name]


def fig1(outdir: Path) -> str:
    paths = _sample(outdir)
    ids = sorted(paths)[:2]
    fig = Figure("Sample paths of the price, the signal and the equilibrium controls", 3, 2)
    specs = [("S", "price S"), ("alpha", "common signal alpha"),
             ("nu_bar", "mean-field speed nu_bar"), ("nu_B", "broker speed nu_B"),
             ("Q_bar", "mean-field inventory Q_bar"), ("Q_barB", "broker net inventory Q_bar^B")]
    for k, (col, title) in enumerate(specs):
        pnl = fig.panel(k)
        pnl.title, pnl.xlabel = title, "t"
        for i in ids:
            pnl.line(paths[i]["t"], paths[i][col], label=f"path {i}")
    return fig.render()


def _coefficient_figure(title: str, cols: dict, groups) -> str:
    fig = Figure(title, 2, len(groups))
    for j, (names, label) in enumerate(groups):
        for row, window in enumerate((None, ZOOM)):
            pnl = fig.panel(row * len(groups) + j)
            pnl.title = label + ("" if window is None else f" on [{window[0]:g}, {window[1]:g}]")
            pnl.xlabel = "t"
            if window is not None:
                pnl.xlim = window
            for name in names:
                pnl.line(cols["t"], cols[name], label=name)
    return fig.render()


def fig2(outdir: Path) -> str:
    cols = _load(outdir, MF_FILE)
    groups = [(("g_a", "h_a"), "signal loadings"), (("g_b", "h_b"), "mean-field inventory loadings"),
              (("g_c", "h_c"), "broker inventory loadings")]
    return _coefficient_figure("Mean-field and broker coefficients", cols, groups)


def fig3(outdir: Path) -> str:
    cols = _load(outdir, trader_file(0))
    groups = [(("f_a", "f_aI"), "signal loadings"), (("f_b", "f_bI"), "inventory loadings"),
              (("f_c",), "broker inventory loading")]
    return _coefficient_figure("Individual trader coefficients", cols, groups)


def fig4(outdir: Path) -> str:
    paths = _sample(outdir)
    p = paths[sorted(paths)[0]]
    fig = Figure("Individual trader against the mean field", 1, 3)
    a = fig.panel(0)
    a.title, a.xlabel = "signals", "t"
    a.line(p["t"], p["alpha"], label="alpha")
    a.line(p["t"], p["alpha_I"], label="alpha_I")
    b = fig.panel(1)
    b.title, b.xlabel = "trading speed", "t"
    b.line(p["t"], p["nu_I"], label="nu_I")
    b.line(p["t"], p["nu_bar"], label="nu_bar", dashed=True)
    c = fig.panel(2)
    c.title, c.xlabel = "inventory", "t"
    c.line(p["t"], p["Q_I"], label="Q_I")
    c.line(p["t"], p["Q_bar"], label="Q_bar", dashed=True)
    return fig.render()


BUILDERS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4}


def missing_inputs(outdir: Path, figures) -> list[str]:
    need = sorted({f for name in figures for f in figure_inputs(name)})
    return [str(Path(outdir) / f) for f in need if not (Path(outdir) / f).is_file()]


def make_figures(outdir, figures=tuple(BUILDERS)) -> dict:
    """SVG text per requested figure, built from artifacts in ``outdir``."""
    outdir = Path(outdir)
    missing = missing_inputs(outdir, figures)
    if missing:
        raise MissingArtifact("missing inputs: " + ", ".join(missing))
    return {name: BUILDERS[name](outdir) for name in figures}
