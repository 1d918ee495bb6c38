"""A small, dependency-free SVG line-plot writer.

Output is deterministic: coordinates are printed with fixed precision and
no timestamps or random ids are emitted, so identical data give identical
bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str | None = None
    dashed: bool = False


@dataclass
class Panel:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    xlim: tuple | None = None
    ylim: tuple | None = None

    def line(self, x, y, label="", color=None, dashed=False) -> "Panel":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, color, dashed))
        return self

    def data_limits(self):
        xs = [s.x for s in self.series]
        if self.xlim is not None:
            x0, x1 = self.xlim
        else:
            x0 = min(float(np.nanmin(x)) for x in xs)
            x1 = max(float(np.nanmax(x)) for x in xs)
        if self.ylim is not None:
            y0, y1 = self.ylim
        else:
            ys = []
            for s in self.series:
                keep = (s.x >= x0) & (s.x <= x1) & np.isfinite(s.y)
                if keep.any():
                    ys.append(s.y[keep])
            y0 = min(float(v.min()) for v in ys) if ys else 0.0
            y1 = max(float(v.max()) for v in ys) if ys else 1.0
        if y1 <= y0:
            pad = abs(y0) * 0.05 or 1.0
            y0, y1 = y0 - pad, y1 + pad
        if x1 <= x0:
            x1 = x0 + 1.0
        return (x0, x1), (y0, y1)


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    span = hi - lo
    raw = span / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw * (1 - 1e-9))
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while first + k * step <= hi + 1e-9 * span:
        ticks.append(first + k * step)
        k += 1
    return ticks


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _thin(x: np.ndarray, y: np.ndarray, max_points: int):
    """Keep at most about ``max_points`` vertices, preserving each bucket's
    extremes so spikes stay visible."""
    n = x.size
    if n <= max_points:
        return x, y
    buckets = max_points // 2
    edges = np.linspace(0, n, buckets + 1).astype(int)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        if seg.size == 0:
            continue
        i0, i1 = a + int(np.nanargmin(seg)), a + int(np.nanargmax(seg))
        keep.extend(sorted({i0, i1}))
    keep = np.unique(np.array(keep + [0, n - 1]))
    return x[keep], y[keep]


class Figure:
    """Grid of panels rendered to one SVG document."""

    def __init__(self, title: str, rows: int, cols: int, panel_w: int = 360, panel_h: int = 240):
        self.title = title
        self.rows = rows
        self.cols = cols
        self.panel_w = panel_w
        self.panel_h = panel_h
        self.panels = [Panel() for _ in range(rows * cols)]

    def panel(self, i: int) -> Panel:
        return self.panels[i]

    def render(self, max_points: int = 1500) -> str:
        margin_l, margin_r, margin_t, margin_b = 64, 16, 28, 44
        cw = self.panel_w + margin_l + margin_r
        ch = self.panel_h + margin_t + margin_b
        W = cw * self.cols
        H = ch * self.rows + 32
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>']
        for idx, pnl in enumerate(self.panels):
            if not pnl.series:
                continue
            r, c = divmod(idx, self.cols)
            ox = c * cw + margin_l
            oy = 32 + r * ch + margin_t
            out.extend(self._panel(pnl, ox, oy, max_points))
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _panel(self, pnl: Panel, ox: float, oy: float, max_points: int) -> list[str]:
        w, h = self.panel_w, self.panel_h
        (x0, x1), (y0, y1) = pnl.data_limits()

        def sx(v):
            return ox + (v - x0) / (x1 - x0) * w

        def sy(v):
            return oy + h - (v - y0) / (y1 - y0) * h

        parts = [f'<text x="{ox + w / 2:.1f}" y="{oy - 8:.1f}" text-anchor="middle">{escape(pnl.title)}</text>',
                 f'<rect x="{ox:.1f}" y="{oy:.1f}" width="{w}" height="{h}" fill="none" stroke="#444"/>']
        for t in nice_ticks(x0, x1):
            X = sx(t)
            parts.append(f'<line x1="{X:.2f}" y1="{oy + h:.2f}" x2="{X:.2f}" y2="{oy + h + 4:.2f}" stroke="#444"/>')
            parts.append(f'<text x="{X:.2f}" y="{oy + h + 16:.2f}" text-anchor="middle">{_fmt_tick(t)}</text>')
        for t in nice_ticks(y0, y1):
            Y = sy(t)
            parts.append(f'<line x1="{ox - 4:.2f}" y1="{Y:.2f}" x2="{ox:.2f}" y2="{Y:.2f}" stroke="#444"/>')
            parts.append(f'<text x="{ox - 6:.2f}" y="{Y + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
        if y0 < 0 < y1:
            Y = sy(0.0)
            parts.append(f'<line x1="{ox:.2f}" y1="{Y:.2f}" x2="{ox + w:.2f}" y2="{Y:.2f}" '
                         'stroke="#bbb" stroke-dasharray="2,3"/>')
        if pnl.xlabel:
            parts.append(f'<text x="{ox + w / 2:.1f}" y="{oy + h + 32:.1f}" text-anchor="middle">'
                         f'{escape(pnl.xlabel)}</text>')
        if pnl.ylabel:
            parts.append(f'<text x="{ox - 50:.1f}" y="{oy + h / 2:.1f}" text-anchor="middle" '
                         f'transform="rotate(-90 {ox - 50:.1f} {oy + h / 2:.1f})">{escape(pnl.ylabel)}</text>')
        parts.append(f'<clipPath id="c{int(ox)}_{int(oy)}"><rect x="{ox:.1f}" y="{oy:.1f}" '
                     f'width="{w}" height="{h}"/></clipPath>')
        legend_y = oy + 12
        n_labels = sum(1 for s in pnl.series if s.label)
        legend = []
        for k, s in enumerate(pnl.series):
            color = s.color or PALETTE[k % len(PALETTE)]
            keep = (s.x >= x0) & (s.x <= x1) & np.isfinite(s.y)
            x, y = _thin(s.x[keep], s.y[keep], max_points)
            if x.size:
                pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
                dash = ' stroke-dasharray="5,3"' if s.dashed else ""
                parts.append(f'<polyline clip-path="url(#c{int(ox)}_{int(oy)})" fill="none" '
                             f'stroke="{color}" stroke-width="1.2"{dash} points="{pts}"/>')
            if s.label:
                legend.append(f'<line x1="{ox + w - 92:.1f}" y1="{legend_y - 4:.1f}" x2="{ox + w - 76:.1f}" '
                              f'y2="{legend_y - 4:.1f}" stroke="{color}" stroke-width="2"/>')
                legend.append(f'<text x="{ox + w - 72:.1f}" y="{legend_y:.1f}">{escape(s.label)}</text>')
                legend_y += 13
        if n_labels:
            parts.append(f'<rect x="{ox + w - 96:.1f}" y="{oy + 2:.1f}" width="94" height="{13 * n_labels + 4}" '
                         'fill="white" fill-opacity="0.85" stroke="#ccc"/>')
            parts.extend(legend)
        return parts
