"""Minimal deterministic SVG plots (histogram, line, line with error band).

Output depends only on the spec: fixed 800x600 canvas, fixed styling, and all
coordinates printed with two decimals, so identical specs give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptySeries, UsageError

WIDTH, HEIGHT = 800, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 30, 50, 70
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"]


@dataclass
class Series:
    name: str
    x: list
    y: list


@dataclass
class PlotSpec:
    kind: str  # "histogram" | "line" | "line-with-band"
    series: list = field(default_factory=list)
    band: tuple | None = None  # (lower, upper) for the first series
    bin_edges: list | None = None  # histogram only; series[0].y holds the counts
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    path: str | None = None

    def validate(self) -> None:
        if self.kind not in ("histogram", "line", "line-with-band"):
            raise UsageError(f"unknown plot kind {self.kind!r}")
        if not self.series or any(len(s.y) == 0 for s in self.series):
            raise EmptySeries("plot has no data points")
        for s in self.series:
            if len(s.x) != len(s.y):
                raise UsageError(f"series {s.name!r}: x and y lengths differ")
        if self.kind == "line-with-band":
            if self.band is None or any(len(b) != len(self.series[0].y) for b in self.band):
                raise UsageError("line-with-band needs a band matching the first series")
        elif self.band is not None:
            raise UsageError("band is only allowed for line-with-band plots")
        if self.kind == "histogram":
            if self.bin_edges is None or len(self.bin_edges) != len(self.series[0].y) + 1:
                raise UsageError("histogram needs len(counts) + 1 bin edges")


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _label(v: float) -> str:
    return f"{v:.4g}"


def _range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def render_svg(spec: PlotSpec) -> str:
    spec.validate()
    if spec.kind == "histogram":
        xs = np.asarray(spec.bin_edges, dtype=float)
        ys = np.append(np.asarray(spec.series[0].y, dtype=float), 0.0)
    else:
        xs = np.concatenate([np.asarray(s.x, dtype=float) for s in spec.series])
        ys = np.concatenate([np.asarray(s.y, dtype=float) for s in spec.series])
        if spec.band is not None:
            ys = np.concatenate([ys, np.asarray(spec.band[0], float), np.asarray(spec.band[1], float)])
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_T + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if spec.title:
        out.append(f'<text x="{WIDTH // 2}" y="30" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="16">{escape(spec.title)}</text>')

    if spec.kind == "histogram":
        counts = spec.series[0].y
        for i, c in enumerate(counts):
            left, right = sx(spec.bin_edges[i]), sx(spec.bin_edges[i + 1])
            top, bottom = sy(c), sy(0.0)
            out.append(f'<rect class="bin" x="{_f(left)}" y="{_f(top)}" width="{_f(right - left)}" '
                       f'height="{_f(bottom - top)}" fill="{COLORS[0]}" stroke="#ffffff" stroke-width="0.5"/>')
    else:
        if spec.band is not None:
            lower, upper = spec.band
            x = spec.series[0].x
            pts = [(sx(a), sy(b)) for a, b in zip(x, upper)]
            pts += [(sx(a), sy(b)) for a, b in zip(reversed(x), reversed(lower))]
            coords = " ".join(f"{_f(a)},{_f(b)}" for a, b in pts)
            out.append(f'<polygon class="band" points="{coords}" fill="{COLORS[0]}" '
                       f'fill-opacity="0.2" stroke="none"/>')
        for i, s in enumerate(spec.series):
            coords = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(s.x, s.y))
            out.append(f'<polyline class="series" points="{coords}" fill="none" '
                       f'stroke="{COLORS[i % len(COLORS)]}" stroke-width="1.5"/>')

    # axes, ticks, labels
    ax_y = MARGIN_T + ph
    out.append(f'<line x1="{MARGIN_L}" y1="{ax_y}" x2="{MARGIN_L + pw}" y2="{ax_y}" stroke="#000000"/>')
    out.append(f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{ax_y}" stroke="#000000"/>')
    for t in _nice_ticks(x0, x1):
        out.append(f'<text x="{_f(sx(t))}" y="{ax_y + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_label(t)}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<text x="{MARGIN_L - 8}" y="{_f(sy(t) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_label(t)}</text>')
    if spec.xlabel:
        out.append(f'<text x="{MARGIN_L + pw // 2}" y="{HEIGHT - 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{escape(spec.xlabel)}</text>')
    if spec.ylabel:
        cy = MARGIN_T + ph // 2
        out.append(f'<text x="20" y="{cy}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="13" transform="rotate(-90 20 {cy})">{escape(spec.ylabel)}</text>')
    if len(spec.series) > 1:
        for i, s in enumerate(spec.series):
            y = MARGIN_T + 15 * i
            out.append(f'<text x="{MARGIN_L + pw - 5}" y="{y + 10}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="11" '
                       f'fill="{COLORS[i % len(COLORS)]}">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plot(spec: PlotSpec, path=None) -> Path:
    target = path or spec.path
    if target is None:
        raise UsageError("no output path for plot")
    svg = render_svg(spec)
    Path(target).write_text(svg)
    return Path(target)


def histogram_spec(hist, title="", xlabel="value", path=None) -> PlotSpec:
    centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
    return PlotSpec("histogram", [Series("counts", centers.tolist(), hist.counts.tolist())],
                    bin_edges=hist.bin_edges.tolist(), xlabel=xlabel, ylabel="count",
                    title=title, path=path)


def gap_spec(report, k_max=None, title="", path=None) -> PlotSpec:
    K = report.k_max if k_max is None else min(k_max, report.k_max)
    ks = list(range(1, K + 1))
    gap = report.gap[:K]
    se = report.se[:K]
    return PlotSpec("line-with-band", [Series("gap", ks, gap.tolist())],
                    band=((gap - se).tolist(), (gap + se).tolist()),
                    xlabel="number of principal components", ylabel="Gap",
                    title=title, path=path)
