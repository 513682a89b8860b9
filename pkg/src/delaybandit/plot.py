"""Self-contained SVG line charts of regret curves.

Output bytes depend only on the input data, so identical traces always give
identical files.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
WIDTH, HEIGHT = 720, 450
MARGIN = dict(left=80, right=170, top=30, bottom=60)
MAX_POINTS = 800


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * abs(step):
        ticks.append(round(v, 12))
        v += step
    return ticks


def _downsample(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.size <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, x.size - 1, MAX_POINTS).round().astype(int))
    return x[idx], y[idx]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def emit_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    xlabel: str = "slot",
    ylabel: str = "normalized regret",
    title: str | None = None,
) -> str:
    """Render one polyline per named (x, y) series as an SVG document."""
    if not series:
        raise ValueError("nothing to plot: no traces given")
    data = {k: (np.asarray(x, float), np.asarray(y, float)) for k, (x, y) in series.items()}
    xs = np.concatenate([x for x, _ in data.values()])
    ys = np.concatenate([y for _, y in data.values()])
    finite = np.isfinite(ys)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = (float(ys[finite].min()), float(ys[finite].max())) if finite.any() else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return MARGIN["top"] + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="18" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    # axes and ticks
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<rect x="{x0}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>')
    for v in _nice_ticks(x_lo, x_hi):
        px = sx(v)
        out.append(f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{y0 + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _nice_ticks(y_lo, y_hi):
        py = sy(v)
        out.append(f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<line x1="{x0}" y1="{_fmt(py)}" x2="{x0 + pw}" y2="{_fmt(py)}" '
                   'stroke="#dddddd" stroke-width="0.5"/>')
        out.append(f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    out.append(f'<text x="{x0 + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2:.2f})">{escape(ylabel)}</text>')

    # lines and legend
    lx = MARGIN["left"] + pw + 15
    for i, (name, (x, y)) in enumerate(data.items()):
        color = PALETTE[i % len(PALETTE)]
        x, y = _downsample(x, y)
        keep = np.isfinite(y)
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[keep], y[keep]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 10 + 20 * i
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_trace(path: str | Path, column: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Read (slot, value) from a trace or aggregate CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    if column is None:
        column = "mean_normalized_regret" if "mean_normalized_regret" in rows[0] else "normalized_regret"
    if column not in rows[0]:
        raise ValueError(f"{path}: no column {column!r}")
    return (np.array([float(r["slot"]) for r in rows]),
            np.array([float(r[column]) for r in rows]))


def trace_label(path: str | Path) -> str:
    stem = Path(path).stem
    return stem[: -len("_aggregate")] if stem.endswith("_aggregate") else stem


def plot_trace_files(paths: Sequence[str | Path], column: str | None = None,
                     title: str | None = None) -> str:
    if not paths:
        raise ValueError("nothing to plot: no trace files given")
    series = {trace_label(p): read_trace(p, column) for p in paths}
    return emit_plot(series, title=title)
