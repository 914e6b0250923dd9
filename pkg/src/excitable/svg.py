"""Minimal fixed-style SVG renderings of line plots and spike rasters.

Illustrative only; the CSV files carry the data.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_plot", "raster_plot"]

WIDTH, HEIGHT = 720, 360
MARGIN = (60, 20, 30, 45)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _frame(title: str, xlabel: str, ylabel: str, xlim, ylim, ylog: bool = False) -> list[str]:
    left, right, top, bottom = MARGIN
    x0, x1, y0, y1 = left, WIDTH - right, top, HEIGHT - bottom
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{top - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xlim[0] + frac * (xlim[1] - xlim[0])
        px = x0 + frac * (x1 - x0)
        out.append(f'<text x="{px:.1f}" y="{y1 + 14}" text-anchor="middle">{xv:.4g}</text>')
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        label = f"1e{yv:.0f}" if ylog else f"{yv:.4g}"
        py = y1 - frac * (y1 - y0)
        out.append(f'<text x="{x0 - 4}" y="{py + 4:.1f}" text-anchor="end">{label}</text>')
    return out


def _scale(values, lim, p0, p1):
    span = lim[1] - lim[0] or 1.0
    return p0 + (np.asarray(values, dtype=float) - lim[0]) / span * (p1 - p0)


def _limits(arrays) -> tuple[float, float]:
    finite = [a[np.isfinite(a)] for a in arrays]
    finite = [a for a in finite if a.size]
    if not finite:
        return 0.0, 1.0
    lo = min(float(a.min()) for a in finite)
    hi = max(float(a.max()) for a in finite)
    return (lo - 0.5, hi + 0.5) if hi == lo else (lo, hi)


def line_plot(path, x, series, labels=None, title: str = "", xlabel: str = "", ylabel: str = "",
              ylog: bool = False, max_points: int = 4000) -> None:
    """Polyline per row of ``series`` against shared ``x``; ``ylog`` plots log10 of positive values."""
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(series, dtype=float))
    if ylog:
        with np.errstate(divide="ignore", invalid="ignore"):
            ys = np.where(ys > 0, np.log10(ys), np.nan)
    stride = max(1, math.ceil(x.size / max_points))
    x, ys = x[::stride], ys[:, ::stride]
    xlim, ylim = _limits([x]), _limits(list(ys))
    left, right, top, bottom = MARGIN
    out = _frame(title, xlabel, ylabel, xlim, ylim, ylog)
    px = _scale(x, xlim, left, WIDTH - right)
    for i, y in enumerate(ys):
        py = _scale(y, ylim, HEIGHT - bottom, top)
        points = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{COLORS[i % len(COLORS)]}" stroke-width="1" points="{points}"/>')
        if labels is not None and i < len(labels):
            out.append(f'<text x="{WIDTH - right - 4}" y="{top + 14 + 13 * i}" text-anchor="end" '
                       f'fill="{COLORS[i % len(COLORS)]}">{escape(str(labels[i]))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def raster_plot(path, event_times, t_end: float, trial_ids=None, title: str = "") -> None:
    """One row of ticks per trial."""
    rows = [np.asarray(t, dtype=float) for t in event_times]
    ids = list(trial_ids) if trial_ids is not None else list(range(len(rows)))
    n = max(1, len(rows))
    left, right, top, bottom = MARGIN
    out = _frame(title, "time (ms)", "trial", (0.0, t_end), (0.0, float(n)))
    height = (HEIGHT - bottom - top) / n
    for row, (tid, times) in enumerate(zip(ids, rows)):
        yc = top + (row + 0.5) * height
        out.append(f'<text x="{left - 4}" y="{yc + 4:.1f}" text-anchor="end">{tid}</text>')
        for px in _scale(times, (0.0, t_end), left, WIDTH - right):
            out.append(f'<line x1="{px:.1f}" x2="{px:.1f}" y1="{yc - 0.4 * height:.1f}" '
                       f'y2="{yc + 0.4 * height:.1f}" stroke="black"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
