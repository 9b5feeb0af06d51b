"""Deterministic CSV and SVG emission.

CSV is the canonical artifact: full-precision floats (shortest round-trip
representation), provenance as '#'-prefixed header comments, byte-identical
output for identical inputs.  SVG plots are optional, self-contained
documents written directly (no plotting backend), mirroring the box-plot /
bar-chart layout used for the benchmark figures.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping, Sequence

import numpy as np


def format_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(
    path: str,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    header_comments: Mapping[str, object] | None = None,
) -> str:
    """Write rows as CSV with optional provenance comments; returns the path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as f:
        if header_comments:
            for key, value in header_comments.items():
                f.write(f"# {key} = {format_cell(value)}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(format_cell(x) for x in row) + "\n")
    return path


def read_csv_column(path: str, column: str) -> np.ndarray:
    """Read one numeric column from a CSV file (comment lines ignored)."""
    import csv

    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].lstrip().startswith("#")]
    header = rows[0]
    if column not in header:
        raise KeyError(f"column {column!r} not in {path} (have {header})")
    idx = header.index(column)
    return np.array([float(r[idx]) for r in rows[1:]])


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Svg:
    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="black", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def rect(self, x, y, w, h, fill="none", color="black"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{color}"/>'
        )

    def polygon(self, pts, fill="black"):
        s = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(f'<polygon points="{s}" fill="{fill}"/>')

    def text(self, x, y, s, size=11, anchor="middle"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}">{s}</text>'
        )

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(self.parts) + "\n</svg>\n")
        return path


def svg_index_boxplot(
    path: str,
    samples: Sequence[np.ndarray],
    markers: Sequence[float],
    y_max: float,
    title: str,
) -> str:
    """One box (quartiles, median, min/max whiskers) per group of selected
    indices, with a triangle marker per group (the ideal index)."""
    n = len(samples)
    width, height = max(360, 60 * n + 120), 340
    left, right, top, bottom = 60, 20, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom

    def ypix(val: float) -> float:
        return top + plot_h * (1.0 - val / y_max)

    svg = _Svg(width, height)
    svg.text(width / 2, 22, title, size=13)
    svg.line(left, top, left, top + plot_h)
    svg.line(left, top + plot_h, left + plot_w, top + plot_h)
    for tick in range(0, int(y_max) + 1, max(1, int(y_max) // 6)):
        svg.line(left - 4, ypix(tick), left, ypix(tick))
        svg.text(left - 8, ypix(tick) + 4, str(tick), size=10, anchor="end")
    box_w = plot_w / max(n, 1) * 0.5
    for i, (vals, mark) in enumerate(zip(samples, markers)):
        cx = left + plot_w * (i + 0.5) / n
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        lo, hi = float(np.min(vals)), float(np.max(vals))
        svg.line(cx, ypix(lo), cx, ypix(q1))
        svg.line(cx, ypix(q3), cx, ypix(hi))
        svg.rect(cx - box_w / 2, ypix(q3), box_w, ypix(q1) - ypix(q3), fill="#dce6f2")
        svg.line(cx - box_w / 2, ypix(med), cx + box_w / 2, ypix(med), color="#1f4e79", width=2)
        ty = ypix(mark)
        svg.polygon([(cx - 5, ty + 5), (cx + 5, ty + 5), (cx, ty - 5)], fill="#c00000")
        svg.text(cx, top + plot_h + 16, str(i + 1), size=10)
    svg.text(left + plot_w / 2, height - 12, "model", size=11)
    return svg.save(path)


def svg_bar_chart(
    path: str,
    values: Sequence[float],
    title: str,
    hline: float | None = None,
) -> str:
    """Bar chart over model index, optional reference line."""
    n = len(values)
    width, height = max(360, 60 * n + 120), 300
    left, right, top, bottom = 60, 20, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    vmax = max(max(values, default=1.0), hline or 0.0, 1.0) * 1.15

    def ypix(val: float) -> float:
        return top + plot_h * (1.0 - val / vmax)

    svg = _Svg(width, height)
    svg.text(width / 2, 22, title, size=13)
    svg.line(left, top, left, top + plot_h)
    svg.line(left, top + plot_h, left + plot_w, top + plot_h)
    for frac in (0.0, 0.5, 1.0):
        val = frac * vmax
        svg.line(left - 4, ypix(val), left, ypix(val))
        svg.text(left - 8, ypix(val) + 4, f"{val:.1f}", size=10, anchor="end")
    bar_w = plot_w / max(n, 1) * 0.6
    for i, val in enumerate(values):
        cx = left + plot_w * (i + 0.5) / n
        svg.rect(cx - bar_w / 2, ypix(val), bar_w, ypix(0.0) - ypix(val), fill="#9dc3e6")
        svg.text(cx, top + plot_h + 16, str(i + 1), size=10)
    if hline is not None:
        svg.line(left, ypix(hline), left + plot_w, ypix(hline), color="#c00000")
    svg.text(left + plot_w / 2, height - 12, "model", size=11)
    return svg.save(path)
