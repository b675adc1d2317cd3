"""Minimal SVG line charts written by hand.

The first CSV column is the x axis; every other column whose cells all parse
as numbers becomes one line. Non-numeric columns (e.g. ``units``) are skipped.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import DataError

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=30, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def read_series(path) -> tuple[str, list[float], dict[str, list[float]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i, r) for i, r in enumerate(rows, start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty CSV")
    _, header = rows[0]
    data = rows[1:]
    if not data:
        raise DataError(f"{path}: no data rows")
    cols = [[] for _ in header]
    for lineno, r in data:
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        for j, cell in enumerate(r):
            cols[j].append((lineno, cell.strip()))

    def numeric(col):
        try:
            return [float(c) for _, c in col]
        except ValueError:
            return None

    x = numeric(cols[0])
    if x is None:
        bad = next((n, c) for n, c in cols[0] if not _is_float(c))
        raise DataError(f"{path}:{bad[0]}: x value {bad[1]!r} is not a number")
    series = {}
    for name, col in zip(header[1:], cols[1:]):
        vals = numeric(col)
        if vals is not None:
            series[name.strip()] = vals
    if not series:
        raise DataError(f"{path}: no numeric columns to plot")
    return header[0].strip(), x, series


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _range(values):
    finite = [v for v in values if math.isfinite(v)]
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_chart_svg(x, series: dict[str, list[float]], title: str = "", xlabel: str = "",
                   ylabel: str = "", log_x: bool = False, log_y: bool = False) -> str:
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    ty = (lambda v: math.log10(v)) if log_y else (lambda v: v)
    xs = [tx(v) for v in x]
    ys = {k: [ty(v) for v in vals] for k, vals in series.items()}
    x0, x1 = _range(xs)
    y0, y1 = _range([v for vals in ys.values() for v in vals])
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        # data-* attributes record the axis ranges in data units (log10 if log axis)
        f'<rect class="plot-area" x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="black" data-x-min="{x0!r}" data-x-max="{x1!r}" data-y-min="{y0!r}" '
        f'data-y-max="{y1!r}" data-log-x="{int(log_x)}" data-log-y="{int(log_y)}"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        lx = 10 ** fx if log_x else fx
        ly = 10 ** fy if log_y else fy
        out.append(f'<line x1="{px(fx):.2f}" y1="{top + ph}" x2="{px(fx):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(fx):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{lx:.4g}</text>')
        out.append(f'<line x1="{left - 5}" y1="{py(fy):.2f}" x2="{left}" y2="{py(fy):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(fy) + 4:.2f}" font-size="11" text-anchor="end">{ly:.4g}</text>')
    for n, (name, vals) in enumerate(ys.items()):
        color = COLORS[n % len(COLORS)]
        pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(xs, vals)
                       if math.isfinite(a) and math.isfinite(b))
        out.append(f'<polyline class="series" data-name="{escape(name)}" points="{pts}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 18 * n
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-size="12">{escape(name)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" font-size="14" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 10}" font-size="12" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 15 {top + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(csv_path, out_path, title: str | None = None) -> Path:
    """Render one CSV to SVG. Nothing is written if the CSV is unusable."""
    xname, x, series = read_series(csv_path)
    # scaling tables read best on log-log axes
    log = xname == "seq_len" and all(v > 0 for v in x) and all(
        v > 0 for vals in series.values() for v in vals)
    if xname == "epoch":
        series = {k: v for k, v in series.items() if k != "seconds"} or series
    if log:
        series = {k: v for k, v in series.items() if "seconds" in k} or series
    svg = line_chart_svg(x, series, title or Path(csv_path).stem, xname,
                         "value" if not log else "seconds", log_x=log, log_y=log)
    out_path = Path(out_path)
    out_path.write_text(svg)
    return out_path
