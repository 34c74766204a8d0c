"""Deterministic SVG line plots of CSV columns.

The output depends only on the CSV content and the plot spec: fixed canvas,
fixed number formatting, no timestamps, so identical inputs give identical
bytes.
"""

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidParameterError
from .io import atomic_open
from .records import read_csv_columns

__all__ = ["emit_plot", "PlotError"]

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotError(InvalidParameterError):
    pass


def _fmt(v):
    return f"{v:.6g}"


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6 or 1)
        return [float(e) for e in range(a, b + 1, step) if lo - 1e-9 <= e <= hi + 1e-9]
    return [float(v) for v in np.linspace(lo, hi, 6)]


def _range(vals):
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if hi - lo <= 1e-300 * max(abs(lo), 1.0):
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def emit_plot(csv_path, spec, svg_path=None):
    """Render columns of ``csv_path`` as an SVG line plot.

    ``spec`` keys: ``x`` (column name), ``y`` (column name or list),
    optional ``logx``, ``logy`` (bool), ``title``, ``output``.

    Raises
    ------
    PlotError
        A requested column is missing (the message lists the available
        ones) or no finite points remain after the axis transforms.
    """
    cols = read_csv_columns(csv_path)
    x_name = spec.get("x")
    y_names = spec.get("y")
    if isinstance(y_names, str):
        y_names = [y_names]
    if not x_name or not y_names:
        raise PlotError("plot spec needs 'x' and 'y'")
    missing = [c for c in [x_name, *y_names] if c not in cols]
    if missing:
        raise PlotError(f"missing columns {missing}; available: {sorted(cols)}")
    logx, logy = bool(spec.get("logx", False)), bool(spec.get("logy", False))

    x = np.asarray(cols[x_name], dtype=float)
    series = []
    for name in y_names:
        y = np.asarray(cols[name], dtype=float)
        xx, yy = x.copy(), y.copy()
        ok = np.isfinite(xx) & np.isfinite(yy)
        if logx:
            ok &= xx > 0
        if logy:
            ok &= yy > 0
        xx, yy = xx[ok], yy[ok]
        if logx:
            xx = np.log10(xx)
        if logy:
            yy = np.log10(yy)
        series.append((name, xx, yy))
    if not any(s[1].size for s in series):
        raise PlotError("no finite points to plot")
    xlo, xhi = _range(np.concatenate([s[1] for s in series]))
    ylo, yhi = _range(np.concatenate([s[2] for s in series]))

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return MARGIN["top"] + ph - (v - ylo) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    title = spec.get("title", f"{', '.join(y_names)} vs {x_name}")
    out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">'
               f'{escape(title)}</text>')
    for v in _ticks(xlo, xhi, logx):
        label = f"1e{int(v)}" if logx else _fmt(v)
        out.append(f'<line x1="{px(v):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(v):.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{MARGIN["top"] + ph + 20}" text-anchor="middle" '
                   f'font-size="11">{label}</text>')
    for v in _ticks(ylo, yhi, logy):
        label = f"1e{int(v)}" if logy else _fmt(v)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(v):.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(v) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{label}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="13">{escape(x_name)}{" (log)" if logx else ""}</text>')
    for i, (name, xx, yy) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xx, yy))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{MARGIN["left"] + 10}" y="{MARGIN["top"] + 16 + 15 * i}" '
                   f'font-size="12" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")

    if svg_path is None:
        svg_path = spec.get("output") or str(Path(csv_path).with_suffix(".svg"))
    with atomic_open(svg_path) as fh:
        fh.write("\n".join(out) + "\n")
    return str(svg_path)
