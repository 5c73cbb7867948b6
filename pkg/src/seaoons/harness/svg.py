"""Tiny SVG line-plot writer for regret curves."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _label(v: float, log: bool) -> str:
    if log:
        return "%.3g" % (10.0**v)
    return "%.3g" % v


def regret_svg(series, loglog: bool = False, width: int = 640, height: int = 400,
               title: str = "cumulative regret", xlabel: str = "t", ylabel: str = "regret") -> str:
    """``series`` is a list of ``(label, x, y)``. Log axes drop nonpositive points."""
    pad_l, pad_r, pad_t, pad_b = 70, 150, 30, 45
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    prepared = []
    for label, x, y in series:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y)
        if loglog:
            keep &= (x > 0) & (y > 0)
        x, y = x[keep], y[keep]
        if loglog:
            x, y = np.log10(x), np.log10(y)
        prepared.append((label, x, y))
    xs = np.concatenate([p[1] for p in prepared]) if prepared else np.zeros(0)
    ys = np.concatenate([p[2] for p in prepared]) if prepared else np.zeros(0)
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return pad_t + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad_l + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        X = sx(v)
        out.append(f'<line x1="{X:.1f}" y1="{pad_t + ph}" x2="{X:.1f}" y2="{pad_t + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{_label(v, loglog)}</text>')
    for v in _ticks(y0, y1):
        Y = sy(v)
        out.append(f'<line x1="{pad_l - 4}" y1="{Y:.1f}" x2="{pad_l}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{pad_l - 6}" y="{Y + 4:.1f}" text-anchor="end">{_label(v, loglog)}</text>')
    suffix = " (log)" if loglog else ""
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel + suffix)}</text>')
    out.append(f'<text x="14" y="{pad_t + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">{escape(ylabel + suffix)}</text>')
    for i, (label, x, y) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        if x.size > 2000:
            idx = np.unique(np.linspace(0, x.size - 1, 2000).astype(int))
            x, y = x[idx], y[idx]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad_t + 14 + 16 * i
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly - 4}" x2="{pad_l + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 34}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x`` over positive points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
