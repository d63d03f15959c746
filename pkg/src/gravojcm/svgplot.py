"""Minimal self-contained SVG line plots.

Hand-rolled on purpose: the figures only display results, and emitting the
markup directly keeps output byte-deterministic across environments (no
library version or font probing in the files).
"""

from __future__ import annotations

import math

import numpy as np

_W, _H = 720, 440
_ML, _MR, _MT, _MB = 72, 16, 40, 52
_COLORS = ("#1f77b4", "#d62728", "#2ca02c")


def _fmt(x: float) -> str:
    return format(x, ".2f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(step):
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out or [lo]


def line_plot_svg(x: np.ndarray, series: list[tuple[str, np.ndarray]], title: str,
                  xlabel: str, ylabel: str) -> str:
    """Render labeled polylines; non-finite samples break the line."""
    x = np.asarray(x, dtype=float)
    finite_vals = np.concatenate([np.asarray(y, dtype=float)[np.isfinite(y)] for _, y in series] or [np.array([0.0])])
    if finite_vals.size == 0:
        finite_vals = np.array([0.0])
    ylo, yhi = float(finite_vals.min()), float(finite_vals.max())
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(v):
        return _ML + pw * (v - xlo) / (xhi - xlo)

    def sy(v):
        return _MT + ph * (1.0 - (v - ylo) / (yhi - ylo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="22" text-anchor="middle" font-size="15">{title}</text>',
    ]
    for tv in _ticks(xlo, xhi):
        px = sx(tv)
        out.append(f'<line x1="{_fmt(px)}" y1="{_MT + ph}" x2="{_fmt(px)}" y2="{_MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_MT + ph + 20}" text-anchor="middle">{tv:g}</text>')
    for tv in _ticks(ylo, yhi):
        py = sy(tv)
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{_fmt(py + 4)}" text-anchor="end">{tv:g}</text>')
        out.append(f'<line x1="{_ML}" y1="{_fmt(py)}" x2="{_ML + pw}" y2="{_fmt(py)}" stroke="#dddddd"/>')
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for idx, (label, y) in enumerate(series):
        y = np.asarray(y, dtype=float)
        color = _COLORS[idx % len(_COLORS)]
        pts = []
        segments = []
        for xi, yi in zip(x, y):
            if math.isfinite(yi):
                pts.append(f"{_fmt(sx(xi))},{_fmt(sy(yi))}")
            elif pts:
                segments.append(pts)
                pts = []
        if pts:
            segments.append(pts)
        for seg in segments:
            out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        if len(series) > 1:
            ly = _MT + 16 + 16 * idx
            out.append(f'<line x1="{_ML + pw - 120}" y1="{ly - 4}" x2="{_ML + pw - 96}" y2="{ly - 4}" stroke="{color}" stroke-width="1.2"/>')
            out.append(f'<text x="{_ML + pw - 90}" y="{ly}">{label}</text>')
    out.append(f'<text x="{_ML + pw / 2:.0f}" y="{_H - 14}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{_MT + ph / 2:.0f}" text-anchor="middle" transform="rotate(-90 18 {_MT + ph / 2:.0f})">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
