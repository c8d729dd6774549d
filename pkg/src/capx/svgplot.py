"""Minimal SVG line plots with a log-scaled x axis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from . import __version__

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


@dataclass
class Series:
    label: str
    x: list
    y: list
    dashed: bool = False
    color: str | None = None
    markers: bool = False


def _nice_ticks(lo: float, hi: float, n: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_plot(series, title: str, xlabel: str, ylabel: str,
              width: int = 720, height: int = 480) -> str:
    """Render series (positive x) as an SVG document string."""
    pts = [(x, y) for s in series for x, y in zip(s.x, s.y) if x > 0 and math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(x) for x, _ in pts]
    xmin, xmax = math.floor(min(lx)), math.ceil(max(lx))
    if xmax == xmin:
        xmax += 1
    ymin = min(0.0, min(y for _, y in pts))
    ymax = max(y for _, y in pts)
    yticks = _nice_ticks(ymin, ymax * 1.05 if ymax > 0 else 1.0)
    ymin, ymax = min(yticks[0], ymin), yticks[-1]

    left, right, top, bottom = 70, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (math.log10(x) - xmin) / (xmax - xmin) * pw

    def sy(y):
        return top + (ymax - y) / (ymax - ymin) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f"<!-- capx {__version__} -->",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for e in range(xmin, xmax + 1):
        x = sx(10.0 ** e)
        out.append(f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{top + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">1e{e}</text>')
    for t in yticks:
        y = sy(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        xy = [(sx(x), sy(y)) for x, y in zip(s.x, s.y) if x > 0 and math.isfinite(y)]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>')
        if s.markers:
            out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>' for x, y in xy)
        ly = top + 16 + 18 * i
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<line x1="{left + 12}" y1="{ly}" x2="{left + 40}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + 46}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def stem_plot(positions, weights, title: str, xlabel: str = "x",
              width: int = 720, height: int = 360) -> str:
    """Particle positions as vertical stems with height equal to weight."""
    if len(positions) == 0:
        raise ValueError("nothing to plot")
    xlo, xhi = min(positions), max(positions)
    pad = 0.05 * (xhi - xlo) if xhi > xlo else 1.0
    xlo, xhi = xlo - pad, xhi + pad
    yticks = _nice_ticks(0.0, max(weights) * 1.05)
    ymax = yticks[-1]
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return top + (ymax - y) / ymax * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f"<!-- capx {__version__} -->",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _nice_ticks(xlo, xhi, 8):
        out.append(f'<text x="{sx(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in yticks:
        out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    for c, w in zip(positions, weights):
        out.append(f'<line x1="{sx(c):.2f}" y1="{sy(0):.2f}" x2="{sx(c):.2f}" y2="{sy(w):.2f}" '
                   f'stroke="#1f77b4" stroke-width="2"/>')
        out.append(f'<circle cx="{sx(c):.2f}" cy="{sy(w):.2f}" r="3" fill="#1f77b4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
