"""Self-contained SVG line plots (axes, ticks, legend, stderr bands)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:g}" if abs(v) < 1e4 else f"{v:.0e}"


def line_svg(curves, title: str = "", xlabel: str = "iteration", ylabel: str = "mean SE (nats)",
             width: int = 720, height: int = 420, max_points: int = 800) -> str:
    """``curves`` is a list of ``(label, y, stderr_or_None)`` with x = 0..len(y)-1."""
    ml, mr, mt, mb = 64, 16, 36, 48
    pw, ph = width - ml - mr, height - mt - mb
    xmax = max(len(c[1]) for c in curves) - 1 if curves else 1
    hi_vals = [np.max(np.asarray(y) + (0 if e is None else np.asarray(e))) for _, y, e in curves]
    ymax = max(hi_vals + [1e-9])
    xt, yt = nice_ticks(0, max(xmax, 1)), nice_ticks(0, ymax)
    xr, yr = max(xt[-1], 1), yt[-1]

    def px(x):
        return ml + pw * x / xr

    def py(y):
        return mt + ph * (1 - y / yr)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>']
    for t in xt:
        parts.append(f'<line x1="{px(t):.1f}" y1="{mt}" x2="{px(t):.1f}" y2="{mt + ph}" stroke="#eee"/>')
        parts.append(f'<text x="{px(t):.1f}" y="{mt + ph + 14}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yt:
        parts.append(f'<line x1="{ml}" y1="{py(t):.1f}" x2="{ml + pw}" y2="{py(t):.1f}" stroke="#eee"/>')
        parts.append(f'<text x="{ml - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    parts.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text transform="translate(14 {mt + ph / 2}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')
    for k, (label, y, err) in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        y = np.asarray(y, dtype=float)
        idx = np.unique(np.linspace(0, len(y) - 1, min(len(y), max_points)).astype(int))
        if err is not None:
            e = np.asarray(err, dtype=float)
            upper = " ".join(f"{px(i):.1f},{py(min(y[i] + e[i], yr)):.1f}" for i in idx)
            lower = " ".join(f"{px(i):.1f},{py(max(y[i] - e[i], 0)):.1f}" for i in idx[::-1])
            parts.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{px(i):.1f},{py(y[i]):.1f}" for i in idx)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 16 * k
        parts.append(f'<line x1="{ml + pw - 170}" y1="{ly - 4}" x2="{ml + pw - 150}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw - 145}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_se_svg(path, curves, title: str = "", **kw) -> None:
    Path(path).write_text(line_svg(curves, title, **kw))
