"""Minimal self-contained SVG line charts (verification artifacts, so no
plotting dependency)."""

from __future__ import annotations

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
_W, _H = 900, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step / 2, step)


def line_chart_svg(path: str, t: np.ndarray, series: dict, title: str = "",
                   x_label: str = "t (s)", y_label: str = "I (A)") -> None:
    """Write an SVG with one polyline per named series over the common grid t."""
    t = np.asarray(t, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    y_all = np.concatenate(list(ys.values()))
    x0, x1 = float(t.min()), float(t.max())
    y0, y1 = float(y_all.min()), float(y_all.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(x):
        return _ML + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return _MT + (y1 - y) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for xv in _ticks(x0, x1):
        parts.append(f'<line x1="{sx(xv):.1f}" y1="{_MT}" x2="{sx(xv):.1f}" '
                     f'y2="{_H - _MB}" stroke="#dddddd"/>')
        parts.append(f'<text x="{sx(xv):.1f}" y="{_H - _MB + 16}" text-anchor="middle" '
                     f'font-size="11">{xv:g}</text>')
    for yv in _ticks(y0, y1):
        parts.append(f'<line x1="{_ML}" y1="{sy(yv):.1f}" x2="{_W - _MR}" '
                     f'y2="{sy(yv):.1f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{_ML - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{yv:g}</text>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
                 f'stroke="black"/>')
    for i, (name, y) in enumerate(ys.items()):
        pts = " ".join(f"{sx(xv):.2f},{sy(yv):.2f}" for xv, yv in zip(t, y))
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                     f'points="{pts}"/>')
        lx, ly = _W - _MR - 180, _MT + 18 + 18 * i
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 26}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 32}" y="{ly + 4}" font-size="12">{name}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" '
                 f'font-size="12">{x_label}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {_H / 2})">{y_label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
