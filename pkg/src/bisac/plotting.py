"""Minimal deterministic SVG polyline charts.

CSV files are the contract; these charts are a convenience for eyeballing runs.
Hand-rolled so the byte output is a pure function of the data.
"""

from __future__ import annotations

import math

_WIDTH, _HEIGHT = 720, 480
_MARGIN = 60


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _scaled(points, x_range, y_range):
    x0, x1 = x_range
    y0, y1 = y_range
    span_x = (x1 - x0) or 1.0
    span_y = (y1 - y0) or 1.0
    out = []
    for x, y in points:
        px = _MARGIN + (x - x0) / span_x * (_WIDTH - 2 * _MARGIN)
        py = _HEIGHT - _MARGIN - (y - y0) / span_y * (_HEIGHT - 2 * _MARGIN)
        out.append((px, py))
    return out


def polyline_chart(series: dict, title: str, x_label: str, y_label: str,
                   path: str, log_y: bool = False) -> None:
    """Write a multi-series line chart; series maps label -> [(x, y), ...]."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    cleaned = {}
    for label, pts in series.items():
        pts = [(float(x), float(y)) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
        if log_y:
            pts = [(x, math.log10(y)) for x, y in pts if y > 0]
        if pts:
            cleaned[label] = pts
    xs = [x for pts in cleaned.values() for x, _ in pts] or [0.0, 1.0]
    ys = [y for pts in cleaned.values() for _, y in pts] or [0.0, 1.0]
    x_range = (min(xs), max(xs))
    y_range = (min(ys), max(ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
        f'<text x="16" y="{_HEIGHT // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_HEIGHT // 2})">'
        f'{y_label}{" (log10)" if log_y else ""}</text>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2 * _MARGIN}" '
        f'height="{_HEIGHT - 2 * _MARGIN}" fill="none" stroke="#444"/>',
    ]
    for axis_frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_range[0] + axis_frac * (x_range[1] - x_range[0])
        yv = y_range[0] + axis_frac * (y_range[1] - y_range[0])
        px = _MARGIN + axis_frac * (_WIDTH - 2 * _MARGIN)
        py = _HEIGHT - _MARGIN - axis_frac * (_HEIGHT - 2 * _MARGIN)
        parts.append(f'<text x="{_fmt(px)}" y="{_HEIGHT - _MARGIN + 16}" '
                     f'text-anchor="middle" font-size="10">{_fmt(xv)}</text>')
        parts.append(f'<text x="{_MARGIN - 6}" y="{_fmt(py + 3)}" '
                     f'text-anchor="end" font-size="10">{_fmt(yv)}</text>')
    for idx, (label, pts) in enumerate(cleaned.items()):
        color = colors[idx % len(colors)]
        coords = " ".join(f"{_fmt(px)},{_fmt(py)}"
                          for px, py in _scaled(pts, x_range, y_range))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN - 4}" y="{_MARGIN + 16 + 14 * idx}" '
                     f'text-anchor="end" font-size="11" fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
