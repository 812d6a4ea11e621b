"""Hand-written SVG line plots (no plotting dependency, deterministic bytes)."""

import os

import numpy as np

from .errors import DomainError

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 36, 48


def _fmt(x):
    return f"{x:.6g}"


def svg_line_plot(xs, ys, title, xlabel, ylabel):
    """Return a self-contained SVG document for one polyline."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size == 0 or xs.size != ys.size:
        raise DomainError("svg_line_plot: need equal-length, nonempty series")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    iw = _W - _ML - _MR
    ih = _H - _MT - _MB

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * iw

    def py(y):
        return _MT + (y1 - y) / (y1 - y0) * ih

    pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{iw}" height="{ih}" fill="none" stroke="#888"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        lines.append(
            f'<text x="{_fmt(px(xv))}" y="{_H - _MB + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_fmt(xv)}</text>'
        )
        lines.append(
            f'<text x="{_ML - 6}" y="{_fmt(py(yv))}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{_fmt(yv)}</text>'
        )
    lines.append(
        f'<text x="{_W // 2}" y="{_H - 10}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{xlabel}</text>'
    )
    lines.append(
        f'<text x="16" y="{_H // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {_H // 2})">{ylabel}</text>'
    )
    lines.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_plots(trace, out_dir):
    """Write the standard trace plots; returns the created file paths."""
    if not trace.samples:
        raise DomainError("emit_plots: empty trace")
    t = trace.times()
    area = trace.column("area")
    series = [
        ("q1.svg", trace.column("Q1"), "Q1 along the flow", "t", "Q1"),
        (
            "area_residual.svg",
            np.log(area / area[0]) - t,
            "Exponential area-law residual",
            "t",
            "log(area/area0) - t",
        ),
        ("hmax.svg", trace.column("Hmax"), "Max mean curvature", "t", "H_max"),
    ]
    paths = []
    os.makedirs(out_dir, exist_ok=True)
    for name, ys, title, xl, yl in series:
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg_line_plot(t, ys, title, xl, yl))
        paths.append(path)
    return paths
