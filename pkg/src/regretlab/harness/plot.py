"""Standalone SVG regret plots with a log-scale horizontal axis."""
from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

from ..bounds import MAX_CURVE_POINTS, RegretCertificate

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
COLORS = {"regret": "#1f77b4", "bound": "#d62728"}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(x: float) -> str:
    return f"{x:.3g}"


def series(cert: RegretCertificate) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """The curves to draw, each at most MAX_CURVE_POINTS points long."""
    pts = np.asarray(cert.bound_points, dtype=np.int64)
    idx = np.arange(pts.size)
    if pts.size > MAX_CURVE_POINTS:
        idx = np.unique(np.linspace(0, pts.size - 1, MAX_CURVE_POINTS).round().astype(int))
    xs = pts[idx]
    out = {"regret": (xs, np.asarray(cert.regret_curve)[xs - 1])}
    if cert.bound_curve.size:
        out["bound"] = (xs, np.asarray(cert.bound_curve)[idx])
    return out


def render_svg(cert: RegretCertificate, title: str | None = None) -> str:
    curves = series(cert)
    if curves["regret"][0].size == 0:
        raise ValueError("nothing to plot: empty curve")
    x_hi = max(math.log10(float(curves["regret"][0][-1])), 1.0)
    ys = np.concatenate([y for _, y in curves.values()])
    y_lo = min(0.0, float(ys.min()))
    y_hi = float(ys.max())
    if not y_hi > y_lo:
        y_hi = y_lo + 1.0
    y_hi += 0.05 * (y_hi - y_lo)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(t):
        return LEFT + pw * math.log10(t) / x_hi

    def py(v):
        return TOP + ph * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
             f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    heading = f"{title or cert.algorithm}: regret vs bound, T={cert.T}"
    parts.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle">{escape(heading)}</text>')
    parts.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for k in range(int(math.floor(x_hi)) + 1):
        x = px(10 ** k)
        parts.append(f'<line x1="{_fmt(x)}" y1="{TOP + ph}" x2="{_fmt(x)}" y2="{TOP + ph + 5}" stroke="#444"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" text-anchor="middle">1e{k}</text>')
    for k in range(5):
        v = y_lo + (y_hi - y_lo) * k / 4
        y = py(v)
        parts.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="#444"/>')
        parts.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    parts.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">T (log scale)</text>')
    for i, (name, (xs, vals)) in enumerate(curves.items()):
        coords = " ".join(f"{_fmt(px(float(t)))},{_fmt(py(float(v)))}" for t, v in zip(xs, vals))
        parts.append(f'<polyline class="{name}" fill="none" stroke="{COLORS[name]}" '
                     f'stroke-width="1.5" points="{coords}"/>')
        ly = TOP + 14 + 14 * i
        parts.append(f'<line x1="{LEFT + 10}" y1="{ly}" x2="{LEFT + 30}" y2="{ly}" stroke="{COLORS[name]}" stroke-width="1.5"/>')
        parts.append(f'<text x="{LEFT + 35}" y="{ly + 4}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg_plot(cert: RegretCertificate, path, title: str | None = None) -> Path:
    path = Path(path)
    path.write_text(render_svg(cert, title), encoding="utf-8")
    return path
