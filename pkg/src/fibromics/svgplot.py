"""Minimal deterministic SVG charts: grouped boxplots and fitted curves.

Output is plain SVG text with fixed-precision coordinates so identical
inputs produce identical bytes; no rendering backend is involved.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

_WIDTH = 640
_HEIGHT = 420
_MARGIN_L = 70
_MARGIN_R = 20
_MARGIN_T = 40
_MARGIN_B = 60
_STYLE = 'font-family="sans-serif" font-size="12"'


def _c(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(x: float) -> str:
    return f"{x:.4g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12:
        out.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return out


class _Frame:
    """Maps data coordinates into the plot rectangle and draws the axes."""

    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float]):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x: float) -> float:
        span = _WIDTH - _MARGIN_L - _MARGIN_R
        return _MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * span

    def py(self, y: float) -> float:
        span = _HEIGHT - _MARGIN_T - _MARGIN_B
        return _HEIGHT - _MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * span

    def axes(self, title: str, x_label: str, y_label: str, x_ticks: bool = True) -> list[str]:
        parts = [
            f'<rect x="{_c(_MARGIN_L)}" y="{_c(_MARGIN_T)}" '
            f'width="{_c(_WIDTH - _MARGIN_L - _MARGIN_R)}" '
            f'height="{_c(_HEIGHT - _MARGIN_T - _MARGIN_B)}" '
            'fill="none" stroke="black" stroke-width="1"/>',
            f'<text x="{_c(_WIDTH / 2)}" y="{_c(_MARGIN_T - 14)}" '
            f'text-anchor="middle" {_STYLE} font-size="15">{title}</text>',
            f'<text x="{_c(_WIDTH / 2)}" y="{_c(_HEIGHT - 12)}" '
            f'text-anchor="middle" {_STYLE}>{x_label}</text>',
            f'<text x="16" y="{_c(_HEIGHT / 2)}" text-anchor="middle" {_STYLE} '
            f'transform="rotate(-90 16 {_c(_HEIGHT / 2)})">{y_label}</text>',
        ]
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            parts.append(
                f'<line x1="{_c(_MARGIN_L - 5)}" y1="{_c(y)}" x2="{_c(_MARGIN_L)}" '
                f'y2="{_c(y)}" stroke="black" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_c(_MARGIN_L - 9)}" y="{_c(y + 4)}" '
                f'text-anchor="end" {_STYLE}>{_tick_label(t)}</text>'
            )
        if x_ticks:
            for t in _ticks(self.x0, self.x1):
                x = self.px(t)
                parts.append(
                    f'<line x1="{_c(x)}" y1="{_c(_HEIGHT - _MARGIN_B)}" x2="{_c(x)}" '
                    f'y2="{_c(_HEIGHT - _MARGIN_B + 5)}" stroke="black" stroke-width="1"/>'
                )
                parts.append(
                    f'<text x="{_c(x)}" y="{_c(_HEIGHT - _MARGIN_B + 18)}" '
                    f'text-anchor="middle" {_STYLE}>{_tick_label(t)}</text>'
                )
        return parts


def _document(parts: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">\n'
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>\n'
    )
    return head + "\n".join(parts) + "\n</svg>\n"


def _quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """Median and linearly interpolated quartiles of sorted data."""
    s = sorted(values)
    n = len(s)

    def q(p: float) -> float:
        pos = p * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return s[lo] * (1 - frac) + s[hi] * frac

    return q(0.25), q(0.5), q(0.75)


def boxplot(
    groups: Sequence[tuple[str, Sequence[float]]],
    *,
    title: str,
    y_label: str,
    y_range: tuple[float, float] | None = None,
) -> str:
    """Boxplot per group: quartile box, median line, min/max whiskers."""
    if not groups or any(len(v) == 0 for _n, v in groups):
        raise ValueError("every boxplot group needs at least one value")
    if y_range is None:
        allv = [v for _n, vals in groups for v in vals]
        lo, hi = min(allv), max(allv)
        pad = 0.05 * (hi - lo) if hi > lo else 0.5
        y_range = (lo - pad, hi + pad)
    frame = _Frame((0.0, float(len(groups))), y_range)
    parts = frame.axes(title, "", y_label, x_ticks=False)
    for i, (name, values) in enumerate(groups):
        cx = frame.px(i + 0.5)
        half = 0.3 * (frame.px(1.0) - frame.px(0.0))
        q1, med, q3 = _quartiles(values)
        vmin, vmax = min(values), max(values)
        for a, b in ((vmin, q1), (q3, vmax)):
            parts.append(
                f'<line x1="{_c(cx)}" y1="{_c(frame.py(a))}" x2="{_c(cx)}" '
                f'y2="{_c(frame.py(b))}" stroke="black" stroke-width="1"/>'
            )
        for w in (vmin, vmax):
            parts.append(
                f'<line x1="{_c(cx - half / 2)}" y1="{_c(frame.py(w))}" '
                f'x2="{_c(cx + half / 2)}" y2="{_c(frame.py(w))}" '
                'stroke="black" stroke-width="1"/>'
            )
        parts.append(
            f'<rect x="{_c(cx - half)}" y="{_c(frame.py(q3))}" width="{_c(2 * half)}" '
            f'height="{_c(frame.py(q1) - frame.py(q3))}" '
            'fill="#9ecae1" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{_c(cx - half)}" y1="{_c(frame.py(med))}" x2="{_c(cx + half)}" '
            f'y2="{_c(frame.py(med))}" stroke="black" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_c(cx)}" y="{_c(_HEIGHT - _MARGIN_B + 18)}" '
            f'text-anchor="middle" {_STYLE}>{name}</text>'
        )
    return _document(parts)


def curve_plot(
    points: Sequence[tuple[float, float]],
    curve: Callable[[float], float],
    *,
    title: str,
    x_label: str,
    y_label: str,
    samples: int = 200,
) -> str:
    """Scatter of observed points with a fitted curve drawn through them."""
    if not points:
        raise ValueError("curve plot needs at least one data point")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    sample_x = [x_lo + (x_hi - x_lo) * i / (samples - 1) for i in range(samples)]
    sample_y = [curve(x) for x in sample_x]
    y_lo = min(min(ys), min(sample_y))
    y_hi = max(max(ys), max(sample_y))
    pad = 0.08 * (y_hi - y_lo) if y_hi > y_lo else 0.5
    frame = _Frame((x_lo, x_hi), (y_lo - pad, y_hi + pad))
    parts = frame.axes(title, x_label, y_label)
    path = " ".join(f"{_c(frame.px(x))},{_c(frame.py(y))}" for x, y in zip(sample_x, sample_y))
    parts.append(f'<polyline points="{path}" fill="none" stroke="#d62728" stroke-width="2"/>')
    for x, y in points:
        parts.append(
            f'<circle cx="{_c(frame.px(x))}" cy="{_c(frame.py(y))}" r="4" '
            'fill="#1f77b4" stroke="black" stroke-width="1"/>'
        )
    return _document(parts)
