"""Deterministic SVG plots of result records.

Plots are written by hand so the bytes depend only on the record: fixed
canvas, fixed number formatting, no timestamps.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 480, 360
MARGIN = 48
V_RANGE = (-1.2, 1.2)

# diverging map: soft (blue) -> light grey -> hard (red)
SOFT_RGB = (33, 102, 172)
MID_RGB = (247, 247, 247)
HARD_RGB = (178, 24, 43)

PLOT_KINDS = {
    "curve": ("t", "K"),
    "phase": ("t", "K"),
    "phase-field": ("t", "v"),
}


class PlotError(ValueError):
    pass


def v_color(v: float) -> str:
    """Hex color of ``v`` on the diverging map over ``V_RANGE``."""
    lo, hi = V_RANGE
    if v is None or not math.isfinite(v):
        return "#808080"
    s = min(1.0, max(-1.0, (2.0 * (v - lo) / (hi - lo)) - 1.0))
    end = HARD_RGB if s >= 0 else SOFT_RGB
    w = abs(s)
    rgb = [round(m + w * (e - m)) for m, e in zip(MID_RGB, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    raw = span / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    x = first
    while x <= hi + 1e-9 * step:
        ticks.append(round(x, 12))
        x += step
    return ticks


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if hi - lo < 1e-9:
        pad = max(0.5, abs(lo) * 0.1)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xlim, ylim, title: str, xlabel: str, ylabel: str, equal: bool = False):
        x0, x1 = xlim
        y0, y1 = ylim
        pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
        if equal:
            scale = min(pw / (x1 - x0), ph / (y1 - y0))
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - 0.5 * pw / scale, cx + 0.5 * pw / scale
            y0, y1 = cy - 0.5 * ph / scale, cy + 0.5 * ph / scale
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13">{title}</text>',
        ]
        self._axes(xlabel, ylabel)

    def X(self, x: float) -> float:
        x0, x1 = self.xlim
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def Y(self, y: float) -> float:
        y0, y1 = self.ylim
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    def _axes(self, xlabel, ylabel):
        p = self.parts
        p.append(
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
            f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black" stroke-width="1"/>'
        )
        p.append('<g id="ticks" font-family="sans-serif" font-size="10">')
        for t in _nice_ticks(*self.xlim):
            X = self.X(t)
            p.append(f'<line x1="{_f(X)}" y1="{HEIGHT - MARGIN}" x2="{_f(X)}" y2="{HEIGHT - MARGIN + 4}" stroke="black"/>')
            p.append(f'<text x="{_f(X)}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:g}</text>')
        for t in _nice_ticks(*self.ylim):
            Y = self.Y(t)
            p.append(f'<line x1="{MARGIN - 4}" y1="{_f(Y)}" x2="{MARGIN}" y2="{_f(Y)}" stroke="black"/>')
            p.append(f'<text x="{MARGIN - 6}" y="{_f(Y + 3)}" text-anchor="end">{t:g}</text>')
        p.append("</g>")
        p.append(
            f'<text x="{WIDTH // 2}" y="{HEIGHT - 8}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{xlabel}</text>'
        )
        p.append(
            f'<text x="14" y="{HEIGHT // 2}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" transform="rotate(-90 14 {HEIGHT // 2})">{ylabel}</text>'
        )

    def segments(self, xs, ys, colors, group: str, width: float = 2.0):
        self.parts.append(f'<g id="{group}" stroke-width="{width}" stroke-linecap="round">')
        for i in range(len(xs) - 1):
            self.parts.append(
                f'<line x1="{_f(self.X(xs[i]))}" y1="{_f(self.Y(ys[i]))}" '
                f'x2="{_f(self.X(xs[i + 1]))}" y2="{_f(self.Y(ys[i + 1]))}" stroke="{colors[i]}"/>'
            )
        self.parts.append("</g>")

    def markers(self, pts, group: str):
        self.parts.append(f'<g id="{group}" fill="none" stroke="black">')
        for x, y in pts:
            self.parts.append(f'<circle cx="{_f(self.X(x))}" cy="{_f(self.Y(y))}" r="4"/>')
        self.parts.append("</g>")

    def colorbar(self):
        n = 24
        lo, hi = V_RANGE
        x = WIDTH - MARGIN + 10
        top, bottom = MARGIN, HEIGHT - MARGIN
        dh = (bottom - top) / n
        self.parts.append('<g id="colorbar">')
        for i in range(n):
            v = hi - (i + 0.5) * (hi - lo) / n
            self.parts.append(
                f'<rect x="{x}" y="{_f(top + i * dh)}" width="10" height="{_f(dh + 0.2)}" '
                f'fill="{v_color(v)}" stroke="none"/>'
            )
        self.parts.append(
            f'<text x="{x + 5}" y="{top - 4}" text-anchor="middle" font-family="sans-serif" font-size="9">{hi:g}</text>'
        )
        self.parts.append(
            f'<text x="{x + 5}" y="{bottom + 11}" text-anchor="middle" font-family="sans-serif" font-size="9">{lo:g}</text>'
        )
        self.parts.append("</g>")

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _column(record: dict, name: str, kind: str) -> np.ndarray:
    nodal = record.get("nodal") or {}
    if name not in nodal or nodal[name] is None:
        raise PlotError(f"plot kind {kind!r} needs nodal field {name!r}, missing from the record")
    return np.array([math.nan if x is None else x for x in nodal[name]], dtype=float)


def _cell_v(record: dict, n_cells: int) -> np.ndarray:
    nodal = record.get("nodal") or {}
    v = nodal.get("v")
    if v is None or all(x is None for x in v):
        return np.zeros(n_cells)
    v = np.array([math.nan if x is None else x for x in v], dtype=float)
    return 0.5 * (v[:-1] + v[1:])


def _curve_points(t: np.ndarray, K: np.ndarray, clamp: float) -> np.ndarray:
    # exact cellwise integral of exp(i(K + K0)) for piecewise-affine K
    h = np.diff(t)
    a, b = K[:-1] + clamp, K[1:] + clamp
    d = b - a
    small = np.abs(d) < 1e-8
    dsafe = np.where(small, 1.0, d)
    dx = np.where(small, h * np.cos(0.5 * (a + b)), h * (np.sin(b) - np.sin(a)) / dsafe)
    dy = np.where(small, h * np.sin(0.5 * (a + b)), h * (np.cos(a) - np.cos(b)) / dsafe)
    pts = np.zeros((len(t), 2))
    pts[1:, 0] = np.cumsum(dx)
    pts[1:, 1] = np.cumsum(dy)
    return pts


def render_plot(record: dict, kind: str) -> str:
    """SVG text for ``kind`` in :data:`PLOT_KINDS`."""
    if kind not in PLOT_KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    t = _column(record, "t", kind)
    if kind == "curve":
        K = _column(record, "K", kind)
        cfg = record.get("config") or {}
        clamp = float(cfg.get("K0", 0.0))
        pts = record.get("curve")
        pts = np.asarray(pts, dtype=float) if pts is not None else _curve_points(t, K, clamp)
        xs, ys = pts[:, 0], pts[:, 1]
        xlim = _padded(min(xs.min(), 0.0), max(xs.max(), 0.0))
        ylim = _padded(min(ys.min(), 0.0), max(ys.max(), 0.0))
        c = _Canvas(xlim, ylim, "beam curve", "x", "y", equal=True)
        colors = [v_color(v) for v in _cell_v(record, len(t) - 1)]
        c.segments(xs, ys, colors, "curve")
        targets = [tuple(cn["target"]) for cn in cfg.get("constraints", [])]
        if targets:
            c.markers(targets, "targets")
        c.colorbar()
        return c.svg()
    if kind == "phase":
        K = _column(record, "K", kind)
        c = _Canvas((0.0, 1.0), _padded(float(np.nanmin(K)), float(np.nanmax(K))), "phase K", "t", "K")
        c.segments(t, K, ["#000000"] * (len(t) - 1), "K")
        return c.svg()
    v = _column(record, "v", kind)
    if np.all(np.isnan(v)):
        raise PlotError("plot kind 'phase-field' needs nodal field 'v', which holds no values")
    c = _Canvas((0.0, 1.0), V_RANGE, "phase field v", "t", "v")
    cell = 0.5 * (v[:-1] + v[1:])
    c.segments(t, v, [v_color(x) for x in cell], "v")
    c.colorbar()
    return c.svg()


def export_plot(record: dict, kind: str, path) -> Path:
    path = Path(path)
    path.write_text(render_plot(record, kind))
    return path
