"""Deterministic SVG plots: sensitivity curves and the daylight locus.

Output depends only on the inputs; coordinates are printed with a fixed
number of decimals so identical data gives byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .spectra import DEFAULT_GRID, SpectralGrid

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 20, 50)  # left, right, top, bottom
CHANNEL_COLORS = ("#d62728", "#2ca02c", "#1f77b4")
DASHES = (None, "6 4", "2 3", "8 3 2 3")


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Axes:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, WIDTH - right
        self.py0, self.py1 = HEIGHT - bottom, top

    def point(self, x, y) -> str:
        px = self.px0 + (x - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)
        py = self.py0 + (y - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)
        return f"{_fmt(px)},{_fmt(py)}"

    def frame(self, xticks, yticks, xlabel, ylabel) -> list[str]:
        out = [f'<rect x="{self.px0}" y="{self.py1}" width="{self.px1 - self.px0}" '
               f'height="{self.py0 - self.py1}" fill="none" stroke="#000000"/>']
        for t in xticks:
            x, y = self.point(t, self.y0).split(",")
            out.append(f'<text x="{x}" y="{float(y) + 16:.3f}" text-anchor="middle">{t:g}</text>')
        for t in yticks:
            x, y = self.point(self.x0, t).split(",")
            out.append(f'<text x="{float(x) - 6:.3f}" y="{float(y) + 4:.3f}" '
                       f'text-anchor="end">{t:g}</text>')
        cx = (self.px0 + self.px1) / 2
        cy = (self.py0 + self.py1) / 2
        out.append(f'<text x="{_fmt(cx)}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(f'<text x="14" y="{_fmt(cy)}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {_fmt(cy)})">{escape(ylabel)}</text>')
        return out


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
                      *body, "</svg>"]) + "\n"


def sensitivity_svg(curves, labels=None, grid: SpectralGrid = DEFAULT_GRID) -> str:
    """SVG text with one polyline per channel per curve.

    Curves after the first are drawn dashed, so a prediction and its ground
    truth read apart at a glance.
    """
    curves = [np.asarray(c, dtype=np.float64) for c in curves]
    if not curves:
        raise ValueError("nothing to plot")
    labels = list(labels) if labels is not None else [f"curve {i + 1}" for i in range(len(curves))]
    if len(labels) != len(curves):
        raise ValueError("one label per curve")
    ax = _Axes((grid.lambda_min, grid.lambda_max), (0.0, 1.0))
    body = ax.frame(range(400, 701, 50), (0, 0.25, 0.5, 0.75, 1), "wavelength (nm)",
                    "relative sensitivity")
    wl = grid.wavelengths
    for k, (S, label) in enumerate(zip(curves, labels)):
        if S.shape != (grid.n, 3):
            raise ValueError(f"curve {label!r} has shape {S.shape}, expected ({grid.n}, 3)")
        dash = DASHES[k % len(DASHES)]
        style = f' stroke-dasharray="{dash}"' if dash else ""
        for c in range(3):
            pts = " ".join(ax.point(x, y) for x, y in zip(wl, np.clip(S[:, c], 0.0, 1.0)))
            body.append(f'<polyline points="{pts}" fill="none" stroke="{CHANNEL_COLORS[c]}" '
                        f'stroke-width="1.5"{style}/>')
        y = MARGIN[2] + 14 + 14 * k
        x0 = WIDTH - MARGIN[1] - 150
        body.append(f'<line x1="{x0}" y1="{y - 4}" x2="{x0 + 24}" y2="{y - 4}" '
                    f'stroke="#000000"{style}/>')
        body.append(f'<text x="{x0 + 30}" y="{y}">{escape(str(label))}</text>')
    return _document(body)


def plot_svg(curves, path, labels=None, grid: SpectralGrid = DEFAULT_GRID) -> None:
    Path(path).write_text(sensitivity_svg(curves, labels, grid), encoding="utf-8")


def locus_svg(locus, points=None) -> str:
    """Daylight locus polyline in rb chromaticity, with an optional scatter."""
    locus = np.asarray(locus, dtype=np.float64)
    pts = np.zeros((0, 2)) if points is None else np.atleast_2d(np.asarray(points, float))
    both = np.vstack([locus, pts]) if len(pts) else locus
    lo, hi = both.min(axis=0), both.max(axis=0)
    pad = np.maximum(0.1 * (hi - lo), 0.01)
    ax = _Axes((lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1]))
    xt = np.round(np.linspace(ax.x0, ax.x1, 5), 3)
    yt = np.round(np.linspace(ax.y0, ax.y1, 5), 3)
    body = ax.frame(xt, yt, "r", "b")
    body.append(f'<polyline points="{" ".join(ax.point(r, b) for r, b in locus)}" '
                f'fill="none" stroke="#000000" stroke-width="1.5"/>')
    for r, b in pts:
        x, y = ax.point(r, b).split(",")
        body.append(f'<circle cx="{x}" cy="{y}" r="3" fill="#d62728"/>')
    return _document(body)


def plot_locus_svg(locus, path, points=None) -> None:
    Path(path).write_text(locus_svg(locus, points), encoding="utf-8")
