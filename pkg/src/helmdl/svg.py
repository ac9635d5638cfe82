"""Minimal deterministic SVG plotter: axes, polylines, filled curves.

Kept dependency-free on purpose; output bytes are a pure function of the
input data so plots re-generate bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 720, 460
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 34, 48


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    fill: bool = False


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return list(np.linspace(lo, hi, n))


def plot_svg(path, series: list[Series], *, title="", xlabel="", ylabel="") -> None:
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(min(ys.min(), 0.0)), float(ys.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_hi += pad

    inner_w = WIDTH - MARGIN_L - MARGIN_R
    inner_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x_lo) / (x_hi - x_lo) * inner_w

    def sy(v):
        return MARGIN_T + (1.0 - (v - y_lo) / (y_hi - y_lo)) * inner_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}"'
        ' font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{inner_w}" height="{inner_h}"'
        ' fill="none" stroke="#333"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
            f"{title}</text>"
        )
    for tv in _ticks(x_lo, x_hi):
        px = sx(tv)
        out.append(
            f'<line x1="{px:.2f}" y1="{MARGIN_T + inner_h}" x2="{px:.2f}"'
            f' y2="{MARGIN_T + inner_h + 5}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{MARGIN_T + inner_h + 18}" text-anchor="middle">'
            f"{_fmt(tv)}</text>"
        )
    for tv in _ticks(y_lo, y_hi):
        py = sy(tv)
        out.append(
            f'<line x1="{MARGIN_L - 5}" y1="{py:.2f}" x2="{MARGIN_L}" y2="{py:.2f}"'
            ' stroke="#333"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" text-anchor="end">{_fmt(tv)}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{MARGIN_L + inner_w / 2:.1f}" y="{HEIGHT - 10}"'
            f' text-anchor="middle">{xlabel}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="16" y="{MARGIN_T + inner_h / 2:.1f}" text-anchor="middle"'
            f' transform="rotate(-90 16 {MARGIN_T + inner_h / 2:.1f})">{ylabel}</text>'
        )

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(s.x, s.y))
        if s.fill:
            base = sy(max(y_lo, 0.0))
            first, last = sx(float(s.x[0])), sx(float(s.x[-1]))
            out.append(
                f'<polygon points="{first:.2f},{base:.2f} {pts} {last:.2f},{base:.2f}"'
                f' fill="{color}" fill-opacity="0.25" stroke="none"/>'
            )
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.label:
            ly = MARGIN_T + 16 + 16 * idx
            out.append(
                f'<line x1="{MARGIN_L + inner_w - 120}" y1="{ly - 4}"'
                f' x2="{MARGIN_L + inner_w - 96}" y2="{ly - 4}" stroke="{color}"'
                ' stroke-width="1.5"/>'
            )
            out.append(f'<text x="{MARGIN_L + inner_w - 90}" y="{ly}">{s.label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
