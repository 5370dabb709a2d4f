"""Minimal SVG charts: line charts with legends and bar-histogram panels."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
FONT = 'font-family="sans-serif" font-size="11"'


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e6 or abs(v) < 1e-3):
        return f"{v:.3g}"
    return f"{v:,.6g}"


class _Frame:
    """Maps data coordinates into a plotting rectangle."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlo, self.xhi = xlim
        self.ylo, self.yhi = ylim
        if self.xhi <= self.xlo:
            self.xhi = self.xlo + 1
        if self.yhi <= self.ylo:
            self.yhi = self.ylo + 1

    def px(self, x):
        return self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * self.w

    def py(self, y):
        return self.y0 + self.h - (y - self.ylo) / (self.yhi - self.ylo) * self.h

    def axes(self, xlabel, ylabel, title) -> list[str]:
        x0, y0, w, h = self.x0, self.y0, self.w, self.h
        out = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>']
        for t in _ticks(self.xlo, self.xhi):
            x = self.px(t)
            out.append(f'<line x1="{x:.2f}" y1="{y0 + h}" x2="{x:.2f}" y2="{y0 + h + 4}" stroke="#333"/>')
            out.append(f'<text x="{x:.2f}" y="{y0 + h + 16}" text-anchor="middle" {FONT}>{_label(t)}</text>')
        for t in _ticks(self.ylo, self.yhi):
            y = self.py(t)
            out.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0 + w}" y2="{y:.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{x0 - 6}" y="{y + 4:.2f}" text-anchor="end" {FONT}>{_label(t)}</text>')
        out.append(f'<text x="{x0 + w / 2}" y="{y0 + h + 34}" text-anchor="middle" {FONT}>'
                   f'{escape(xlabel)}</text>')
        out.append(f'<text x="{x0 - 52}" y="{y0 + h / 2}" text-anchor="middle" {FONT} '
                   f'transform="rotate(-90 {x0 - 52} {y0 + h / 2})">{escape(ylabel)}</text>')
        out.append(f'<text x="{x0 + w / 2}" y="{y0 - 10}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{escape(title)}</text>')
        return out


def _document(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def line_chart(x: Sequence[float], series: Mapping[str, Sequence[float]], *, title: str = "",
               xlabel: str = "", ylabel: str = "", width: int = 640, height: int = 400) -> str:
    """Polylines over a shared x axis, one per named series, with a legend."""
    values = [v for ys in series.values() for v in ys if math.isfinite(v)]
    ylim = (min(0.0, min(values, default=0.0)), max(values, default=1.0))
    frame = _Frame(80, 40, width - 240, height - 100, (min(x, default=0), max(x, default=1)), ylim)
    body = frame.axes(xlabel, ylabel, title)
    for n, (name, ys) in enumerate(series.items()):
        colour = PALETTE[n % len(PALETTE)]
        pts = " ".join(f"{frame.px(a):.2f},{frame.py(b):.2f}" for a, b in zip(x, ys) if math.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
        for a, b in zip(x, ys):
            if math.isfinite(b):
                body.append(f'<circle cx="{frame.px(a):.2f}" cy="{frame.py(b):.2f}" r="3" fill="{colour}"/>')
        ly = 50 + 18 * n
        lx = frame.x0 + frame.w + 16
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 26}" y="{ly + 4}" {FONT}>{escape(name)}</text>')
    return _document(width, height, body)


def histogram_panels(panels: Sequence[tuple[str, Sequence[tuple[float, float, int]]]], *,
                     title: str = "", xlabel: str = "load shed (MW)", ylabel: str = "scenarios",
                     columns: int = 3, cell: tuple[int, int] = (300, 220)) -> str:
    """Grid of bar histograms; each panel is ``(caption, [(lo, hi, count), ...])``."""
    if not panels:
        return _document(cell[0], 60, [f'<text x="10" y="30" {FONT}>no data</text>'])
    xmax = max((hi for _, bins in panels for _, hi, _ in bins), default=1.0)
    cmax = max((c for _, bins in panels for _, _, c in bins), default=1)
    rows = math.ceil(len(panels) / columns)
    cw, ch = cell
    top = 30 if title else 0
    body = []
    if title:
        body.append(f'<text x="{cw * min(columns, len(panels)) / 2}" y="20" text-anchor="middle" '
                    f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for n, (caption, bins) in enumerate(panels):
        r, c = divmod(n, columns)
        frame = _Frame(c * cw + 70, top + r * ch + 30, cw - 90, ch - 80, (0.0, xmax), (0.0, cmax))
        body.extend(frame.axes(xlabel, ylabel, caption))
        for lo, hi, count in bins:
            if count:
                x, y = frame.px(lo), frame.py(count)
                bw = max(frame.px(hi) - x - 1, 1)
                body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bw:.2f}" '
                            f'height="{frame.py(0) - y:.2f}" fill="{PALETTE[0]}"/>')
    width = cw * min(columns, len(panels))
    return _document(width, top + rows * ch, body)
