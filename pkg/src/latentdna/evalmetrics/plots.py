"""CSV tables and minimal static SVG renderings for histograms and curves."""
from __future__ import annotations

import csv
import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .motifs import MotifHistogram, moving_average

WIDTH, HEIGHT, MARGIN = 640, 400, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot_svg(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
                  xlabel: str = "", ylabel: str = "") -> str:
    """One polyline per named series on shared axes."""
    xs = [float(v) for x, _ in series.values() for v in x]
    ys = [float(v) for _, y in series.values() for v in y]
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(ys + [0.0]), max(ys)) if ys else (0.0, 1.0)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - ylo) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(xlo, xhi):
        parts.append(f'<text x="{_fmt(px(v))}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                     f'font-size="10">{v:.4g}</text>')
    for v in _ticks(ylo, yhi):
        parts.append(f'<text x="{MARGIN - 6}" y="{_fmt(py(v) + 3)}" text-anchor="end" font-size="10">{v:.4g}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(float(a)))},{_fmt(py(float(b)))}" for a, b in zip(x, y)
                       if math.isfinite(float(a)) and math.isfinite(float(b)))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}">'
                     f'<title>{escape(name)}</title></polyline>')
        parts.append(f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * i}" text-anchor="end" font-size="11" '
                     f'fill="{colour}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def histogram_svg(histograms: Mapping[str, MotifHistogram], title: str = "", normalize: bool = True,
                  smooth: int = 1) -> str:
    """Motif histograms as polylines over TSS-relative bin centres."""
    series = {}
    for name, h in histograms.items():
        y = h.normalized() if normalize else h.counts.astype(np.float64)
        if smooth > 1:
            y = moving_average(y, smooth)
        series[f"{name} ({h.pattern})"] = (h.centers.tolist(), y.tolist())
    return line_plot_svg(series, title, "position relative to TSS", "fraction of hits" if normalize else "hits")


def write_histogram_csv(path, histograms: Mapping[str, MotifHistogram]) -> None:
    """Columns: ``bin_center`` then one count column per histogram (bins must agree)."""
    names = list(histograms)
    centers = None
    for h in histograms.values():
        if centers is None:
            centers = h.centers
        elif not np.array_equal(centers, h.centers):
            raise ValueError("histograms do not share bins")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", *names])
        if centers is not None:
            for i, c in enumerate(centers):
                w.writerow([int(c), *(int(histograms[n].counts[i]) for n in names)])


def read_histogram_csv(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["bin_center"]:
        raise ValueError(f"{path}: missing bin_center header")
    names = rows[0][1:]
    body = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, len(names) + 1)
    return body[:, 0], {n: body[:, i + 1] for i, n in enumerate(names)}


def write_series_csv(path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]]) -> None:
    """Long format with columns ``series,x,y``; floats written with full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "y"])
        for name, (x, y) in series.items():
            for a, b in zip(x, y):
                w.writerow([name, repr(float(a)), repr(float(b))])


def read_series_csv(path) -> dict[str, tuple[list[float], list[float]]]:
    out: dict[str, tuple[list[float], list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["series", "x", "y"]:
            raise ValueError(f"{path}: expected header series,x,y")
        for name, x, y in reader:
            xs, ys = out.setdefault(name, ([], []))
            xs.append(float(x))
            ys.append(float(y))
    return out
