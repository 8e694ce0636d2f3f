"""CSV and static SVG writers."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from rwlatency.cli.sweep import Row

CSV_COLUMNS = (
    "source", "priority", "lambda_r", "lambda_w", "mu_r", "mu_w", "n",
    "total_servers", "mean_read", "mean_write", "mean_total", "ci_halfwidth", "seed",
)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def csv_text(rows: Iterable[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(path, rows: Iterable[Row]) -> None:
    Path(path).write_text(csv_text(rows), encoding="utf-8")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- SVG ------------------------------------------------------------------

_COLORS = {
    "analytic": "#1f4e9c",
    "simulation": "#b22222",
    "oracle": "#2e7d32",
    "bound_lb": "#7f7f7f",
    "bound_ub": "#404040",
}
_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 150, 30, 55


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def svg_chart(series: Sequence[tuple[str, Sequence[tuple[float, float]]]], xlabel: str, ylabel: str) -> str:
    """Line chart with one polyline per named series; the output depends only on the input."""
    points = [p for _, pts in series for p in pts]
    if not points:
        raise ValueError("nothing to plot")
    xt = _ticks(min(p[0] for p in points), max(p[0] for p in points))
    yt = _ticks(min(p[1] for p in points), max(p[1] for p in points))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(x):
        return _LEFT + (x - x0) / (x1 - x0 or 1.0) * pw

    def sy(y):
        return _TOP + ph - (y - y0) / (y1 - y0 or 1.0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    for t in xt:
        out.append(f'<line x1="{sx(t):.2f}" y1="{_TOP}" x2="{sx(t):.2f}" y2="{_TOP + ph}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{_TOP + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in yt:
        out.append(f'<line x1="{_LEFT}" y1="{sy(t):.2f}" x2="{_LEFT + pw}" y2="{sy(t):.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{_LEFT + pw / 2:.2f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{_TOP + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_TOP + ph / 2:.2f})">{escape(ylabel)}</text>'
    )
    for k, (name, pts) in enumerate(series):
        color = _COLORS.get(name, "#000000")
        pts = sorted(pts)
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = _TOP + 10 + 20 * k
        out.append(f'<line x1="{_W - _RIGHT + 15}" y1="{ly}" x2="{_W - _RIGHT + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _RIGHT + 46}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def rows_svg(rows: Sequence[Row], axis: str) -> str:
    """mean_total against total servers, or the optimal total servers against the swept rate."""
    by_source: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        if axis == "n":
            point = (float(row.total_servers), row.mean_total)
        else:
            point = (getattr(row, axis), float(row.total_servers))
        by_source.setdefault(row.source, []).append(point)
    series = list(by_source.items())
    if axis == "n":
        return svg_chart(series, "Number of servers", "Mean number of requests")
    label = "Read arrival rate" if axis == "lambda_r" else "Write arrival rate"
    return svg_chart(series, label, "Optimal number of servers")
