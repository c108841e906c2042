"""Serialization of curve cells and SVG learning-curve plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, fields
from xml.sax.saxutils import escape

from .errors import MalformedCSV, UnknownMetric
from .experiment import CurveCell

SCHEMA_VERSION = 1
CSV_HEADER = ["schema_version"] + [f.name for f in fields(CurveCell)]
_INT_FIELDS = {"n_labeled", "n_unlabeled", "n_reps", "degenerate_draws"}
_STR_FIELDS = {"dataset", "method", "classifier"}


def fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def cells_to_csv(cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in cells:
        writer.writerow([SCHEMA_VERSION] + [fmt(getattr(cell, name)) for name in CSV_HEADER[1:]])
    return buf.getvalue()


def write_cells_csv(cells, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(cells_to_csv(cells))


def write_cells_json(cells, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "cells": [asdict(c) for c in cells]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def parse_cells_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise MalformedCSV("empty cells file")
    if rows[0] != CSV_HEADER:
        raise MalformedCSV(f"unexpected header: {','.join(rows[0])[:120]}")
    if len(rows) == 1:
        raise MalformedCSV("cells file has a header but no rows")
    cells = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise MalformedCSV(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        if row[0] != str(SCHEMA_VERSION):
            raise MalformedCSV(f"line {lineno}: unsupported schema version {row[0]!r}")
        values = {}
        try:
            for name, raw in zip(CSV_HEADER[1:], row[1:]):
                if name in _STR_FIELDS:
                    values[name] = raw
                elif name in _INT_FIELDS:
                    values[name] = int(raw)
                else:
                    values[name] = float(raw)
        except ValueError as exc:
            raise MalformedCSV(f"line {lineno}: {exc}") from None
        cells.append(CurveCell(**values))
    return cells


def read_cells_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_cells_csv(fh.read())


# ------------------------------------------------------------------ plots

SERIES_COLORS = {
    "supervised": "#000000",
    "self_learned": "#E8A13A",
    "constrained": "#3A5FA8",
    "em_soft": "#8C8C8C",
}
SERIES_ORDER = ("supervised", "self_learned", "em_soft", "constrained")
BAND_OPACITY = 0.25

METRICS = {
    "error": ("mean_error", "sd_error", "se_error", "mean error rate"),
    "joint_ll": ("mean_joint_ll", "sd_joint_ll", "se_joint_ll",
                 "mean log-likelihood per object (nats)"),
    "marginal_ll": ("mean_marginal_ll", "sd_marginal_ll", "se_marginal_ll",
                    "mean marginal log-likelihood per object (nats)"),
}

WIDTH, HEIGHT = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def render_svg(cells, metric: str, band: str = "se") -> str:
    """One learning-curve panel for cells sharing dataset, classifier and n_labeled."""
    if metric not in METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    mean_key, sd_key, se_key, ylabel = METRICS[metric]
    spread_key = se_key if band == "se" else sd_key
    first = cells[0]
    series = {}
    for c in cells:
        series.setdefault(c.method, []).append(c)
    for pts in series.values():
        pts.sort(key=lambda c: c.n_unlabeled)
    sizes = sorted({c.n_unlabeled for c in cells})

    lows = [getattr(c, mean_key) - getattr(c, spread_key) for c in cells]
    highs = [getattr(c, mean_key) + getattr(c, spread_key) for c in cells]
    y_lo, y_hi = min(lows), max(highs)
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else max(abs(y_lo) * 0.05, 1e-3)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = math.log2(sizes[0]), math.log2(sizes[-1])
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(n):
        return LEFT + (math.log2(n) - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return TOP + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(first.dataset)} / {first.classifier.upper()} / '
        f'{first.n_labeled} labeled</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#808080"/>',
    ]
    for n in sizes:
        x = px(n)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" '
                   f'stroke="#000000"/>')
        out.append(f'<text class="xtick" x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{n}</text>')
    for v in _nice_ticks(y_lo, y_hi):
        y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{v:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">number of unlabeled objects</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(ylabel)}</text>')

    for method in SERIES_ORDER:
        if method not in series:
            continue
        pts = series[method]
        color = SERIES_COLORS[method]
        upper = [(px(c.n_unlabeled), py(getattr(c, mean_key) + getattr(c, spread_key))) for c in pts]
        lower = [(px(c.n_unlabeled), py(getattr(c, mean_key) - getattr(c, spread_key))) for c in pts]
        ring = upper + lower[::-1]
        out.append(f'<polygon class="band" data-series="{method}" points="'
                   + " ".join(f"{x:.2f},{y:.2f}" for x, y in ring)
                   + f'" fill="{color}" fill-opacity="{BAND_OPACITY}" stroke="none"/>')
    for method in SERIES_ORDER:
        if method not in series:
            continue
        pts = series[method]
        line = " ".join(f"{px(c.n_unlabeled):.2f},{py(getattr(c, mean_key)):.2f}" for c in pts)
        out.append(f'<polyline class="curve" data-series="{method}" points="{line}" fill="none" '
                   f'stroke="{SERIES_COLORS[method]}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_cells(cells, metric: str, out_dir, band: str = "se"):
    """Write one SVG per (dataset, classifier, n_labeled); returns the paths written."""
    if metric not in METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    if not cells:
        raise MalformedCSV("no cells to plot")
    groups = {}
    for c in cells:
        groups.setdefault((c.dataset, c.classifier, c.n_labeled), []).append(c)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for (name, kind, n_l), group in groups.items():
        path = os.path.join(out_dir, f"{name}_{kind}_{n_l}_{metric}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_svg(group, metric, band))
        paths.append(path)
    return paths
