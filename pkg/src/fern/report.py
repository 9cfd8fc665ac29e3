"""Figures for sweep results.

``emit_svg_plot`` writes a dependency-free SVG 1.1 chart (latency against
log10 n, one polyline per (d, mode) series).  ``render_figure`` draws the
fuller two-panel matplotlib version next to the CSV output.
"""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .bench import BenchRecord
from .errors import ArgumentError, IoError

__all__ = ["emit_svg_plot", "render_figure", "group_records"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def group_records(records: Sequence[BenchRecord]) -> dict[tuple[int, str], list[BenchRecord]]:
    groups: dict[tuple[int, str], list[BenchRecord]] = defaultdict(list)
    for r in records:
        groups[(r.d, r.mode)].append(r)
    for rs in groups.values():
        rs.sort(key=lambda r: r.n)
    return dict(groups)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(t)
        t += step
    return ticks


def emit_svg_plot(records: Sequence[BenchRecord], sink, width: int = 640, height: int = 400) -> None:
    if len(records) < 2:
        raise ArgumentError("need at least two records to plot")
    groups = group_records(records)

    left, right, top, bottom = 70, 160, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [math.log10(r.n) for r in records]
    x0, x1 = min(xs), max(xs)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y1 = max(r.mean_ns for r in records) * 1.1 or 1.0

    def px(n):
        return left + (math.log10(n) - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - v / y1 * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(math.ceil(x0), math.floor(x1) + 1):
        x = left + (k - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">1e{k}</text>')
    for t in _nice_ticks(0.0, y1):
        y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">index size n (log10)</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">mean latency (ns)</text>')

    for i, ((d, mode), rs) in enumerate(sorted(groups.items())):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(r.n):.2f},{py(r.mean_ns):.2f}" for r in rs)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for r in rs:
            out.append(f'<circle cx="{px(r.n):.2f}" cy="{py(r.mean_ns):.2f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * i
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}">{escape(f"d={d} {mode}")}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"

    if hasattr(sink, "write"):
        sink.write(text)
        return
    try:
        Path(sink).write_text(text)
    except OSError as e:
        raise IoError(str(e)) from e


def render_figure(records: Sequence[BenchRecord], path) -> Path:
    """Latency and visited-node panels against n; format follows the suffix."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not records:
        raise ArgumentError("no records to plot")
    groups = group_records(records)
    fig, (ax_t, ax_v) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for i, ((d, mode), rs) in enumerate(sorted(groups.items())):
        color = _COLORS[i % len(_COLORS)]
        n = [r.n for r in rs]
        label = f"d={d} {mode}"
        ax_t.plot(n, [r.mean_ns / 1e3 for r in rs], "o-", color=color, label=label)
        ax_t.fill_between(n, [r.p50_ns / 1e3 for r in rs], [r.p99_ns / 1e3 for r in rs],
                          color=color, alpha=0.15, lw=0)
        ax_v.plot(n, [r.mean_visited for r in rs], "o-", color=color, label=label)
    ns = sorted({r.n for r in records})
    ax_v.plot(ns, [math.log2(n) for n in ns], "k--", lw=1, label="log2 n")
    for ax in (ax_t, ax_v):
        ax.set_xscale("log")
        ax.set_xlabel("index size n")
        ax.grid(True, which="both", alpha=0.3)
    ax_t.set_ylabel("latency per query (us)\nmean, p50-p99 band")
    ax_v.set_ylabel("nodes visited per query")
    ax_v.legend(fontsize=8)
    path = Path(path)
    try:
        fig.savefig(path, dpi=120)
    except OSError as e:
        raise IoError(str(e)) from e
    finally:
        plt.close(fig)
    return path
