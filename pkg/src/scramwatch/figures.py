"""Static SVG rendering of timelines, histograms, and attribution curves.

Plots are written as plain SVG text with fixed-precision coordinates and no
environment-dependent content, so the same inputs always produce the same
bytes. That keeps figures inside the everything-reproducible contract the
rest of the artifacts follow.
"""

from __future__ import annotations

import numpy as np

from .detector import DetectionTimeline, ErrorHistogram
from .explain import PerSecondAttribution
from .pipeline import encode
from .signals import SIGNALS, Series
from .training import EpochRecord

#: One fixed color per signal, catalogue order.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
)

FLAG_COLOR = "#e4572e"
OK_COLOR = "#76b041"
WARMUP_COLOR = "#cccccc"

_W, _H = 900, 420
_MARGIN = 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _open_svg(parts: list[str], title: str) -> None:
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="11">')
    parts.append(f'<rect width="{_W}" height="{_H}" fill="#ffffff"/>')
    parts.append(f'<text x="{_MARGIN}" y="18">{title}</text>')


def _polyline(parts: list[str], xs: np.ndarray, ys: np.ndarray, color: str, width: float = 1.0) -> None:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>')


def _x_map(t: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray:
    span = max(t_hi - t_lo, 1e-9)
    return _MARGIN + (np.asarray(t, dtype=np.float64) - t_lo) / span * (_W - 2 * _MARGIN)


def _y_map(v: np.ndarray, v_lo: float, v_hi: float) -> np.ndarray:
    span = max(v_hi - v_lo, 1e-9)
    return (_H - _MARGIN) - (np.asarray(v, dtype=np.float64) - v_lo) / span * (_H - 2 * _MARGIN)


def _shade_runs(parts: list[str], seconds: np.ndarray, on: np.ndarray, t_lo: float, t_hi: float,
                color: str, opacity: str) -> None:
    """One translucent rect per run of consecutive `on` seconds."""
    idx = np.flatnonzero(on)
    if idx.size == 0:
        return
    breaks = np.flatnonzero(np.diff(seconds[idx]) > 1)
    starts = np.concatenate([[0], breaks + 1])
    stops = np.concatenate([breaks, [idx.size - 1]])
    for a, b in zip(starts, stops):
        x0 = _x_map(np.array([seconds[idx[a]] - 0.5]), t_lo, t_hi)[0]
        x1 = _x_map(np.array([seconds[idx[b]] + 0.5]), t_lo, t_hi)[0]
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_MARGIN}" width="{_fmt(x1 - x0)}" '
            f'height="{_H - 2 * _MARGIN}" fill="{color}" opacity="{opacity}"/>')


def render_timeline_svg(path, series: Series, timeline: DetectionTimeline, title: str = "detection timeline") -> None:
    """Normalized signal traces over green (clear) / red (flagged) shading."""
    matrix = encode(series)
    lo = matrix.min(axis=0)
    span = np.where(matrix.max(axis=0) - lo == 0.0, 1.0, matrix.max(axis=0) - lo)
    norm = (matrix - lo) / span
    t = series.start_time + np.arange(len(series))
    t_lo, t_hi = float(t[0]), float(t[-1])

    parts: list[str] = []
    _open_svg(parts, title)
    flags = timeline.flags
    _shade_runs(parts, timeline.seconds, ~flags, t_lo, t_hi, OK_COLOR, "0.15")
    _shade_runs(parts, timeline.seconds, flags, t_lo, t_hi, FLAG_COLOR, "0.35")
    warm = np.arange(series.start_time, int(timeline.seconds[0]))
    if warm.size:
        _shade_runs(parts, warm, np.ones(len(warm), dtype=bool), t_lo, t_hi, WARMUP_COLOR, "0.4")
    xs = _x_map(t, t_lo, t_hi)
    for j, name in enumerate(SIGNALS):
        _polyline(parts, xs, _y_map(norm[:, j], 0.0, 1.0), PALETTE[j])
        parts.append(f'<text x="{_W - _MARGIN + 4}" y="{_MARGIN + 14 * j + 10}" '
                     f'fill="{PALETTE[j]}">{name.split("_")[0]}</text>')
    parts.append(f'<text x="{_MARGIN}" y="{_H - 12}">t = {int(t_lo)} .. {int(t_hi)} s, '
                 f'threshold {timeline.threshold:.4f} ({timeline.metric})</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def render_histogram_svg(path, hist: ErrorHistogram, title: str = "window error distribution") -> None:
    parts: list[str] = []
    _open_svg(parts, title if not hist.label else f"{title} ({hist.label})")
    top = max(int(hist.counts.max()), 1)
    e_lo, e_hi = float(hist.edges[0]), float(hist.edges[-1])
    for i, count in enumerate(hist.counts):
        x0 = _x_map(np.array([hist.edges[i]]), e_lo, e_hi)[0]
        x1 = _x_map(np.array([hist.edges[i + 1]]), e_lo, e_hi)[0]
        y = _y_map(np.array([count]), 0, top)[0]
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y)}" width="{_fmt(max(x1 - x0 - 0.5, 0.5))}" '
            f'height="{_fmt(_H - _MARGIN - y)}" fill="#1f77b4"/>')
    parts.append(f'<text x="{_MARGIN}" y="{_H - 12}">error range {e_lo:.4f} .. {e_hi:.4f}, '
                 f'{int(hist.counts.sum())} windows</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def render_attribution_svg(path, per_second: PerSecondAttribution, tau: float,
                           title: str = "per-second attribution") -> None:
    parts: list[str] = []
    _open_svg(parts, title)
    if per_second.seconds.size:
        t_lo, t_hi = float(per_second.seconds[0]), float(per_second.seconds[-1])
        v_lo = min(float(per_second.phi.min()), 0.0)
        v_hi = max(float(per_second.phi.max()), tau) * 1.05
        xs = _x_map(per_second.seconds, t_lo, t_hi)
        y_tau = _y_map(np.array([tau]), v_lo, v_hi)[0]
        parts.append(f'<line x1="{_MARGIN}" y1="{_fmt(y_tau)}" x2="{_W - _MARGIN}" '
                     f'y2="{_fmt(y_tau)}" stroke="#000000" stroke-dasharray="4,3"/>')
        for j, name in enumerate(SIGNALS):
            _polyline(parts, xs, _y_map(per_second.phi[:, j], v_lo, v_hi), PALETTE[j])
            parts.append(f'<text x="{_W - _MARGIN + 4}" y="{_MARGIN + 14 * j + 10}" '
                         f'fill="{PALETTE[j]}">{name.split("_")[0]}</text>')
        parts.append(f'<text x="{_MARGIN}" y="{_H - 12}">t = {int(t_lo)} .. {int(t_hi)} s, '
                     f'tau = {tau:.6f}</text>')
    else:
        parts.append(f'<text x="{_MARGIN}" y="{_H // 2}">no attributed seconds</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def render_history_svg(path, history: list[EpochRecord], title: str = "training loss") -> None:
    parts: list[str] = []
    _open_svg(parts, title)
    if history:
        epochs = np.array([r.epoch for r in history], dtype=np.float64)
        train = np.array([r.train_loss for r in history])
        val = np.array([r.val_loss for r in history])
        lo = 0.0
        hi = max(float(train.max()), float(val.max())) * 1.05
        xs = _x_map(epochs, epochs[0], epochs[-1])
        _polyline(parts, xs, _y_map(train, lo, hi), "#1f77b4", 1.5)
        _polyline(parts, xs, _y_map(val, lo, hi), "#d62728", 1.5)
        parts.append(f'<text x="{_W - _MARGIN - 100}" y="{_MARGIN + 10}" fill="#1f77b4">train</text>')
        parts.append(f'<text x="{_W - _MARGIN - 100}" y="{_MARGIN + 24}" fill="#d62728">validation</text>')
        parts.append(f'<text x="{_MARGIN}" y="{_H - 12}">{len(history)} epochs, '
                     f'final val {val[-1]:.6f}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
