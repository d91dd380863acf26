"""Sliding-window anomaly detection on reconstruction error.

Every second from w-1 onward gets the reconstruction error of the window
that ends there (the preceding w seconds), and is flagged when that error
strictly exceeds the threshold. The first w-1 seconds have no complete
window and are reported as unscored rather than silently assumed normal.

Thresholds come from the error distribution on normal data: either a fixed
value, a calibrated quantile, or a sweep over a grid to expose the
accuracy/threshold trade-off.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import Autoencoder
from .errors import DataError
from .pipeline import encode, windowize
from .signals import Series

METRIC_MAE = "mae"
METRIC_MSE = "mse"
METRICS = (METRIC_MAE, METRIC_MSE)

TIMELINE_HEADER = ("t", "error", "flag")
HISTOGRAM_HEADER = ("bin_left", "bin_right", "count")

#: Threshold grid for the standard sweep report.
SWEEP_THRESHOLDS = (0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225, 0.25)

#: Quantile of normal-data window errors used for threshold calibration.
DEFAULT_CALIBRATION_QUANTILE = 0.97


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}, expected one of {METRICS}")


def window_errors(model: Autoencoder, windows: np.ndarray, metric: str = METRIC_MAE) -> np.ndarray:
    """Reconstruction error per window, averaged over all w*p elements."""
    _check_metric(metric)
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[None]
    diff = model.reconstruct(windows) - windows
    if metric == METRIC_MAE:
        return np.abs(diff).mean(axis=(1, 2))
    return (diff * diff).mean(axis=(1, 2))


def window_error(model: Autoencoder, window: np.ndarray, metric: str = METRIC_MAE) -> float:
    """Reconstruction error of a single w-by-p window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DataError(f"expected one window of shape (w, p), got {window.shape}")
    return float(window_errors(model, window[None], metric)[0])


@dataclass
class DetectionTimeline:
    """Scored seconds of one series: error and flag per second, plus context.

    ``seconds[i]`` is absolute time; the unscored warm-up (the first w-1
    seconds of the series) is not represented by any record.
    """

    seconds: np.ndarray
    errors: np.ndarray
    threshold: float
    metric: str
    window: int

    def __post_init__(self) -> None:
        if len(self.seconds) != len(self.errors):
            raise DataError("timeline seconds and errors must align")

    @property
    def flags(self) -> np.ndarray:
        return self.errors > self.threshold

    def flagged_seconds(self) -> np.ndarray:
        return self.seconds[self.flags]

    def __len__(self) -> int:
        return len(self.seconds)


def scan(model: Autoencoder, series: Series, threshold: float,
         metric: str = METRIC_MAE) -> DetectionTimeline:
    """Score every complete window of a series against the threshold."""
    _check_metric(metric)
    if model.scaler is None or not model.scaler.fitted:
        raise DataError("model has no fitted scaler; train or load a checkpoint first")
    w = model.architecture.window
    if len(series) < w:
        raise DataError(f"series of length {len(series)} is shorter than the window ({w})")
    normalized = model.scaler.transform(encode(series))
    windows = windowize(normalized, w)
    errors = window_errors(model, windows, metric)
    seconds = series.start_time + w - 1 + np.arange(len(windows))
    return DetectionTimeline(seconds=seconds, errors=errors, threshold=threshold,
                             metric=metric, window=w)


@dataclass
class ErrorHistogram:
    edges: np.ndarray  # bins + 1 edges, uniform on [0, max]
    counts: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.counts) + 1:
            raise DataError("histogram needs one more edge than counts")


def histogram(errors: np.ndarray, bins: int = 50, label: str = "") -> ErrorHistogram:
    """Uniform-bin histogram of window errors on [0, max]."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise DataError("cannot histogram an empty error list")
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    top = float(errors.max())
    if top <= 0.0:
        top = 1.0  # all-zero errors: any single bin containing them will do
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(errors, bins=edges)
    return ErrorHistogram(edges=edges, counts=counts, label=label)


def per_second_accuracy(timeline: DetectionTimeline, labels: np.ndarray) -> float:
    """Fraction of scored seconds where the flag matches the truth label.

    ``labels`` may cover the whole series (warm-up included, length
    len(timeline) + w - 1) or exactly the scored region; anything else is a
    length mismatch.
    """
    labels = np.asarray(labels, dtype=bool)
    scored = len(timeline)
    if len(labels) == scored + timeline.window - 1:
        labels = labels[timeline.window - 1:]
    elif len(labels) != scored:
        raise DataError(
            f"labels cover {len(labels)} seconds; timeline scores {scored} "
            f"(or {scored + timeline.window - 1} with warm-up)")
    return float(np.mean(timeline.flags == labels))


@dataclass
class SweepTable:
    """Accuracy per (threshold, dataset), in the standard report layout."""

    thresholds: tuple[float, ...]
    labels: tuple[str, ...]
    accuracy: np.ndarray  # shape (len(thresholds), len(labels))

    def column(self, label: str) -> np.ndarray:
        try:
            return self.accuracy[:, self.labels.index(label)]
        except ValueError:
            raise DataError(f"no dataset {label!r} in sweep") from None


def sweep_thresholds(model: Autoencoder, datasets: list[tuple[str, Series, np.ndarray]],
                     thresholds: tuple[float, ...] = SWEEP_THRESHOLDS,
                     metric: str = METRIC_MAE) -> SweepTable:
    """Accuracy of every dataset at every threshold.

    ``datasets`` holds (label, series, per-second truth labels) triples.
    Window errors are computed once per dataset and re-thresholded, so the
    sweep costs one scan regardless of grid size.
    """
    if not thresholds:
        raise DataError("threshold grid is empty")
    if not datasets:
        raise DataError("no datasets to sweep")
    acc = np.empty((len(thresholds), len(datasets)), dtype=np.float64)
    for j, (label, series, truth) in enumerate(datasets):
        timeline = scan(model, series, threshold=0.0, metric=metric)
        for i, eps in enumerate(thresholds):
            timeline.threshold = eps
            acc[i, j] = per_second_accuracy(timeline, truth)
    return SweepTable(thresholds=tuple(thresholds),
                      labels=tuple(label for label, _, _ in datasets),
                      accuracy=acc)


def calibrate(model: Autoencoder, normal_series: list[Series], quantile: float = DEFAULT_CALIBRATION_QUANTILE,
              metric: str = METRIC_MAE) -> float:
    """Pick the threshold as a quantile of pooled normal-data window errors."""
    if not 0.0 < quantile <= 1.0:
        raise DataError(f"quantile must be in (0, 1], got {quantile}")
    if not normal_series:
        raise DataError("no normal series to calibrate on")
    pooled = [scan(model, s, threshold=0.0, metric=metric).errors for s in normal_series]
    return float(np.quantile(np.concatenate(pooled), quantile))


def write_timeline_csv(path, timeline: DetectionTimeline) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMELINE_HEADER)
        flags = timeline.flags
        for i in range(len(timeline)):
            writer.writerow([int(timeline.seconds[i]), repr(float(timeline.errors[i])), int(flags[i])])


def read_timeline_csv(path, threshold: float, metric: str, window: int) -> DetectionTimeline:
    """Rebuild a timeline from its CSV; flag column is checked, not trusted."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TIMELINE_HEADER:
            raise DataError(f"bad timeline header in {path}")
        seconds, errors, flags = [], [], []
        for row in reader:
            if len(row) != 3:
                raise DataError(f"bad timeline row in {path}: {row!r}")
            try:
                seconds.append(int(row[0]))
                errors.append(float(row[1]))
                flags.append(int(row[2]))
            except ValueError as exc:
                raise DataError(f"bad timeline row in {path}: {row!r}") from exc
    timeline = DetectionTimeline(seconds=np.asarray(seconds, dtype=np.int64),
                                 errors=np.asarray(errors, dtype=np.float64),
                                 threshold=threshold, metric=metric, window=window)
    if not np.array_equal(timeline.flags, np.asarray(flags, dtype=bool)):
        raise DataError(f"{path}: stored flags disagree with threshold {threshold}")
    return timeline


def write_histogram_csv(path, hist: ErrorHistogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_HEADER)
        for i in range(len(hist.counts)):
            writer.writerow([repr(float(hist.edges[i])), repr(float(hist.edges[i + 1])), int(hist.counts[i])])


def write_sweep_csv(path, table: SweepTable) -> None:
    """Threshold grid as rows, datasets as columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", *table.labels])
        for i, eps in enumerate(table.thresholds):
            writer.writerow([repr(float(eps))] + [f"{a:.4f}" for a in table.accuracy[i]])
