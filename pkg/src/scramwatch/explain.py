"""Shapley attribution of window reconstruction error, and replay localization.

The coalition game behind the attribution: the players are the nine
signals; the payoff of a coalition S is the reconstruction error of a
hybrid window in which the signals in S keep their observed values and
every other signal is replaced by its expected trajectory. With nine
players the full 512-coalition enumeration is cheap, so the Shapley values
here are exact, not estimated.

The expected trajectory is event-aligned: during a SCRAM the proper
reference for second t is what signals normally look like that many seconds
after an onset, not a global mean (a plant in free decay snapped back to
average power would itself be a wild anomaly). The baseline is therefore a
per-offset average over the training event corpus, and occlusion substitutes
the slice aligned to the series' own onset. Outside any known event the
per-feature training mean is the fallback and results are tagged
low-confidence.

Localization then thresholds the per-second attributions: a signal marked
above tau for a sustained run is reported replayed, with start, end and
duration. The lag-T autocorrelation of the attribution plateau gives a
replay-signature score, since verbatim playback of a recorded slice leaves
a periodic fingerprint that fabricated data need not have.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import Autoencoder
from .detector import METRIC_MAE, DetectionTimeline, _check_metric, window_errors
from .errors import ConfigError, DataError
from .pipeline import encode, windowize
from .signals import SIGNALS, Series

#: Largest player count for which exhaustive enumeration is allowed.
EXHAUSTIVE_LIMIT = 16

#: Consecutive marked seconds required to call a signal replayed.
DEFAULT_MIN_RUN = 5

#: Quantile of clean-data |phi| used to calibrate the marking threshold.
DEFAULT_TAU_QUANTILE = 0.999

ATTRIBUTION_HEADER = ("t", "signal", "phi")

BASELINE_EVENT = "event"
BASELINE_GLOBAL_MEAN = "global_mean"


@dataclass
class BaselineTrajectory:
    """Expected normalized signal values, indexed by offset from event onset.

    ``table[k]`` holds the per-signal expectation at offset
    ``first_offset + k``. Lookups before coverage return the pre-onset
    plateau; lookups past the end return the final (settled) row.
    """

    first_offset: int
    table: np.ndarray  # (n_offsets, p)
    plateau: np.ndarray  # (p,)
    source_count: int
    kind: str = BASELINE_EVENT

    def __post_init__(self) -> None:
        if self.table.ndim != 2 or self.plateau.shape != (self.table.shape[1],):
            raise DataError("baseline table and plateau shapes disagree")

    @property
    def last_offset(self) -> int:
        return self.first_offset + len(self.table) - 1

    def slice(self, onset: int, end_second: int, width: int) -> np.ndarray:
        """Baseline window for absolute seconds [end-width+1, end], aligned at onset."""
        offsets = np.arange(end_second - width + 1, end_second + 1) - onset
        out = np.empty((width, self.table.shape[1]), dtype=np.float64)
        before = offsets < self.first_offset
        after = offsets > self.last_offset
        inside = ~(before | after)
        out[before] = self.plateau
        out[after] = self.table[-1]
        out[inside] = self.table[offsets[inside] - self.first_offset]
        return out

    @classmethod
    def global_mean(cls, means: np.ndarray) -> "BaselineTrajectory":
        """Flat fallback baseline: the per-feature training mean at every offset."""
        means = np.asarray(means, dtype=np.float64)
        return cls(first_offset=0, table=means[None, :].copy(), plateau=means.copy(),
                   source_count=0, kind=BASELINE_GLOBAL_MEAN)


def build_baseline(scram_corpus: list[Series], scaler, lookback: int = 10,
                   steady_window: int = 60) -> BaselineTrajectory:
    """Average the normalized event corpus, aligned on each series' own onset.

    Covers offsets from ``-lookback`` to the shortest post-onset tail in
    the corpus. The pre-onset plateau averages up to ``steady_window``
    seconds before each onset, so it is smoother than any single row.
    """
    if not scram_corpus:
        raise DataError("cannot build a baseline from an empty corpus")
    matrices = []
    onsets = []
    for series in scram_corpus:
        onset = series.scram_onset()
        if onset is None:
            raise DataError("baseline corpus series lacks an event onset")
        idx = onset - series.start_time
        if idx < lookback:
            raise DataError(f"series onset at {onset} leaves less than {lookback} s of pre-event data")
        matrices.append(scaler.transform(encode(series)))
        onsets.append(idx)

    tail = min(m.shape[0] - onset for m, onset in zip(matrices, onsets))
    offsets = np.arange(-lookback, tail)
    table = np.zeros((len(offsets), matrices[0].shape[1]), dtype=np.float64)
    plateau = np.zeros(matrices[0].shape[1], dtype=np.float64)
    for m, onset in zip(matrices, onsets):
        table += m[onset - lookback:onset + tail]
        back = min(steady_window, onset)
        plateau += m[onset - back:onset].mean(axis=0)
    table /= len(matrices)
    plateau /= len(matrices)
    return BaselineTrajectory(first_offset=-lookback, table=table, plateau=plateau,
                              source_count=len(matrices))


@dataclass(frozen=True)
class ShapleyAttribution:
    """Exact per-signal attribution of one window's reconstruction error."""

    end_second: int
    phi: np.ndarray  # (p,)
    v_full: float
    v_empty: float


def coalition_payoffs(model: Autoencoder, window: np.ndarray, baseline_slice: np.ndarray,
                      metric: str = METRIC_MAE) -> np.ndarray:
    """Payoff v(S) for every coalition bitmask 0..2^p-1, in one batched pass.

    Bit j of the mask set means signal j keeps its observed values; clear
    means it takes the baseline. Each coalition is evaluated exactly once.
    """
    _check_metric(metric)
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DataError(f"expected one window (w, p), got shape {window.shape}")
    if baseline_slice.shape != window.shape:
        raise DataError(
            f"baseline slice shape {baseline_slice.shape} does not align with window {window.shape}")
    p = window.shape[1]
    if p > EXHAUSTIVE_LIMIT:
        raise ConfigError(
            f"{p} players exceed the exhaustive enumeration limit ({EXHAUSTIVE_LIMIT}); "
            "use sampled_shapley instead")
    masks = np.arange(1 << p, dtype=np.uint32)
    member = ((masks[:, None] >> np.arange(p)) & 1).astype(bool)  # (2^p, p)
    hybrids = np.where(member[:, None, :], window[None], baseline_slice[None])
    return window_errors(model, hybrids, metric)


def _subset_weights(p: int) -> np.ndarray:
    """w[s] = s! (p-1-s)! / p! for s = 0..p-1."""
    fact = [math.factorial(k) for k in range(p + 1)]
    return np.array([fact[s] * fact[p - 1 - s] / fact[p] for s in range(p)], dtype=np.float64)


def shapley_from_payoffs(payoffs: np.ndarray, p: int) -> np.ndarray:
    """Exact Shapley values from a full coalition payoff table."""
    if payoffs.shape != (1 << p,):
        raise DataError(f"payoff table must have 2^{p} entries, got {payoffs.shape}")
    weights = _subset_weights(p)
    masks = np.arange(1 << p, dtype=np.uint32)
    sizes = np.bitwise_count(masks)
    phi = np.empty(p, dtype=np.float64)
    for i in range(p):
        without = masks[(masks >> i) & 1 == 0]
        gain = payoffs[without | (1 << i)] - payoffs[without]
        phi[i] = float(np.sum(weights[sizes[without]] * gain))
    return phi


def exact_shapley(model: Autoencoder, window: np.ndarray, baseline_slice: np.ndarray,
                  metric: str = METRIC_MAE, end_second: int = 0) -> ShapleyAttribution:
    """Exact Shapley attribution of one window's error over the nine signals.

    Guarantees by construction: efficiency (the values sum to
    v(full) - v(empty)) and exact zeros for signals whose observed slice is
    bit-identical to the baseline slice.
    """
    payoffs = coalition_payoffs(model, window, baseline_slice, metric)
    p = window.shape[1]
    phi = shapley_from_payoffs(payoffs, p)
    return ShapleyAttribution(end_second=end_second, phi=phi,
                              v_full=float(payoffs[(1 << p) - 1]), v_empty=float(payoffs[0]))


def sampled_shapley(payoff, p: int, permutations: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo Shapley by permutation sampling.

    ``payoff`` maps a coalition bitmask to a scalar; evaluations are
    memoized, so the cost is bounded by the number of distinct prefixes
    visited. Returns (phi estimates, standard errors). This is the
    estimator of record for player counts beyond the exhaustive limit.
    """
    if permutations < 1:
        raise ConfigError("permutations must be >= 1")
    memo: dict[int, float] = {}

    def v(mask: int) -> float:
        got = memo.get(mask)
        if got is None:
            got = memo[mask] = float(payoff(mask))
        return got

    total = np.zeros(p, dtype=np.float64)
    total_sq = np.zeros(p, dtype=np.float64)
    for _ in range(permutations):
        order = rng.permutation(p)
        mask = 0
        before = v(0)
        for i in order:
            mask |= 1 << int(i)
            after = v(mask)
            gain = after - before
            total[i] += gain
            total_sq[i] += gain * gain
            before = after
    phi = total / permutations
    var = np.maximum(total_sq / permutations - phi * phi, 0.0)
    stderr = np.sqrt(var / permutations)
    return phi, stderr


@dataclass
class PerSecondAttribution:
    """Mean window-level phi per covered second, per signal."""

    seconds: np.ndarray  # (n,) absolute seconds, ascending
    phi: np.ndarray      # (n, p)
    counts: np.ndarray   # (n,) number of windows covering each second
    low_confidence: bool = False

    def signal_curve(self, signal: str) -> np.ndarray:
        try:
            return self.phi[:, SIGNALS.index(signal)]
        except ValueError:
            raise DataError(f"unknown signal {signal!r}") from None


def aggregate_per_second(attributions: list[ShapleyAttribution], width: int) -> PerSecondAttribution:
    """Average window attributions onto the seconds each window covers."""
    if not attributions:
        return PerSecondAttribution(seconds=np.empty(0, dtype=np.int64),
                                    phi=np.empty((0, len(SIGNALS))),
                                    counts=np.empty(0, dtype=np.int64))
    p = attributions[0].phi.shape[0]
    lo = min(a.end_second for a in attributions) - width + 1
    hi = max(a.end_second for a in attributions)
    span = hi - lo + 1
    total = np.zeros((span, p), dtype=np.float64)
    count = np.zeros(span, dtype=np.int64)
    for a in attributions:
        s = a.end_second - width + 1 - lo
        total[s:s + width] += a.phi
        count[s:s + width] += 1
    covered = count > 0
    seconds = lo + np.flatnonzero(covered)
    return PerSecondAttribution(seconds=seconds,
                                phi=total[covered] / count[covered, None],
                                counts=count[covered])


@dataclass(frozen=True)
class SignalVerdict:
    signal: str
    replayed: bool
    start: int | None   # first second of a qualifying run, when replayed
    end: int | None     # last second of a qualifying run
    marked: int         # raw count of seconds above threshold

    @property
    def duration(self) -> int | None:
        if not self.replayed:
            return None
        return self.end - self.start + 1


@dataclass
class LocalizationReport:
    verdicts: list[SignalVerdict]
    tau: float
    min_run: int
    low_confidence: bool = False

    @property
    def replayed_signals(self) -> tuple[str, ...]:
        return tuple(v.signal for v in self.verdicts if v.replayed)

    @property
    def attack_start(self) -> int | None:
        starts = [v.start for v in self.verdicts if v.replayed]
        return min(starts) if starts else None

    @property
    def attack_end(self) -> int | None:
        ends = [v.end for v in self.verdicts if v.replayed]
        return max(ends) if ends else None


def _qualifying_runs(seconds: np.ndarray, marked: np.ndarray, min_run: int) -> list[tuple[int, int]]:
    """Runs of consecutively marked seconds at least min_run long."""
    runs = []
    start = None
    prev = None
    for t, m in zip(seconds, marked):
        if m and prev is not None and start is not None and t == prev + 1:
            prev = t
            continue
        if start is not None and prev - start + 1 >= min_run:
            runs.append((start, prev))
        start, prev = (int(t), int(t)) if m else (None, None)
    if start is not None and prev - start + 1 >= min_run:
        runs.append((start, prev))
    return runs


def localize(per_second: PerSecondAttribution, tau: float,
             min_run: int = DEFAULT_MIN_RUN) -> LocalizationReport:
    """Turn per-second attributions into a replay verdict per signal.

    A second is marked when its attribution exceeds ``tau``; a signal is
    reported replayed when marked for at least ``min_run`` consecutive
    seconds. Start/end come from the qualifying runs only, so an isolated
    noise spike far from the attack cannot stretch the reported interval.
    """
    if tau <= 0.0:
        raise ConfigError(f"tau must be positive, got {tau}")
    verdicts = []
    for j, name in enumerate(SIGNALS):
        marked = per_second.phi[:, j] > tau
        runs = _qualifying_runs(per_second.seconds, marked, min_run)
        if runs:
            verdicts.append(SignalVerdict(signal=name, replayed=True, start=runs[0][0],
                                          end=runs[-1][1], marked=int(marked.sum())))
        else:
            verdicts.append(SignalVerdict(signal=name, replayed=False, start=None,
                                          end=None, marked=int(marked.sum())))
    return LocalizationReport(verdicts=verdicts, tau=tau, min_run=min_run,
                              low_confidence=per_second.low_confidence)


def replay_signature_score(per_second: PerSecondAttribution, signal: str, period_hint: int) -> float:
    """Lag-``period_hint`` autocorrelation of a signal's attribution plateau.

    Verbatim replay tiles the same recorded noise, so the attribution
    plateau repeats with the recording period; fabricated or genuinely
    anomalous data has no reason to. The curve is taken over the marked
    span, the leading ``period_hint`` seconds are dropped as onset
    transient when the span affords it, and a linear trend is removed
    before correlating. Clamped to [0, 1].
    """
    if period_hint < 1:
        raise ConfigError("period_hint must be >= 1")
    j = SIGNALS.index(signal) if signal in SIGNALS else None
    if j is None:
        raise DataError(f"unknown signal {signal!r}")
    curve = per_second.phi[:, j]
    # the plateau lives where this signal's attribution is materially high;
    # use the span between first and last second above half the peak
    if curve.size == 0:
        raise DataError("no attributed seconds to score")
    peak = float(curve.max())
    high = np.flatnonzero(curve > 0.5 * peak)
    if high.size == 0 or peak <= 0.0:
        raise DataError(f"signal {signal} has no attribution plateau to score")
    x = curve[high[0]:high[-1] + 1]
    if len(x) < 2 * period_hint:
        raise DataError(
            f"plateau of {len(x)} seconds is too short to score at lag {period_hint} "
            f"(need at least {2 * period_hint})")
    if len(x) >= 3 * period_hint:
        x = x[period_hint:]
    t = np.arange(len(x), dtype=np.float64)
    slope, intercept = np.polyfit(t, x, 1)
    resid = x - (slope * t + intercept)
    denom = float(np.sum(resid * resid))
    if denom <= len(x) * (1e-9 * peak) ** 2:
        # flat to relative precision: no structure to correlate
        return 0.0
    num = float(np.sum(resid[:-period_hint] * resid[period_hint:]))
    return float(np.clip(num / denom, 0.0, 1.0))


@dataclass
class ExplainResult:
    attributions: list[ShapleyAttribution]
    per_second: PerSecondAttribution
    report: LocalizationReport


def explain_flagged(model: Autoencoder, series: Series, timeline: DetectionTimeline,
                    baseline: BaselineTrajectory, onset: int, tau: float,
                    min_run: int = DEFAULT_MIN_RUN, metric: str = METRIC_MAE,
                    flagged_only: bool = True) -> ExplainResult:
    """Attribute windows of a series and derive the localization verdict.

    By default only flagged windows are attributed (the real-time
    behavior); ``flagged_only=False`` attributes every scored window, which
    is how the marking threshold is calibrated on clean data.
    """
    if model.scaler is None or not model.scaler.fitted:
        raise DataError("model has no fitted scaler")
    w = model.architecture.window
    normalized = model.scaler.transform(encode(series))
    windows = windowize(normalized, w)
    ends = series.start_time + w - 1 + np.arange(len(windows))
    if flagged_only:
        if len(timeline) != len(windows) or timeline.seconds[0] != ends[0]:
            raise DataError("timeline does not align with the series")
        keep = np.flatnonzero(timeline.flags)
    else:
        keep = np.arange(len(windows))

    attributions = []
    for k in keep:
        end = int(ends[k])
        base = baseline.slice(onset, end, w)
        attributions.append(exact_shapley(model, windows[k], base, metric=metric, end_second=end))
    per_second = aggregate_per_second(attributions, w)
    per_second.low_confidence = baseline.kind == BASELINE_GLOBAL_MEAN
    report = localize(per_second, tau, min_run)
    return ExplainResult(attributions=attributions, per_second=per_second, report=report)


def calibrate_tau(model: Autoencoder, clean_series: list[Series], baseline: BaselineTrajectory,
                  quantile: float = DEFAULT_TAU_QUANTILE, metric: str = METRIC_MAE,
                  stride: int = 1) -> float:
    """Marking threshold: a high quantile of clean-data per-second |phi|.

    Attribution noise on normal event data sets the floor; anything above
    it by this quantile's margin is treated as signal. ``stride``
    subsamples windows to cut calibration cost on long series.
    """
    if not clean_series:
        raise DataError("no clean series to calibrate on")
    if not 0.0 < quantile <= 1.0:
        raise DataError(f"quantile must be in (0, 1], got {quantile}")
    pooled = []
    for series in clean_series:
        onset = series.scram_onset()
        if onset is None:
            raise DataError("calibration series lacks an event onset")
        w = model.architecture.window
        normalized = model.scaler.transform(encode(series))
        windows = windowize(normalized, w)[::stride]
        ends = series.start_time + w - 1 + stride * np.arange(len(windows))
        attributions = [
            exact_shapley(model, windows[k], baseline.slice(onset, int(ends[k]), w),
                          metric=metric, end_second=int(ends[k]))
            for k in range(len(windows))
        ]
        per_second = aggregate_per_second(attributions, w)
        pooled.append(np.abs(per_second.phi).ravel())
    return float(np.quantile(np.concatenate(pooled), quantile))


def write_attribution_csv(path, per_second: PerSecondAttribution) -> None:
    """Long-format per-second attributions: one row per (second, signal)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATTRIBUTION_HEADER)
        for i, t in enumerate(per_second.seconds):
            for j, name in enumerate(SIGNALS):
                writer.writerow([int(t), name, repr(float(per_second.phi[i, j]))])


def read_attribution_csv(path) -> PerSecondAttribution:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ATTRIBUTION_HEADER:
            raise DataError(f"bad attribution header in {path}")
        by_second: dict[int, dict[str, float]] = {}
        for row in reader:
            if len(row) != 3:
                raise DataError(f"bad attribution row in {path}: {row!r}")
            try:
                t = int(row[0])
                value = float(row[2])
            except ValueError as exc:
                raise DataError(f"bad attribution row in {path}: {row!r}") from exc
            if row[1] not in SIGNALS:
                raise DataError(f"unknown signal {row[1]!r} in {path}")
            by_second.setdefault(t, {})[row[1]] = value
    seconds = np.array(sorted(by_second), dtype=np.int64)
    phi = np.zeros((len(seconds), len(SIGNALS)), dtype=np.float64)
    for i, t in enumerate(seconds):
        row = by_second[int(t)]
        if len(row) != len(SIGNALS):
            raise DataError(f"{path}: second {t} is missing signals")
        for j, name in enumerate(SIGNALS):
            phi[i, j] = row[name]
    return PerSecondAttribution(seconds=seconds, phi=phi,
                                counts=np.ones(len(seconds), dtype=np.int64))


def write_localization_report(path, report: LocalizationReport) -> None:
    """Structured text: one line per signal, then a one-line summary."""
    with open(path, "w") as fh:
        fh.write("signal,replayed,start,end,duration\n")
        for v in report.verdicts:
            if v.replayed:
                fh.write(f"{v.signal},yes,{v.start},{v.end},{v.duration}\n")
            else:
                fh.write(f"{v.signal},no,,,\n")
        start = report.attack_start
        end = report.attack_end
        fh.write(f"signals_replayed={len(report.replayed_signals)},"
                 f"attack_start={'' if start is None else start},"
                 f"attack_end={'' if end is None else end}\n")
        if report.low_confidence:
            fh.write("# low confidence: no event onset, global-mean baseline used\n")
