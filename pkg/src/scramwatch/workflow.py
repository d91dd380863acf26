"""End-to-end orchestration: corpus, training, calibration, attacks, report.

Each step is a plain function from (config, files in) to files out, shared
by the command-line front end and the test suite, so there is exactly one
code path for the full exercise:

    simulate -> train -> finetune -> calibrate -> inject -> detect
             -> explain -> report

The manifest (JSON, next to the data files) records every generated series
with its seed, role, and event onset; downstream steps resolve their inputs
through it instead of guessing from filenames.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import attack, checkpoint, detector, explain, figures, training
from .autoencoder import Architecture, Autoencoder
from .config import RunConfig, read_calibration, write_calibration
from .errors import ConfigError, DataError
from .pipeline import encode, fit_scaler, windowize
from .signals import Event, SCRAM_EVENT, Series, read_series_csv, write_series_csv
from .simulate import (
    CycleProfile,
    ScramProfile,
    generate_full_cycle,
    generate_scram,
    vary_cycle_profile,
    vary_scram_profile,
)

MANIFEST_NAME = "manifest.json"

ROLE_TRAIN = "train"
ROLE_VAL = "val"
ROLE_TEST = "test"
ROLE_HELDOUT = "heldout"


@dataclass(frozen=True)
class ManifestEntry:
    kind: str  # "cycle" | "scram"
    name: str
    path: str  # file name relative to the data directory
    seed: int
    role: str
    onset: int | None = None


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def select(self, kind: str, role: str | None = None) -> list[ManifestEntry]:
        return [e for e in self.entries
                if e.kind == kind and (role is None or e.role == role)]

    def save(self, data_dir: str) -> None:
        payload = {"entries": [vars(e) for e in self.entries]}
        with open(os.path.join(data_dir, MANIFEST_NAME), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, data_dir: str) -> "Manifest":
        path = os.path.join(data_dir, MANIFEST_NAME)
        try:
            with open(path) as fh:
                payload = json.load(fh)
            entries = [ManifestEntry(**e) for e in payload["entries"]]
        except FileNotFoundError:
            raise DataError(f"no manifest at {path}; run simulate first") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"unreadable manifest {path}: {exc}") from exc
        return cls(entries=entries)


def load_series(data_dir: str, entry: ManifestEntry) -> Series:
    events = [Event(SCRAM_EVENT, entry.onset)] if entry.onset is not None else []
    return read_series_csv(os.path.join(data_dir, entry.path), events=events)


def simulate_corpus(config: RunConfig, data_dir: str, log=None) -> Manifest:
    """Generate the configured corpus and its manifest. Deterministic."""
    os.makedirs(data_dir, exist_ok=True)
    total = config.cycles + config.scrams
    seeds = [int(s) for s in np.random.SeedSequence(config.seed).generate_state(max(total, 1))]

    cycle_base = CycleProfile(duration=config.cycle_duration,
                              outlier_rate=config.outlier_rate, null_rate=config.null_rate)
    scram_base = ScramProfile(duration=config.scram_duration, onset=config.scram_onset,
                              outlier_rate=config.outlier_rate, null_rate=config.null_rate)

    manifest = Manifest()
    for i in range(config.cycles):
        if i < config.cycle_train:
            role = ROLE_TRAIN
        elif i < config.cycle_train + config.cycle_val:
            role = ROLE_VAL
        else:
            role = ROLE_TEST
        profile = vary_cycle_profile(cycle_base, seeds[i])
        series = generate_full_cycle(profile)
        name = f"cycle_{i:02d}"
        write_series_csv(series, os.path.join(data_dir, f"{name}.csv"))
        manifest.entries.append(ManifestEntry(kind="cycle", name=name, path=f"{name}.csv",
                                              seed=profile.seed, role=role))
    for i in range(config.scrams):
        if i < config.scram_train:
            role = ROLE_TRAIN
        elif i < config.scram_train + config.scram_val:
            role = ROLE_VAL
        else:
            role = ROLE_HELDOUT
        profile = vary_scram_profile(scram_base, seeds[config.cycles + i])
        series = generate_scram(profile)
        name = f"scram_{i:02d}"
        write_series_csv(series, os.path.join(data_dir, f"{name}.csv"))
        manifest.entries.append(ManifestEntry(kind="scram", name=name, path=f"{name}.csv",
                                              seed=profile.seed, role=role, onset=config.scram_onset))
    manifest.save(data_dir)
    if log is not None:
        log(f"wrote {config.cycles} cycles + {config.scrams} scrams to {data_dir}")
    return manifest


def model_architecture(config: RunConfig) -> Architecture:
    if config.desk_scale:
        return Architecture.desk_scale(window=config.window)
    return Architecture(window=config.window)


def _window_stack(series_list: list[Series], scaler, width: int, stride: int = 1) -> np.ndarray:
    """Normalized windows of every series, stacked; windows never span series."""
    parts = [windowize(scaler.transform(encode(s)), width, stride) for s in series_list]
    return np.concatenate(parts, axis=0)


def _paths(out_dir: str) -> dict[str, str]:
    return {
        "model": os.path.join(out_dir, "model.ckpt"),
        "finetuned": os.path.join(out_dir, "model_finetuned.ckpt"),
        "history_train": os.path.join(out_dir, "history_train.csv"),
        "history_finetune": os.path.join(out_dir, "history_finetune.csv"),
        "calibration": os.path.join(out_dir, "calibration.cfg"),
        "sweep": os.path.join(out_dir, "sweep.csv"),
        "report": os.path.join(out_dir, "report.txt"),
    }


def train_model(config: RunConfig, data_dir: str, out_dir: str, log=None) -> list[training.EpochRecord]:
    """Fit the autoencoder on full-cycle windows; write checkpoint + history."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = Manifest.load(data_dir)
    train_series = [load_series(data_dir, e) for e in manifest.select("cycle", ROLE_TRAIN)]
    val_series = [load_series(data_dir, e) for e in manifest.select("cycle", ROLE_VAL)]
    if not train_series or not val_series:
        raise DataError("manifest has no train/validation cycles")

    # scaler bounds come from everything the model will ever train on
    scram_train = [load_series(data_dir, e) for e in manifest.select("scram", ROLE_TRAIN)]
    scaler = fit_scaler([encode(s) for s in train_series + scram_train])

    arch = model_architecture(config)
    model = Autoencoder(arch, seed=config.seed)
    model.scaler = scaler

    train_windows = _window_stack(train_series, scaler, arch.window, config.train_stride)
    val_windows = _window_stack(val_series, scaler, arch.window)
    cfg = training.TrainConfig(learning_rate=config.learning_rate, batch_size=config.batch_size,
                               epochs=config.epochs, seed=config.seed, patience=config.patience)
    history = training.fit(model, train_windows, val_windows, cfg, log=log)

    paths = _paths(out_dir)
    checkpoint.save(model, paths["model"])
    training.write_history_csv(paths["history_train"], history)
    if config.figures:
        figures.render_history_svg(os.path.join(out_dir, "history_train.svg"), history,
                                   title="training loss (full cycles)")
    return history


def finetune_model(config: RunConfig, data_dir: str, out_dir: str, log=None) -> list[training.EpochRecord]:
    """Continue training on event windows; write the tuned checkpoint."""
    manifest = Manifest.load(data_dir)
    paths = _paths(out_dir)
    model = checkpoint.load(paths["model"])
    train_series = [load_series(data_dir, e) for e in manifest.select("scram", ROLE_TRAIN)]
    val_series = [load_series(data_dir, e) for e in manifest.select("scram", ROLE_VAL)]
    if not train_series or not val_series:
        raise DataError("manifest has no train/validation scrams")
    w = model.architecture.window
    train_windows = _window_stack(train_series, model.scaler, w, config.train_stride)
    val_windows = _window_stack(val_series, model.scaler, w)
    cfg = training.TrainConfig(learning_rate=config.learning_rate, batch_size=config.batch_size,
                               epochs=config.finetune_epochs, seed=config.seed + 1,
                               patience=config.patience)
    history = training.finetune(model, train_windows, val_windows, cfg, log=log)
    checkpoint.save(model, paths["finetuned"])
    training.write_history_csv(paths["history_finetune"], history)
    if config.figures:
        figures.render_history_svg(os.path.join(out_dir, "history_finetune.svg"), history,
                                   title="fine-tuning loss (events)")
    return history


def _detection_model(out_dir: str) -> Autoencoder:
    """The model detection should use: fine-tuned if present, else base."""
    paths = _paths(out_dir)
    path = paths["finetuned"] if os.path.exists(paths["finetuned"]) else paths["model"]
    if not os.path.exists(path):
        raise DataError(f"no checkpoint in {out_dir}; run train first")
    return checkpoint.load(path)


def build_event_baseline(config: RunConfig, data_dir: str, model: Autoencoder) -> explain.BaselineTrajectory:
    manifest = Manifest.load(data_dir)
    corpus = [load_series(data_dir, e) for e in manifest.select("scram", ROLE_TRAIN)]
    if not corpus:
        raise DataError("manifest has no training scrams to build a baseline from")
    return explain.build_baseline(corpus, model.scaler, lookback=model.architecture.window)


def calibrate_thresholds(config: RunConfig, data_dir: str, out_dir: str, log=None) -> tuple[float, float]:
    """Set epsilon and tau from clean validation events; write calibration.cfg."""
    manifest = Manifest.load(data_dir)
    model = _detection_model(out_dir)
    val_series = [load_series(data_dir, e) for e in manifest.select("scram", ROLE_VAL)]
    if not val_series:
        raise DataError("manifest has no validation scrams to calibrate on")
    epsilon = detector.calibrate(model, val_series, quantile=config.calibration_quantile,
                                 metric=config.metric)
    baseline = build_event_baseline(config, data_dir, model)
    tau = explain.calibrate_tau(model, val_series, baseline, quantile=config.tau_quantile,
                                metric=config.metric, stride=config.tau_stride)
    write_calibration(_paths(out_dir)["calibration"], epsilon, tau)
    if log is not None:
        log(f"calibrated threshold {epsilon:.6f}, tau {tau:.6f}")
    return epsilon, tau


def resolve_thresholds(config: RunConfig, out_dir: str) -> tuple[float, float]:
    """Explicit config values win; otherwise read the calibration file."""
    if config.threshold is not None and config.tau_shap is not None:
        return config.threshold, config.tau_shap
    path = _paths(out_dir)["calibration"]
    if not os.path.exists(path):
        if config.threshold is not None:
            raise ConfigError("tau_shap is not set and no calibration file exists; run calibrate")
        raise ConfigError("no threshold set and no calibration file exists; run calibrate "
                          "or pass an explicit threshold")
    epsilon, tau = read_calibration(path)
    return (config.threshold if config.threshold is not None else epsilon,
            config.tau_shap if config.tau_shap is not None else tau)


def heldout_scram_entry(manifest: Manifest) -> ManifestEntry:
    held = manifest.select("scram", ROLE_HELDOUT)
    if not held:
        raise DataError("manifest has no held-out scram")
    return held[0]


def inject_scenario(config: RunConfig, data_dir: str, level: int,
                    source: str | None = None, log=None) -> tuple[str, str]:
    """Write the falsified copy of a scram plus its ground-truth sidecar.

    ``source`` names a series file in the data directory; default is the
    first held-out scram in the manifest.
    """
    manifest = Manifest.load(data_dir)
    if source is None:
        entry = heldout_scram_entry(manifest)
    else:
        matches = [e for e in manifest.entries if e.path == source or e.name == source]
        if not matches:
            raise DataError(f"no manifest entry named {source!r}")
        entry = matches[0]
    series = load_series(data_dir, entry)
    falsified, truth = attack.build_scenario(series, level, t_start=config.record_start,
                                             period=config.period, t_attack=config.attack_start,
                                             repeats=config.repeats)
    out_series = os.path.join(data_dir, f"replay{level}.csv")
    out_truth = os.path.join(data_dir, f"replay{level}_truth.csv")
    write_series_csv(falsified, out_series)
    attack.write_truth_csv(out_truth, truth)
    if log is not None:
        log(f"level {level}: falsified {', '.join(truth.falsified_signals())} -> {out_series}")
    return out_series, out_truth


def detect_file(config: RunConfig, data_dir: str, out_dir: str, series_file: str,
                name: str, log=None) -> detector.DetectionTimeline:
    """Scan one series file; write timeline + histogram (+ figure)."""
    os.makedirs(out_dir, exist_ok=True)
    model = _detection_model(out_dir)
    epsilon, _ = resolve_thresholds(config, out_dir)
    series = read_series_csv(os.path.join(data_dir, series_file))
    timeline = detector.scan(model, series, epsilon, metric=config.metric)
    detector.write_timeline_csv(os.path.join(out_dir, f"{name}_timeline.csv"), timeline)
    hist = detector.histogram(timeline.errors, label=name)
    detector.write_histogram_csv(os.path.join(out_dir, f"{name}_hist.csv"), hist)
    if config.figures:
        figures.render_timeline_svg(os.path.join(out_dir, f"{name}_timeline.svg"),
                                    series, timeline, title=f"detection timeline ({name})")
        figures.render_histogram_svg(os.path.join(out_dir, f"{name}_hist.svg"), hist)
    if log is not None:
        flagged = int(timeline.flags.sum())
        log(f"{name}: {flagged}/{len(timeline)} seconds flagged at threshold {epsilon:.6f}")
    return timeline


def explain_file(config: RunConfig, data_dir: str, out_dir: str, series_file: str,
                 name: str, log=None) -> explain.ExplainResult:
    """Attribute one series' flagged windows; write attribution + verdict."""
    model = _detection_model(out_dir)
    epsilon, tau = resolve_thresholds(config, out_dir)
    series = read_series_csv(os.path.join(data_dir, series_file))
    timeline = detector.scan(model, series, epsilon, metric=config.metric)

    onset = config.onset_override
    if onset is None:
        onset = series.scram_onset()
    if onset is None:
        from .signals import infer_scram_onset
        onset = infer_scram_onset(series)
    if onset is not None:
        baseline = build_event_baseline(config, data_dir, model)
    else:
        # no event anchor: fall back to flat training-mean occlusion
        manifest = Manifest.load(data_dir)
        train_series = [load_series(data_dir, e) for e in manifest.select("cycle", ROLE_TRAIN)]
        means = np.mean(np.vstack([model.scaler.transform(encode(s)) for s in train_series]), axis=0)
        baseline = explain.BaselineTrajectory.global_mean(means)
        onset = series.start_time

    result = explain.explain_flagged(model, series, timeline, baseline, onset=onset,
                                     tau=tau, min_run=config.min_run, metric=config.metric)
    explain.write_attribution_csv(os.path.join(out_dir, f"{name}_attrib.csv"), result.per_second)
    _write_verdict(os.path.join(out_dir, f"{name}_report.txt"), result, config)
    if config.figures:
        figures.render_attribution_svg(os.path.join(out_dir, f"{name}_attrib.svg"),
                                       result.per_second, tau,
                                       title=f"per-second attribution ({name})")
    if log is not None:
        if result.attributions:
            log(f"{name}: replayed = {list(result.report.replayed_signals)}")
        else:
            log(f"{name}: nothing to explain (no flagged windows)")
    return result


def _write_verdict(path: str, result: explain.ExplainResult, config: RunConfig) -> None:
    explain.write_localization_report(path, result.report)
    # identified fraction of the reported attack interval, per signal
    report = result.report
    if report.attack_start is not None:
        span = report.attack_end - report.attack_start + 1
        with open(path, "a") as fh:
            fh.write("# fraction of reported attack interval marked, per signal\n")
            per_second = result.per_second
            inside = (per_second.seconds >= report.attack_start) & (per_second.seconds <= report.attack_end)
            for j, verdict in enumerate(report.verdicts):
                marked = int(np.sum(per_second.phi[inside, j] > report.tau))
                fh.write(f"{verdict.signal},identified={marked / span:.4f}\n")


@dataclass
class ScenarioScore:
    """How one attacked dataset fared against its ground truth."""

    name: str
    accuracy: float
    expected: tuple[str, ...]
    replayed: tuple[str, ...]
    coverage: dict[str, float]
    untargeted_fraction: float
    end_overshoot: int

    @property
    def exact_match(self) -> bool:
        return tuple(sorted(self.expected)) == tuple(sorted(self.replayed))

    @property
    def min_coverage(self) -> float:
        return min(self.coverage.values()) if self.coverage else 0.0


def score_scenario(name: str, truth: attack.GroundTruth, timeline: detector.DetectionTimeline,
                   per_second: explain.PerSecondAttribution, report: explain.LocalizationReport,
                   window: int) -> ScenarioScore:
    """Score detection and localization of one attacked series against truth."""
    accuracy = detector.per_second_accuracy(timeline, truth.any_falsified())
    expected = truth.falsified_signals()
    if truth.spec is not None:
        span_lo, span_hi = truth.spec.span
    else:
        any_mask = truth.any_falsified()
        hits = np.flatnonzero(any_mask)
        span_lo = truth.start_time + int(hits[0])
        span_hi = truth.start_time + int(hits[-1]) + 1
    duration = span_hi - span_lo

    coverage: dict[str, float] = {}
    untargeted_worst = 0.0
    from .signals import SIGNALS
    for j, signal in enumerate(SIGNALS):
        marked_seconds = per_second.seconds[per_second.phi[:, j] > report.tau]
        if signal in expected:
            inside = np.sum((marked_seconds >= span_lo) & (marked_seconds < span_hi))
            coverage[signal] = float(inside) / duration
        else:
            untargeted_worst = max(untargeted_worst, len(marked_seconds) / duration)

    overshoot = 0
    for verdict in report.verdicts:
        if verdict.replayed and verdict.signal in expected:
            overshoot = max(overshoot, verdict.end - (span_hi - 1))
    return ScenarioScore(name=name, accuracy=accuracy, expected=expected,
                         replayed=report.replayed_signals, coverage=coverage,
                         untargeted_fraction=float(untargeted_worst), end_overshoot=int(overshoot))


#: Pass/fail gates for the consolidated report.
ACCURACY_FLOOR_ATTACK = 0.95
ACCURACY_FLOOR_CLEAN = 0.93
COVERAGE_FLOOR = 0.90
UNTARGETED_CEILING = 0.10


@dataclass
class BenchmarkResult:
    epsilon: float
    tau: float
    scores: list[ScenarioScore]
    clean_accuracy: float
    sweep: detector.SweepTable
    passed: bool
    report_text: str


def run_report(config: RunConfig, data_dir: str, out_dir: str, log=None) -> BenchmarkResult:
    """Aggregate all six scenarios plus the clean held-out run into one report.

    Reads only files earlier steps wrote; recomputes detection and
    localization scores from them; writes report.txt and the sweep CSV.
    """
    manifest = Manifest.load(data_dir)
    model = _detection_model(out_dir)
    epsilon, tau = resolve_thresholds(config, out_dir)
    w = model.architecture.window
    held = heldout_scram_entry(manifest)
    clean_series = load_series(data_dir, held)

    datasets = []
    scores: list[ScenarioScore] = []
    for level in range(1, attack.MAX_LEVEL + 1):
        series_path = os.path.join(data_dir, f"replay{level}.csv")
        truth_path = os.path.join(data_dir, f"replay{level}_truth.csv")
        attrib_path = os.path.join(out_dir, f"replay{level}_attrib.csv")
        for p in (series_path, truth_path, attrib_path):
            if not os.path.exists(p):
                raise DataError(f"missing artifact {p}; run inject/detect/explain for level {level}")
        series = read_series_csv(series_path)
        truth = attack.read_truth_csv(truth_path)
        timeline = detector.scan(model, series, epsilon, metric=config.metric)
        per_second = explain.read_attribution_csv(attrib_path)
        report = explain.localize(per_second, tau, config.min_run)
        scores.append(score_scenario(f"replay{level}", truth, timeline, per_second, report, w))
        labels = truth.any_falsified()
        datasets.append((f"replay{level}", series, labels))

    clean_labels = np.zeros(len(clean_series), dtype=bool)
    clean_timeline = detector.scan(model, clean_series, epsilon, metric=config.metric)
    clean_accuracy = detector.per_second_accuracy(clean_timeline, clean_labels)
    datasets.append(("clean", clean_series, clean_labels))

    sweep = detector.sweep_thresholds(model, datasets, metric=config.metric)
    detector.write_sweep_csv(_paths(out_dir)["sweep"], sweep)

    lines = [
        "replay localization benchmark report",
        f"threshold = {epsilon!r}",
        f"tau_shap = {tau!r}",
        "",
        "scenario,accuracy,replayed,expected,exact_match,min_coverage,untargeted_max,end_overshoot",
    ]
    passed = clean_accuracy >= ACCURACY_FLOOR_CLEAN
    for s in scores:
        ok = (s.accuracy >= ACCURACY_FLOOR_ATTACK and s.exact_match
              and s.min_coverage >= COVERAGE_FLOOR
              and s.untargeted_fraction <= UNTARGETED_CEILING
              and s.end_overshoot <= w)
        passed = passed and ok
        lines.append(
            f"{s.name},{s.accuracy:.4f},{'+'.join(s.replayed)},{'+'.join(s.expected)},"
            f"{'yes' if s.exact_match else 'no'},{s.min_coverage:.4f},"
            f"{s.untargeted_fraction:.4f},{s.end_overshoot}")
    lines.append(f"clean,{clean_accuracy:.4f},,,,,,")
    lines.append("")
    lines.append("per-signal identified fraction")
    for s in scores:
        for signal in s.expected:
            lines.append(f"{s.name},{signal},{s.coverage[signal]:.4f}")
    lines.append("")
    lines.append(f"result: {'PASS' if passed else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    with open(_paths(out_dir)["report"], "w") as fh:
        fh.write(text)
    if log is not None:
        log(text.rstrip())
    return BenchmarkResult(epsilon=epsilon, tau=tau, scores=scores,
                           clean_accuracy=clean_accuracy, sweep=sweep,
                           passed=passed, report_text=text)


def run_benchmark(config: RunConfig, data_dir: str, out_dir: str, log=None) -> BenchmarkResult:
    """The whole exercise in one call; used by tests and handy interactively."""
    simulate_corpus(config, data_dir, log=log)
    train_model(config, data_dir, out_dir, log=log)
    finetune_model(config, data_dir, out_dir, log=log)
    calibrate_thresholds(config, data_dir, out_dir, log=log)
    manifest = Manifest.load(data_dir)
    held = heldout_scram_entry(manifest)
    detect_file(config, data_dir, out_dir, held.path, "clean", log=log)
    for level in range(1, attack.MAX_LEVEL + 1):
        inject_scenario(config, data_dir, level, log=log)
        detect_file(config, data_dir, out_dir, f"replay{level}.csv", f"replay{level}", log=log)
        explain_file(config, data_dir, out_dir, f"replay{level}.csv", f"replay{level}", log=log)
    return run_report(config, data_dir, out_dir, log=log)
