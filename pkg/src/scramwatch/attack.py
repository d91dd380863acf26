"""Replay attack model: record a telemetry slice, play it back in a loop.

The attack has two stages. First the attacker captures ``period`` seconds
of legitimate data on a chosen set of continuous channels starting at
``t_start``. Later the capture is injected ``repeats`` times back to back
over ``[t_attack, t_attack + repeats * period)``, masking whatever the
plant is actually doing during that interval.

Rod active states are command/indicator bits rather than analogue
readbacks and are never falsified; a recording request naming one is
rejected. The mismatch between a frozen position readback and a state
saying "insert" is exactly the inconsistency the detector keys on.

Only the monitored values are overwritten. The plant the simulator modeled
still does whatever it was doing; ground truth tracks which (second,
signal) cells no longer reflect it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .signals import (
    CONTINUOUS_SIGNALS,
    LINEAR_POWER,
    NEUTRON_COUNTS,
    NEUTRON_FLUX,
    RR_POSITION,
    SS1_POSITION,
    SS2_POSITION,
    Series,
)

#: Escalation order for the numbered scenarios: scenario k falsifies the
#: first k signals of this tuple.
ATTACK_ORDER: tuple[str, ...] = (
    NEUTRON_COUNTS,
    LINEAR_POWER,
    NEUTRON_FLUX,
    RR_POSITION,
    SS1_POSITION,
    SS2_POSITION,
)

MAX_LEVEL = len(ATTACK_ORDER)

TRUTH_HEADER = ("t", "signal", "falsified")


@dataclass(frozen=True)
class RecordedSegment:
    """A verbatim capture of ``period`` seconds on some continuous signals."""

    signals: tuple[str, ...]
    t_start: int
    period: int
    values: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        for name in self.signals:
            col = self.values.get(name)
            if col is None or len(col) != self.period:
                raise DataError(f"recorded segment for {name!r} must hold {self.period} samples")


@dataclass(frozen=True)
class AttackSpec:
    """A recorded segment plus where and how often to play it back."""

    segment: RecordedSegment
    t_attack: int
    repeats: int

    @property
    def span(self) -> tuple[int, int]:
        """Half-open absolute-time interval the falsified samples occupy."""
        return self.t_attack, self.t_attack + self.repeats * self.segment.period

    def validate(self) -> None:
        if self.repeats < 1:
            raise ConfigError("repeats: must be >= 1")
        if self.t_attack < 0:
            raise ConfigError("t_attack: must be >= 0")


@dataclass
class GroundTruth:
    """Per-(second, signal) falsification mask for one attacked series."""

    length: int
    start_time: int = 0
    mask: dict[str, np.ndarray] = field(default_factory=dict)
    spec: AttackSpec | None = None

    def __post_init__(self) -> None:
        for name in CONTINUOUS_SIGNALS:
            if name not in self.mask:
                self.mask[name] = np.zeros(self.length, dtype=bool)

    def falsified_signals(self) -> tuple[str, ...]:
        return tuple(name for name in CONTINUOUS_SIGNALS if self.mask[name].any())

    def is_falsified(self, signal: str, t: int) -> bool:
        if signal not in self.mask:
            raise DataError(f"unknown signal {signal!r}")
        idx = t - self.start_time
        if not 0 <= idx < self.length:
            raise DataError(f"second {t} outside [{self.start_time}, {self.start_time + self.length})")
        return bool(self.mask[signal][idx])

    def any_falsified(self) -> np.ndarray:
        """Boolean vector over seconds: is anything falsified at each second."""
        out = np.zeros(self.length, dtype=bool)
        for col in self.mask.values():
            out |= col
        return out


def record(series: Series, signals: tuple[str, ...] | list[str], t_start: int, period: int) -> RecordedSegment:
    """Stage one: copy ``period`` seconds of the named signals verbatim."""
    if not signals:
        raise ConfigError("signals: at least one signal required")
    seen = set()
    for name in signals:
        if name not in CONTINUOUS_SIGNALS:
            raise ConfigError(f"signals: {name!r} is not a continuous signal (states cannot be replayed)")
        if name in seen:
            raise ConfigError(f"signals: {name!r} listed twice")
        seen.add(name)
    if period < 1:
        raise ConfigError("period: must be >= 1")
    lo = t_start - series.start_time
    if lo < 0 or lo + period > len(series):
        raise DataError(
            f"recording window [{t_start}, {t_start + period}) outside series "
            f"[{series.start_time}, {series.end_time})")
    values = {name: series.values[name][lo:lo + period].copy() for name in signals}
    return RecordedSegment(signals=tuple(signals), t_start=t_start, period=period, values=values)


def inject(series: Series, spec: AttackSpec) -> tuple[Series, GroundTruth]:
    """Stage two: tile the recorded segment over the attack interval.

    Returns a falsified copy (the input is untouched) and the exact mask of
    overwritten cells. Raises :class:`DataError` if the attack interval
    does not fit inside the series.
    """
    spec.validate()
    n = len(series)
    lo = spec.t_attack - series.start_time
    hi = lo + spec.repeats * spec.segment.period
    if lo < 0 or hi > n:
        raise DataError(
            f"attack interval [{spec.span[0]}, {spec.span[1]}) outside series "
            f"[{series.start_time}, {series.end_time})")

    falsified = series.copy()
    truth = GroundTruth(length=n, start_time=series.start_time, spec=spec)
    for name in spec.segment.signals:
        falsified.values[name][lo:hi] = np.tile(spec.segment.values[name], spec.repeats)
        truth.mask[name][lo:hi] = True
    return falsified, truth


def build_scenario(base_scram: Series, level: int, *, t_start: int = 250, period: int = 20,
                   t_attack: int = 300, repeats: int = 5) -> tuple[Series, GroundTruth]:
    """Benchmark scenario ``level`` (1..6) against a SCRAM series.

    Scenario k records the first k signals of :data:`ATTACK_ORDER` during
    pre-event steady state and replays them over the event, so the
    single-signal case is level 1 and level 6 covers every analogue
    channel.
    """
    if not 1 <= level <= MAX_LEVEL:
        raise ConfigError(f"level must be in 1..{MAX_LEVEL}, got {level}")
    segment = record(base_scram, ATTACK_ORDER[:level], t_start, period)
    return inject(base_scram, AttackSpec(segment=segment, t_attack=t_attack, repeats=repeats))


def write_truth_csv(path, truth: GroundTruth) -> None:
    """Write the falsification mask as rows of ``t,signal,falsified`` (0/1).

    Every (second, continuous signal) pair gets a row so the file stands
    alone without the attack spec.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_HEADER)
        for idx in range(truth.length):
            t = truth.start_time + idx
            for name in CONTINUOUS_SIGNALS:
                writer.writerow([t, name, int(truth.mask[name][idx])])


def read_truth_csv(path) -> GroundTruth:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRUTH_HEADER:
            raise DataError(f"bad truth header in {path}: expected {','.join(TRUTH_HEADER)}")
        cells: dict[str, list[tuple[int, int]]] = {name: [] for name in CONTINUOUS_SIGNALS}
        times: list[int] = []
        for row in reader:
            if len(row) != 3:
                raise DataError(f"bad truth row in {path}: {row!r}")
            try:
                t, flag = int(row[0]), int(row[2])
            except ValueError as exc:
                raise DataError(f"bad truth row in {path}: {row!r}") from exc
            name = row[1]
            if name not in cells:
                raise DataError(f"unknown signal {name!r} in {path}")
            if flag not in (0, 1):
                raise DataError(f"falsified must be 0 or 1 in {path}, got {row[2]!r}")
            cells[name].append((t, flag))
            times.append(t)
    if not times:
        raise DataError(f"empty truth file {path}")
    start, stop = min(times), max(times) + 1
    length = stop - start
    truth = GroundTruth(length=length, start_time=start)
    for name, pairs in cells.items():
        if len(pairs) != length:
            raise DataError(f"truth file {path} missing rows for {name}")
        for t, flag in pairs:
            truth.mask[name][t - start] = bool(flag)
    return truth
