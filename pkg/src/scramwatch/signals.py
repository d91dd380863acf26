"""Signal catalogue and the multivariate series container.

Nine telemetry channels are tracked at 1 Hz: three neutronic readings
(counts, linear power, flux), three rod-position readbacks, and three
categorical rod active-state indicators. A series is stored column-wise:
float64 arrays for the continuous channels (NaN marks a null sample) and
fixed-width string arrays holding ``insert``/``withdraw``/``steady`` tokens
for the active states.

CSV schema (the interchange format used by every tool in this package):
header ``t,<signal names>`` in catalogue order, one row per second, active
states written as their literal tokens, null samples as empty cells.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError

NEUTRON_COUNTS = "neutron_counts"
LINEAR_POWER = "linear_power"
NEUTRON_FLUX = "neutron_flux"
SS1_POSITION = "ss1_position"
SS2_POSITION = "ss2_position"
RR_POSITION = "rr_position"
RR_ACTIVE_STATE = "rr_active_state"
SS1_ACTIVE_STATE = "ss1_active_state"
SS2_ACTIVE_STATE = "ss2_active_state"

#: All nine signals, in catalogue (and CSV column) order.
SIGNALS: tuple[str, ...] = (
    NEUTRON_COUNTS,
    LINEAR_POWER,
    NEUTRON_FLUX,
    SS1_POSITION,
    SS2_POSITION,
    RR_POSITION,
    RR_ACTIVE_STATE,
    SS1_ACTIVE_STATE,
    SS2_ACTIVE_STATE,
)

#: The six continuous signals (non-negative floats).
CONTINUOUS_SIGNALS: tuple[str, ...] = SIGNALS[:6]

#: The three categorical rod-motion indicators.
STATE_SIGNALS: tuple[str, ...] = SIGNALS[6:]

#: The three position readbacks, bounded by the configured rod travel.
POSITION_SIGNALS: tuple[str, ...] = (SS1_POSITION, SS2_POSITION, RR_POSITION)

STATE_INSERT = "insert"
STATE_WITHDRAW = "withdraw"
STATE_STEADY = "steady"
STATE_TOKENS: tuple[str, ...] = (STATE_INSERT, STATE_WITHDRAW, STATE_STEADY)

SCRAM_EVENT = "scram"


class Event(NamedTuple):
    """A point event attached to a series (currently only SCRAM onsets)."""

    kind: str
    onset: int


@dataclass
class Series:
    """Column-wise multivariate series sampled at exactly 1 Hz.

    ``values`` maps every signal name to an array of common length: float64
    for continuous signals, ``<U8`` state tokens for the active states.
    ``start_time`` is the absolute second of the first frame; all public
    operations address samples by absolute second.
    """

    values: dict[str, np.ndarray]
    start_time: int = 0
    events: list[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values[SIGNALS[0]])

    @property
    def end_time(self) -> int:
        """Absolute second one past the last frame."""
        return self.start_time + len(self)

    def index_of(self, t: int) -> int:
        """Frame index for absolute second ``t`` (bounds-checked)."""
        i = t - self.start_time
        if not 0 <= i < len(self):
            raise DataError(f"second {t} outside series [{self.start_time}, {self.end_time})")
        return i

    def copy(self) -> "Series":
        return Series(
            values={name: arr.copy() for name, arr in self.values.items()},
            start_time=self.start_time,
            events=list(self.events),
        )

    def scram_onset(self) -> int | None:
        for event in self.events:
            if event.kind == SCRAM_EVENT:
                return event.onset
        return None


def validate_series(series: Series, max_travel: float | None = None) -> None:
    """Check the container invariants; raise DataError naming the violation.

    Continuous samples must be finite-and-non-negative or NaN (null marker);
    positions must additionally stay within ``[0, max_travel]`` when a travel
    bound is given; state columns may only hold the three catalogue tokens.
    """
    missing = [name for name in SIGNALS if name not in series.values]
    if missing:
        raise DataError(f"series missing signals: {missing}")
    length = len(series)
    for name in SIGNALS:
        if len(series.values[name]) != length:
            raise DataError(f"signal {name} length {len(series.values[name])} != {length}")
    for name in CONTINUOUS_SIGNALS:
        col = series.values[name]
        bad = ~(np.isnan(col) | (np.isfinite(col) & (col >= 0.0)))
        if bad.any():
            raise DataError(f"signal {name} has negative or non-finite samples")
    if max_travel is not None:
        for name in POSITION_SIGNALS:
            col = series.values[name]
            if np.nanmax(col, initial=0.0) > max_travel:
                raise DataError(f"signal {name} exceeds rod travel {max_travel}")
    for name in STATE_SIGNALS:
        col = series.values[name]
        bad_tokens = set(np.unique(col)) - set(STATE_TOKENS)
        if bad_tokens:
            raise DataError(f"signal {name} has invalid state tokens: {sorted(bad_tokens)}")


def _format_value(x: float) -> str:
    if np.isnan(x):
        return ""
    return repr(float(x))


def write_series_csv(series: Series, path) -> None:
    """Write a series in the shared CSV schema (see module docstring)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t",) + SIGNALS)
        cont = [series.values[name] for name in CONTINUOUS_SIGNALS]
        states = [series.values[name] for name in STATE_SIGNALS]
        for i in range(len(series)):
            row = [str(series.start_time + i)]
            row.extend(_format_value(col[i]) for col in cont)
            row.extend(str(col[i]) for col in states)
            writer.writerow(row)


def read_series_csv(path, events: Iterable[Event] = ()) -> Series:
    """Read a series from the shared CSV schema.

    The ``t`` column must advance by exactly one second per row. Events are
    not part of the schema; pass any externally known ones (e.g. from a
    dataset manifest) through ``events``.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read series {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = ["t", *SIGNALS]
        if header != expected:
            raise DataError(f"{path}: bad header {header!r}, expected {expected!r}")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")

    length = len(rows)
    cont = {name: np.empty(length, dtype=np.float64) for name in CONTINUOUS_SIGNALS}
    states = {name: np.empty(length, dtype="<U8") for name in STATE_SIGNALS}
    start_time = int(rows[0][0])
    for i, row in enumerate(rows):
        if len(row) != len(expected):
            raise DataError(f"{path}: row {i} has {len(row)} fields, expected {len(expected)}")
        t = int(row[0])
        if t != start_time + i:
            raise DataError(f"{path}: non-contiguous time column at row {i} (t={t})")
        for j, name in enumerate(CONTINUOUS_SIGNALS):
            cell = row[1 + j]
            if cell == "":
                cont[name][i] = np.nan
            else:
                cont[name][i] = float(cell)
        for j, name in enumerate(STATE_SIGNALS):
            token = row[7 + j]
            if token not in STATE_TOKENS:
                raise DataError(f"{path}: row {i} has invalid state token {token!r}")
            states[name][i] = token
    values: dict[str, np.ndarray] = {}
    values.update(cont)
    values.update(states)
    series = Series(values=values, start_time=start_time, events=list(events))
    return series


def infer_scram_onset(series: Series) -> int | None:
    """First second at which all three rod states read ``insert`` simultaneously.

    The rod active states are the SCRAM fingerprint on the console and are
    left untouched in every replay scenario, so they give a reliable event
    anchor even on falsified data. Returns None when a simultaneous insert
    never occurs.
    """
    mask = np.ones(len(series), dtype=bool)
    for name in STATE_SIGNALS:
        mask &= series.values[name] == STATE_INSERT
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    return series.start_time + int(hits[0])
