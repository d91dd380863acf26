"""Synthetic reactor telemetry generator.

Produces the two operating regimes the detector is trained and benchmarked
on: full power cycles (startup ramp, holds at scheduled levels, shutdown)
and SCRAM transients (steady state, then a prompt two-exponential power
collapse with rod readbacks ramping to zero).

The three neutronic channels are scaled copies of one latent power
trajectory plus independent multiplicative noise, and the rod positions are
monotone maps of the same trajectory, so cross-signal correlation exists by
construction — that correlation is what the autoencoder must learn and what
a replayed signal breaks. Rod active states are derived from the noise-free
position trajectories, never from the noisy readbacks.

All generators are pure functions of (profile, seed) and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .signals import (
    CONTINUOUS_SIGNALS,
    LINEAR_POWER,
    NEUTRON_COUNTS,
    NEUTRON_FLUX,
    POSITION_SIGNALS,
    RR_ACTIVE_STATE,
    RR_POSITION,
    SCRAM_EVENT,
    SS1_ACTIVE_STATE,
    SS1_POSITION,
    SS2_ACTIVE_STATE,
    SS2_POSITION,
    STATE_INSERT,
    STATE_STEADY,
    STATE_WITHDRAW,
    Event,
    Series,
)

#: Relative (multiplicative) noise sigma per continuous signal.
DEFAULT_NOISE: dict[str, float] = {
    NEUTRON_COUNTS: 0.02,
    LINEAR_POWER: 0.012,
    NEUTRON_FLUX: 0.015,
    SS1_POSITION: 0.004,
    SS2_POSITION: 0.004,
    RR_POSITION: 0.004,
}

#: Counts registered at zero power (detector background), keeps the channel alive.
BACKGROUND_COUNTS = 40.0

#: Regulating-rod withdrawal fractions at zero / full power. The RR does
#: the power regulation, so its readback tracks the power level.
_RR_SPAN = (0.04, 0.82)

#: Shim safety bank withdrawal fraction at full power. The banks are driven
#: in proportion to power demand, each shadowing the demand from its own
#: calibration span, so all five rod/power readbacks share one shape during
#: normal operation.
_SS_SPAN = {
    SS1_POSITION: 0.95,
    SS2_POSITION: 0.92,
}


def _check(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {message}")


@dataclass(frozen=True)
class CycleProfile:
    """Shape of one full power cycle.

    ``setpoints`` is a schedule of (second, level %) pairs; the latent power
    ramps toward the most recent setpoint level at the configured rates and
    holds once it gets there.
    """

    duration: int = 5700
    setpoints: tuple[tuple[int, float], ...] = ((0, 0.0), (60, 80.0), (5400, 0.0))
    ramp_up_rate: float = 1.0  # %/s
    ramp_down_rate: float = 1.4  # %/s
    noise: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE))
    outlier_rate: float = 0.0
    null_rate: float = 0.0
    seed: int = 0
    max_travel: float = 40.0  # cm
    counts_full_power: float = 1.2e5  # 1/s at 100 %

    def validate(self) -> None:
        _check(self.duration > 0, "duration", "must be positive")
        _check(len(self.setpoints) > 0, "setpoints", "must be non-empty")
        times = [t for t, _ in self.setpoints]
        _check(all(a < b for a, b in zip(times, times[1:])), "setpoints", "seconds must be strictly increasing")
        _check(all(0.0 <= level <= 100.0 for _, level in self.setpoints), "setpoints", "levels must be in [0, 100]")
        _check(self.ramp_up_rate >= 0.0, "ramp_up_rate", "must be >= 0")
        _check(self.ramp_down_rate >= 0.0, "ramp_down_rate", "must be >= 0")
        _validate_common(self.noise, self.outlier_rate, self.null_rate, self.max_travel, self.counts_full_power)


@dataclass(frozen=True)
class ScramProfile:
    """Shape of one SCRAM transient.

    Before ``onset`` the reactor sits at ``initial_power``. At onset the
    rods release: the position readbacks run to zero over ``rr_settle`` /
    ``ss_ramp`` seconds (a scram is a drop, so both default to a few
    seconds). The drive mechanisms then run in to their bottom limit on a
    fixed ``drive_runin``-second program, so the active-state channels
    report insert from onset until the mechanisms land, long after the
    rods themselves are down. The latent power collapses as a
    two-exponential: prompt drop with time constant ``tau_fast``, then a
    precursor tail with ``tau_slow``.
    """

    duration: int = 800
    onset: int = 300
    initial_power: float = 75.0  # %
    tau_fast: float = 2.0  # s
    tau_slow: float = 80.0  # s
    slow_fraction: float = 0.04
    residual_fraction: float = 0.002
    rr_settle: int = 2  # s
    ss_ramp: int = 4  # s
    drive_runin: int = 240  # s
    noise: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE))
    outlier_rate: float = 0.0
    null_rate: float = 0.0
    seed: int = 0
    max_travel: float = 40.0
    counts_full_power: float = 1.2e5

    def validate(self) -> None:
        _check(self.duration > 0, "duration", "must be positive")
        _check(0 < self.onset < self.duration, "onset", "must lie strictly inside the duration")
        _check(0.0 < self.initial_power <= 100.0, "initial_power", "must be in (0, 100]")
        _check(self.tau_fast > 0.0, "tau_fast", "must be positive")
        _check(self.tau_slow > 0.0, "tau_slow", "must be positive")
        _check(0.0 <= self.slow_fraction < 1.0, "slow_fraction", "must be in [0, 1)")
        _check(0.0 <= self.residual_fraction < 1.0, "residual_fraction", "must be in [0, 1)")
        _check(self.rr_settle > 0, "rr_settle", "must be positive")
        _check(self.ss_ramp > 0, "ss_ramp", "must be positive")
        _check(self.drive_runin >= max(self.rr_settle, self.ss_ramp), "drive_runin",
               "must cover the position drop")
        _validate_common(self.noise, self.outlier_rate, self.null_rate, self.max_travel, self.counts_full_power)


def _validate_common(noise, outlier_rate, null_rate, max_travel, counts_full_power) -> None:
    for name, amp in noise.items():
        _check(name in CONTINUOUS_SIGNALS, "noise", f"unknown signal {name!r}")
        _check(amp >= 0.0, "noise", f"amplitude for {name} must be >= 0")
    _check(0.0 <= outlier_rate <= 1.0, "outlier_rate", "must be in [0, 1]")
    _check(0.0 <= null_rate <= 1.0, "null_rate", "must be in [0, 1]")
    _check(outlier_rate + null_rate <= 1.0, "outlier_rate", "outlier_rate + null_rate must be <= 1")
    _check(max_travel > 0.0, "max_travel", "must be positive")
    _check(counts_full_power > 0.0, "counts_full_power", "must be positive")


def _cycle_power(profile: CycleProfile) -> np.ndarray:
    """Latent power trajectory (%) for a cycle: rate-limited setpoint tracking."""
    power = np.empty(profile.duration, dtype=np.float64)
    times = [t for t, _ in profile.setpoints]
    levels = [lvl for _, lvl in profile.setpoints]
    current = levels[0]
    next_idx = 0
    target = levels[0]
    for t in range(profile.duration):
        while next_idx < len(times) and times[next_idx] <= t:
            target = levels[next_idx]
            next_idx += 1
        if current < target:
            current = min(target, current + profile.ramp_up_rate)
        elif current > target:
            current = max(target, current - profile.ramp_down_rate)
        power[t] = current
    return power


def _scram_power(profile: ScramProfile) -> np.ndarray:
    """Latent power trajectory (%) for a SCRAM: flat, then two-exponential decay."""
    t = np.arange(profile.duration, dtype=np.float64)
    power = np.full(profile.duration, profile.initial_power, dtype=np.float64)
    after = t >= profile.onset
    dt = t[after] - profile.onset
    decay = (1.0 - profile.slow_fraction) * np.exp(-dt / profile.tau_fast)
    decay += profile.slow_fraction * np.exp(-dt / profile.tau_slow)
    floor = profile.residual_fraction
    power[after] = profile.initial_power * np.maximum(decay, floor)
    return power


def _rod_position(power: np.ndarray, signal: str, max_travel: float) -> np.ndarray:
    if signal == RR_POSITION:
        lo, hi = _RR_SPAN
        return max_travel * (lo + (hi - lo) * power / 100.0)
    return max_travel * _SS_SPAN[signal] * power / 100.0


def _states_from_positions(position: np.ndarray) -> np.ndarray:
    """Motion indicator derived from a noise-free position trajectory.

    The state at second ``t`` describes the commanded motion over
    ``[t, t+1)``, so a rod ordered in at ``t`` reads as insert at ``t``
    even though its readback only moves by ``t+1``.
    """
    states = np.full(len(position), STATE_STEADY, dtype="<U8")
    delta = np.diff(position)
    states[:-1][delta > 1e-12] = STATE_WITHDRAW
    states[:-1][delta < -1e-12] = STATE_INSERT
    if len(position) > 1:
        states[-1] = states[-2]
    return states


def _apply_noise(clean: dict[str, np.ndarray], noise: dict[str, float], max_travel: float,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Multiplicative Gaussian noise on the continuous signals, clamped to bounds."""
    noisy = {}
    for name in CONTINUOUS_SIGNALS:
        amp = noise.get(name, 0.0)
        col = clean[name]
        if amp > 0.0:
            col = col * (1.0 + amp * rng.standard_normal(len(col)))
        col = np.maximum(col, 0.0)
        if name in POSITION_SIGNALS:
            col = np.minimum(col, max_travel)
        noisy[name] = col
    return noisy


def _assemble(power: np.ndarray, profile, rng: np.random.Generator,
              position_override: dict[str, np.ndarray] | None = None) -> Series:
    clean: dict[str, np.ndarray] = {
        NEUTRON_COUNTS: BACKGROUND_COUNTS + profile.counts_full_power * power / 100.0,
        LINEAR_POWER: power.copy(),
        NEUTRON_FLUX: 0.985 * power,
    }
    for name in (SS1_POSITION, SS2_POSITION, RR_POSITION):
        if position_override is not None and name in position_override:
            clean[name] = position_override[name]
        else:
            clean[name] = _rod_position(power, name, profile.max_travel)

    values = _apply_noise(clean, profile.noise, profile.max_travel, rng)
    values[SS1_ACTIVE_STATE] = _states_from_positions(clean[SS1_POSITION])
    values[SS2_ACTIVE_STATE] = _states_from_positions(clean[SS2_POSITION])
    values[RR_ACTIVE_STATE] = _states_from_positions(clean[RR_POSITION])
    return Series(values=values)


def generate_full_cycle(profile: CycleProfile) -> Series:
    """Generate one full power cycle (startup through shutdown).

    Deterministic given ``profile.seed``; artifacts (outliers/nulls) are
    applied at the profile's rates as a final step.
    """
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    power = _cycle_power(profile)
    series = _assemble(power, profile, rng)
    return _inject_artifacts(series, profile.outlier_rate, profile.null_rate, rng)


def generate_scram(profile: ScramProfile) -> Series:
    """Generate one SCRAM transient, with the event recorded in ``series.events``."""
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    power = _scram_power(profile)

    overrides: dict[str, np.ndarray] = {}
    pre = np.full(profile.duration, profile.initial_power, dtype=np.float64)
    for name, ramp in ((RR_POSITION, profile.rr_settle), (SS1_POSITION, profile.ss_ramp), (SS2_POSITION, profile.ss_ramp)):
        start = _rod_position(pre, name, profile.max_travel)
        t = np.arange(profile.duration, dtype=np.float64)
        frac = np.clip((t - profile.onset) / ramp, 0.0, 1.0)
        overrides[name] = start * (1.0 - frac)

    series = _assemble(power, profile, rng, position_override=overrides)
    # the mechanisms keep driving after the rods are down: insert state
    # holds for the whole run-in program, identically on every scram
    until = min(profile.onset + profile.drive_runin, profile.duration)
    for name in (RR_ACTIVE_STATE, SS1_ACTIVE_STATE, SS2_ACTIVE_STATE):
        series.values[name][profile.onset:until] = STATE_INSERT
    series.events.append(Event(SCRAM_EVENT, profile.onset))
    return _inject_artifacts(series, profile.outlier_rate, profile.null_rate, rng)


def _inject_artifacts(series: Series, outlier_rate: float, null_rate: float,
                      rng: np.random.Generator) -> Series:
    """Replace random continuous samples with spikes or null markers in place."""
    if outlier_rate == 0.0 and null_rate == 0.0:
        return series
    for name in CONTINUOUS_SIGNALS:
        col = series.values[name]
        draw = rng.random(len(col))
        outliers = draw < outlier_rate
        nulls = (draw >= outlier_rate) & (draw < outlier_rate + null_rate)
        if outliers.any():
            col[outliers] *= rng.uniform(3.0, 6.0, int(outliers.sum()))
        if nulls.any():
            col[nulls] = np.nan
    return series


def add_artifacts(series: Series, outlier_rate: float, null_rate: float, seed: int) -> Series:
    """Return a copy of ``series`` with spikes/nulls injected at the given rates.

    Event metadata is preserved; deterministic given ``seed``.
    """
    if not 0.0 <= outlier_rate <= 1.0:
        raise ConfigError("outlier_rate: must be in [0, 1]")
    if not 0.0 <= null_rate <= 1.0:
        raise ConfigError("null_rate: must be in [0, 1]")
    if outlier_rate + null_rate > 1.0:
        raise ConfigError("outlier_rate: outlier_rate + null_rate must be <= 1")
    return _inject_artifacts(series.copy(), outlier_rate, null_rate, np.random.default_rng(seed))


def vary_cycle_profile(base: CycleProfile, seed: int) -> CycleProfile:
    """Derive a per-dataset cycle profile: jittered peak level and hold timing.

    The corpus needs diversity in power levels so the model learns the
    cross-signal correlation surface rather than one fixed operating point.
    """
    rng = np.random.default_rng([seed, 1])  # distinct stream from the noise draws
    peak = float(rng.uniform(35.0, 95.0))
    ramp_start = int(rng.integers(40, 90))
    shutdown_start = int(base.duration * rng.uniform(0.90, 0.96))
    setpoints: list[tuple[int, float]] = [(0, 0.0), (ramp_start, peak)]
    if base.duration > 1200 and rng.random() < 0.5:
        mid = int(base.duration * rng.uniform(0.45, 0.7))
        if ramp_start < mid < shutdown_start:
            setpoints.append((mid, float(rng.uniform(30.0, peak))))
    setpoints.append((shutdown_start, 0.0))
    return replace(base, setpoints=tuple(setpoints), seed=seed)


def vary_scram_profile(base: ScramProfile, seed: int) -> ScramProfile:
    """Derive a per-dataset SCRAM profile: jittered initial power level.

    Shutdown exercises all start from the nominal operating point, so the
    spread here is much narrower than the cycle-to-cycle peak variation.
    A wide band would also blur the event-aligned baseline: the mean over
    historical shutdowns only stands in for an individual one if they all
    enter the event from about the same place.
    """
    rng = np.random.default_rng([seed, 1])
    return replace(base, initial_power=float(rng.uniform(73.0, 77.0)), seed=seed)
