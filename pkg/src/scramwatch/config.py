"""Run configuration: plain ``key = value`` files, every knob in one place.

Lines are ``key = value`` with ``#`` starting a comment; blank lines are
ignored. Unknown keys are rejected outright — a typo in a config should
fail the run, not silently fall back to a default. Optional keys accept
``none`` to mean unset.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(raw)


@dataclass(frozen=True)
class RunConfig:
    """Everything the command-line workflow reads.

    Defaults reproduce the full-scale corpus shape; the bundled benchmark
    config shrinks durations and switches on the reduced architecture.
    """

    # artifact locations
    data_dir: str = "data"
    out_dir: str = "out"

    # corpus shape
    cycles: int = 47
    scrams: int = 24
    cycle_duration: int = 5700
    scram_duration: int = 800
    scram_onset: int = 300
    outlier_rate: float = 0.0
    null_rate: float = 0.001

    # splits (held-out series = remainder after train + validation)
    cycle_train: int = 34
    cycle_val: int = 10
    scram_train: int = 20
    scram_val: int = 4

    # model and training
    window: int = 10
    desk_scale: bool = False
    learning_rate: float = 0.000352
    batch_size: int = 32
    epochs: int = 30
    finetune_epochs: int = 10
    patience: int | None = None
    train_stride: int = 1

    # detection and attribution
    metric: str = "mae"
    threshold: float | None = None
    calibration_quantile: float = 0.97
    tau_shap: float | None = None
    tau_quantile: float = 0.9995
    tau_stride: int = 2
    min_run: int = 5
    onset_override: int | None = None

    # attack defaults
    record_start: int = 250
    period: int = 20
    repeats: int = 5
    attack_start: int = 300

    # misc
    seed: int = 0
    figures: bool = True

    def validate(self) -> None:
        if self.cycles < 0 or self.scrams < 0:
            raise ConfigError("cycles and scrams must be >= 0")
        if self.cycle_train + self.cycle_val > self.cycles:
            raise ConfigError(
                f"cycle split {self.cycle_train}+{self.cycle_val} exceeds {self.cycles} cycles")
        if self.scram_train + self.scram_val > self.scrams:
            raise ConfigError(
                f"scram split {self.scram_train}+{self.scram_val} exceeds {self.scrams} scrams")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.metric not in ("mae", "mse"):
            raise ConfigError(f"metric must be mae or mse, got {self.metric!r}")
        if not 0.0 < self.calibration_quantile <= 1.0:
            raise ConfigError("calibration_quantile must be in (0, 1]")
        if not 0.0 < self.tau_quantile <= 1.0:
            raise ConfigError("tau_quantile must be in (0, 1]")
        if self.threshold is not None and self.threshold <= 0.0:
            raise ConfigError("threshold must be positive when set")
        if self.tau_shap is not None and self.tau_shap <= 0.0:
            raise ConfigError("tau_shap must be positive when set")
        if self.min_run < 1:
            raise ConfigError("min_run must be >= 1")
        if self.train_stride < 1 or self.tau_stride < 1:
            raise ConfigError("strides must be >= 1")
        if self.batch_size < 1 or self.epochs < 0 or self.finetune_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epoch counts >= 0")
        if not 0 < self.scram_onset < self.scram_duration:
            raise ConfigError("scram_onset must lie inside scram_duration")

    def override(self, **kwargs) -> "RunConfig":
        """Copy with the given fields replaced (CLI flags beat file values)."""
        pruned = {k: v for k, v in kwargs.items() if v is not None}
        cfg = replace(self, **pruned)
        cfg.validate()
        return cfg


_OPTIONAL_INT = {"patience", "onset_override"}
_OPTIONAL_FLOAT = {"threshold", "tau_shap"}


def parse_config(path) -> RunConfig:
    """Read a config file; raises :class:`ConfigError` on anything off."""
    known = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {raw!r} for {key}") from None

    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _coerce(key: str, raw: str):
    if key in _OPTIONAL_INT or key in _OPTIONAL_FLOAT:
        if raw.lower() in ("none", ""):
            return None
        return int(raw) if key in _OPTIONAL_INT else float(raw)
    default = getattr(RunConfig, key)
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def write_calibration(path, threshold: float, tau_shap: float) -> None:
    """Persist calibrated thresholds in the same key = value format."""
    with open(path, "w") as fh:
        fh.write("# calibrated detection thresholds\n")
        fh.write(f"threshold = {threshold!r}\n")
        fh.write(f"tau_shap = {tau_shap!r}\n")


def read_calibration(path) -> tuple[float, float]:
    values: dict[str, float] = {}
    try:
        with open(path) as fh:
            for line in fh:
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                key, raw = (part.strip() for part in text.split("=", 1))
                values[key] = float(raw)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read calibration file {path}: {exc}") from exc
    if "threshold" not in values or "tau_shap" not in values:
        raise ConfigError(f"calibration file {path} must define threshold and tau_shap")
    return values["threshold"], values["tau_shap"]
