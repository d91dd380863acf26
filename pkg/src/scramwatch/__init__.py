"""Replay-attack detection for reactor shutdown telemetry.

The package simulates saturation-range instrumentation channels, trains an
LSTM autoencoder on clean operating data, flags seconds whose windowed
reconstruction error exceeds a calibrated threshold, and attributes each
flagged window to individual channels with exact Shapley values against an
event-aligned baseline.
"""

from .attack import AttackSpec, GroundTruth, RecordedSegment, build_scenario, inject, record
from .autoencoder import Architecture, Autoencoder
from .config import RunConfig, parse_config
from .detector import DetectionTimeline, calibrate, scan, window_errors
from .errors import CheckpointError, ConfigError, DataError
from .explain import (
    BaselineTrajectory,
    LocalizationReport,
    build_baseline,
    exact_shapley,
    explain_flagged,
    localize,
    replay_signature_score,
)
from .pipeline import Scaler, encode, fit_scaler, windowize
from .signals import CONTINUOUS_SIGNALS, SIGNALS, Event, Series, read_series_csv, write_series_csv
from .simulate import CycleProfile, ScramProfile, generate_full_cycle, generate_scram
from .training import TrainConfig, finetune, fit
from .workflow import run_benchmark

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "AttackSpec",
    "Autoencoder",
    "BaselineTrajectory",
    "CheckpointError",
    "ConfigError",
    "CONTINUOUS_SIGNALS",
    "CycleProfile",
    "DataError",
    "DetectionTimeline",
    "Event",
    "GroundTruth",
    "LocalizationReport",
    "RecordedSegment",
    "RunConfig",
    "Scaler",
    "ScramProfile",
    "Series",
    "SIGNALS",
    "TrainConfig",
    "build_baseline",
    "build_scenario",
    "calibrate",
    "encode",
    "exact_shapley",
    "explain_flagged",
    "finetune",
    "fit",
    "fit_scaler",
    "generate_full_cycle",
    "generate_scram",
    "inject",
    "localize",
    "parse_config",
    "read_series_csv",
    "record",
    "replay_signature_score",
    "run_benchmark",
    "scan",
    "window_errors",
    "windowize",
    "write_series_csv",
]
