import numpy as np
import pytest

from scramwatch.autoencoder import Architecture, Autoencoder
from scramwatch.pipeline import Scaler
from scramwatch.signals import (
    CONTINUOUS_SIGNALS,
    SIGNALS,
    STATE_SIGNALS,
    STATE_STEADY,
    Series,
)


def make_series(length: int, start_time: int = 0, seed: int = 0,
                state: str = STATE_STEADY) -> Series:
    """Random but valid series for container-level tests."""
    rng = np.random.default_rng(seed)
    values = {}
    for name in CONTINUOUS_SIGNALS:
        values[name] = rng.uniform(0.0, 100.0, length)
    for name in STATE_SIGNALS:
        values[name] = np.full(length, state, dtype="<U8")
    return Series(values=values, start_time=start_time)


def tiny_architecture(window: int = 6, features: int = 9) -> Architecture:
    """Small enough to keep gradient and attribution tests quick."""
    return Architecture(window=window, features=features, encoder_units=(8, 6),
                        bottleneck=4, decoder_units=(6, 6))


def identity_scaler(features: int = 9) -> Scaler:
    return Scaler(lo=np.zeros(features), hi=np.ones(features))


@pytest.fixture
def tiny_model() -> Autoencoder:
    model = Autoencoder(tiny_architecture(), seed=3)
    model.scaler = identity_scaler()
    return model


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


MICRO_CONFIG = """
cycles = 3
scrams = 3
cycle_duration = 160
scram_duration = 120
scram_onset = 60
cycle_train = 2
cycle_val = 1
scram_train = 1
scram_val = 1
desk_scale = true
epochs = 1
finetune_epochs = 1
record_start = 30
period = 10
repeats = 3
attack_start = 60
tau_stride = 4
seed = 5
"""


@pytest.fixture(scope="session")
def micro_workspace(tmp_path_factory):
    """A tiny corpus with a one-epoch model, trained and calibrated once.

    Shared by the command-line and service tests; anything derived from it
    asserts plumbing, never model quality.
    """
    from scramwatch.cli import main

    root = tmp_path_factory.mktemp("micro")
    cfg = root / "run.cfg"
    data = str(root / "data")
    out = str(root / "out")
    cfg.write_text(MICRO_CONFIG + f"data_dir = {data}\nout_dir = {out}\n")
    base = ["--config", str(cfg)]
    for command in ("simulate", "train", "finetune", "calibrate"):
        assert main([command] + base) == 0, command
    return {"base": base, "config": str(cfg), "data": data, "out": out}
