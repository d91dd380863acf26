"""Training loops: initial fit on full-cycle windows, fine-tuning on events.

One loop serves both phases; fine-tuning is the same minibatch descent
continued from trained weights on a different window corpus. Each epoch
shuffles with its own seeded generator, accumulates batch losses in fixed
order, and records the inference-mode validation loss, so the whole history
is reproducible bit for bit from (model seed, train seed, data).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .adam import Adam, clip_global_norm
from .autoencoder import Autoencoder
from .errors import ConfigError, DataError

HISTORY_HEADER = ("epoch", "train_loss", "val_loss")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters for one training phase."""

    learning_rate: float = 0.000352
    batch_size: int = 32
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    patience: int | None = None  # epochs without val improvement before stopping

    def validate(self) -> None:
        if self.learning_rate < 0.0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 when set")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def fit(model: Autoencoder, train_windows: np.ndarray, val_windows: np.ndarray,
        config: TrainConfig, log=None) -> list[EpochRecord]:
    """Minibatch Adam descent on window reconstruction MSE.

    ``train_windows`` and ``val_windows`` are (N, w, p) stacks. Returns the
    per-epoch history; the model is updated in place. With a patience set,
    training stops once validation loss has not improved for that many
    epochs (the history then ends early; recorded epochs keep their index).
    """
    config.validate()
    if len(train_windows) == 0:
        raise DataError("training window set is empty")
    if len(val_windows) == 0:
        raise DataError("validation window set is empty")

    optimizer = Adam(model.named_params(), config.learning_rate,
                     beta1=config.beta1, beta2=config.beta2, epsilon=config.epsilon)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])

    history: list[EpochRecord] = []
    best_val = np.inf
    stale = 0
    n = len(train_windows)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss = model.loss_and_grad(train_windows[idx], rng=dropout_rng)
            grads = model.named_grads()
            clip_global_norm([g for _, g in grads], config.clip_norm)
            optimizer.step(dict(grads))
            total += loss * len(idx)
        train_loss = total / n
        val_loss = model.evaluate(val_windows)
        history.append(EpochRecord(epoch, train_loss, val_loss))
        if log is not None:
            log(f"epoch {epoch}/{config.epochs}  train {train_loss:.6f}  val {val_loss:.6f}")
        if config.patience is not None:
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return history


def finetune(model: Autoencoder, train_windows: np.ndarray, val_windows: np.ndarray,
             config: TrainConfig, log=None) -> list[EpochRecord]:
    """Continue training an already-fitted model on event-regime windows."""
    return fit(model, train_windows, val_windows, config, log=log)


def write_history_csv(path, history: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss)])


def read_history_csv(path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HISTORY_HEADER:
            raise DataError(f"bad history header in {path}")
        out = []
        for row in reader:
            if len(row) != 3:
                raise DataError(f"bad history row in {path}: {row!r}")
            try:
                out.append(EpochRecord(int(row[0]), float(row[1]), float(row[2])))
            except ValueError as exc:
                raise DataError(f"bad history row in {path}: {row!r}") from exc
    return out
