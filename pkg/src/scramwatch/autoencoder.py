"""Sequence autoencoder: LSTM encoder, low-dimensional bottleneck, LSTM decoder.

The model reads a normalized window (w seconds by p features), squeezes the
final encoder state through a small affine bottleneck, repeats that latent
vector w times to seed the decoder, and projects every decoder step back to
p features with one shared affine head. Trained on normal operation only,
it reconstructs the regimes it has seen and fails loudly on windows whose
cross-signal structure it has never seen; that failure is the detection
signal.

Dropout sits after the first encoder layer and the first decoder layer and
is active only when a training rng is supplied, so inference is fully
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .lstm import Dense, Dropout, LSTMLayer
from .pipeline import Scaler


@dataclass(frozen=True)
class Architecture:
    """Layer sizing for the autoencoder stack."""

    window: int = 10
    features: int = 9
    encoder_units: tuple[int, int] = (256, 128)
    bottleneck: int = 32
    decoder_units: tuple[int, int] = (128, 128)
    encoder_dropout: float = 0.1
    decoder_dropout: float = 0.2

    def validate(self) -> None:
        sizes = (self.window, self.features, self.bottleneck, *self.encoder_units, *self.decoder_units)
        if any(int(s) != s or s < 1 for s in sizes):
            raise ConfigError(f"architecture sizes must be positive integers: {self}")
        if len(self.encoder_units) != 2 or len(self.decoder_units) != 2:
            raise ConfigError("architecture expects two encoder and two decoder layers")
        for rate in (self.encoder_dropout, self.decoder_dropout):
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"dropout rates must be in [0, 1): {self}")

    @classmethod
    def desk_scale(cls, window: int = 10, features: int = 9) -> "Architecture":
        """Reduced sizing for fast end-to-end runs; same wiring, same math."""
        return cls(window=window, features=features, encoder_units=(64, 32),
                   bottleneck=16, decoder_units=(32, 32))

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "features": self.features,
            "encoder_units": list(self.encoder_units),
            "bottleneck": self.bottleneck,
            "decoder_units": list(self.decoder_units),
            "encoder_dropout": self.encoder_dropout,
            "decoder_dropout": self.decoder_dropout,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Architecture":
        try:
            arch = cls(
                window=int(payload["window"]),
                features=int(payload["features"]),
                encoder_units=tuple(payload["encoder_units"]),
                bottleneck=int(payload["bottleneck"]),
                decoder_units=tuple(payload["decoder_units"]),
                encoder_dropout=float(payload["encoder_dropout"]),
                decoder_dropout=float(payload["decoder_dropout"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad architecture payload: {payload!r}") from exc
        arch.validate()
        return arch


class Autoencoder:
    """The reconstruction model, with exact gradients for every parameter."""

    def __init__(self, architecture: Architecture, seed: int = 0):
        architecture.validate()
        self.architecture = architecture
        self.scaler: Scaler | None = None
        rng = np.random.default_rng(seed)
        p = architecture.features
        e1, e2 = architecture.encoder_units
        d1, d2 = architecture.decoder_units
        z = architecture.bottleneck
        # construction order fixes both rng consumption and checkpoint layout
        self.enc1 = LSTMLayer(p, e1, rng)
        self.enc2 = LSTMLayer(e1, e2, rng)
        self.latent = Dense(e2, z, rng)
        self.dec1 = LSTMLayer(z, d1, rng)
        self.dec2 = LSTMLayer(d1, d2, rng)
        self.head = Dense(d2, p, rng)
        self.drop_enc = Dropout(architecture.encoder_dropout)
        self.drop_dec = Dropout(architecture.decoder_dropout)

    _LAYERS = ("enc1", "enc2", "latent", "dec1", "dec2", "head")

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        """Every parameter tensor, in the fixed checkpoint order."""
        out = []
        for lname in self._LAYERS:
            for pname, arr in getattr(self, lname).params():
                out.append((f"{lname}.{pname}", arr))
        return out

    def named_grads(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for lname in self._LAYERS:
            for pname, arr in getattr(self, lname).grads():
                out.append((f"{lname}.{pname}", arr))
        return out

    def set_param(self, name: str, value: np.ndarray) -> None:
        lname, pname = name.split(".", 1)
        if lname not in self._LAYERS:
            raise DataError(f"unknown parameter {name!r}")
        layer = getattr(self, lname)
        current = dict(layer.params()).get(pname)
        if current is None:
            raise DataError(f"unknown parameter {name!r}")
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise DataError(f"parameter {name!r} expects shape {current.shape}, got {value.shape}")
        setattr(layer, pname, value)

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        a = self.architecture
        if batch.ndim == 2:
            batch = batch[None]
        if batch.ndim != 3 or batch.shape[1] != a.window or batch.shape[2] != a.features:
            raise DataError(
                f"expected windows of shape ({a.window}, {a.features}), got {batch.shape}")
        return batch

    def forward(self, batch: np.ndarray, rng: np.random.Generator | None = None,
                cache: bool = False) -> np.ndarray:
        """Reconstruct a (B, w, p) batch. ``rng`` enables dropout (training)."""
        batch = self._check_batch(batch)
        w = self.architecture.window
        h1 = self.drop_enc.forward(self.enc1.forward(batch, cache=cache), rng)
        h2 = self.enc2.forward(h1, cache=cache)
        z = self.latent.forward(h2[:, -1], cache=cache)
        seeded = np.repeat(z[:, None, :], w, axis=1)
        d1 = self.drop_dec.forward(self.dec1.forward(seeded, cache=cache), rng)
        d2 = self.dec2.forward(d1, cache=cache)
        return self.head.forward(d2, cache=cache)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        """Backprop a gradient on the reconstruction; fills every layer's grads."""
        dd2 = self.head.backward(dout)
        dd1 = self.drop_dec.backward(self.dec2.backward(dd2))
        dseeded = self.dec1.backward(dd1)
        dz = dseeded.sum(axis=1)  # repeat-vector: upstream grads sum into the latent
        dlast = self.latent.backward(dz)
        dh2 = np.zeros((dout.shape[0], self.architecture.window, self.architecture.encoder_units[1]))
        dh2[:, -1] = dlast
        dh1 = self.drop_enc.backward(self.enc2.backward(dh2))
        return self.enc1.backward(dh1)

    def loss_and_grad(self, batch: np.ndarray, rng: np.random.Generator | None = None) -> float:
        """Batch-mean MSE plus gradients of it in the layers. Returns the loss."""
        batch = self._check_batch(batch)
        recon = self.forward(batch, rng=rng, cache=True)
        diff = recon - batch
        loss = float(np.mean(diff * diff))
        self.backward((2.0 / diff.size) * diff)
        return loss

    def reconstruct(self, batch: np.ndarray, chunk: int = 1024) -> np.ndarray:
        """Inference-mode reconstruction, chunked to bound peak memory."""
        batch = self._check_batch(batch)
        if len(batch) <= chunk:
            return self.forward(batch)
        parts = [self.forward(batch[i:i + chunk]) for i in range(0, len(batch), chunk)]
        return np.concatenate(parts, axis=0)

    def evaluate(self, batch: np.ndarray) -> float:
        """Inference-mode mean MSE over a window batch."""
        batch = self._check_batch(batch)
        recon = self.reconstruct(batch)
        diff = recon - batch
        return float(np.mean(diff * diff))
