"""Recurrent building blocks on plain numpy arrays.

Everything is batch-major: inputs are (batch, time, features) and hidden
sequences are (batch, time, units). The fused gate kernels pack the four
gates [forget, input, cell, output] along their last axis, so the forget
bias lives in ``b[:units]``.

The forward pass hoists the input projection out of the recurrent loop
(one big matmul for all timesteps); only the hidden-to-hidden product and
the elementwise gate math stay sequential. The backward pass mirrors that:
per-step work is limited to the strictly recurrent terms and every
parameter gradient is assembled afterwards in one contraction. On the
single-core budget this is the difference between seconds and minutes per
training epoch.

All math is float64. Finite-difference gradient checks depend on that;
callers wanting float32 inference can cast at the boundary.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform in +-1/sqrt(fan_in), the usual scaling for recurrent nets."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class LSTMLayer:
    """One LSTM layer with exact backpropagation through time.

    State starts at zero each call; sequences here are short windows, not
    continuing streams, so no state is carried between calls.
    """

    def __init__(self, input_size: int, units: int, rng: np.random.Generator):
        if input_size < 1 or units < 1:
            raise ValueError("input_size and units must be >= 1")
        self.input_size = input_size
        self.units = units
        self.Wx = uniform_init(rng, input_size, (input_size, 4 * units))
        self.Wh = uniform_init(rng, units, (units, 4 * units))
        self.b = np.zeros(4 * units, dtype=np.float64)
        self.b[:units] = 1.0  # forget-gate bias: remember by default
        self.dWx = None
        self.dWh = None
        self.db = None
        self._cache = None

    def params(self) -> list[tuple[str, np.ndarray]]:
        return [("Wx", self.Wx), ("Wh", self.Wh), ("b", self.b)]

    def grads(self) -> list[tuple[str, np.ndarray]]:
        return [("Wx", self.dWx), ("Wh", self.dWh), ("b", self.db)]

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        """Run the layer over a (B, T, D) batch; returns (B, T, H).

        With ``cache=True`` the per-step gate activations are kept for a
        later :meth:`backward` call.
        """
        B, T, D = x.shape
        if D != self.input_size:
            raise ValueError(f"expected {self.input_size} input features, got {D}")
        H = self.units

        # input contribution for every timestep at once
        zx = (x.reshape(B * T, D) @ self.Wx).reshape(B, T, 4 * H)
        zx += self.b

        h = np.zeros((B, H), dtype=np.float64)
        c = np.zeros((B, H), dtype=np.float64)
        out = np.empty((B, T, H), dtype=np.float64)

        if cache:
            F = np.empty((T, B, H), dtype=np.float64)
            I = np.empty_like(F)
            G = np.empty_like(F)
            O = np.empty_like(F)
            TC = np.empty_like(F)      # tanh(c_t)
            Cprev = np.empty_like(F)
            Hprev = np.empty_like(F)

        for t in range(T):
            z = zx[:, t] + h @ self.Wh
            f = sigmoid(z[:, :H])
            i = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            if cache:
                Cprev[t] = c
                Hprev[t] = h
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            out[:, t] = h
            if cache:
                F[t], I[t], G[t], O[t], TC[t] = f, i, g, o, tc

        self._cache = (x, F, I, G, O, TC, Cprev, Hprev) if cache else None
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        """Backprop a (B, T, H) gradient on the outputs; returns dX (B, T, D).

        Parameter gradients land in ``dWx``, ``dWh``, ``db``.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        x, F, I, G, O, TC, Cprev, Hprev = self._cache
        B, T, D = x.shape
        H = self.units

        dZ = np.empty((T, B, 4 * H), dtype=np.float64)
        dh_next = np.zeros((B, H), dtype=np.float64)
        dc_next = np.zeros((B, H), dtype=np.float64)
        WhT = self.Wh.T

        for t in range(T - 1, -1, -1):
            f, i, g, o, tc = F[t], I[t], G[t], O[t], TC[t]
            dh = dout[:, t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dZ[t]
            dz[:, :H] = dc * Cprev[t] * f * (1.0 - f)
            dz[:, H:2 * H] = dc * g * i * (1.0 - i)
            dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
            dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = dz @ WhT

        flat = dZ.transpose(1, 0, 2).reshape(B * T, 4 * H)
        self.dWx = x.reshape(B * T, D).T @ flat
        self.dWh = np.einsum("tbh,tbg->hg", Hprev, dZ)
        self.db = dZ.sum(axis=(0, 1))
        dx = (flat @ self.Wx.T).reshape(B, T, D)
        self._cache = None
        return dx


class Dense:
    """Affine map on the last axis; shared across leading dimensions."""

    def __init__(self, input_size: int, units: int, rng: np.random.Generator):
        self.W = uniform_init(rng, input_size, (input_size, units))
        self.b = np.zeros(units, dtype=np.float64)
        self.dW = None
        self.db = None
        self._x = None

    def params(self) -> list[tuple[str, np.ndarray]]:
        return [("W", self.W), ("b", self.b)]

    def grads(self) -> list[tuple[str, np.ndarray]]:
        return [("W", self.dW), ("b", self.db)]

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        if x.shape[-1] != self.W.shape[0]:
            raise ValueError(f"expected {self.W.shape[0]} input features, got {x.shape[-1]}")
        if cache:
            self._x = x
        return x @ self.W + self.b

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called without a cached forward pass")
        x = self._x
        flat_x = x.reshape(-1, x.shape[-1])
        flat_d = dout.reshape(-1, dout.shape[-1])
        self.dW = flat_x.T @ flat_d
        self.db = flat_d.sum(axis=0)
        self._x = None
        return (flat_d @ self.W.T).reshape(x.shape)


class Dropout:
    """Inverted dropout: scale kept units by 1/(1-rate) so inference is a no-op."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Pass ``rng`` to enable training-mode masking; without it, identity."""
        if rng is None or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dout
        return dout * self._mask
