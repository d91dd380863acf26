"""Feature pipeline: raw telemetry to model-ready windows.

The model consumes dense float matrices, one row per second, columns in
catalogue order. Getting there takes three steps that all live here so
training, detection and explanation cannot drift apart:

1. encode - rod state tokens become ordinal levels (insert 0.0, steady 0.5,
   withdraw 1.0), continuous channels pass through unchanged.
2. impute - null samples carry the last observation forward; a leading run
   of nulls is backfilled from the first valid sample.
3. scale + window - per-feature min-max normalisation fitted on training
   data only, then overlapping stride-1 windows.

A length-L series yields L - w + 1 windows; the window ending at second t
covers [t - w + 1, t].
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .signals import SIGNALS, STATE_INSERT, STATE_SIGNALS, STATE_STEADY, STATE_WITHDRAW, Series

STATE_ENCODING: dict[str, float] = {
    STATE_INSERT: 0.0,
    STATE_STEADY: 0.5,
    STATE_WITHDRAW: 1.0,
}

NUM_FEATURES = len(SIGNALS)


def feature_index(signal: str) -> int:
    """Column of ``signal`` in the encoded matrix."""
    try:
        return SIGNALS.index(signal)
    except ValueError:
        raise DataError(f"unknown signal {signal!r}") from None


def encode_states(series: Series) -> np.ndarray:
    """Encode a series as a float64 matrix of shape (len, 9).

    State tokens map through :data:`STATE_ENCODING`; nulls in continuous
    channels stay NaN for :func:`impute` to handle.
    """
    n = len(series)
    out = np.empty((n, NUM_FEATURES), dtype=np.float64)
    for j, name in enumerate(SIGNALS):
        col = series.values.get(name)
        if col is None:
            raise DataError(f"series missing signal {name!r}")
        if name in STATE_SIGNALS:
            encoded = np.empty(n, dtype=np.float64)
            for token, level in STATE_ENCODING.items():
                encoded[col == token] = level
            unknown = ~np.isin(col, tuple(STATE_ENCODING))
            if unknown.any():
                bad = col[unknown][0]
                raise DataError(f"unknown state token {bad!r} in {name}")
            out[:, j] = encoded
        else:
            out[:, j] = col
    return out


def impute(matrix: np.ndarray) -> np.ndarray:
    """Fill NaN cells by carrying the last valid observation forward.

    Leading NaNs take the first valid value in their column. A column with
    no valid samples at all cannot be repaired and raises
    :class:`DataError`.
    """
    if matrix.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {matrix.shape}")
    out = matrix.astype(np.float64, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        nan = np.isnan(col)
        if not nan.any():
            continue
        if nan.all():
            raise DataError(f"feature {SIGNALS[j] if j < NUM_FEATURES else j} has no valid samples")
        # index of the most recent valid sample at each position
        idx = np.where(~nan, np.arange(len(col)), -1)
        np.maximum.accumulate(idx, out=idx)
        first_valid = int(np.argmin(nan))
        idx[idx < 0] = first_valid
        out[:, j] = col[idx]
    return out


class Scaler:
    """Per-feature min-max normalisation to [0, 1].

    Fitted bounds come from training data only; transform clamps to [0, 1]
    so out-of-range values at inference (an attack, a regime the training
    corpus never visited) cannot push the model outside its input domain.
    A degenerate feature (max == min) maps to 0.0 and inverts to its
    constant value.
    """

    def __init__(self, lo: np.ndarray | None = None, hi: np.ndarray | None = None):
        if (lo is None) != (hi is None):
            raise DataError("scaler bounds must be given together")
        if lo is not None:
            lo = np.asarray(lo, dtype=np.float64)
            hi = np.asarray(hi, dtype=np.float64)
            self._check_bounds(lo, hi)
        self.lo = lo
        self.hi = hi

    @staticmethod
    def _check_bounds(lo: np.ndarray, hi: np.ndarray) -> None:
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("scaler bounds must be 1-d and congruent")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise DataError("scaler bounds must be finite")
        if (hi < lo).any():
            raise DataError("scaler max must be >= min per feature")

    @property
    def fitted(self) -> bool:
        return self.lo is not None

    def fit(self, matrix: np.ndarray) -> "Scaler":
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise DataError(f"cannot fit scaler on shape {matrix.shape}")
        if not np.isfinite(matrix).all():
            raise DataError("cannot fit scaler on non-finite data (impute first)")
        self.lo = matrix.min(axis=0).astype(np.float64)
        self.hi = matrix.max(axis=0).astype(np.float64)
        return self

    def _require_fit(self, matrix: np.ndarray) -> None:
        if not self.fitted:
            raise DataError("scaler is not fitted")
        if matrix.ndim != 2 or matrix.shape[1] != self.lo.shape[0]:
            raise DataError(f"matrix shape {matrix.shape} does not match {self.lo.shape[0]} features")

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        self._require_fit(matrix)
        span = self.hi - self.lo
        degenerate = span == 0.0
        safe = np.where(degenerate, 1.0, span)
        out = (matrix - self.lo) / safe
        out[:, degenerate] = 0.0
        return np.clip(out, 0.0, 1.0)

    def inverse_transform(self, matrix: np.ndarray) -> np.ndarray:
        self._require_fit(matrix)
        return self.lo + matrix * (self.hi - self.lo)

    def to_dict(self) -> dict:
        if not self.fitted:
            raise DataError("scaler is not fitted")
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Scaler":
        try:
            return cls(lo=payload["lo"], hi=payload["hi"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad scaler payload: {payload!r}") from exc


def windowize(matrix: np.ndarray, width: int, stride: int = 1) -> np.ndarray:
    """Cut a (L, p) matrix into overlapping windows, shape (count, w, p).

    With the default stride of 1 the count is L - w + 1 and window j ends
    at second j + w - 1.
    """
    if width <= 0:
        raise DataError(f"window width must be positive, got {width}")
    if stride <= 0:
        raise DataError(f"stride must be positive, got {stride}")
    if matrix.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {matrix.shape}")
    n = matrix.shape[0]
    if n < width:
        raise DataError(f"series of length {n} is shorter than window width {width}")
    view = np.lib.stride_tricks.sliding_window_view(matrix, window_shape=width, axis=0)
    # view is (L-w+1, p, w); put time back in the middle and make it writable
    return np.ascontiguousarray(view[::stride].transpose(0, 2, 1))


def encode(series: Series) -> np.ndarray:
    """Series to clean numeric matrix: token encoding, then null imputation."""
    return impute(encode_states(series))


def fit_scaler(corpus: list[np.ndarray]) -> Scaler:
    """Fit one scaler over every matrix in the corpus (global bounds)."""
    if not corpus:
        raise DataError("cannot fit scaler on an empty corpus")
    return Scaler().fit(np.vstack(corpus))
