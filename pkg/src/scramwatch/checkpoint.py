"""Model checkpoint serialization.

Layout, all little-endian:

    bytes 0..3    magic b"SCRM"
    bytes 4..7    format version, uint32
    bytes 8..11   header length in bytes, uint32
    header        JSON (sorted keys): architecture, scaler bounds, and the
                  ordered parameter manifest [[name, shape], ...]
    payload       each parameter tensor as raw float64 in manifest order,
                  C-contiguous

The manifest order is the model's construction order (enc1, enc2, latent,
dec1, dec2, head; within a layer: kernel, recurrent kernel, bias — W, b for
affine layers), so a file is readable without consulting the code that
wrote it. Round trips are bit-exact; loads reject anything that is not
exactly the format described above.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .autoencoder import Architecture, Autoencoder
from .errors import CheckpointError, DataError
from .pipeline import Scaler

MAGIC = b"SCRM"
FORMAT_VERSION = 1


def save(model: Autoencoder, path) -> None:
    """Write the model, its architecture, and its fitted scaler to ``path``."""
    if model.scaler is None or not model.scaler.fitted:
        raise DataError("model has no fitted scaler attached; refusing to write a partial checkpoint")
    params = model.named_params()
    header = {
        "architecture": model.architecture.to_dict(),
        "scaler": model.scaler.to_dict(),
        "params": [[name, list(arr.shape)] for name, arr in params],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load(path) -> Autoencoder:
    """Read a checkpoint back into a model; bit-exact inverse of :func:`save`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise CheckpointError(f"{path}: truncated (only {len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {blob[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} not supported (this build reads version {FORMAT_VERSION})")
    (header_len,) = struct.unpack("<I", blob[8:12])
    if len(blob) < 12 + header_len:
        raise CheckpointError(f"{path}: truncated inside header")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    try:
        architecture = Architecture.from_dict(header["architecture"])
        scaler = Scaler.from_dict(header["scaler"])
        manifest = [(str(name), tuple(int(s) for s in shape)) for name, shape in header["params"]]
    except (KeyError, TypeError, ValueError, DataError) as exc:
        raise CheckpointError(f"{path}: malformed header: {exc}") from exc

    model = Autoencoder(architecture, seed=0)
    expected = [name for name, _ in model.named_params()]
    if [name for name, _ in manifest] != expected:
        raise CheckpointError(f"{path}: parameter manifest does not match the declared architecture")

    offset = 12 + header_len
    for name, shape in manifest:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated inside tensor {name}")
        flat = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        model.set_param(name, flat.reshape(shape).astype(np.float64))
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} unexpected trailing bytes")
    model.scaler = scaler
    return model
