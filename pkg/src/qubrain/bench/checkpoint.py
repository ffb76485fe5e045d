"""Single-file checkpoints: a JSON header followed by little-endian float64 blobs.

Layout::

    b"QBCKPT01" | u64 LE header length | UTF-8 JSON header | raw '<f8' data

The header lists every parameter with its byte offset and shape, so the file
can be inspected with nothing more than ``head -c``.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import Module

MAGIC = b"QBCKPT01"
_LEN = struct.Struct("<Q")


class CheckpointFormatError(ValueError):
    """File is not a complete, well-formed checkpoint."""


class IncompatibleCheckpointError(ValueError):
    """Checkpoint was written by a different model layout."""


def config_hash(model_id: str, shapes: dict[str, tuple]) -> str:
    h = hashlib.sha256(model_id.encode())
    for name in sorted(shapes):
        h.update(f"|{name}:{'x'.join(map(str, shapes[name]))}".encode())
    return h.hexdigest()


def model_hash(model: Module) -> str:
    return config_hash(model.model_id, {n: p.shape for n, p in model.named_parameters()})


@dataclass
class Checkpoint:
    model_id: str
    config_hash: str
    params: dict[str, np.ndarray]
    seed: int = 0
    epoch: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Module, seed: int = 0, epoch: int = 0, meta: dict | None = None) -> "Checkpoint":
        params = {n: p.data.copy() for n, p in model.named_parameters()}
        return cls(model.model_id, model_hash(model), params, seed, epoch, dict(meta or {}))

    def apply_to(self, model: Module) -> Module:
        """Copy parameters into ``model``; nothing is written unless all checks pass."""
        expected = model_hash(model)
        if model.model_id != self.model_id or expected != self.config_hash:
            raise IncompatibleCheckpointError(
                f"checkpoint for {self.model_id!r} ({self.config_hash[:12]}) "
                f"does not fit model {model.model_id!r} ({expected[:12]})"
            )
        named = dict(model.named_parameters())
        for name, p in named.items():
            p.data[...] = self.params[name]
        return model


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    entries, blobs, offset = [], [], 0
    for name, arr in ckpt.params.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    blob = b"".join(blobs)
    header = {
        "format": 1,
        "model_id": ckpt.model_id,
        "config_hash": ckpt.config_hash,
        "seed": ckpt.seed,
        "epoch": ckpt.epoch,
        "meta": ckpt.meta,
        "params": entries,
        "blob_bytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    hbytes = json.dumps(header, indent=1).encode()
    Path(path).write_bytes(MAGIC + _LEN.pack(len(hbytes)) + hbytes + blob)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    pre = len(MAGIC) + _LEN.size
    if len(raw) < pre or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: missing checkpoint magic")
    (hlen,) = _LEN.unpack_from(raw, len(MAGIC))
    if len(raw) < pre + hlen:
        raise CheckpointFormatError(f"{path}: header truncated")
    try:
        header = json.loads(raw[pre:pre + hlen])
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: bad header ({e})") from None
    blob = raw[pre + hlen:]
    if len(blob) != header.get("blob_bytes"):
        raise CheckpointFormatError(f"{path}: expected {header.get('blob_bytes')} data bytes, found {len(blob)}")
    if hashlib.sha256(blob).hexdigest() != header["blob_sha256"]:
        raise CheckpointFormatError(f"{path}: parameter data checksum mismatch")
    params = {}
    for e in header["params"]:
        arr = np.frombuffer(blob, dtype="<f8", count=e["nbytes"] // 8, offset=e["offset"])
        params[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return Checkpoint(header["model_id"], header["config_hash"], params,
                      header["seed"], header["epoch"], header.get("meta", {}))
