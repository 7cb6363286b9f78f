"""Named parameter storage and the on-disk checkpoint format.

A checkpoint is two files: ``<path>`` is a JSON manifest listing tensor
name -> shape -> byte offset plus free-form metadata, and ``<path>.bin`` is
a single blob of little-endian float32 values in manifest order. Save/load
round-trips are lossless at float32 precision.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from ..config import CheckpointError
from .tape import Tensor

MANIFEST_FORMAT = "dereco-checkpoint-v1"


class ParamStore:
    """Ordered mapping of parameter names to trainable Tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise CheckpointError(f"duplicate parameter name: {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        """Overwrite parameter values in place from ``arrays``.

        Every store entry must be present (after prepending ``prefix``) with
        a matching shape.
        """
        for name, t in self._params.items():
            key = prefix + name
            if key not in arrays:
                raise CheckpointError(f"missing parameter {key!r} in source arrays")
            src = np.asarray(arrays[key], dtype=np.float64)
            if src.shape != t.data.shape:
                raise CheckpointError(
                    f"shape mismatch for {key!r}: store {t.data.shape}, "
                    f"source {src.shape}"
                )
            t.data[...] = src

    def state_hash(self) -> str:
        """SHA-256 over names and exact float64 bytes; equal iff bit-identical."""
        digest = hashlib.sha256()
        for name, t in self._params.items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(t.data).tobytes())
        return digest.hexdigest()


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write manifest JSON at ``path`` and the float32 blob at ``path + '.bin'``."""
    blob_name = os.path.basename(path) + ".bin"
    entries = []
    offset = 0
    chunks = []
    for name, arr in arrays.items():
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr32.tobytes())
        offset += arr32.nbytes
    manifest = {
        "format": MANIFEST_FORMAT,
        "blob": blob_name,
        "blob_bytes": offset,
        "tensors": entries,
        "meta": meta,
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path + ".bin", "wb") as fh:
        for chunk in chunks:
            fh.write(chunk)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (arrays as float64, metadata)."""
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint manifest {path} is not JSON: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise CheckpointError(
            f"unsupported checkpoint format {manifest.get('format')!r} in {path}"
        )
    blob_path = os.path.join(os.path.dirname(os.path.abspath(path)), manifest["blob"])
    try:
        with open(blob_path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint blob {blob_path}: {exc}") from exc
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(
            f"checkpoint blob {blob_path} has {len(blob)} bytes, "
            f"manifest expects {manifest['blob_bytes']}"
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(
            blob, dtype="<f4", count=count, offset=entry["offset"]
        ).reshape(shape)
        arrays[entry["name"]] = arr.astype(np.float64)
    return arrays, manifest["meta"]
