"""On-disk dataset of (observation, object-representation) sequence pairs.

Episodes are stored as float64 in a single binary blob with a JSON manifest
recording per-episode offsets and the generating object of each episode.
Full precision is kept so recorded targets can be byte-compared against a
recomputation through the producing encoder.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..config import CheckpointError, ConfigError

DATASET_FORMAT = "dereco-encdata-v1"


@dataclass
class EncoderDataset:
    """Per-episode sequences: obs (T, 2, obs_w) and targets (T, 2, repr_w)."""

    obs: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)
    objects: list[dict] = field(default_factory=list)

    def add_episode(self, obs: np.ndarray, targets: np.ndarray, object_info: dict):
        if obs.shape[:2] != targets.shape[:2]:
            raise ConfigError(
                f"episode obs {obs.shape} and targets {targets.shape} disagree"
            )
        self.obs.append(np.asarray(obs, dtype=np.float64))
        self.targets.append(np.asarray(targets, dtype=np.float64))
        self.objects.append(object_info)

    def __len__(self) -> int:
        return len(self.obs)

    @property
    def n_pairs(self) -> int:
        return sum(o.shape[0] * o.shape[1] for o in self.obs)

    @property
    def obs_width(self) -> int:
        return self.obs[0].shape[-1]

    @property
    def repr_width(self) -> int:
        return self.targets[0].shape[-1]

    def sequences(self) -> tuple[np.ndarray, np.ndarray]:
        """Episode/robot pairs flattened to independent sequences.

        Returns (obs (S, T, obs_w), targets (S, T, repr_w)) with S = 2 * episodes;
        sequence 2k is episode k robot 0, sequence 2k+1 robot 1. Requires a
        uniform episode length.
        """
        obs = np.stack(self.obs)  # (N, T, 2, ow)
        tgt = np.stack(self.targets)
        n, t = obs.shape[0], obs.shape[1]
        obs = obs.transpose(0, 2, 1, 3).reshape(2 * n, t, -1)
        tgt = tgt.transpose(0, 2, 1, 3).reshape(2 * n, t, -1)
        return obs, tgt


def save_dataset(path: str, dataset: EncoderDataset, blob_name: str | None = None) -> None:
    if blob_name is None:
        blob_name = os.path.basename(path) + ".bin"
    episodes = []
    offset = 0
    chunks = []
    for obs, tgt, obj in zip(dataset.obs, dataset.targets, dataset.objects):
        obs64 = np.ascontiguousarray(obs, dtype="<f8")
        tgt64 = np.ascontiguousarray(tgt, dtype="<f8")
        episodes.append(
            {
                "offset_obs": offset,
                "offset_targets": offset + obs64.nbytes,
                "steps": int(obs.shape[0]),
                "object": obj,
            }
        )
        chunks.append(obs64.tobytes())
        chunks.append(tgt64.tobytes())
        offset += obs64.nbytes + tgt64.nbytes
    manifest = {
        "format": DATASET_FORMAT,
        "blob": blob_name,
        "blob_bytes": offset,
        "obs_width": dataset.obs_width if len(dataset) else 0,
        "repr_width": dataset.repr_width if len(dataset) else 0,
        "episodes": episodes,
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, blob_name), "wb") as fh:
        for chunk in chunks:
            fh.write(chunk)
    with open(path, "w") as fh:
        json.dump(manifest, fh)
        fh.write("\n")


def load_dataset(path: str) -> EncoderDataset:
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read dataset {path}: {exc}") from exc
    if manifest.get("format") != DATASET_FORMAT:
        raise CheckpointError(f"unsupported dataset format in {path}")
    blob_path = os.path.join(os.path.dirname(os.path.abspath(path)), manifest["blob"])
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"dataset blob {blob_path} truncated")
    ow, rw = manifest["obs_width"], manifest["repr_width"]
    out = EncoderDataset()
    for ep in manifest["episodes"]:
        t = ep["steps"]
        obs = np.frombuffer(
            blob, dtype="<f8", count=t * 2 * ow, offset=ep["offset_obs"]
        ).reshape(t, 2, ow)
        tgt = np.frombuffer(
            blob, dtype="<f8", count=t * 2 * rw, offset=ep["offset_targets"]
        ).reshape(t, 2, rw)
        out.add_episode(obs.copy(), tgt.copy(), ep["object"])
    return out
