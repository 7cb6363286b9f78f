"""Run configuration: defaults, deep merge, canonical hashing, seed streams.

Every run is fully determined by (config hash, seed).  All randomness is
drawn from named substreams of the run seed so that adding a new consumer
never perturbs the draws seen by existing ones.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import struct
from typing import Any

import numpy as np


class DerecoError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DerecoError):
    """Invalid or inconsistent configuration."""


class ContractError(DerecoError):
    """A call violated an operation's contract."""


class DimensionError(ContractError):
    """Shape mismatch between arrays."""


class TrainingError(DerecoError):
    """Non-finite values or divergence during optimization."""


class StepError(DerecoError):
    """Invalid input to an environment step."""


class CheckpointError(DerecoError):
    """Checkpoint file missing, malformed, or incompatible."""


class UsageError(DerecoError):
    """Bad command-line invocation."""


DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "env": {
        "dt": 0.1,
        "episode_len": 200,
        "grasp_radius": 0.05,
        "force_threshold": 0.05,
        "slip_gain": 1.0,
        "drag_factor": 0.5,
        "lift_margin": 0.02,
        "gravity": 9.81,
        "grip_force": 5.0,
        "table_height_range": [0.3, 0.6],
        "goal_height": 0.8,
        "goal_above_table": None,
        "base_max_speed": 0.5,
        "arm_max_rate": 0.5,
        "height_max_rate": 0.5,
        "heading_max_rate": 1.0,
        "arm_extension_range": [0.0, 0.8],
        "arm_extension_start": 0.3,
        "gripper_height_max": 1.2,
        "robot_start_distance": 0.8,
        "mass_range": [0.2, 1.0],
        "friction_range": [0.5, 1.0],
        "reward_weights": {
            "reach": 3.0,
            "grasp": 4.0,
            "grasp_team": 7.5,
            "track": 20.0,
            "ori": 3.0,
        },
        "track_mode": "neg_distance",
        "shapes": None,
    },
    "model": {
        "hidden": 128,
        "encoder_hidden": 128,
        "log_std_init": math.log(0.3),
        "log_std_bounds": [-5.0, 2.0],
    },
    "train": {
        "gamma": 0.99,
        "lam": 0.95,
        "clip": 0.2,
        "epochs": 4,
        "minibatches": 4,
        "entropy_coef": 0.005,
        "value_coef": 0.5,
        "lr": 3e-4,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_eps": 1e-8,
        "grad_clip": 0.5,
        "rollout_len": 64,
        "n_envs": 32,
        "total_steps": 50000,
        "normalize_advantages": True,
        "rolling_window": 100,
        "checkpoint_every": 50,
    },
    "stage2": {
        "episodes": 2000,
        "tbptt": 32,
        "lr": 1e-3,
        "epochs": 20,
        "batch_size": 64,
        "val_fraction": 0.1,
        "patience": 3,
        "deterministic_rollouts": False,
    },
    "stage3": {
        "total_steps": 50000,
    },
    "eval": {
        "trials": 200,
        "deterministic": True,
        "batch": 64,
        "unseen_one_hot": "per_trial",
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(base: dict, override: dict) -> dict:
    """Deep merge `override` into a copy of `base`. Unknown keys are rejected."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key: {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None, overrides: list[str] | None = None) -> dict:
    """Build the effective config from defaults, an optional JSON file, and
    dotted --set overrides (values parsed as JSON, falling back to string)."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        cfg = merge_config(cfg, user)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = dotted.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config path: {dotted!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config path: {dotted!r}")
        node[parts[-1]] = value
    return cfg


def canonical_json(cfg: dict) -> str:
    """Canonical serialization: sorted keys, no whitespace, repr floats."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def file_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def substream(seed: int, name: str) -> np.random.Generator:
    """Named RNG stream derived from the run seed.

    Streams with distinct names are statistically independent; the mapping
    depends only on (seed, name).
    """
    digest = hashlib.sha256(name.encode()).digest()
    words = struct.unpack("<2I", digest[:8])
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=words))
