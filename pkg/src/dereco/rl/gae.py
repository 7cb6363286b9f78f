"""Generalized advantage estimation over batched trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ContractError


@dataclass
class AdvantageBatch:
    advantages: np.ndarray  # (envs, steps)
    returns: np.ndarray  # (envs, steps)
    normalized: bool = False


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> AdvantageBatch:
    """Backward-recursive GAE.

    ``rewards`` and ``dones`` are (envs, steps); ``values`` is
    (envs, steps + 1) with the bootstrap estimate in the last column. A done
    at step t cuts both the TD target and the advantage recursion.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.ndim != 2 or dones.shape != rewards.shape:
        raise ContractError(
            f"rewards {rewards.shape} and dones {dones.shape} must match (envs, steps)"
        )
    n_envs, n_steps = rewards.shape
    if values.shape != (n_envs, n_steps + 1):
        raise ContractError(
            f"values must be (envs, steps + 1) = ({n_envs}, {n_steps + 1}), "
            f"got {values.shape}"
        )
    advantages = np.zeros_like(rewards)
    carry = np.zeros(n_envs)
    for t in range(n_steps - 1, -1, -1):
        not_done = 1.0 - dones[:, t]
        delta = rewards[:, t] + gamma * values[:, t + 1] * not_done - values[:, t]
        carry = delta + gamma * lam * not_done * carry
        advantages[:, t] = carry
    returns = advantages + values[:, :n_steps]
    return AdvantageBatch(advantages=advantages, returns=returns)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Center to zero mean and scale to unit std over the whole batch."""
    std = advantages.std()
    return (advantages - advantages.mean()) / max(std, 1e-12)
