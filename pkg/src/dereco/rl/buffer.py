"""Rollout storage for PPO updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ContractError


@dataclass
class RolloutBuffer:
    """Trajectories with leading dims (envs, steps).

    ``values`` are the centralized critic's estimates at collection time;
    ``bootstrap`` holds V(s) after the final step. ``enc_out`` stores frozen
    encoder outputs; ``enc_h``/``enc_c`` store pre-step cell states for
    trainable recurrent encoders.
    """

    obs: np.ndarray  # (E, T, 2, obs_w)
    actions: np.ndarray  # (E, T, 2, act_w) executed (clamped)
    actions_raw: np.ndarray  # (E, T, 2, act_w) pre-clamp samples
    log_probs: np.ndarray  # (E, T, 2)
    values: np.ndarray  # (E, T)
    bootstrap: np.ndarray  # (E,)
    rewards: np.ndarray  # (E, T, 2)
    dones: np.ndarray  # (E, T)
    critic_in: np.ndarray  # (E, T, critic_w)
    priv: np.ndarray | None = None  # (E, T, priv_w)
    enc_out: np.ndarray | None = None  # (E, T, 2, H)
    enc_h: np.ndarray | None = None  # (E, T, 2, H)
    enc_c: np.ndarray | None = None  # (E, T, 2, H)

    @classmethod
    def allocate(
        cls,
        n_envs: int,
        n_steps: int,
        obs_width: int,
        action_width: int,
        critic_width: int,
        priv_width: int | None = None,
        enc_width: int | None = None,
        recurrent: bool = False,
    ) -> "RolloutBuffer":
        shape = (n_envs, n_steps)
        return cls(
            obs=np.zeros(shape + (2, obs_width)),
            actions=np.zeros(shape + (2, action_width)),
            actions_raw=np.zeros(shape + (2, action_width)),
            log_probs=np.zeros(shape + (2,)),
            values=np.zeros(shape),
            bootstrap=np.zeros(n_envs),
            rewards=np.zeros(shape + (2,)),
            dones=np.zeros(shape),
            critic_in=np.zeros(shape + (critic_width,)),
            priv=np.zeros(shape + (priv_width,)) if priv_width else None,
            enc_out=np.zeros(shape + (2, enc_width)) if enc_width else None,
            enc_h=np.zeros(shape + (2, enc_width)) if (enc_width and recurrent) else None,
            enc_c=np.zeros(shape + (2, enc_width)) if (enc_width and recurrent) else None,
        )

    @property
    def n_envs(self) -> int:
        return self.obs.shape[0]

    @property
    def n_steps(self) -> int:
        return self.obs.shape[1]

    def validate(self) -> None:
        lead = (self.n_envs, self.n_steps)
        for name in ("actions", "actions_raw", "log_probs", "values", "rewards",
                     "dones", "critic_in"):
            arr = getattr(self, name)
            if arr.shape[:2] != lead:
                raise ContractError(
                    f"buffer field {name} has leading shape {arr.shape[:2]}, "
                    f"expected {lead}"
                )
        if not np.all(np.isfinite(self.log_probs)):
            raise ContractError("non-finite log-probabilities in rollout buffer")
