"""Method registry: how each training configuration composes its networks.

Six recognized methods. The five single-stage baselines train end to end;
the staged method trains a privileged policy first, distills its object
representation into a recurrent encoder, and retrains with that encoder
frozen.

  mappo-wo-pi        actor and critic see local observations only
  mappo-wo-pi-lstm   same, with an LSTM encoder branch in the actor
  mappo-wo-ae        privileged critic, observation-only actor
  mappo-wo-ae-lstm   privileged critic, LSTM encoder branch in the actor
  mappo-w-pi         actor and critic both consume the privileged descriptor
  dereco             three-stage schedule (stage 1 net equals mappo-w-pi)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ConfigError
from ..nn import ParamStore
from ..rl import ActorNet, CriticNet, NetConfig, Policy, make_critic_input_fn


@dataclass(frozen=True)
class BaselineSpec:
    name: str
    actor_kind: str
    critic_uses_priv: bool
    schedule: str  # "end_to_end" or "three_stage"


METHODS: dict[str, BaselineSpec] = {
    "mappo-wo-pi": BaselineSpec("mappo-wo-pi", "obs_fc", False, "end_to_end"),
    "mappo-wo-pi-lstm": BaselineSpec("mappo-wo-pi-lstm", "lstm", False, "end_to_end"),
    "mappo-wo-ae": BaselineSpec("mappo-wo-ae", "obs_fc", True, "end_to_end"),
    "mappo-wo-ae-lstm": BaselineSpec("mappo-wo-ae-lstm", "lstm", True, "end_to_end"),
    "mappo-w-pi": BaselineSpec("mappo-w-pi", "priv_fc", True, "end_to_end"),
    "dereco": BaselineSpec("dereco", "priv_fc", True, "three_stage"),
}


def get_method(name: str) -> BaselineSpec:
    if name not in METHODS:
        raise ConfigError(
            f"unknown method {name!r}; expected one of {sorted(METHODS)}"
        )
    return METHODS[name]


@dataclass
class ModelBundle:
    """Policy + critic plus their parameter stores for one configuration."""

    policy: Policy
    actor_store: ParamStore
    critic: CriticNet
    critic_store: ParamStore
    encoder_store: ParamStore | None
    critic_input_fn: object
    net_cfg: NetConfig
    actor_kind: str
    critic_uses_priv: bool

    def all_arrays(self) -> dict[str, np.ndarray]:
        arrays = {**self.actor_store.snapshot(), **self.critic_store.snapshot()}
        if self.encoder_store is not None:
            arrays.update(self.encoder_store.snapshot())
        return arrays


def build_model(
    actor_kind: str,
    critic_uses_priv: bool,
    net_cfg: NetConfig,
    rng: np.random.Generator,
    encoder_store: ParamStore | None = None,
) -> ModelBundle:
    actor_store = ParamStore()
    if actor_kind == "frozen_lstm" and encoder_store is None:
        encoder_store = ParamStore()
    actor = ActorNet(actor_store, net_cfg, actor_kind, rng, encoder_store=encoder_store)
    critic_store = ParamStore()
    critic = CriticNet(critic_store, net_cfg, critic_uses_priv, rng)
    policy = Policy(actor, actor_store, encoder_params=encoder_store)
    return ModelBundle(
        policy=policy,
        actor_store=actor_store,
        critic=critic,
        critic_store=critic_store,
        encoder_store=encoder_store if actor_kind == "frozen_lstm" else None,
        critic_input_fn=make_critic_input_fn(critic_uses_priv, net_cfg.obs_width),
        net_cfg=net_cfg,
        actor_kind=actor_kind,
        critic_uses_priv=critic_uses_priv,
    )
