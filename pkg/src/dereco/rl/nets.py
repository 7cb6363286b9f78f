"""Actor and critic networks with swappable object-representation encoders.

Both nets share one skeleton: an encoder branch and an observation branch,
each one 128-unit FC layer (ReLU), concatenated into a two-layer FC trunk,
then a tanh mean head (actor) or a linear value head (critic). The encoder
branch is the only part that varies across training configurations:

  * ``priv_fc``      one FC layer over [obs, privileged descriptor]
  * ``obs_fc``       one FC layer over obs alone
  * ``lstm``         an LSTM cell over obs, trained by policy gradients
  * ``frozen_lstm``  an LSTM cell over obs whose weights live in a separate
                     store and receive no updates

The encoder branch output (the object representation) is exposed on every
forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigError
from ..nn import (
    DenseLayer,
    LstmCellState,
    ParamStore,
    Tensor,
    init_lstm_params,
    lstm_cell_forward,
)
from ..nn import tape as T

ACTOR_KINDS = ("priv_fc", "obs_fc", "lstm", "frozen_lstm")


@dataclass
class NetConfig:
    obs_width: int
    priv_width: int
    action_width: int = 6
    hidden: int = 128
    encoder_hidden: int = 128
    log_std_init: float = math.log(0.3)
    log_std_bounds: tuple[float, float] = (-5.0, 2.0)


class ActorNet:
    def __init__(
        self,
        store: ParamStore,
        cfg: NetConfig,
        kind: str,
        rng: np.random.Generator,
        encoder_store: ParamStore | None = None,
    ):
        if kind not in ACTOR_KINDS:
            raise ConfigError(f"unknown actor kind {kind!r}")
        self.cfg = cfg
        self.kind = kind
        self.enc_fc = None
        self.enc_lstm = None
        if kind == "priv_fc":
            self.enc_fc = DenseLayer(
                store, "actor.enc", cfg.obs_width + cfg.priv_width, cfg.hidden,
                rng, gain=np.sqrt(2.0),
            )
            enc_out_width = cfg.hidden
        elif kind == "obs_fc":
            self.enc_fc = DenseLayer(
                store, "actor.enc", cfg.obs_width, cfg.hidden, rng, gain=np.sqrt(2.0)
            )
            enc_out_width = cfg.hidden
        elif kind == "lstm":
            self.enc_lstm = init_lstm_params(
                store, "actor.enc", cfg.obs_width, cfg.encoder_hidden, rng
            )
            enc_out_width = cfg.encoder_hidden
        else:  # frozen_lstm: weights live outside the trainable store
            if encoder_store is None:
                raise ConfigError("frozen_lstm actor needs an encoder_store")
            if "encoder.wx" in encoder_store:
                self.enc_lstm = _lstm_from_store(encoder_store)
            else:
                self.enc_lstm = init_lstm_params(
                    encoder_store, "encoder", cfg.obs_width, cfg.encoder_hidden, rng
                )
            enc_out_width = cfg.encoder_hidden
        self.obs_fc = DenseLayer(
            store, "actor.obs", cfg.obs_width, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.trunk0 = DenseLayer(
            store, "actor.trunk0", enc_out_width + cfg.hidden, cfg.hidden, rng,
            gain=np.sqrt(2.0),
        )
        self.trunk1 = DenseLayer(
            store, "actor.trunk1", cfg.hidden, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.mean = DenseLayer(
            store, "actor.mean", cfg.hidden, cfg.action_width, rng, gain=0.01,
            activation="tanh",
        )
        self.log_std = store.add(
            "actor.log_std", np.full(cfg.action_width, cfg.log_std_init)
        )

    @property
    def recurrent(self) -> bool:
        return self.kind in ("lstm", "frozen_lstm")

    def encode(
        self,
        obs: Tensor,
        priv: Tensor | None = None,
        state: LstmCellState | None = None,
    ) -> tuple[Tensor, LstmCellState | None]:
        """Run the encoder branch; returns (object representation, next state)."""
        if self.kind == "priv_fc":
            if priv is None:
                raise ConfigError("priv_fc encoder requires the privileged input")
            return self.enc_fc(T.concat_cols([obs, priv])), None
        if self.kind == "obs_fc":
            return self.enc_fc(obs), None
        if state is None:
            raise ConfigError("recurrent encoder requires a cell state")
        out, next_state = lstm_cell_forward(obs, state, self.enc_lstm)
        return out, next_state

    def head(self, obs: Tensor, enc_out: Tensor) -> Tensor:
        """Trunk + tanh mean head given a precomputed encoder output."""
        feat = self.obs_fc(obs)
        h = self.trunk0(T.concat_cols([enc_out, feat]))
        h = self.trunk1(h)
        return self.mean(h)

    def bounded_log_std(self) -> Tensor:
        lo, hi = self.cfg.log_std_bounds
        return T.clip(self.log_std, lo, hi)


def _lstm_from_store(store: ParamStore):
    from ..nn.layers import LstmParams

    return LstmParams(store["encoder.wx"], store["encoder.wh"], store["encoder.b"])


class CriticNet:
    """Centralized value net over joint observations (optionally + privileged)."""

    def __init__(
        self,
        store: ParamStore,
        cfg: NetConfig,
        use_priv: bool,
        rng: np.random.Generator,
    ):
        self.cfg = cfg
        self.use_priv = use_priv
        joint = 2 * cfg.obs_width
        self.input_width = joint + (cfg.priv_width if use_priv else 0)
        self.enc = DenseLayer(
            store, "critic.enc", self.input_width, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.obs_fc = DenseLayer(
            store, "critic.obs", joint, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.trunk0 = DenseLayer(
            store, "critic.trunk0", 2 * cfg.hidden, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.trunk1 = DenseLayer(
            store, "critic.trunk1", cfg.hidden, cfg.hidden, rng, gain=np.sqrt(2.0)
        )
        self.head = DenseLayer(
            store, "critic.head", cfg.hidden, 1, rng, gain=1.0, activation="linear"
        )

    def forward(self, critic_input: Tensor) -> Tensor:
        """Value estimates, shape (batch, 1)."""
        joint_width = 2 * self.cfg.obs_width
        if self.use_priv:
            joint = T.slice_cols(critic_input, 0, joint_width)
        else:
            joint = critic_input
        enc_out = self.enc(critic_input)
        feat = self.obs_fc(joint)
        h = self.trunk0(T.concat_cols([enc_out, feat]))
        h = self.trunk1(h)
        return self.head(h)


def make_critic_input_fn(use_priv: bool, obs_width: int):
    """Composer for the centralized critic input from per-robot observations."""

    def fn(obs_pair: np.ndarray, priv: np.ndarray | None) -> np.ndarray:
        joint = obs_pair.reshape(obs_pair.shape[0], 2 * obs_width)
        if not use_priv:
            return joint
        return np.concatenate([joint, priv], axis=1)

    return fn
