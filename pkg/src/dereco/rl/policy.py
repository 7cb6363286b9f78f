"""Gaussian policy around an ActorNet: sampling, log-probs, encoder state.

Actions are sampled from N(tanh-mean, exp(log_std)^2) and clamped to
[-1, 1] for execution; log-probabilities are taken at the pre-clamp sample,
and the raw sample is what update passes back through the graph. In
deterministic mode the mean is used directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ConfigError
from ..nn import LstmCellState, ParamStore, Tensor
from .losses import gaussian_entropy, gaussian_log_prob, sample_gaussian
from .nets import ActorNet, NetConfig


@dataclass
class ActStep:
    action_exec: np.ndarray  # (B, A) clamped, sent to the environment
    action_raw: np.ndarray  # (B, A) pre-clamp Gaussian sample
    log_prob: np.ndarray  # (B,)
    enc_out: np.ndarray  # (B, H) encoder branch output
    state: tuple[np.ndarray, np.ndarray] | None  # next (h, c) if recurrent


class Policy:
    def __init__(self, actor: ActorNet, params: ParamStore,
                 encoder_params: ParamStore | None = None):
        self.actor = actor
        self.params = params
        self.encoder_params = encoder_params
        self.cfg: NetConfig = actor.cfg

    @property
    def uses_priv(self) -> bool:
        return self.actor.kind == "priv_fc"

    @property
    def recurrent(self) -> bool:
        return self.actor.recurrent

    def initial_state(self, batch: int) -> tuple[np.ndarray, np.ndarray] | None:
        if not self.recurrent:
            return None
        width = self.cfg.encoder_hidden
        return np.zeros((batch, width)), np.zeros((batch, width))

    def act(
        self,
        obs: np.ndarray,
        priv: np.ndarray | None = None,
        state: tuple[np.ndarray, np.ndarray] | None = None,
        rng: np.random.Generator | None = None,
        deterministic: bool = False,
    ) -> ActStep:
        """Forward pass without recording; samples one action per row."""
        obs_t = Tensor(obs)
        priv_t = Tensor(priv) if priv is not None else None
        cell = (
            LstmCellState(Tensor(state[0]), Tensor(state[1]))
            if state is not None
            else None
        )
        enc_out, next_cell = self.actor.encode(obs_t, priv_t, cell)
        mean = self.actor.head(obs_t, enc_out)
        log_std = self.actor.bounded_log_std()
        if deterministic:
            raw = mean.data.copy()
            log_prob = np.zeros(obs.shape[0])
        else:
            if rng is None:
                raise ConfigError("stochastic action sampling requires an rng")
            raw = sample_gaussian(mean.data, log_std.data, rng)
            log_prob = gaussian_log_prob(raw, mean, log_std).data
        next_state = (
            (next_cell.h.data, next_cell.c.data) if next_cell is not None else None
        )
        return ActStep(
            action_exec=np.clip(raw, -1.0, 1.0),
            action_raw=raw,
            log_prob=log_prob,
            enc_out=enc_out.data,
            state=next_state,
        )

    def evaluate(
        self,
        obs: np.ndarray,
        action_raw: np.ndarray,
        priv: np.ndarray | None = None,
        enc_out: np.ndarray | None = None,
        enc_state: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        """Recompute log-probs and entropy under current parameters.

        Call under an active tape. For a frozen encoder the stored encoder
        outputs are constants; for a trainable LSTM encoder the stored
        pre-step cell state is replayed for one step so gradients reach the
        gate weights.
        """
        obs_t = Tensor(obs)
        if self.actor.kind == "frozen_lstm":
            enc = Tensor(enc_out)
        elif self.actor.kind == "lstm":
            cell = LstmCellState(Tensor(enc_state[0]), Tensor(enc_state[1]))
            enc, _ = self.actor.encode(obs_t, None, cell)
        else:
            priv_t = Tensor(priv) if priv is not None else None
            enc, _ = self.actor.encode(obs_t, priv_t)
        mean = self.actor.head(obs_t, enc)
        log_std = self.actor.bounded_log_std()
        log_prob = gaussian_log_prob(action_raw, mean, log_std)
        entropy = gaussian_entropy(log_std, self.cfg.action_width)
        return log_prob, entropy
