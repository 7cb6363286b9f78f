"""PPO training loop: parallel rollout collection and clipped-surrogate updates.

One trainer drives every method configuration: the policy object carries its
own encoder composition, the critic input composer decides what the
centralized critic sees, and everything else is shared. Collection runs
against fixed parameters; updates then recompute log-probs and values
minibatch by minibatch.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..config import ConfigError, TrainingError
from ..nn import AdamState, ParamStore, Tape, Tensor, adam_step, backward, clip_grad_norm
from ..nn import tape as T
from .buffer import RolloutBuffer
from .gae import compute_gae, normalize_advantages
from .losses import actor_loss, critic_loss
from .nets import CriticNet
from .policy import Policy


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    lr: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 0.5
    rollout_len: int = 64
    n_envs: int = 32
    total_steps: int = 50000
    normalize_advantages: bool = True
    rolling_window: int = 100
    checkpoint_every: int = 50

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.clip <= 0.0:
            raise ConfigError(f"clip range must be positive, got {self.clip}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        keep = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**keep)


class PPOTrainer:
    def __init__(
        self,
        envs: list,
        object_sampler,
        priv_fn,
        policy: Policy,
        critic: CriticNet,
        critic_params: ParamStore,
        critic_input_fn,
        config: TrainerConfig,
        seed: int,
        track_weight: float,
        metrics_path: str | None = None,
        seed_namespace: str = "",
    ):
        from ..config import substream

        self.envs = envs
        self.object_sampler = object_sampler
        self.priv_fn = priv_fn
        self.policy = policy
        self.critic = critic
        self.critic_params = critic_params
        self.critic_input_fn = critic_input_fn
        self.cfg = config
        self.track_weight = track_weight
        self.metrics_path = metrics_path

        ns = seed_namespace
        self.rng_policy = substream(seed, ns + "policy")
        self.rng_update = substream(seed, ns + "update")
        self.env_rngs = [substream(seed, f"{ns}env.{i}") for i in range(len(envs))]

        self.actor_adam = AdamState(
            lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps,
        )
        self.critic_adam = AdamState(
            lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps,
        )

        self.global_step = 0
        self.episodes = 0
        self._ep_reward = deque(maxlen=config.rolling_window)
        self._ep_track = deque(maxlen=config.rolling_window)
        self._ep_success = deque(maxlen=config.rolling_window)

        n = len(envs)
        self._obs = np.zeros((n, 2, policy.cfg.obs_width))
        self._priv = np.zeros((n, policy.cfg.priv_width))
        self._acc_reward = np.zeros(n)
        self._acc_track = np.zeros(n)
        self._enc_state = policy.initial_state(2 * n)
        for e, env in enumerate(envs):
            obj = object_sampler(self.env_rngs[e])
            obs = env.reset(self.env_rngs[e], obj)
            self._obs[e] = np.stack(obs)
            self._priv[e] = priv_fn(obj)

    # -- rollout collection ------------------------------------------------

    def collect(self, steps: int) -> RolloutBuffer:
        policy = self.policy
        n = len(self.envs)
        enc_width = policy.cfg.encoder_hidden if policy.actor.kind != "obs_fc" else (
            policy.cfg.hidden
        )
        buf = RolloutBuffer.allocate(
            n_envs=n,
            n_steps=steps,
            obs_width=policy.cfg.obs_width,
            action_width=policy.cfg.action_width,
            critic_width=self.critic.input_width,
            priv_width=policy.cfg.priv_width if policy.uses_priv else None,
            enc_width=enc_width if policy.actor.kind == "frozen_lstm" else (
                policy.cfg.encoder_hidden if policy.recurrent else None
            ),
            recurrent=policy.actor.kind == "lstm",
        )
        for t in range(steps):
            obs_rows = self._obs.reshape(2 * n, policy.cfg.obs_width)
            priv_rows = (
                np.repeat(self._priv, 2, axis=0) if policy.uses_priv else None
            )
            if policy.actor.kind == "lstm":
                buf.enc_h[:, t] = self._enc_state[0].reshape(n, 2, -1)
                buf.enc_c[:, t] = self._enc_state[1].reshape(n, 2, -1)
            step_out = policy.act(
                obs_rows, priv_rows, self._enc_state, self.rng_policy
            )
            critic_in = self.critic_input_fn(self._obs, self._priv)
            values = self.critic.forward(Tensor(critic_in)).data[:, 0]

            buf.obs[:, t] = self._obs
            buf.actions[:, t] = step_out.action_exec.reshape(n, 2, -1)
            buf.actions_raw[:, t] = step_out.action_raw.reshape(n, 2, -1)
            buf.log_probs[:, t] = step_out.log_prob.reshape(n, 2)
            buf.values[:, t] = values
            buf.critic_in[:, t] = critic_in
            if buf.priv is not None:
                buf.priv[:, t] = self._priv
            if buf.enc_out is not None and policy.actor.kind == "frozen_lstm":
                buf.enc_out[:, t] = step_out.enc_out.reshape(n, 2, -1)
            self._enc_state = step_out.state

            actions = step_out.action_exec.reshape(n, 2, -1)
            for e, env in enumerate(self.envs):
                try:
                    obs_list, rewards, done, info = env.step(actions[e])
                except Exception as exc:
                    raise TrainingError(f"environment {e} failed to step: {exc}") from exc
                buf.rewards[e, t, 0] = rewards[0].total
                buf.rewards[e, t, 1] = rewards[1].total
                buf.dones[e, t] = float(done)
                mean_total = 0.5 * (rewards[0].total + rewards[1].total)
                self._acc_reward[e] += mean_total
                self._acc_track[e] += self.track_weight * rewards[0].track
                if done:
                    self.episodes += 1
                    self._ep_reward.append(self._acc_reward[e])
                    self._ep_track.append(self._acc_track[e])
                    self._ep_success.append(float(info.get("success", False)))
                    self._acc_reward[e] = 0.0
                    self._acc_track[e] = 0.0
                    obj = self.object_sampler(self.env_rngs[e])
                    obs_list = env.reset(self.env_rngs[e], obj)
                    self._priv[e] = self.priv_fn(obj)
                    if self._enc_state is not None:
                        self._enc_state[0][2 * e : 2 * e + 2] = 0.0
                        self._enc_state[1][2 * e : 2 * e + 2] = 0.0
                self._obs[e] = np.stack(obs_list)
        final_in = self.critic_input_fn(self._obs, self._priv)
        buf.bootstrap = self.critic.forward(Tensor(final_in)).data[:, 0]
        return buf

    # -- optimization ------------------------------------------------------

    def update(self, buf: RolloutBuffer) -> dict:
        cfg = self.cfg
        policy = self.policy
        n, steps = buf.n_envs, buf.n_steps
        mean_rewards = buf.rewards.mean(axis=2)
        values_ext = np.concatenate([buf.values, buf.bootstrap[:, None]], axis=1)
        adv_batch = compute_gae(mean_rewards, values_ext, buf.dones, cfg.gamma, cfg.lam)
        adv = adv_batch.advantages
        if cfg.normalize_advantages:
            adv = normalize_advantages(adv)
        returns = adv_batch.returns

        obs_w = policy.cfg.obs_width
        act_w = policy.cfg.action_width
        obs_rows = buf.obs.reshape(-1, obs_w)
        raw_rows = buf.actions_raw.reshape(-1, act_w)
        logp_rows = buf.log_probs.reshape(-1)
        adv_rows = np.repeat(adv.reshape(-1), 2)
        priv_rows = (
            np.repeat(buf.priv.reshape(n * steps, -1), 2, axis=0)
            if buf.priv is not None
            else None
        )
        enc_out_rows = (
            buf.enc_out.reshape(-1, buf.enc_out.shape[-1])
            if buf.enc_out is not None and policy.actor.kind == "frozen_lstm"
            else None
        )
        enc_h_rows = (
            buf.enc_h.reshape(-1, buf.enc_h.shape[-1]) if buf.enc_h is not None else None
        )
        enc_c_rows = (
            buf.enc_c.reshape(-1, buf.enc_c.shape[-1]) if buf.enc_c is not None else None
        )
        critic_rows = buf.critic_in.reshape(n * steps, -1)
        v_old_rows = buf.values.reshape(-1, 1)
        ret_rows = returns.reshape(-1, 1)

        stats = {"actor_loss": [], "critic_loss": [], "kl": [], "clip_fraction": []}
        n_actor = obs_rows.shape[0]
        n_critic = critic_rows.shape[0]
        for epoch in range(cfg.epochs):
            actor_perm = self.rng_update.permutation(n_actor)
            critic_perm = self.rng_update.permutation(n_critic)
            actor_chunks = np.array_split(actor_perm, cfg.minibatches)
            critic_chunks = np.array_split(critic_perm, cfg.minibatches)
            for m in range(cfg.minibatches):
                idx = actor_chunks[m]
                with Tape() as tape:
                    logp_new, entropy = policy.evaluate(
                        obs_rows[idx],
                        raw_rows[idx],
                        priv=priv_rows[idx] if priv_rows is not None else None,
                        enc_out=enc_out_rows[idx] if enc_out_rows is not None else None,
                        enc_state=(
                            (enc_h_rows[idx], enc_c_rows[idx])
                            if enc_h_rows is not None
                            else None
                        ),
                    )
                    a_loss = actor_loss(
                        logp_new, logp_rows[idx], adv_rows[idx], cfg.clip,
                        entropy, cfg.entropy_coef,
                    )
                if not np.isfinite(a_loss.data):
                    raise TrainingError(
                        f"actor loss non-finite (epoch {epoch}, minibatch {m})"
                    )
                policy.params.zero_grad()
                backward(tape, a_loss, policy.params.tensors())
                clip_grad_norm(policy.params, cfg.grad_clip)
                adam_step(policy.params, self.actor_adam)

                cidx = critic_chunks[m]
                with Tape() as tape:
                    v_new = self.critic.forward(Tensor(critic_rows[cidx]))
                    c_loss = critic_loss(
                        v_new, v_old_rows[cidx], ret_rows[cidx], cfg.clip
                    )
                    scaled = T.scale(c_loss, cfg.value_coef)
                if not np.isfinite(c_loss.data):
                    raise TrainingError(
                        f"critic loss non-finite (epoch {epoch}, minibatch {m})"
                    )
                self.critic_params.zero_grad()
                backward(tape, scaled, self.critic_params.tensors())
                clip_grad_norm(self.critic_params, cfg.grad_clip)
                adam_step(self.critic_params, self.critic_adam)

                ratio = np.exp(logp_new.data - logp_rows[idx])
                stats["actor_loss"].append(float(a_loss.data))
                stats["critic_loss"].append(float(c_loss.data))
                stats["kl"].append(float(np.mean(logp_rows[idx] - logp_new.data)))
                stats["clip_fraction"].append(
                    float(np.mean(np.abs(ratio - 1.0) > cfg.clip))
                )
        return {k: float(np.mean(v)) for k, v in stats.items()}

    # -- outer loop ----------------------------------------------------------

    def rolling_metrics(self) -> dict:
        def safe_mean(d):
            return float(np.mean(d)) if d else float("nan")

        return {
            "mean_episode_reward": safe_mean(self._ep_reward),
            "track_reward": safe_mean(self._ep_track),
            "success_rate_rolling": safe_mean(self._ep_success),
        }

    def train(self, total_steps: int, checkpoint_cb=None) -> list[dict]:
        cfg = self.cfg
        n_updates = max(1, math.ceil(total_steps / cfg.rollout_len))
        history = []
        metrics_fh = open(self.metrics_path, "a") if self.metrics_path else None
        try:
            for u in range(n_updates):
                buf = self.collect(cfg.rollout_len)
                buf.validate()
                stats = self.update(buf)
                self.global_step += cfg.rollout_len
                record = {"step": self.global_step, "update": u + 1}
                record.update(self.rolling_metrics())
                record.update(stats)
                history.append(record)
                if metrics_fh is not None:
                    metrics_fh.write(json.dumps(record) + "\n")
                    metrics_fh.flush()
                if checkpoint_cb is not None and (u + 1) % cfg.checkpoint_every == 0:
                    checkpoint_cb(self)
        finally:
            if metrics_fh is not None:
                metrics_fh.close()
        return history
