import copy
import json

import numpy as np
import pytest

from dereco.config import default_config, substream
from dereco.nn import Tape, Tensor, backward
from dereco.pipeline import build_training
from dereco.rl import RolloutBuffer, critic_loss


def quick_config(n_envs=2, rollout=8, **train_overrides):
    cfg = default_config()
    cfg["train"].update(
        {"n_envs": n_envs, "rollout_len": rollout, "total_steps": rollout,
         "epochs": 2, "minibatches": 2, "rolling_window": 10},
        **train_overrides,
    )
    cfg["env"]["episode_len"] = 20
    cfg["model"].update({"hidden": 16, "encoder_hidden": 16})
    return cfg


class TestCollection:
    def test_buffer_leading_shape(self):
        trainer, bundle, ctx = build_training(quick_config(), "priv_fc", True, seed=0)
        buf = trainer.collect(4)
        assert buf.obs.shape[:2] == (2, 4)
        assert buf.values.shape == (2, 4)
        assert buf.log_probs.shape == (2, 4, 2)
        buf.validate()

    def test_collection_deterministic_across_runs(self):
        bufs = []
        for _ in range(2):
            trainer, _, _ = build_training(quick_config(), "priv_fc", True, seed=5)
            bufs.append(trainer.collect(6))
        assert np.array_equal(bufs[0].obs, bufs[1].obs)
        assert np.array_equal(bufs[0].actions_raw, bufs[1].actions_raw)
        assert np.array_equal(bufs[0].values, bufs[1].values)

    def test_stored_log_probs_match_snapshot_recomputation(self):
        trainer, bundle, _ = build_training(quick_config(), "priv_fc", True, seed=1)
        buf = trainer.collect(6)
        obs_rows = buf.obs.reshape(-1, bundle.net_cfg.obs_width)
        raw_rows = buf.actions_raw.reshape(-1, bundle.net_cfg.action_width)
        priv_rows = np.repeat(buf.priv.reshape(-1, bundle.net_cfg.priv_width), 2, axis=0)
        logp, _ = bundle.policy.evaluate(obs_rows, raw_rows, priv=priv_rows)
        np.testing.assert_allclose(
            logp.data, buf.log_probs.reshape(-1), atol=1e-12
        )

    def test_episode_boundaries_reset_lstm_state(self):
        cfg = quick_config(rollout=25)  # spans the 20-step episode boundary
        trainer, bundle, _ = build_training(cfg, "lstm", False, seed=2)
        buf = trainer.collect(25)
        done_steps = np.where(buf.dones[0] == 1.0)[0]
        assert len(done_steps) >= 1
        t = done_steps[0]
        if t + 1 < buf.n_steps:
            np.testing.assert_array_equal(buf.enc_h[0, t + 1], 0.0)

    def test_executed_actions_within_bounds(self):
        trainer, _, _ = build_training(quick_config(), "obs_fc", False, seed=3)
        buf = trainer.collect(6)
        assert np.all(np.abs(buf.actions) <= 1.0)


class TestUpdate:
    def test_zero_advantage_leaves_actor_untouched(self):
        cfg = quick_config()
        cfg["train"]["entropy_coef"] = 0.0
        trainer, bundle, _ = build_training(cfg, "priv_fc", True, seed=4)
        buf = trainer.collect(8)
        buf.rewards[...] = 0.0
        buf.values[...] = 0.0
        buf.bootstrap[...] = 0.0
        buf.dones[...] = 0.0

        # gradient norm of the actor objective is numerically zero
        obs_rows = buf.obs.reshape(-1, bundle.net_cfg.obs_width)
        raw_rows = buf.actions_raw.reshape(-1, bundle.net_cfg.action_width)
        priv_rows = np.repeat(buf.priv.reshape(-1, bundle.net_cfg.priv_width), 2, axis=0)
        bundle.actor_store.zero_grad()
        with Tape() as tape:
            from dereco.rl import actor_loss

            logp, entropy = bundle.policy.evaluate(obs_rows, raw_rows, priv=priv_rows)
            loss = actor_loss(
                logp, buf.log_probs.reshape(-1), np.zeros(obs_rows.shape[0]),
                0.2, entropy, 0.0,
            )
        backward(tape, loss, bundle.actor_store.tensors())
        norm = np.sqrt(sum(float((t.grad ** 2).sum()) for t in bundle.actor_store.tensors()))
        assert norm < 1e-10

        before = bundle.actor_store.state_hash()
        trainer.update(buf)
        assert bundle.actor_store.state_hash() == before

    def test_single_update_decreases_critic_loss_on_frozen_buffer(self):
        cfg = quick_config(lr=1e-4)
        trainer, bundle, _ = build_training(cfg, "priv_fc", True, seed=6)
        buf = trainer.collect(8)

        def frozen_critic_loss():
            rows = buf.critic_in.reshape(-1, bundle.critic.input_width)
            v_old = buf.values.reshape(-1, 1)
            mean_r = buf.rewards.mean(axis=2)
            from dereco.rl import compute_gae

            values_ext = np.concatenate([buf.values, buf.bootstrap[:, None]], axis=1)
            ret = compute_gae(mean_r, values_ext, buf.dones, 0.99, 0.95).returns
            v = bundle.critic.forward(Tensor(rows))
            return float(critic_loss(v, v_old, ret.reshape(-1, 1), 0.2).data)

        before = frozen_critic_loss()
        trainer.update(buf)
        after = frozen_critic_loss()
        assert after < before

    def test_stats_ranges(self):
        trainer, _, _ = build_training(quick_config(), "priv_fc", True, seed=7)
        buf = trainer.collect(8)
        stats = trainer.update(buf)
        assert 0.0 <= stats["clip_fraction"] <= 1.0
        assert np.isfinite(stats["actor_loss"])
        assert np.isfinite(stats["critic_loss"])

    def test_update_changes_parameters(self):
        trainer, bundle, _ = build_training(quick_config(), "obs_fc", True, seed=8)
        buf = trainer.collect(8)
        a0 = bundle.actor_store.state_hash()
        c0 = bundle.critic_store.state_hash()
        trainer.update(buf)
        assert bundle.actor_store.state_hash() != a0
        assert bundle.critic_store.state_hash() != c0

    def test_lstm_baseline_gets_encoder_gradient_from_update(self):
        trainer, bundle, _ = build_training(quick_config(), "lstm", True, seed=9)
        buf = trainer.collect(8)
        before = bundle.actor_store["actor.enc.wx"].data.copy()
        trainer.update(buf)
        assert not np.array_equal(bundle.actor_store["actor.enc.wx"].data, before)


class TestTrainLoop:
    def test_metrics_jsonl_written(self, tmp_path):
        cfg = quick_config()
        metrics = str(tmp_path / "metrics.jsonl")
        trainer, _, _ = build_training(
            cfg, "priv_fc", True, seed=10, metrics_path=metrics
        )
        trainer.train(16)
        lines = [json.loads(l) for l in open(metrics)]
        assert len(lines) == 2
        for key in ("step", "mean_episode_reward", "track_reward", "actor_loss",
                    "critic_loss", "kl", "clip_fraction", "success_rate_rolling"):
            assert key in lines[0]
        assert lines[1]["step"] == 16

    def test_training_deterministic_end_to_end(self, tmp_path):
        hashes = []
        for run in range(2):
            trainer, bundle, _ = build_training(quick_config(), "priv_fc", True, seed=11)
            trainer.train(16)
            hashes.append((bundle.actor_store.state_hash(),
                           bundle.critic_store.state_hash()))
        assert hashes[0] == hashes[1]
