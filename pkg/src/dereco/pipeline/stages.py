"""Training schedules: end-to-end baselines and the three-stage pipeline.

Stage 1 trains a privileged policy and critic. Stage 2 rolls that policy
out, records (observation, object-representation) pairs, and fits a
recurrent encoder to reconstruct the representation from observations
alone. Stage 3 swaps the privileged encoder for the frozen recurrent one,
warm-starts actor and critic from stage 1, and retrains; the critic keeps
its privileged input, the deployed actor runs on local observations only.
"""

from __future__ import annotations

import json
import os
import shutil

import numpy as np

from ..config import (
    CheckpointError,
    ConfigError,
    TrainingError,
    canonical_json,
    config_hash,
    file_hash,
    substream,
)
from ..env import (
    ACTION_WIDTH,
    OBS_LAYOUT,
    OBS_WIDTH,
    EnvConfig,
    TransportEnv,
    load_catalog,
    make_object,
    privileged_vector,
    sample_object,
    seen_shapes,
    shapes_by_name,
)
from ..nn import (
    AdamState,
    LstmCellState,
    ParamStore,
    Tape,
    Tensor,
    adam_step,
    backward,
    clip_grad_norm,
    init_lstm_params,
    load_checkpoint,
    lstm_cell_forward,
    save_checkpoint,
)
from ..nn import tape as T
from ..rl import NetConfig, PPOTrainer, TrainerConfig
from .dataset import EncoderDataset, load_dataset, save_dataset
from .methods import METHODS, ModelBundle, build_model, get_method


class TrainContext:
    """Environment, catalog, and network widths derived from one run config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.env_cfg = EnvConfig.from_dict(cfg["env"])
        names = cfg["env"].get("shapes")
        self.catalog = seen_shapes() if names is None else shapes_by_name(list(names))
        model = cfg["model"]
        self.net_cfg = NetConfig(
            obs_width=OBS_WIDTH,
            priv_width=len(self.catalog) + 2,
            action_width=ACTION_WIDTH,
            hidden=model["hidden"],
            encoder_hidden=model["encoder_hidden"],
            log_std_init=model["log_std_init"],
            log_std_bounds=tuple(model["log_std_bounds"]),
        )
        self.mass_range = tuple(cfg["env"]["mass_range"])
        self.friction_range = tuple(cfg["env"]["friction_range"])

    def object_sampler(self):
        catalog, mr, fr = self.catalog, self.mass_range, self.friction_range

        def sampler(rng):
            return sample_object(rng, catalog, mr, fr)

        return sampler

    def priv_fn(self):
        size, mr, fr = len(self.catalog), self.mass_range, self.friction_range

        def fn(obj):
            return privileged_vector(obj, size, mr, fr)

        return fn

    def checkpoint_meta(self, method: str, stage: str, seed: int, actor_kind: str,
                        critic_uses_priv: bool) -> dict:
        net = self.net_cfg
        return {
            "method": method,
            "stage": stage,
            "seed": seed,
            "actor_kind": actor_kind,
            "critic_uses_priv": critic_uses_priv,
            "net": {
                "obs_width": net.obs_width,
                "priv_width": net.priv_width,
                "action_width": net.action_width,
                "hidden": net.hidden,
                "encoder_hidden": net.encoder_hidden,
                "log_std_init": net.log_std_init,
                "log_std_bounds": list(net.log_std_bounds),
            },
            "obs_layout": {k: list(v) for k, v in OBS_LAYOUT.items()},
            "catalog": [s.name for s in self.catalog],
            "mass_range": list(self.mass_range),
            "friction_range": list(self.friction_range),
            "config_hash": config_hash(self.cfg),
        }


def catalog_hash() -> str:
    import hashlib

    entries = [
        {
            "name": s.name,
            "vertices": [list(v) for v in s.vertices],
            "grasp_points": [list(g) for g in s.grasp_points],
            "seen": s.seen,
        }
        for s in load_catalog()
    ]
    return hashlib.sha256(
        json.dumps(entries, sort_keys=True).encode()
    ).hexdigest()


def save_bundle(path: str, bundle: ModelBundle, meta: dict) -> None:
    save_checkpoint(path, bundle.all_arrays(), meta)


def load_bundle(path: str, expected_obs_width: int = OBS_WIDTH):
    """Rebuild a policy/critic bundle from a checkpoint.

    Returns (bundle, meta). Network shapes come from the stored manifest;
    parameter values are overwritten from the blob.
    """
    arrays, meta = load_checkpoint(path)
    net_meta = meta["net"]
    if net_meta["obs_width"] != expected_obs_width:
        raise CheckpointError(
            f"checkpoint {path} was built for observation width "
            f"{net_meta['obs_width']}, environment provides {expected_obs_width}"
        )
    net_cfg = NetConfig(
        obs_width=net_meta["obs_width"],
        priv_width=net_meta["priv_width"],
        action_width=net_meta["action_width"],
        hidden=net_meta["hidden"],
        encoder_hidden=net_meta["encoder_hidden"],
        log_std_init=net_meta["log_std_init"],
        log_std_bounds=tuple(net_meta["log_std_bounds"]),
    )
    rng = np.random.default_rng(0)  # values are overwritten below
    bundle = build_model(meta["actor_kind"], meta["critic_uses_priv"], net_cfg, rng)
    bundle.actor_store.load_arrays(arrays)
    bundle.critic_store.load_arrays(arrays)
    if bundle.encoder_store is not None:
        bundle.encoder_store.load_arrays(arrays)
    return bundle, meta


def build_training(
    cfg: dict,
    actor_kind: str,
    critic_uses_priv: bool,
    seed: int,
    encoder_store: ParamStore | None = None,
    metrics_path: str | None = None,
    seed_namespace: str = "",
    warm_start: dict[str, np.ndarray] | None = None,
):
    """Wire a trainer for one configuration; returns (trainer, bundle, ctx)."""
    ctx = TrainContext(cfg)
    tcfg = TrainerConfig.from_dict(cfg["train"])
    rng_init = substream(seed, seed_namespace + "policy-init")
    bundle = build_model(
        actor_kind, critic_uses_priv, ctx.net_cfg, rng_init, encoder_store
    )
    if warm_start is not None:
        bundle.actor_store.load_arrays(warm_start)
        bundle.critic_store.load_arrays(warm_start)
    envs = [TransportEnv(ctx.env_cfg) for _ in range(tcfg.n_envs)]
    trainer = PPOTrainer(
        envs=envs,
        object_sampler=ctx.object_sampler(),
        priv_fn=ctx.priv_fn(),
        policy=bundle.policy,
        critic=bundle.critic,
        critic_params=bundle.critic_store,
        critic_input_fn=bundle.critic_input_fn,
        config=tcfg,
        seed=seed,
        track_weight=ctx.env_cfg.reward_weights["track"],
        metrics_path=metrics_path,
        seed_namespace=seed_namespace,
    )
    return trainer, bundle, ctx


def _train_guarded(trainer, bundle, ctx, total_steps, ckpt_path, meta):
    """Run training; on divergence or interrupt, save the still-finite
    parameters before propagating."""
    try:
        trainer.train(total_steps)
    except TrainingError as exc:
        aborted = ckpt_path + ".aborted"
        save_bundle(aborted, bundle, {**meta, "aborted": str(exc)})
        raise TrainingError(
            f"{exc}; last stable parameters saved to {aborted}"
        ) from exc
    except KeyboardInterrupt:
        interrupted = ckpt_path + ".interrupted"
        save_bundle(interrupted, bundle, {**meta, "interrupted": True})
        raise
    save_bundle(ckpt_path, bundle, meta)


def _train_end_to_end(
    cfg: dict,
    method: str,
    actor_kind: str,
    critic_uses_priv: bool,
    seed: int,
    out_dir: str,
    ckpt_name: str,
    metrics_name: str,
    total_steps: int,
    seed_namespace: str = "",
    stage: str = "policy",
) -> str:
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, metrics_name)
    if os.path.exists(metrics_path):
        os.remove(metrics_path)
    trainer, bundle, ctx = build_training(
        cfg, actor_kind, critic_uses_priv, seed,
        metrics_path=metrics_path, seed_namespace=seed_namespace,
    )
    ckpt_path = os.path.join(out_dir, ckpt_name)
    meta = ctx.checkpoint_meta(method, stage, seed, actor_kind, critic_uses_priv)
    _train_guarded(trainer, bundle, ctx, total_steps, ckpt_path, meta)
    return ckpt_path


def stage1_train(cfg: dict, seed: int, out_dir: str,
                 metrics_name: str = "metrics_stage1.jsonl") -> str:
    """Privileged centralized training; the policy consumes (obs, descriptor)."""
    return _train_end_to_end(
        cfg, "dereco", "priv_fc", True, seed, out_dir,
        ckpt_name="stage1.ckpt", metrics_name=metrics_name,
        total_steps=cfg["train"]["total_steps"], seed_namespace="s1.",
        stage="stage1",
    )


def collect_encoder_dataset(
    stage1_ckpt: str, n_episodes: int, cfg: dict, seed: int
) -> EncoderDataset:
    """Roll out the stage-1 policy, recording per-robot (obs, representation).

    Episodes are stratified round-robin over the training catalog; mass and
    friction are sampled per episode. The recorded representation is the
    privileged encoder output actually used during the rollout.
    """
    ctx = TrainContext(cfg)
    bundle, meta = load_bundle(stage1_ckpt, ctx.net_cfg.obs_width)
    if bundle.actor_kind != "priv_fc":
        raise CheckpointError(
            f"{stage1_ckpt} is a {bundle.actor_kind} policy, expected the "
            "privileged stage-1 policy"
        )
    deterministic = bool(cfg["stage2"].get("deterministic_rollouts", False))
    n_envs = min(cfg["train"]["n_envs"], n_episodes) or 1
    envs = [TransportEnv(ctx.env_cfg) for _ in range(n_envs)]
    env_rngs = [substream(seed, f"stage2.env.{i}") for i in range(n_envs)]
    sample_rng = substream(seed, "stage2.sampling")
    policy_rng = substream(seed, "stage2.rollout")
    priv_fn = ctx.priv_fn()
    episode_len = ctx.env_cfg.episode_len
    dataset = EncoderDataset()

    collected = 0
    while collected < n_episodes:
        wave = min(n_envs, n_episodes - collected)
        objs = []
        obs_now = np.zeros((wave, 2, ctx.net_cfg.obs_width))
        for e in range(wave):
            shape = ctx.catalog[(collected + e) % len(ctx.catalog)]
            mass = float(sample_rng.uniform(*ctx.mass_range))
            friction = float(sample_rng.uniform(*ctx.friction_range))
            obj = make_object(shape, ctx.catalog, mass, friction)
            objs.append(obj)
            obs_now[e] = np.stack(envs[e].reset(env_rngs[e], obj))
        priv = np.stack([priv_fn(o) for o in objs])
        ep_obs = np.zeros((wave, episode_len, 2, ctx.net_cfg.obs_width))
        ep_repr = np.zeros((wave, episode_len, 2, ctx.net_cfg.hidden))
        for t in range(episode_len):
            rows = obs_now.reshape(2 * wave, -1)
            priv_rows = np.repeat(priv, 2, axis=0)
            step = bundle.policy.act(
                rows, priv_rows, None, policy_rng, deterministic=deterministic
            )
            ep_obs[:, t] = obs_now
            ep_repr[:, t] = step.enc_out.reshape(wave, 2, -1)
            actions = step.action_exec.reshape(wave, 2, -1)
            for e in range(wave):
                obs_list, _, done, _ = envs[e].step(actions[e])
                obs_now[e] = np.stack(obs_list)
        for e in range(wave):
            dataset.add_episode(ep_obs[e], ep_repr[e], objs[e].to_dict())
        collected += wave
    return dataset


def encoder_mse(
    params_store: ParamStore,
    obs_seqs: np.ndarray,
    tgt_seqs: np.ndarray,
    prefix: str = "encoder",
) -> float:
    """Mean squared reconstruction error over full sequences (no recording)."""
    from ..rl.nets import _lstm_from_store

    params = _lstm_from_store(params_store)
    n, steps, _ = obs_seqs.shape
    hidden = tgt_seqs.shape[-1]
    state = LstmCellState.zeros(n, hidden)
    total = 0.0
    for t in range(steps):
        out, state = lstm_cell_forward(Tensor(obs_seqs[:, t]), state, params)
        diff = out.data - tgt_seqs[:, t]
        total += float((diff * diff).sum())
    return total / (n * steps * hidden)


def stage2_train_encoder(
    dataset: EncoderDataset, cfg: dict, seed: int
) -> tuple[ParamStore, dict]:
    """Fit the recurrent encoder to the recorded representations.

    Truncated backpropagation through time over episode-ordered sequences,
    hidden state carried (detached) across window boundaries and reset at
    sequence starts. Train/validation split is by episode; the best
    validation parameters are kept.
    """
    if len(dataset) == 0:
        raise ConfigError("encoder dataset is empty")
    s2 = cfg["stage2"]
    window = int(s2["tbptt"])
    batch_size = int(s2["batch_size"])
    epochs = int(s2["epochs"])
    patience = int(s2["patience"])
    val_fraction = float(s2["val_fraction"])
    grad_clip = cfg["train"]["grad_clip"]

    obs_seqs, tgt_seqs = dataset.sequences()
    n_episodes = len(dataset)
    rng = substream(seed, "stage2.train")
    ep_perm = rng.permutation(n_episodes)
    n_val = max(1, int(round(val_fraction * n_episodes))) if n_episodes > 1 else 0
    val_eps = ep_perm[:n_val]
    train_eps = ep_perm[n_val:]
    train_idx = np.concatenate([[2 * e, 2 * e + 1] for e in train_eps]) if len(
        train_eps
    ) else np.array([], dtype=int)
    val_idx = np.concatenate([[2 * e, 2 * e + 1] for e in val_eps]) if n_val else None

    store = ParamStore()
    obs_width = dataset.obs_width
    hidden = dataset.repr_width
    params = init_lstm_params(
        store, "encoder", obs_width, hidden, substream(seed, "stage2.init")
    )
    adam = AdamState(lr=float(s2["lr"]))

    steps_total = obs_seqs.shape[1]
    best_val = float("inf")
    best_arrays = store.snapshot()
    bad_epochs = 0
    train_mse = float("nan")
    epochs_run = 0
    for epoch in range(epochs):
        epochs_run = epoch + 1
        order = rng.permutation(len(train_idx))
        sq_sum, count = 0.0, 0
        for start in range(0, len(order), batch_size):
            batch = train_idx[order[start : start + batch_size]]
            if len(batch) == 0:
                continue
            h = np.zeros((len(batch), hidden))
            c = np.zeros((len(batch), hidden))
            for w0 in range(0, steps_total, window):
                w1 = min(w0 + window, steps_total)
                with Tape() as tape:
                    state = LstmCellState(Tensor(h), Tensor(c))
                    total = None
                    for t in range(w0, w1):
                        out, state = lstm_cell_forward(
                            Tensor(obs_seqs[batch, t]), state, params
                        )
                        sq = T.sum_all(T.square(T.sub(out, Tensor(tgt_seqs[batch, t]))))
                        total = sq if total is None else T.add(total, sq)
                    denom = len(batch) * (w1 - w0) * hidden
                    loss = T.scale(total, 1.0 / denom)
                store.zero_grad()
                backward(tape, loss, store.tensors())
                clip_grad_norm(store, grad_clip)
                adam_step(store, adam)
                sq_sum += float(total.data)
                count += denom
                h, c = state.h.data.copy(), state.c.data.copy()
        train_mse = sq_sum / max(count, 1)
        if val_idx is not None:
            val_mse = encoder_mse(store, obs_seqs[val_idx], tgt_seqs[val_idx])
        else:
            val_mse = train_mse
        if val_mse < best_val - 1e-12:
            best_val = val_mse
            best_arrays = store.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > patience:
                break
    store.load_arrays(best_arrays)
    report = {
        "train_mse": train_mse,
        "val_mse": best_val if val_idx is not None else train_mse,
        "epochs_run": epochs_run,
        "n_train_sequences": int(len(train_idx)),
        "n_val_sequences": int(len(val_idx)) if val_idx is not None else 0,
    }
    return store, report


def stage3_train(
    cfg: dict,
    seed: int,
    out_dir: str,
    stage1_ckpt: str,
    encoder_ckpt: str,
    metrics_name: str = "metrics.jsonl",
) -> str:
    """Frozen-encoder retraining, warm-started from the stage-1 weights."""
    stage1_arrays, stage1_meta = load_checkpoint(stage1_ckpt)
    enc_arrays, enc_meta = load_checkpoint(encoder_ckpt)
    enc_hidden = enc_arrays["encoder.wh"].shape[0]
    want_hidden = stage1_meta["net"]["encoder_hidden"]
    if enc_hidden != want_hidden:
        raise CheckpointError(
            f"encoder hidden width {enc_hidden} does not match the stage-1 "
            f"manifest width {want_hidden}"
        )
    enc_in = enc_arrays["encoder.wx"].shape[0]
    if enc_in != stage1_meta["net"]["obs_width"]:
        raise CheckpointError(
            f"encoder input width {enc_in} does not match observation width "
            f"{stage1_meta['net']['obs_width']}"
        )
    encoder_store = ParamStore()
    init_lstm_params(
        encoder_store, "encoder", enc_in, enc_hidden, np.random.default_rng(0)
    )
    encoder_store.load_arrays(enc_arrays)

    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, metrics_name)
    if os.path.exists(metrics_path):
        os.remove(metrics_path)
    stage3_total = cfg["stage3"]["total_steps"]
    trainer, bundle, ctx = build_training(
        cfg, "frozen_lstm", True, seed,
        encoder_store=encoder_store, metrics_path=metrics_path,
        seed_namespace="s3.", warm_start=stage1_arrays,
    )
    ckpt_path = os.path.join(out_dir, "stage3.ckpt")
    meta = ctx.checkpoint_meta("dereco", "stage3", seed, "frozen_lstm", True)
    encoder_hash_before = encoder_store.state_hash()
    _train_guarded(trainer, bundle, ctx, stage3_total, ckpt_path, meta)
    if encoder_store.state_hash() != encoder_hash_before:
        raise TrainingError("frozen encoder parameters changed during stage 3")
    return ckpt_path


def build_baseline(name: str, cfg: dict, seed: int, out_dir: str,
                   resume: bool = False) -> dict:
    """Run one method's full schedule; returns the artifact map."""
    spec = get_method(name)
    os.makedirs(out_dir, exist_ok=True)
    artifacts: dict[str, str] = {}

    def fresh(path):
        return not (resume and os.path.exists(path))

    if spec.schedule == "end_to_end":
        ckpt = os.path.join(out_dir, "policy.ckpt")
        if fresh(ckpt):
            _train_end_to_end(
                cfg, name, spec.actor_kind, spec.critic_uses_priv, seed, out_dir,
                ckpt_name="policy.ckpt", metrics_name="metrics.jsonl",
                total_steps=cfg["train"]["total_steps"],
            )
        artifacts["policy"] = ckpt
        return artifacts

    stage1_ckpt = os.path.join(out_dir, "stage1.ckpt")
    if fresh(stage1_ckpt):
        stage1_train(cfg, seed, out_dir)
    artifacts["stage1"] = stage1_ckpt

    dataset_manifest = os.path.join(out_dir, "encoder_dataset.json")
    if fresh(dataset_manifest):
        dataset = collect_encoder_dataset(
            stage1_ckpt, int(cfg["stage2"]["episodes"]), cfg, seed
        )
        save_dataset(dataset_manifest, dataset, blob_name="encoder_dataset.bin")
    else:
        dataset = load_dataset(dataset_manifest)
    artifacts["encoder_dataset"] = dataset_manifest

    encoder_ckpt = os.path.join(out_dir, "encoder.ckpt")
    if fresh(encoder_ckpt):
        store, report = stage2_train_encoder(dataset, cfg, seed)
        save_checkpoint(
            encoder_ckpt,
            store.snapshot(),
            {
                "stage": "encoder",
                "obs_width": dataset.obs_width,
                "hidden": dataset.repr_width,
                "report": report,
                "config_hash": config_hash(cfg),
                "seed": seed,
            },
        )
    artifacts["encoder"] = encoder_ckpt

    stage3_ckpt = os.path.join(out_dir, "stage3.ckpt")
    if fresh(stage3_ckpt):
        stage3_train(cfg, seed, out_dir, stage1_ckpt, encoder_ckpt)
    artifacts["stage3"] = stage3_ckpt

    policy_ckpt = os.path.join(out_dir, "policy.ckpt")
    if fresh(policy_ckpt):
        shutil.copyfile(stage3_ckpt, policy_ckpt)
        shutil.copyfile(stage3_ckpt + ".bin", policy_ckpt + ".bin")
        # point the manifest at its own blob
        with open(policy_ckpt) as fh:
            manifest = json.load(fh)
        manifest["blob"] = "policy.ckpt.bin"
        with open(policy_ckpt, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    artifacts["policy"] = policy_ckpt
    return artifacts


def train_method(name: str, cfg: dict, seed: int, out_dir: str,
                 resume: bool = False) -> dict:
    """Full run for one method: artifacts plus a reproducibility manifest."""
    spec = get_method(name)
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not resume:
        raise ConfigError(
            f"output directory {out_dir} already exists; pass resume to reuse it"
        )
    artifacts = build_baseline(name, cfg, seed, out_dir, resume=resume)
    manifest = {
        "method": name,
        "schedule": spec.schedule,
        "seed": seed,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "catalog_hash": catalog_hash(),
        "artifacts": {k: os.path.basename(v) for k, v in artifacts.items()},
        "artifact_hashes": {
            k: file_hash(v + ".bin") for k, v in artifacts.items() if
            os.path.exists(v + ".bin")
        },
        "budgets": {
            "stage1": cfg["train"]["total_steps"] if spec.schedule == "three_stage" else None,
            "stage3": cfg["stage3"]["total_steps"] if spec.schedule == "three_stage" else None,
            "end_to_end": cfg["train"]["total_steps"] if spec.schedule == "end_to_end" else None,
        },
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
