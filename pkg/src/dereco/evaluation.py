"""Evaluation protocol: per-object success rates, failure taxonomy, comparisons.

Each trained policy is rolled out for a fixed number of trials per object
with mass and friction resampled per trial from the training ranges, using
evaluation seeds disjoint from the training seeds. Per (method, object)
cell the report carries the success rate, mean final object-goal distance,
and the failure histogram; per-method seen/unseen averages follow the
comparison-table convention (arithmetic mean of per-object columns).

The privileged-input baseline consumes an object descriptor at execution
time; unseen shapes have no identity slot, so their one-hot is drawn
uniformly at random (fresh per trial by default) while the physical scalars
stay truthful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ContractError, substream
from .env import (
    EnvConfig,
    TransportEnv,
    classify_from_flags,
    is_success,
    make_object,
    object_goal_distance,
    privileged_vector,
    seen_shapes,
    unseen_shapes,
)
from .env.trace import FAILURE_CLASSES
from .pipeline import load_bundle

FAILURE_KEYS = ("grasp_and_lift", "post_lift_drop", "transport")


@dataclass
class EvalConfig:
    catalog: str = "both"  # seen | unseen | both
    trials: int = 200
    eval_seeds: list[int] = field(default_factory=lambda: [10000])
    deterministic: bool = True
    methods: dict[str, list[str]] = field(default_factory=dict)  # name -> ckpts
    batch: int = 64
    unseen_one_hot: str = "per_trial"  # or "per_policy"

    def __post_init__(self):
        if self.catalog not in ("seen", "unseen", "both"):
            raise ConfigError(f"unknown catalog selection {self.catalog!r}")
        if self.trials < 0:
            raise ConfigError("trials must be nonnegative")
        if self.unseen_one_hot not in ("per_trial", "per_policy"):
            raise ConfigError(f"unknown unseen_one_hot mode {self.unseen_one_hot!r}")


@dataclass
class EvalReport:
    methods: dict = field(default_factory=dict)
    objects_seen: list[str] = field(default_factory=list)
    objects_unseen: list[str] = field(default_factory=list)
    trials: int = 0
    eval_seeds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "methods": self.methods,
            "objects_seen": self.objects_seen,
            "objects_unseen": self.objects_unseen,
            "trials": self.trials,
            "eval_seeds": self.eval_seeds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            methods=d["methods"],
            objects_seen=list(d["objects_seen"]),
            objects_unseen=list(d["objects_unseen"]),
            trials=d["trials"],
            eval_seeds=list(d["eval_seeds"]),
        )


def privileged_input_for_unseen(
    obj,
    rng: np.random.Generator,
    catalog_size: int,
    mass_range=(0.2, 1.0),
    friction_range=(0.5, 1.0),
) -> np.ndarray:
    """Random identity slot for a shape outside the training catalog.

    The one-hot is uniform over the training slots; mass and friction are
    the object's true normalized values.
    """
    if obj.shape_id >= 0:
        raise ContractError(
            f"object {obj.name!r} belongs to the training catalog; its true "
            "descriptor applies"
        )
    vec = np.zeros(catalog_size + 2)
    vec[int(rng.integers(catalog_size))] = 1.0
    vec[catalog_size] = (obj.mass - mass_range[0]) / (mass_range[1] - mass_range[0])
    vec[catalog_size + 1] = (obj.friction - friction_range[0]) / (
        friction_range[1] - friction_range[0]
    )
    return vec


def _empty_cell() -> dict:
    return {
        "success_rate": 0.0,
        "mean_final_distance": float("nan"),
        "failures": {k: 0.0 for k in FAILURE_KEYS},
    }


def _evaluate_policy_on_shape(
    bundle, meta, shape, env_cfg: EnvConfig, cfg: EvalConfig, eval_seed: int,
    method: str,
) -> dict:
    """One (policy, object) cell: roll `cfg.trials` episodes, classify each."""
    if cfg.trials == 0:
        return _empty_cell()
    from .env import shapes_by_name

    train_catalog = shapes_by_name(list(meta["catalog"]))
    catalog_size = len(train_catalog)
    mass_range = tuple(meta["mass_range"])
    friction_range = tuple(meta["friction_range"])
    uses_priv = bundle.policy.uses_priv

    policy_rng = substream(eval_seed, f"{method}.{shape.name}.policy")
    successes = 0
    failures = {k: 0 for k in FAILURE_KEYS}
    distance_sum = 0.0

    done_trials = 0
    while done_trials < cfg.trials:
        wave = min(cfg.batch, cfg.trials - done_trials)
        envs = [TransportEnv(env_cfg) for _ in range(wave)]
        privs = np.zeros((wave, catalog_size + 2))
        obs_now = np.zeros((wave, 2, bundle.net_cfg.obs_width))
        lifted = np.zeros(wave, dtype=bool)
        dropped = np.zeros(wave, dtype=bool)
        for e in range(wave):
            trial = done_trials + e
            rng = substream(eval_seed, f"{method}.{shape.name}.trial.{trial}")
            mass = float(rng.uniform(*mass_range))
            friction = float(rng.uniform(*friction_range))
            obj = make_object(shape, train_catalog, mass, friction)
            obs_now[e] = np.stack(envs[e].reset(rng, obj))
            if uses_priv:
                if obj.shape_id >= 0:
                    privs[e] = privileged_vector(
                        obj, catalog_size, mass_range, friction_range
                    )
                else:
                    one_hot_rng = (
                        rng if cfg.unseen_one_hot == "per_trial" else policy_rng
                    )
                    privs[e] = privileged_input_for_unseen(
                        obj, one_hot_rng, catalog_size, mass_range, friction_range
                    )
        state = bundle.policy.initial_state(2 * wave)
        for t in range(env_cfg.episode_len):
            rows = obs_now.reshape(2 * wave, -1)
            priv_rows = np.repeat(privs, 2, axis=0) if uses_priv else None
            step = bundle.policy.act(
                rows, priv_rows, state, policy_rng,
                deterministic=cfg.deterministic,
            )
            state = step.state
            actions = step.action_exec.reshape(wave, 2, -1)
            for e in range(wave):
                obs_list, _, done, info = envs[e].step(actions[e])
                obs_now[e] = np.stack(obs_list)
                s = envs[e].state
                if s.obj_height > s.table_height + env_cfg.lift_margin:
                    lifted[e] = True
                if s.obj_dropped:
                    dropped[e] = True
        for e in range(wave):
            s = envs[e].state
            success = is_success(s)
            label = classify_from_flags(success, bool(lifted[e]), bool(dropped[e]))
            if label == "none":
                successes += 1
            else:
                failures[label] += 1
            distance_sum += object_goal_distance(s)
        done_trials += wave

    n = cfg.trials
    return {
        "success_rate": successes / n,
        "mean_final_distance": distance_sum / n,
        "failures": {k: failures[k] / n for k in FAILURE_KEYS},
    }


def _aggregate_cells(cells: list[dict]) -> dict:
    rates = [c["success_rate"] for c in cells]
    dists = [c["mean_final_distance"] for c in cells]
    out = {
        "success_rate_mean": float(np.mean(rates)),
        "success_rate_std": float(np.std(rates)),
        "mean_final_distance_mean": float(np.mean(dists)),
        "failures_mean": {
            k: float(np.mean([c["failures"][k] for c in cells])) for k in FAILURE_KEYS
        },
    }
    return out


def run_eval(cfg: EvalConfig, run_config: dict | None = None) -> EvalReport:
    """Evaluate every configured method over the selected object catalogs."""
    from .config import default_config

    full_cfg = run_config if run_config is not None else default_config()
    env_cfg = EnvConfig.from_dict(full_cfg["env"])
    shapes = []
    if cfg.catalog in ("seen", "both"):
        shapes += seen_shapes()
    if cfg.catalog in ("unseen", "both"):
        shapes += unseen_shapes()
    report = EvalReport(
        objects_seen=[s.name for s in shapes if s.seen],
        objects_unseen=[s.name for s in shapes if not s.seen],
        trials=cfg.trials,
        eval_seeds=list(cfg.eval_seeds),
    )
    for method, ckpts in cfg.methods.items():
        if len(cfg.eval_seeds) not in (1, len(ckpts)):
            raise ConfigError(
                f"method {method}: {len(ckpts)} checkpoints but "
                f"{len(cfg.eval_seeds)} eval seeds (need 1 or matching)"
            )
        per_seed = []
        for i, ckpt in enumerate(ckpts):
            bundle, meta = load_bundle(ckpt)
            train_seed = meta.get("seed")
            eval_seed = cfg.eval_seeds[i % len(cfg.eval_seeds)]
            if train_seed is not None and eval_seed == train_seed:
                raise ConfigError(
                    f"eval seed {eval_seed} collides with the training seed of "
                    f"{ckpt}; evaluation seeds must be disjoint from training"
                )
            cells = {}
            for shape in shapes:
                cells[shape.name] = _evaluate_policy_on_shape(
                    bundle, meta, shape, env_cfg, cfg, eval_seed, method
                )
            per_seed.append({"seed": train_seed, "eval_seed": eval_seed,
                             "objects": cells})
        objects = {
            name: _aggregate_cells([ps["objects"][name] for ps in per_seed])
            for name in [s.name for s in shapes]
        }
        entry = {"per_seed": per_seed, "objects": objects}
        for group, names in (
            ("seen_avg", report.objects_seen),
            ("unseen_avg", report.objects_unseen),
        ):
            if names:
                per_seed_avgs = [
                    float(np.mean([ps["objects"][n]["success_rate"] for n in names]))
                    for ps in per_seed
                ]
                entry[group] = {
                    "mean": float(np.mean(per_seed_avgs)),
                    "std": float(np.std(per_seed_avgs)),
                }
        report.methods[method] = entry
    return report


@dataclass
class ComparisonTable:
    columns_seen: list[str]
    columns_unseen: list[str]
    rows: dict  # method -> {object -> rate, "seen_avg", "unseen_avg"}
    flags: dict

    def to_dict(self) -> dict:
        return {
            "columns_seen": self.columns_seen,
            "columns_unseen": self.columns_unseen,
            "rows": self.rows,
            "flags": self.flags,
        }


def compare_methods(reports: list[EvalReport]) -> ComparisonTable:
    """Merge per-method reports into one success-rate table plus trend flags.

    Flags record whether the qualitative orderings of interest hold in this
    run; they are informational, never asserted:
      * staged method's unseen average at or above the privileged-critic
        baseline's (dereco vs mappo-wo-ae),
      * the privileged-input baseline degrading from seen to unseen,
      * the privileged-input baseline at or above the observation-only
        baseline on seen objects.
    """
    if not reports:
        raise ContractError("compare_methods needs at least one report")
    first = reports[0]
    for other in reports[1:]:
        if (
            other.objects_seen != first.objects_seen
            or other.objects_unseen != first.objects_unseen
        ):
            raise ContractError(
                "reports disagree on object catalogs: "
                f"{(first.objects_seen, first.objects_unseen)} vs "
                f"{(other.objects_seen, other.objects_unseen)}"
            )
    rows: dict[str, dict] = {}
    for report in reports:
        for method, entry in report.methods.items():
            if method in rows:
                raise ContractError(f"method {method!r} appears in multiple reports")
            row = {}
            for name in first.objects_seen + first.objects_unseen:
                row[name] = entry["objects"][name]["success_rate_mean"]
            if first.objects_seen:
                row["seen_avg"] = float(
                    np.mean([row[n] for n in first.objects_seen])
                )
            if first.objects_unseen:
                row["unseen_avg"] = float(
                    np.mean([row[n] for n in first.objects_unseen])
                )
            rows[method] = row

    flags: dict[str, bool | None] = {
        "dereco_ge_wo_ae_unseen": None,
        "w_pi_degrades_unseen": None,
        "w_pi_ge_wo_pi_seen": None,
    }
    if "dereco" in rows and "mappo-wo-ae" in rows and first.objects_unseen:
        flags["dereco_ge_wo_ae_unseen"] = bool(
            rows["dereco"]["unseen_avg"] >= rows["mappo-wo-ae"]["unseen_avg"]
        )
    if "mappo-w-pi" in rows and first.objects_seen and first.objects_unseen:
        flags["w_pi_degrades_unseen"] = bool(
            rows["mappo-w-pi"]["unseen_avg"] < rows["mappo-w-pi"]["seen_avg"]
        )
    if "mappo-w-pi" in rows and "mappo-wo-pi" in rows and first.objects_seen:
        flags["w_pi_ge_wo_pi_seen"] = bool(
            rows["mappo-w-pi"]["seen_avg"] >= rows["mappo-wo-pi"]["seen_avg"]
        )
    return ComparisonTable(
        columns_seen=list(first.objects_seen),
        columns_unseen=list(first.objects_unseen),
        rows=rows,
        flags=flags,
    )
