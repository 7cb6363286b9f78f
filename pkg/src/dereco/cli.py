"""Command-line interface.

Commands: train, eval, plotdata, replay, encoder-dataset, encoder-train.
Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime
error. The DERECO_OUT environment variable overrides the default output
root. Interrupting training writes a final checkpoint before exiting.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import (
    ConfigError,
    DerecoError,
    UsageError,
    config_hash,
    load_config,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_root(explicit: str | None) -> str:
    return explicit or os.environ.get("DERECO_OUT") or "runs"


def build_parser() -> _Parser:
    parser = _Parser(prog="dereco", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one method for one seed")
    p_train.add_argument("method")
    p_train.add_argument("--config", default=None, help="JSON config file")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", default=None, help="run directory")
    p_train.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE", help="dotted config override")
    p_train.add_argument("--resume", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate trained runs")
    p_eval.add_argument("run_dirs", nargs="+")
    p_eval.add_argument("--catalog", default="both",
                        choices=["seen", "unseen", "both"])
    p_eval.add_argument("--trials", type=int, default=200)
    p_eval.add_argument("--full", action="store_true",
                        help="use 1000 trials per object")
    p_eval.add_argument("--eval-seeds", type=int, nargs="+", default=None)
    p_eval.add_argument("--stochastic", action="store_true",
                        help="sample actions instead of using the mean")
    p_eval.add_argument("--out", default=None, help="report directory")

    p_plot = sub.add_parser("plotdata", help="learning-curve CSV and figure")
    p_plot.add_argument("run_dirs", nargs="+")
    p_plot.add_argument("--window", type=int, default=10,
                        help="smoothing window in updates")
    p_plot.add_argument("--view", default="per-stage",
                        choices=["per-stage", "total-compute"])
    p_plot.add_argument("--out", default=None)

    p_replay = sub.add_parser("replay", help="summarize an episode trace")
    p_replay.add_argument("trace")

    p_ds = sub.add_parser("encoder-dataset",
                          help="collect (obs, representation) pairs")
    p_ds.add_argument("run_dir", help="directory containing stage1.ckpt")
    p_ds.add_argument("--episodes", type=int, default=None)
    p_ds.add_argument("--seed", type=int, default=0)
    p_ds.add_argument("--out", default=None, help="dataset manifest path")

    p_enc = sub.add_parser("encoder-train",
                           help="fit the recurrent encoder to a dataset")
    p_enc.add_argument("dataset", help="dataset manifest path")
    p_enc.add_argument("--config", default=None)
    p_enc.add_argument("--seed", type=int, default=0)
    p_enc.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")
    p_enc.add_argument("--out", default=None, help="encoder checkpoint path")
    return parser


def cmd_train(args) -> int:
    from .pipeline import get_method, train_method

    try:
        get_method(args.method)  # unknown method: usage error before any work
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    cfg = load_config(args.config, args.overrides)
    cfg["seed"] = args.seed
    out_dir = args.out or os.path.join(
        _out_root(None), f"{args.method}-s{args.seed}"
    )
    manifest = train_method(args.method, cfg, args.seed, out_dir,
                            resume=args.resume)
    print(f"run complete: {out_dir}")
    for name, artifact in manifest["artifacts"].items():
        print(f"  {name}: {artifact}")
    return 0


def _collect_runs(run_dirs: list[str]) -> tuple[dict[str, list[tuple[int, str]]], dict]:
    """Group run directories by method; returns ({method: [(seed, ckpt)]}, cfg)."""
    methods: dict[str, list[tuple[int, str]]] = {}
    shared_cfg = None
    shared_hash = None
    for run_dir in run_dirs:
        missing = [
            name for name in ("run.json", "policy.ckpt", "policy.ckpt.bin")
            if not os.path.exists(os.path.join(run_dir, name))
        ]
        if missing:
            raise ConfigError(
                f"run directory {run_dir} is incomplete; missing: "
                + ", ".join(missing)
            )
        manifest = json.load(open(os.path.join(run_dir, "run.json")))
        if shared_hash is None:
            shared_hash = manifest["config_hash"]
            shared_cfg = manifest["config"]
        elif manifest["config_hash"] != shared_hash:
            raise ConfigError(
                f"run {run_dir} was trained under config {manifest['config_hash'][:12]}, "
                f"expected {shared_hash[:12]}; evaluate runs from one config"
            )
        methods.setdefault(manifest["method"], []).append(
            (manifest["seed"], os.path.join(run_dir, "policy.ckpt"))
        )
    for name in methods:
        methods[name].sort()
    return methods, shared_cfg


def cmd_eval(args) -> int:
    from .evaluation import EvalConfig, compare_methods, run_eval
    from .reporting import format_comparison, write_comparison, write_eval_report

    methods, run_cfg = _collect_runs(args.run_dirs)
    training_seeds = sorted({seed for pairs in methods.values() for seed, _ in pairs})
    eval_seeds = args.eval_seeds
    if eval_seeds is None:
        n = max(len(pairs) for pairs in methods.values())
        eval_seeds = [10000 + i for i in range(n)]
    trials = 1000 if args.full else args.trials
    cfg = EvalConfig(
        catalog=args.catalog,
        trials=trials,
        eval_seeds=eval_seeds,
        deterministic=not args.stochastic,
        methods={m: [ckpt for _, ckpt in pairs] for m, pairs in methods.items()},
    )
    collisions = set(eval_seeds) & set(training_seeds)
    if collisions:
        raise ConfigError(
            f"eval seeds {sorted(collisions)} collide with training seeds; "
            "pass --eval-seeds with values outside the training set"
        )
    report = run_eval(cfg, run_cfg)
    out_dir = args.out or os.path.join(_out_root(None), "eval")
    paths = write_eval_report(report, out_dir)
    table = compare_methods([report])
    paths.update(write_comparison(table, out_dir))
    sys.stdout.write(format_comparison(table))
    print(f"report written to {out_dir}")
    for kind, path in sorted(paths.items()):
        print(f"  {kind}: {path}")
    return 0


def cmd_plotdata(args) -> int:
    from .reporting import learning_curves, write_learning_curves

    curves = learning_curves(args.run_dirs, window=args.window, view=args.view)
    out_dir = args.out or os.path.join(_out_root(None), "plots")
    paths = write_learning_curves(curves, out_dir)
    print(f"learning curves written to {out_dir}")
    for kind, path in sorted(paths.items()):
        print(f"  {kind}: {path}")
    return 0


def cmd_replay(args) -> int:
    from .env import classify_failure, read_trace

    trace = read_trace(args.trace)
    print(
        f"object={trace.object_info.get('name')} "
        f"mass={trace.object_info.get('mass'):.3f} "
        f"friction={trace.object_info.get('friction'):.3f} "
        f"table={trace.table_height:.3f} goal={tuple(trace.goal)}"
    )
    for record in trace.steps:
        obj = record["obj"]
        grasps = "".join(str(r[6]) for r in record["robots"])
        events = ",".join(record["events"]) if record["events"] else "-"
        print(
            f"step {record['step']:4d}  obj=({obj[0]:+.3f},{obj[1]:+.3f},"
            f"h={obj[3]:.3f})  grasp={grasps}  reward=({record['reward'][0]:+.2f},"
            f"{record['reward'][1]:+.2f})  events={events}"
        )
    label = classify_failure(trace)
    print(
        f"episode {'succeeded' if trace.success else 'failed'}; "
        f"final distance {trace.final_distance:.3f} m; class {label}"
    )
    return 0 if trace.success else 3


def cmd_encoder_dataset(args) -> int:
    from .pipeline import collect_encoder_dataset, save_dataset

    stage1 = os.path.join(args.run_dir, "stage1.ckpt")
    if not os.path.exists(stage1):
        raise ConfigError(f"{args.run_dir} has no stage1.ckpt")
    run_json = os.path.join(args.run_dir, "run.json")
    if not os.path.exists(run_json):
        raise ConfigError(f"{args.run_dir} has no run.json")
    cfg = json.load(open(run_json))["config"]
    episodes = args.episodes or cfg["stage2"]["episodes"]
    dataset = collect_encoder_dataset(stage1, episodes, cfg, args.seed)
    out = args.out or os.path.join(args.run_dir, "encoder_dataset.json")
    blob = os.path.splitext(os.path.basename(out))[0] + ".bin"
    save_dataset(out, dataset, blob_name=blob)
    print(f"dataset written: {out} ({len(dataset)} episodes, "
          f"{dataset.n_pairs} pairs)")
    return 0


def cmd_encoder_train(args) -> int:
    from .nn import save_checkpoint
    from .pipeline import load_dataset, stage2_train_encoder

    cfg = load_config(args.config, args.overrides)
    dataset = load_dataset(args.dataset)
    store, report = stage2_train_encoder(dataset, cfg, args.seed)
    out = args.out or os.path.join(
        os.path.dirname(os.path.abspath(args.dataset)), "encoder.ckpt"
    )
    save_checkpoint(
        out,
        store.snapshot(),
        {
            "stage": "encoder",
            "obs_width": dataset.obs_width,
            "hidden": dataset.repr_width,
            "report": report,
            "config_hash": config_hash(cfg),
            "seed": args.seed,
        },
    )
    print(
        f"encoder written: {out} (train mse {report['train_mse']:.6g}, "
        f"val mse {report['val_mse']:.6g}, {report['epochs_run']} epochs)"
    )
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "plotdata": cmd_plotdata,
    "replay": cmd_replay,
    "encoder-dataset": cmd_encoder_dataset,
    "encoder-train": cmd_encoder_train,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 3
    except DerecoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
