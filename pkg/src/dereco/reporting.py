"""Report files: delimited tables and the matching rendered figures.

Every report path writes machine-readable CSV/JSON and, next to it, a PNG
rendering of the same data: success-rate bars, failure-type histograms, and
smoothed learning curves with across-seed bands.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .config import ConfigError
from .evaluation import FAILURE_KEYS, ComparisonTable, EvalReport

FAILURE_COLORS = {
    "grasp_and_lift": "#c44e52",
    "post_lift_drop": "#dd8452",
    "transport": "#8172b3",
}


def write_eval_report(report: EvalReport, out_dir: str, stem: str = "report") -> dict:
    """Write report JSON + per-cell CSV + failure CSV + figures.

    Returns the map of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(json_path, "w") as fh:
        fh.write(report.to_json())
    paths["json"] = json_path

    objects = report.objects_seen + report.objects_unseen
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "object", "seen", "success_rate_mean", "success_rate_std",
             "mean_final_distance"]
        )
        for method, entry in report.methods.items():
            for name in objects:
                cell = entry["objects"][name]
                writer.writerow(
                    [
                        method,
                        name,
                        int(name in report.objects_seen),
                        f"{cell['success_rate_mean']:.6f}",
                        f"{cell['success_rate_std']:.6f}",
                        f"{cell['mean_final_distance_mean']:.6f}",
                    ]
                )
    paths["csv"] = csv_path

    fail_path = os.path.join(out_dir, f"{stem}_failures.csv")
    with open(fail_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "object", "success"] + list(FAILURE_KEYS))
        for method, entry in report.methods.items():
            for name in objects:
                cell = entry["objects"][name]
                writer.writerow(
                    [method, name, f"{cell['success_rate_mean']:.6f}"]
                    + [f"{cell['failures_mean'][k]:.6f}" for k in FAILURE_KEYS]
                )
    paths["failures_csv"] = fail_path

    if report.methods and objects:
        paths["success_png"] = _success_figure(report, out_dir, stem)
        paths["failures_png"] = _failure_figure(report, out_dir, stem)
    return paths


def _success_figure(report: EvalReport, out_dir: str, stem: str) -> str:
    objects = report.objects_seen + report.objects_unseen
    methods = list(report.methods)
    x = np.arange(len(objects))
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(objects)), 4))
    for i, method in enumerate(methods):
        entry = report.methods[method]
        rates = [entry["objects"][o]["success_rate_mean"] for o in objects]
        errs = [entry["objects"][o]["success_rate_std"] for o in objects]
        ax.bar(x + (i - (len(methods) - 1) / 2) * width, rates, width,
               yerr=errs, capsize=2, label=method)
    if report.objects_seen and report.objects_unseen:
        ax.axvline(len(report.objects_seen) - 0.5, color="gray", ls="--", lw=1)
    ax.set_xticks(x)
    ax.set_xticklabels(objects, rotation=30, ha="right")
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_success.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _failure_figure(report: EvalReport, out_dir: str, stem: str) -> str:
    objects = report.objects_seen + report.objects_unseen
    methods = list(report.methods)
    fig, axes = plt.subplots(
        1, len(methods), figsize=(max(4, 3.2 * len(methods)), 3.6),
        sharey=True, squeeze=False,
    )
    for ax, method in zip(axes[0], methods):
        entry = report.methods[method]
        bottoms = np.zeros(len(objects))
        x = np.arange(len(objects))
        for key in FAILURE_KEYS:
            vals = np.array(
                [entry["objects"][o]["failures_mean"][key] for o in objects]
            )
            ax.bar(x, vals, 0.7, bottom=bottoms, label=key,
                   color=FAILURE_COLORS[key])
            bottoms += vals
        ax.set_xticks(x)
        ax.set_xticklabels(objects, rotation=60, ha="right", fontsize=7)
        ax.set_title(method, fontsize=9)
        ax.set_ylim(0, 1)
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel("failure rate")
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_failures.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_comparison(table: ComparisonTable, out_dir: str,
                     stem: str = "comparison") -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    columns = (
        table.columns_seen
        + (["seen_avg"] if table.columns_seen else [])
        + table.columns_unseen
        + (["unseen_avg"] if table.columns_unseen else [])
    )
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + columns)
        for method, row in table.rows.items():
            writer.writerow([method] + [f"{row[c]:.3f}" for c in columns])
    paths["csv"] = csv_path
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(json_path, "w") as fh:
        json.dump(table.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["json"] = json_path
    return paths


def format_comparison(table: ComparisonTable) -> str:
    """Aligned text rendering of the comparison table plus trend flags."""
    columns = (
        table.columns_seen
        + (["seen_avg"] if table.columns_seen else [])
        + table.columns_unseen
        + (["unseen_avg"] if table.columns_unseen else [])
    )
    name_w = max([len("method")] + [len(m) for m in table.rows])
    col_w = max([len(c) for c in columns] + [6]) + 1
    lines = [
        "method".ljust(name_w) + "".join(c.rjust(col_w) for c in columns)
    ]
    for method, row in table.rows.items():
        lines.append(
            method.ljust(name_w)
            + "".join(f"{row[c]:.3f}".rjust(col_w) for c in columns)
        )
    lines.append("")
    for flag, value in table.flags.items():
        shown = "n/a" if value is None else str(bool(value)).lower()
        lines.append(f"flag {flag}: {shown}")
    return "\n".join(lines) + "\n"


def load_metrics(path: str) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def learning_curves(
    run_dirs: list[str], window: int = 10, view: str = "per-stage"
) -> dict[str, dict]:
    """Across-seed tracking-reward curves grouped by method.

    ``view`` 'total-compute' shifts three-stage runs by their stage-1 budget
    so step counts compare total environment interaction.
    """
    if view not in ("per-stage", "total-compute"):
        raise ConfigError(f"unknown view {view!r}")
    grouped: dict[str, list[list[dict]]] = {}
    for run_dir in run_dirs:
        run_path = os.path.join(run_dir, "run.json")
        metrics_path = os.path.join(run_dir, "metrics.jsonl")
        if not os.path.exists(metrics_path):
            raise ConfigError(f"no metrics.jsonl in {run_dir}")
        method = "unknown"
        offset = 0
        if os.path.exists(run_path):
            manifest = json.load(open(run_path))
            method = manifest.get("method", "unknown")
            if view == "total-compute" and manifest.get("schedule") == "three_stage":
                offset = manifest["budgets"].get("stage1") or 0
        records = load_metrics(metrics_path)
        for r in records:
            r["step"] += offset
        grouped.setdefault(method, []).append(records)

    out = {}
    for method, runs in grouped.items():
        n = min(len(r) for r in runs)
        steps = np.array([rec["step"] for rec in runs[0][:n]])
        series = np.array(
            [[rec["track_reward"] for rec in run[:n]] for run in runs]
        )
        if window > 1:
            kernel = np.ones(window) / window
            smoothed = np.empty_like(series)
            for i in range(series.shape[0]):
                padded = np.concatenate(
                    [np.full(window - 1, series[i, 0]), series[i]]
                )
                smoothed[i] = np.convolve(padded, kernel, mode="valid")
            series = smoothed
        out[method] = {
            "steps": steps,
            "mean": series.mean(axis=0),
            "std": series.std(axis=0),
            "n_seeds": len(runs),
        }
    return out


def write_learning_curves(
    curves: dict[str, dict], out_dir: str, stem: str = "learning_curves"
) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "step", "track_reward_mean", "track_reward_std"])
        for method, data in curves.items():
            for step, mean, std in zip(data["steps"], data["mean"], data["std"]):
                writer.writerow([method, int(step), f"{mean:.6f}", f"{std:.6f}"])
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for method, data in curves.items():
        ax.plot(data["steps"], data["mean"], label=f"{method} (n={data['n_seeds']})")
        ax.fill_between(
            data["steps"], data["mean"] - data["std"], data["mean"] + data["std"],
            alpha=0.2,
        )
    ax.set_xlabel("policy steps")
    ax.set_ylabel("tracking reward per episode")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    png_path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}
