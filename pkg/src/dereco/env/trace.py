"""Episode traces: JSONL dump/replay and failure classification.

A trace file holds one header record, one record per step, and one end
record. The failure taxonomy distinguishes episodes that never lifted the
object, episodes that lifted and then dropped it, and episodes that carried
it without dropping but ended too far from the goal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from ..config import ContractError

FAILURE_CLASSES = ("none", "grasp_and_lift", "post_lift_drop", "transport")


@dataclass
class EpisodeTrace:
    table_height: float
    goal: tuple[float, float, float]
    object_info: dict
    steps: list[dict] = field(default_factory=list)
    success: bool = False
    final_distance: float = float("nan")


def classify_from_flags(success: bool, lifted: bool, dropped: bool) -> str:
    """Single episode label from the three summary flags."""
    if success:
        return "none"
    if not lifted:
        return "grasp_and_lift"
    if dropped:
        return "post_lift_drop"
    return "transport"


def classify_failure(trace: EpisodeTrace, lift_margin: float = 0.02) -> str:
    """Label a full episode trace; 'none' means the episode succeeded."""
    threshold = trace.table_height + lift_margin
    lifted = any(step["obj"][3] > threshold for step in trace.steps)
    dropped = any("drop" in step["events"] for step in trace.steps)
    return classify_from_flags(trace.success, lifted, dropped)


def step_record(step: int, state, actions, rewards, events: list[str]) -> dict:
    return {
        "type": "step",
        "step": step,
        "obj": [state.obj_x, state.obj_y, state.obj_theta, state.obj_height],
        "robots": [
            [r.x, r.y, r.heading, r.extension, r.grip_height, int(r.closed), int(r.grasping)]
            for r in state.robots
        ],
        "actions": [list(map(float, a)) for a in actions],
        "reward": [rb.total for rb in rewards],
        "events": list(events),
    }


def write_trace(path: str, trace: EpisodeTrace) -> None:
    header = {
        "type": "header",
        "table_height": trace.table_height,
        "goal": list(trace.goal),
        "object": trace.object_info,
    }
    end = {
        "type": "end",
        "success": trace.success,
        "final_distance": trace.final_distance,
        "failure": classify_failure(trace),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for record in trace.steps:
            fh.write(json.dumps(record) + "\n")
        fh.write(json.dumps(end) + "\n")


def read_trace(path: str) -> EpisodeTrace:
    """Parse a JSONL trace; malformed input raises with the offending line."""
    header = None
    end = None
    steps: list[dict] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ContractError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            kind = record.get("type")
            if kind == "header":
                header = record
            elif kind == "step":
                steps.append(record)
            elif kind == "end":
                end = record
            else:
                raise ContractError(f"{path}:{lineno}: unknown record type {kind!r}")
    if header is None:
        raise ContractError(f"{path}: missing header record")
    if end is None:
        raise ContractError(f"{path}: missing end record (truncated trace?)")
    return EpisodeTrace(
        table_height=header["table_height"],
        goal=tuple(header["goal"]),
        object_info=header["object"],
        steps=steps,
        success=bool(end["success"]),
        final_distance=float(end["final_distance"]),
    )
