"""Deterministic planar two-robot cooperative transport with a lift axis.

Each robot is a planar base with heading, a 1-DOF arm extension, a gripper
height axis, and an open/close gripper. The object is a rigid polygon with
two designated grasp points (one per robot), a mass, and a friction
coefficient. Transitions are purely kinematic at a fixed timestep; the only
randomness is in reset (table height) and object sampling.

Grasp and carry semantics:
  * a closing gripper within ``grasp_radius`` (3D) of its assigned grasp
    point engages and records its anchor in the object frame;
  * with both robots holding, the object follows the least-squares rigid
    transform of the two anchors onto the gripper positions, and its height
    is the lower of the two gripper heights;
  * with one robot holding, the object is dragged/lifted only if
    mass * g * drag_factor <= friction * grip_force; otherwise a movement
    attempt slips the grasp, and the object tips over (a drop) if it is or
    would be lifted off the table;
  * while the object is carried, a gripper whose commanded velocity changes
    faster than friction * g * slip_gain loses its grasp;
  * an object left without any grasp mid-air falls straight back to the
    table and is marked dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..config import StepError
from .shapes import ObjectSpec

OBS_LAYOUT = {
    "prev_action": (0, 6),
    "arm": (6, 7),
    "grip": (7, 9),
    "goal_delta": (9, 12),
    "obj_rel": (12, 16),
    "force_ternary": (16, 22),
}
OBS_WIDTH = 22
ACTION_WIDTH = 6
N_ROBOTS = 2


@dataclass
class EnvConfig:
    dt: float = 0.1
    episode_len: int = 200
    grasp_radius: float = 0.05
    force_threshold: float = 0.05
    slip_gain: float = 1.0
    drag_factor: float = 0.5
    lift_margin: float = 0.02
    gravity: float = 9.81
    grip_force: float = 5.0
    table_height_range: tuple[float, float] = (0.3, 0.6)
    goal_height: float = 0.8
    goal_above_table: float | None = None
    base_max_speed: float = 0.5
    arm_max_rate: float = 0.5
    height_max_rate: float = 0.5
    heading_max_rate: float = 1.0
    arm_extension_range: tuple[float, float] = (0.0, 0.8)
    arm_extension_start: float = 0.3
    gripper_height_max: float = 1.2
    robot_start_distance: float = 0.8
    reward_weights: dict[str, float] = field(
        default_factory=lambda: {
            "reach": 3.0,
            "grasp": 4.0,
            "grasp_team": 7.5,
            "track": 20.0,
            "ori": 3.0,
        }
    )
    track_mode: str = "neg_distance"

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        keep = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for key in ("table_height_range", "arm_extension_range"):
            if key in keep and keep[key] is not None:
                keep[key] = tuple(keep[key])
        return cls(**keep)


@dataclass
class RobotState:
    x: float
    y: float
    heading: float
    extension: float
    grip_height: float
    closed: bool = False
    grasping: bool = False
    anchor_x: float = 0.0
    anchor_y: float = 0.0
    ever_grasped: bool = False
    cmd_vx: float = 0.0
    cmd_vy: float = 0.0
    cmd_vz: float = 0.0
    prev_ee: tuple[float, float, float] = (0.0, 0.0, 0.0)
    force: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def ee(self) -> tuple[float, float, float]:
        return (
            self.x + self.extension * math.cos(self.heading),
            self.y + self.extension * math.sin(self.heading),
            self.grip_height,
        )

    def clone(self) -> "RobotState":
        return replace(self)


@dataclass
class WorldState:
    robots: list[RobotState]
    obj_x: float
    obj_y: float
    obj_theta: float
    obj_height: float
    obj_vx: float
    obj_vy: float
    obj_vz: float
    obj_dropped: bool
    ever_team: bool
    table_height: float
    goal: tuple[float, float, float]
    step: int

    def grasped_by(self) -> set[int]:
        return {i for i, r in enumerate(self.robots) if r.grasping}

    def clone(self) -> "WorldState":
        return WorldState(
            robots=[r.clone() for r in self.robots],
            obj_x=self.obj_x,
            obj_y=self.obj_y,
            obj_theta=self.obj_theta,
            obj_height=self.obj_height,
            obj_vx=self.obj_vx,
            obj_vy=self.obj_vy,
            obj_vz=self.obj_vz,
            obj_dropped=self.obj_dropped,
            ever_team=self.ever_team,
            table_height=self.table_height,
            goal=self.goal,
            step=self.step,
        )


@dataclass
class RewardBreakdown:
    reach: float
    grasp: float
    grasp_team: float
    track: float
    ori: float
    total: float


def _wrap_angle(a: float) -> float:
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


def grasp_point_world(state: WorldState, obj: ObjectSpec, idx: int) -> tuple[float, float, float]:
    gx, gy = obj.grasp_points[idx]
    c, s = math.cos(state.obj_theta), math.sin(state.obj_theta)
    return (
        state.obj_x + c * gx - s * gy,
        state.obj_y + s * gx + c * gy,
        state.obj_height,
    )


def object_goal_distance(state: WorldState) -> float:
    gx, gy, gz = state.goal
    return math.sqrt(
        (state.obj_x - gx) ** 2 + (state.obj_y - gy) ** 2 + (state.obj_height - gz) ** 2
    )


def is_success(state: WorldState) -> bool:
    """Final object-goal distance strictly below 0.1 m."""
    return object_goal_distance(state) < 0.1


def discretize_force(
    prev: tuple[float, float, float],
    curr: tuple[float, float, float],
    threshold: float,
) -> tuple[float, float, float]:
    """Per-axis force change mapped to {-1, 0, +1}; strict inequalities."""
    out = []
    for p, c in zip(prev, curr):
        delta = c - p
        if delta > threshold:
            out.append(1.0)
        elif delta < -threshold:
            out.append(-1.0)
        else:
            out.append(0.0)
    return tuple(out)


def compute_reward(
    before: WorldState,
    after: WorldState,
    obj: ObjectSpec,
    config: EnvConfig,
) -> list[RewardBreakdown]:
    """Per-robot shaped reward for the transition ``before`` -> ``after``."""
    w = config.reward_weights
    both = all(r.grasping for r in after.robots)
    if both:
        if config.track_mode == "progress":
            track = object_goal_distance(before) - object_goal_distance(after)
        else:
            track = -object_goal_distance(after)
    else:
        track = 0.0
    team = 1.0 if (after.ever_team and not before.ever_team) else 0.0
    ori = -abs(after.robots[0].grip_height - after.robots[1].grip_height)
    out = []
    for i, robot in enumerate(after.robots):
        if robot.grasping:
            reach = 0.0
        else:
            px, py, pz = grasp_point_world(after, obj, i)
            ex, ey, ez = robot.ee()
            reach = -math.sqrt((ex - px) ** 2 + (ey - py) ** 2 + (ez - pz) ** 2)
        grasp = 1.0 if (robot.ever_grasped and not before.robots[i].ever_grasped) else 0.0
        total = (
            w["reach"] * reach
            + w["grasp"] * grasp
            + w["grasp_team"] * team
            + w["track"] * track
            + w["ori"] * ori
        )
        out.append(RewardBreakdown(reach, grasp, team, track, ori, total))
    return out


class TransportEnv:
    """One environment instance; owns its state, no shared mutable data."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.obj: ObjectSpec | None = None
        self.state: WorldState | None = None
        self._last_tern: list[tuple[float, float, float]] = []

    def reset(self, rng: np.random.Generator, obj: ObjectSpec) -> list[np.ndarray]:
        cfg = self.config
        table = float(rng.uniform(*cfg.table_height_range))
        if cfg.goal_above_table is not None:
            goal_z = table + cfg.goal_above_table
        else:
            goal_z = cfg.goal_height
        d = cfg.robot_start_distance
        robots = []
        for i in range(N_ROBOTS):
            heading = 0.0 if i == 0 else math.pi
            r = RobotState(
                x=-d if i == 0 else d,
                y=0.0,
                heading=heading,
                extension=cfg.arm_extension_start,
                grip_height=table,
            )
            r.prev_ee = r.ee()
            robots.append(r)
        self.obj = obj
        self.state = WorldState(
            robots=robots,
            obj_x=0.0,
            obj_y=0.0,
            obj_theta=0.0,
            obj_height=table,
            obj_vx=0.0,
            obj_vy=0.0,
            obj_vz=0.0,
            obj_dropped=False,
            ever_team=False,
            table_height=table,
            goal=(0.0, 0.0, goal_z),
            step=0,
        )
        zero_action = (0.0,) * ACTION_WIDTH
        zero_tern = (0.0, 0.0, 0.0)
        self._last_tern = [zero_tern, zero_tern]
        return [self._observe(i, zero_action, zero_tern) for i in range(N_ROBOTS)]

    def step(
        self, actions: np.ndarray
    ) -> tuple[list[np.ndarray], list[RewardBreakdown], bool, dict[str, Any]]:
        cfg = self.config
        state = self.state
        obj = self.obj
        if state is None:
            raise StepError("step called before reset")
        acts = np.asarray(actions, dtype=np.float64)
        if acts.shape != (N_ROBOTS, ACTION_WIDTH):
            raise StepError(f"actions must have shape (2, 6), got {acts.shape}")
        if not np.all(np.isfinite(acts)):
            raise StepError("non-finite action component")
        acts = np.clip(acts, -1.0, 1.0)

        before = state.clone()
        dt = cfg.dt
        events: list[str] = []
        released_now: set[int] = set()

        # integrate robot kinematics; remember commanded gripper velocities
        ext_lo, ext_hi = cfg.arm_extension_range
        for i, robot in enumerate(state.robots):
            a = acts[i]
            vx = a[0] * cfg.base_max_speed
            vy = a[1] * cfg.base_max_speed
            vz = a[3] * cfg.height_max_rate
            robot.x += vx * dt
            robot.y += vy * dt
            robot.extension = min(
                max(robot.extension + a[2] * cfg.arm_max_rate * dt, ext_lo), ext_hi
            )
            robot.grip_height = min(
                max(robot.grip_height + vz * dt, 0.0), cfg.gripper_height_max
            )
            robot.heading = _wrap_angle(robot.heading + a[4] * cfg.heading_max_rate * dt)
            robot.closed = a[5] > 0.0
            # commanded gripper acceleration for the carried-slip rule
            accel = (
                math.sqrt(
                    (vx - robot.cmd_vx) ** 2
                    + (vy - robot.cmd_vy) ** 2
                    + (vz - robot.cmd_vz) ** 2
                )
                / dt
            )
            robot.cmd_vx, robot.cmd_vy, robot.cmd_vz = vx, vy, vz
            if robot.grasping:
                if not robot.closed:
                    robot.grasping = False
                    released_now.add(i)
                    events.append(f"release:{i}")
                elif (
                    state.obj_height > state.table_height + 1e-12
                    and accel > obj.friction * cfg.gravity * cfg.slip_gain
                ):
                    robot.grasping = False
                    released_now.add(i)
                    events.append(f"slip:{i}")

        # engage new grasps at the assigned grasp points
        for i, robot in enumerate(state.robots):
            if robot.grasping or not robot.closed or i in released_now:
                continue
            px, py, pz = grasp_point_world(state, obj, i)
            ex, ey, ez = robot.ee()
            dist = math.sqrt((ex - px) ** 2 + (ey - py) ** 2 + (ez - pz) ** 2)
            if dist <= cfg.grasp_radius:
                robot.grasping = True
                robot.ever_grasped = True
                # gripper position in the object frame becomes the rigid anchor
                c, s = math.cos(-state.obj_theta), math.sin(-state.obj_theta)
                dx, dy = ex - state.obj_x, ey - state.obj_y
                robot.anchor_x = c * dx - s * dy
                robot.anchor_y = s * dx + c * dy
                # motion before the engagement must not drag the object
                robot.prev_ee = (ex, ey, ez)
                events.append(f"grasp:{i}")

        holders = [i for i, r in enumerate(state.robots) if r.grasping]
        if len(holders) == 2:
            state.ever_team = True
            self._move_rigid(state)
        elif len(holders) == 1:
            self._move_single(state, holders[0], events)

        # nothing holding an airborne object: it falls straight down
        if not any(r.grasping for r in state.robots):
            if state.obj_height > state.table_height + 1e-12:
                state.obj_height = state.table_height
                state.obj_dropped = True
                events.append("drop")

        # contact forces: weight share plus inertial term per holding robot
        vx_new = (state.obj_x - before.obj_x) / dt
        vy_new = (state.obj_y - before.obj_y) / dt
        vz_new = (state.obj_height - before.obj_height) / dt
        ax = (vx_new - state.obj_vx) / dt
        ay = (vy_new - state.obj_vy) / dt
        az = (vz_new - state.obj_vz) / dt
        state.obj_vx, state.obj_vy, state.obj_vz = vx_new, vy_new, vz_new
        holders = [i for i, r in enumerate(state.robots) if r.grasping]
        k = len(holders)
        tern = []
        for i, robot in enumerate(state.robots):
            if robot.grasping:
                force = (
                    obj.mass * ax / k,
                    obj.mass * ay / k,
                    obj.mass * (cfg.gravity + az) / k,
                )
            else:
                force = (0.0, 0.0, 0.0)
            tern.append(discretize_force(robot.force, force, cfg.force_threshold))
            robot.force = force
            robot.prev_ee = robot.ee()

        state.step += 1
        done = state.step >= cfg.episode_len
        rewards = compute_reward(before, state, obj, cfg)
        obs = [
            self._observe(i, tuple(acts[i]), tern[i]) for i in range(N_ROBOTS)
        ]
        self._last_tern = tern
        info: dict[str, Any] = {"events": events, "distance": object_goal_distance(state)}
        if done:
            info["success"] = is_success(state)
        return obs, rewards, done, info

    def _move_rigid(self, state: WorldState) -> None:
        """Both robots hold: least-squares rigid transform of the two anchors."""
        r0, r1 = state.robots
        e0, e1 = r0.ee(), r1.ee()
        qx = [r0.anchor_x, r1.anchor_x]
        qy = [r0.anchor_y, r1.anchor_y]
        wx = [e0[0], e1[0]]
        wy = [e0[1], e1[1]]
        qmx, qmy = (qx[0] + qx[1]) / 2.0, (qy[0] + qy[1]) / 2.0
        wmx, wmy = (wx[0] + wx[1]) / 2.0, (wy[0] + wy[1]) / 2.0
        sxx = sxy = 0.0
        for j in range(2):
            ax, ay = qx[j] - qmx, qy[j] - qmy
            bx, by = wx[j] - wmx, wy[j] - wmy
            sxx += ax * bx + ay * by
            sxy += ax * by - ay * bx
        if sxx == 0.0 and sxy == 0.0:
            theta = state.obj_theta  # coincident anchors: keep orientation
        else:
            theta = math.atan2(sxy, sxx)
        c, s = math.cos(theta), math.sin(theta)
        state.obj_theta = _wrap_angle(theta)
        state.obj_x = wmx - (c * qmx - s * qmy)
        state.obj_y = wmy - (s * qmx + c * qmy)
        state.obj_height = max(min(e0[2], e1[2]), state.table_height)

    def _move_single(self, state: WorldState, i: int, events: list[str]) -> None:
        """One robot holds: drag/lift if grip capacity suffices, else slip/tip."""
        cfg = self.config
        obj = self.obj
        robot = state.robots[i]
        ee = robot.ee()
        dx = ee[0] - robot.prev_ee[0]
        dy = ee[1] - robot.prev_ee[1]
        dz = ee[2] - robot.prev_ee[2]
        capacity_ok = (
            obj.mass * cfg.gravity * cfg.drag_factor <= obj.friction * cfg.grip_force
        )
        if capacity_ok:
            state.obj_x += dx
            state.obj_y += dy
            state.obj_height = max(state.obj_height + dz, state.table_height)
            return
        airborne = state.obj_height > state.table_height + 1e-12
        if airborne or dz > 1e-12:
            robot.grasping = False
            state.obj_height = state.table_height
            state.obj_dropped = True
            events.append("drop")
            events.append(f"tip:{i}")
        elif dx * dx + dy * dy > 1e-24:
            robot.grasping = False
            events.append(f"slip:{i}")

    def _observe(
        self,
        i: int,
        action: tuple[float, ...],
        tern: tuple[float, float, float],
    ) -> np.ndarray:
        state = self.state
        robot = state.robots[i]
        ex, ey, ez = robot.ee()
        gx, gy, gz = state.goal
        grip = 1.0 if robot.closed else 0.0
        rel_theta = _wrap_angle(state.obj_theta - robot.heading)
        return np.array(
            [
                action[0], action[1], action[2], action[3], action[4], action[5],
                robot.extension,
                grip, grip,
                gx - ex, gy - ey, gz - ez,
                state.obj_x - ex, state.obj_y - ey, state.obj_height - ez, rel_theta,
                tern[0], tern[1], tern[2], tern[0], tern[1], tern[2],
            ],
            dtype=np.float64,
        )

    def observations(self, prev_actions: np.ndarray | None = None) -> list[np.ndarray]:
        """Rebuild current observations (used after state inspection)."""
        if prev_actions is None:
            prev_actions = np.zeros((N_ROBOTS, ACTION_WIDTH))
        return [
            self._observe(i, tuple(prev_actions[i]), self._last_tern[i])
            for i in range(N_ROBOTS)
        ]
