"""Hand-coded controllers for smoke tests, replay fixtures, and eval oracles.

The transporter is a rate-limited proportional controller: approach the
assigned grasp point, close, and once both robots hold, carry the object to
the goal and hold it there. Command ramps stay well under the carried-slip
acceleration threshold.
"""

from __future__ import annotations

import math

import numpy as np

from .transport import ACTION_WIDTH, N_ROBOTS, EnvConfig, WorldState, grasp_point_world


class ScriptedTransporter:
    """Deterministic policy that solves the task under default dynamics."""

    def __init__(self, config: EnvConfig, ramp: float = 0.2, drop_at_step: int | None = None):
        self.config = config
        self.ramp = ramp
        self.drop_at_step = drop_at_step
        self.prev = np.zeros((N_ROBOTS, ACTION_WIDTH))

    def reset(self) -> None:
        self.prev = np.zeros((N_ROBOTS, ACTION_WIDTH))

    def _ramped(self, i: int, desired: np.ndarray) -> np.ndarray:
        prev = self.prev[i]
        out = prev + np.clip(desired - prev, -self.ramp, self.ramp)
        # grip channel switches instantly; it is not a velocity command
        out[5] = desired[5]
        self.prev[i] = out
        return out

    def act(self, state: WorldState, obj) -> np.ndarray:
        cfg = self.config
        actions = np.zeros((N_ROBOTS, ACTION_WIDTH))
        both = all(r.grasping for r in state.robots)
        if self.drop_at_step is not None and state.step >= self.drop_at_step:
            for i in range(N_ROBOTS):
                actions[i] = self._ramped(i, np.zeros(ACTION_WIDTH))
                actions[i][5] = -1.0
            return actions
        for i, robot in enumerate(state.robots):
            desired = np.zeros(ACTION_WIDTH)
            if both:
                gx, gy, gz = state.goal
                desired[0] = (gx - state.obj_x) / cfg.dt / cfg.base_max_speed
                desired[1] = (gy - state.obj_y) / cfg.dt / cfg.base_max_speed
                desired[3] = (gz - state.obj_height) / cfg.dt / cfg.height_max_rate
                desired[5] = 1.0
            else:
                px, py, pz = grasp_point_world(state, obj, i)
                ex, ey, ez = robot.ee()
                desired[0] = (px - ex) / cfg.dt / cfg.base_max_speed
                desired[1] = (py - ey) / cfg.dt / cfg.base_max_speed
                desired[3] = (pz - ez) / cfg.dt / cfg.height_max_rate
                dist = math.sqrt((px - ex) ** 2 + (py - ey) ** 2 + (pz - ez) ** 2)
                desired[5] = 1.0 if dist < 0.8 * cfg.grasp_radius else -1.0
            desired[:5] = np.clip(desired[:5], -0.6, 0.6)
            actions[i] = self._ramped(i, desired)
        return actions


class IdlePolicy:
    """Never closes the gripper; every episode fails at grasp-and-lift
    (unless the goal already sits within the success radius)."""

    def reset(self) -> None:
        pass

    def act(self, state: WorldState, obj) -> np.ndarray:
        return np.zeros((N_ROBOTS, ACTION_WIDTH))


def run_episode(env, policy, rng, obj, record_trace: bool = False):
    """Roll one full episode; returns (success, final_distance, trace|None)."""
    from .trace import EpisodeTrace, step_record
    from .transport import is_success, object_goal_distance

    env.reset(rng, obj)
    policy.reset()
    trace = None
    if record_trace:
        trace = EpisodeTrace(
            table_height=env.state.table_height,
            goal=env.state.goal,
            object_info=obj.to_dict(),
        )
    done = False
    while not done:
        actions = policy.act(env.state, obj)
        obs, rewards, done, info = env.step(actions)
        if trace is not None:
            trace.steps.append(
                step_record(env.state.step, env.state, actions, rewards, info["events"])
            )
    success = is_success(env.state)
    final_distance = object_goal_distance(env.state)
    if trace is not None:
        trace.success = success
        trace.final_distance = final_distance
    return success, final_distance, trace
