"""Planar two-robot cooperative-transport environment."""

from .shapes import (
    ObjectSpec,
    ShapeDef,
    load_catalog,
    make_object,
    privileged_vector,
    sample_object,
    seen_shapes,
    shapes_by_name,
    unseen_shapes,
)
from .trace import (
    FAILURE_CLASSES,
    EpisodeTrace,
    classify_failure,
    classify_from_flags,
    read_trace,
    step_record,
    write_trace,
)
from .transport import (
    ACTION_WIDTH,
    N_ROBOTS,
    OBS_LAYOUT,
    OBS_WIDTH,
    EnvConfig,
    RewardBreakdown,
    RobotState,
    TransportEnv,
    WorldState,
    compute_reward,
    discretize_force,
    grasp_point_world,
    is_success,
    object_goal_distance,
)

__all__ = [
    "ACTION_WIDTH",
    "EnvConfig",
    "EpisodeTrace",
    "FAILURE_CLASSES",
    "N_ROBOTS",
    "OBS_LAYOUT",
    "OBS_WIDTH",
    "ObjectSpec",
    "RewardBreakdown",
    "RobotState",
    "ShapeDef",
    "TransportEnv",
    "WorldState",
    "classify_failure",
    "classify_from_flags",
    "compute_reward",
    "discretize_force",
    "grasp_point_world",
    "is_success",
    "load_catalog",
    "make_object",
    "object_goal_distance",
    "privileged_vector",
    "read_trace",
    "sample_object",
    "seen_shapes",
    "shapes_by_name",
    "step_record",
    "unseen_shapes",
    "write_trace",
]
