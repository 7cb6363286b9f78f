import numpy as np
import pytest

from dereco.config import ContractError
from dereco.env import (
    EnvConfig,
    TransportEnv,
    classify_failure,
    classify_from_flags,
    make_object,
    read_trace,
    seen_shapes,
    write_trace,
)
from dereco.env.scripted import IdlePolicy, ScriptedTransporter, run_episode

CATALOG = seen_shapes()


def bar(mass=0.5, friction=0.8):
    return make_object(CATALOG[0], CATALOG, mass, friction)


def test_success_trace_classified_none():
    env = TransportEnv(EnvConfig())
    success, _, trace = run_episode(
        env, ScriptedTransporter(env.config), np.random.default_rng(1), bar(),
        record_trace=True,
    )
    assert success
    assert classify_failure(trace) == "none"


def test_idle_policy_grasp_and_lift():
    env = TransportEnv(EnvConfig())
    success, _, trace = run_episode(
        env, IdlePolicy(), np.random.default_rng(2), bar(), record_trace=True
    )
    assert not success
    assert classify_failure(trace) == "grasp_and_lift"


def test_mid_air_release_post_lift_drop():
    env = TransportEnv(EnvConfig())
    policy = ScriptedTransporter(env.config, drop_at_step=60)
    success, _, trace = run_episode(
        env, policy, np.random.default_rng(3), bar(), record_trace=True
    )
    assert not success
    assert classify_failure(trace) == "post_lift_drop"


def test_transport_failure_lifted_held_far():
    # carry toward a goal the script cannot reach in time: shorten the episode
    env = TransportEnv(EnvConfig(episode_len=40))
    policy = ScriptedTransporter(env.config, ramp=0.05)
    success, dist, trace = run_episode(
        env, policy, np.random.default_rng(4), bar(), record_trace=True
    )
    assert not success and dist >= 0.1
    assert classify_failure(trace) == "transport"


def test_classification_flags_exclusive():
    for success in (False, True):
        for lifted in (False, True):
            for dropped in (False, True):
                label = classify_from_flags(success, lifted, dropped)
                assert label in ("none", "grasp_and_lift", "post_lift_drop", "transport")
                assert (label == "none") == success


def test_trace_roundtrip(tmp_path):
    env = TransportEnv(EnvConfig(episode_len=30))
    _, _, trace = run_episode(
        env, ScriptedTransporter(env.config), np.random.default_rng(5), bar(),
        record_trace=True,
    )
    path = str(tmp_path / "ep.jsonl")
    write_trace(path, trace)
    loaded = read_trace(path)
    assert loaded.table_height == trace.table_height
    assert len(loaded.steps) == 30
    assert loaded.success == trace.success
    assert classify_failure(loaded) == classify_failure(trace)


def test_truncated_trace_reports_line(tmp_path):
    env = TransportEnv(EnvConfig(episode_len=10))
    _, _, trace = run_episode(
        env, ScriptedTransporter(env.config), np.random.default_rng(6), bar(),
        record_trace=True,
    )
    path = str(tmp_path / "broken.jsonl")
    write_trace(path, trace)
    lines = open(path).read().splitlines()
    with open(path, "w") as fh:
        fh.write("\n".join(lines[:5]) + "\n{bad json\n")
    with pytest.raises(ContractError) as err:
        read_trace(path)
    assert ":6:" in str(err.value)


def test_missing_end_record(tmp_path):
    path = str(tmp_path / "no_end.jsonl")
    with open(path, "w") as fh:
        fh.write('{"type": "header", "table_height": 0.4, "goal": [0,0,0.8], "object": {}}\n')
    with pytest.raises(ContractError) as err:
        read_trace(path)
    assert "end" in str(err.value)
