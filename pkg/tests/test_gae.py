import numpy as np
import pytest

from dereco.config import ContractError
from dereco.rl import compute_gae, normalize_advantages


def brute_force_gae(rewards, values, dones, gamma, lam):
    """Independent double-summation oracle for the advantage recursion."""
    n_envs, n_steps = rewards.shape
    adv = np.zeros_like(rewards)
    for e in range(n_envs):
        for t in range(n_steps):
            total = 0.0
            for l in range(t, n_steps):
                if any(dones[e, j] for j in range(t, l)):
                    break
                nd = 1.0 - dones[e, l]
                delta = (
                    rewards[e, l] + gamma * values[e, l + 1] * nd - values[e, l]
                )
                total += (gamma * lam) ** (l - t) * delta
            adv[e, t] = total
    return adv


def test_all_zero_inputs():
    batch = compute_gae(
        np.zeros((3, 5)), np.zeros((3, 6)), np.zeros((3, 5)), 0.99, 0.95
    )
    np.testing.assert_array_equal(batch.advantages, np.zeros((3, 5)))
    np.testing.assert_array_equal(batch.returns, np.zeros((3, 5)))


def test_lambda_zero_td_formula():
    rewards = np.array([[1.0]])
    values = np.array([[0.5, 1.0]])
    dones = np.array([[0.0]])
    batch = compute_gae(rewards, values, dones, 0.9, 0.0)
    assert abs(batch.advantages[0, 0] - 1.4) < 1e-15


def test_lambda_zero_general_matches_td():
    rng = np.random.default_rng(0)
    rewards = rng.standard_normal((4, 7))
    values = rng.standard_normal((4, 8))
    dones = (rng.uniform(size=(4, 7)) < 0.2).astype(float)
    batch = compute_gae(rewards, values, dones, 0.95, 0.0)
    deltas = rewards + 0.95 * values[:, 1:] * (1 - dones) - values[:, :-1]
    np.testing.assert_allclose(batch.advantages, deltas, atol=1e-12)


def test_matches_brute_force_on_random_trajectories():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n_steps = int(rng.integers(1, 11))
        rewards = rng.standard_normal((2, n_steps))
        values = rng.standard_normal((2, n_steps + 1))
        dones = (rng.uniform(size=(2, n_steps)) < 0.25).astype(float)
        gamma = float(rng.uniform(0.8, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        batch = compute_gae(rewards, values, dones, gamma, lam)
        oracle = brute_force_gae(rewards, values, dones, gamma, lam)
        np.testing.assert_allclose(batch.advantages, oracle, atol=1e-10)
        np.testing.assert_allclose(
            batch.returns, oracle + values[:, :n_steps], atol=1e-10
        )


def test_lambda_one_telescopes_to_discounted_return():
    # with lam=1 and no dones, A_t + V_t = sum gamma^k r_{t+k} + gamma^(T-t) V_T
    rng = np.random.default_rng(7)
    n_steps = 9
    rewards = rng.standard_normal((1, n_steps))
    values = rng.standard_normal((1, n_steps + 1))
    gamma = 0.97
    batch = compute_gae(rewards, values, np.zeros((1, n_steps)), gamma, 1.0)
    for t in range(n_steps):
        mc = sum(gamma ** (k - t) * rewards[0, k] for k in range(t, n_steps))
        mc += gamma ** (n_steps - t) * values[0, n_steps]
        assert abs(batch.returns[0, t] - mc) < 1e-10


def test_length_mismatch_rejected():
    with pytest.raises(ContractError):
        compute_gae(np.zeros((2, 5)), np.zeros((2, 5)), np.zeros((2, 5)), 0.9, 0.9)
    with pytest.raises(ContractError):
        compute_gae(np.zeros((2, 5)), np.zeros((2, 6)), np.zeros((2, 4)), 0.9, 0.9)


def test_normalization_moments():
    rng = np.random.default_rng(3)
    adv = rng.standard_normal((8, 16)) * 5.0 + 2.0
    normed = normalize_advantages(adv)
    assert abs(normed.mean()) < 1e-6
    assert abs(normed.std() - 1.0) < 1e-6


def test_normalization_scale_invariance():
    rng = np.random.default_rng(4)
    adv = rng.standard_normal((4, 32))
    a = normalize_advantages(adv)
    b = normalize_advantages(173.5 * adv)
    np.testing.assert_allclose(a, b, atol=1e-9)
