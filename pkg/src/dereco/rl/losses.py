"""PPO losses and the diagonal-Gaussian policy arithmetic.

The actor objective is the clipped surrogate
min(ratio * A, clip(ratio, 1-eps, 1+eps) * A), maximized; we return its
negative mean (minus an entropy bonus) for the minimizer. The critic loss is
the clipped value regression max((V - R)^2, (clip(V, V_old +- eps) - R)^2).
"""

from __future__ import annotations

import math

import numpy as np

from ..config import TrainingError
from ..nn import Tensor
from ..nn import tape as T

LOG_2PI = math.log(2.0 * math.pi)


def gaussian_log_prob(action: np.ndarray, mean: Tensor, log_std: Tensor) -> Tensor:
    """Row-wise log density of ``action`` under N(mean, exp(log_std)^2).

    ``action`` is a constant (B, D); ``mean`` (B, D) and ``log_std`` (D,) are
    graph tensors.
    """
    dim = action.shape[1]
    diff = T.sub(Tensor(action), mean)
    inv_var = T.exp(T.scale(log_std, -2.0))
    quad = T.mul(T.square(diff), inv_var)
    per_dim = T.add(quad, T.scale(log_std, 2.0))
    summed = T.sum_axis(per_dim, axis=1)
    return T.scale(T.add_scalar(summed, dim * LOG_2PI), -0.5)


def gaussian_entropy(log_std: Tensor, dim: int) -> Tensor:
    """Entropy of the diagonal Gaussian (identical across a batch)."""
    return T.add_scalar(T.sum_all(log_std), 0.5 * dim * (1.0 + LOG_2PI))


def sample_gaussian(
    mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    return mean + np.exp(log_std) * rng.standard_normal(mean.shape)


def actor_loss(
    log_prob_new: Tensor,
    log_prob_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
    entropy: Tensor,
    entropy_coef: float,
) -> Tensor:
    """Negated clipped-surrogate objective minus the entropy bonus."""
    ratio = T.exp(T.sub(log_prob_new, Tensor(log_prob_old)))
    if not np.all(np.isfinite(ratio.data)):
        raise TrainingError("non-finite probability ratio in actor loss")
    adv = Tensor(advantages)
    unclipped = T.mul(ratio, adv)
    clipped = T.mul(T.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv)
    objective = T.mean_all(T.minimum(unclipped, clipped))
    return T.sub(T.neg(objective), T.scale(entropy, entropy_coef))


def critic_loss(
    value_new: Tensor,
    value_old: np.ndarray,
    returns: np.ndarray,
    clip_eps: float,
) -> Tensor:
    """Mean over samples of the max of clipped and unclipped squared errors."""
    ret = Tensor(returns)
    direct = T.square(T.sub(value_new, ret))
    clipped_value = T.clip(value_new, value_old - clip_eps, value_old + clip_eps)
    clipped = T.square(T.sub(clipped_value, ret))
    return T.mean_all(T.maximum(direct, clipped))
