"""Multi-agent PPO with a centralized critic and pluggable encoders."""

from .buffer import RolloutBuffer
from .gae import AdvantageBatch, compute_gae, normalize_advantages
from .losses import (
    actor_loss,
    critic_loss,
    gaussian_entropy,
    gaussian_log_prob,
    sample_gaussian,
)
from .nets import ACTOR_KINDS, ActorNet, CriticNet, NetConfig, make_critic_input_fn
from .policy import ActStep, Policy
from .trainer import PPOTrainer, TrainerConfig

__all__ = [
    "ACTOR_KINDS",
    "ActStep",
    "ActorNet",
    "AdvantageBatch",
    "CriticNet",
    "NetConfig",
    "Policy",
    "PPOTrainer",
    "RolloutBuffer",
    "TrainerConfig",
    "actor_loss",
    "compute_gae",
    "critic_loss",
    "gaussian_entropy",
    "gaussian_log_prob",
    "make_critic_input_fn",
    "normalize_advantages",
    "sample_gaussian",
]
