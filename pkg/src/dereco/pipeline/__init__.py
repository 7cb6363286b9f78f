"""Training schedules, method registry, and stage artifacts."""

from .dataset import EncoderDataset, load_dataset, save_dataset
from .methods import METHODS, BaselineSpec, ModelBundle, build_model, get_method
from .stages import (
    TrainContext,
    build_baseline,
    build_training,
    collect_encoder_dataset,
    encoder_mse,
    load_bundle,
    save_bundle,
    stage1_train,
    stage2_train_encoder,
    stage3_train,
    train_method,
)

__all__ = [
    "BaselineSpec",
    "EncoderDataset",
    "METHODS",
    "ModelBundle",
    "TrainContext",
    "build_baseline",
    "build_model",
    "build_training",
    "collect_encoder_dataset",
    "encoder_mse",
    "get_method",
    "load_bundle",
    "load_dataset",
    "save_bundle",
    "save_dataset",
    "stage1_train",
    "stage2_train_encoder",
    "stage3_train",
    "train_method",
]
