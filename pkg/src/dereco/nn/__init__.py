"""Minimal reverse-mode autodiff sized for small dense/LSTM policy networks."""

from .checkpoint import ParamStore, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import (
    DenseLayer,
    LstmCellState,
    LstmParams,
    Mlp,
    MlpSpec,
    dense_forward,
    init_lstm_params,
    lstm_cell_forward,
    orthogonal,
)
from .optim import AdamState, adam_step, clip_grad_norm
from .tape import Tape, Tensor, backward

__all__ = [
    "AdamState",
    "DenseLayer",
    "LstmCellState",
    "LstmParams",
    "Mlp",
    "MlpSpec",
    "ParamStore",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "clip_grad_norm",
    "dense_forward",
    "grad_check",
    "init_lstm_params",
    "load_checkpoint",
    "lstm_cell_forward",
    "orthogonal",
    "save_checkpoint",
]
