"""Dense layers and an LSTM cell on top of the tape primitives.

Network building blocks register their parameters in a ParamStore under
dotted names so checkpoints and optimizers can address them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigError, DimensionError
from . import tape as T
from .checkpoint import ParamStore
from .tape import Tensor

ACTIVATIONS = ("linear", "relu", "tanh")


def orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    """Orthogonal weight matrix scaled by ``gain`` (sign-fixed QR)."""
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def _apply_activation(x: Tensor, activation: str) -> Tensor:
    if activation == "linear":
        return x
    if activation == "relu":
        return T.relu(x)
    if activation == "tanh":
        return T.tanh(x)
    raise ConfigError(f"unknown activation {activation!r}")


def dense_forward(x: Tensor, weights: Tensor, bias: Tensor, activation: str = "linear") -> Tensor:
    """activation(x @ W + b) with shape validation.

    ``x`` is (batch, in), ``weights`` (in, out), ``bias`` (out,).
    """
    if x.data.ndim != 2 or x.data.shape[1] != weights.data.shape[0]:
        raise DimensionError(
            f"dense input {x.data.shape} incompatible with weights {weights.data.shape}"
        )
    if bias.data.shape != (weights.data.shape[1],):
        raise DimensionError(
            f"dense bias {bias.data.shape} incompatible with weights {weights.data.shape}"
        )
    return _apply_activation(T.add(T.matmul(x, weights), bias), activation)


class DenseLayer:
    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_width: int,
        out_width: int,
        rng: np.random.Generator,
        gain: float,
        activation: str = "relu",
    ):
        self.w = store.add(f"{name}.w", orthogonal(rng, in_width, out_width, gain))
        self.b = store.add(f"{name}.b", np.zeros(out_width))
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        return dense_forward(x, self.w, self.b, self.activation)


@dataclass
class MlpSpec:
    """Layer widths (input first, output last) with a fixed-ReLU hidden stack."""

    widths: list[int]
    output_activation: str = "linear"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("MlpSpec needs at least input and output widths")
        if self.output_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")


class Mlp:
    """Feed-forward stack per an MlpSpec: ReLU hidden layers, configurable head."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        spec: MlpSpec,
        rng: np.random.Generator,
        output_gain: float = 1.0,
    ):
        self.spec = spec
        self.layers: list[DenseLayer] = []
        widths = spec.widths
        for i in range(len(widths) - 1):
            last = i == len(widths) - 2
            self.layers.append(
                DenseLayer(
                    store,
                    f"{name}.fc{i}",
                    widths[i],
                    widths[i + 1],
                    rng,
                    gain=output_gain if last else np.sqrt(2.0),
                    activation=spec.output_activation if last else "relu",
                )
            )

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


@dataclass
class LstmCellState:
    """Hidden and cell vectors, (batch, hidden). Reset to zeros at episode start."""

    h: Tensor
    c: Tensor

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "LstmCellState":
        return cls(Tensor(np.zeros((batch, hidden))), Tensor(np.zeros((batch, hidden))))


@dataclass
class LstmParams:
    """Gate parameters, fused layout (input, forget, candidate, output)."""

    wx: Tensor
    wh: Tensor
    b: Tensor

    @property
    def hidden(self) -> int:
        return self.wh.data.shape[0]


def init_lstm_params(
    store: ParamStore, name: str, in_width: int, hidden: int, rng: np.random.Generator
) -> LstmParams:
    wx = np.concatenate(
        [orthogonal(rng, in_width, hidden, 1.0) for _ in range(4)], axis=1
    )
    wh = np.concatenate(
        [orthogonal(rng, hidden, hidden, 1.0) for _ in range(4)], axis=1
    )
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias
    return LstmParams(
        store.add(f"{name}.wx", wx), store.add(f"{name}.wh", wh), store.add(f"{name}.b", b)
    )


def lstm_cell_forward(
    x: Tensor, state: LstmCellState, params: LstmParams
) -> tuple[Tensor, LstmCellState]:
    """One LSTM step; returns (output, next state), output == next hidden."""
    hidden = params.hidden
    if x.data.ndim != 2 or x.data.shape[1] != params.wx.data.shape[0]:
        raise DimensionError(
            f"lstm input {x.data.shape} incompatible with wx {params.wx.data.shape}"
        )
    if state.h.data.shape != (x.data.shape[0], hidden):
        raise DimensionError(
            f"lstm state {state.h.data.shape} incompatible with batch "
            f"{x.data.shape[0]} and hidden {hidden}"
        )
    z = T.add(T.add(T.matmul(x, params.wx), T.matmul(state.h, params.wh)), params.b)
    gate_in = T.sigmoid(T.slice_cols(z, 0, hidden))
    gate_forget = T.sigmoid(T.slice_cols(z, hidden, 2 * hidden))
    candidate = T.tanh(T.slice_cols(z, 2 * hidden, 3 * hidden))
    gate_out = T.sigmoid(T.slice_cols(z, 3 * hidden, 4 * hidden))
    c_next = T.add(T.mul(gate_forget, state.c), T.mul(gate_in, candidate))
    h_next = T.mul(gate_out, T.tanh(c_next))
    return h_next, LstmCellState(h_next, c_next)
