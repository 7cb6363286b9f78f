"""Reverse-mode automatic differentiation over a recorded operation tape.

Deliberately small: just the primitives needed for dense layers, an LSTM
cell, and PPO loss arithmetic. All math is float64. Operations record a
backward rule on the innermost active ``Tape``; with no active tape the
same functions run as plain forward evaluation, which keeps rollout
collection cheap.
"""

from __future__ import annotations

import numpy as np

from ..config import ContractError

FLOAT = np.float64


class Tensor:
    """A float64 array plus an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=FLOAT)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        label = self.name or "tensor"
        return f"Tensor({label}, shape={tuple(self.data.shape)})"


class Tape:
    """Ordered record of primitive operations for one backward sweep.

    Used as a context manager; ops executed inside the block are recorded.
    Backward replays the record exactly once in reverse, summing the
    contributions of every consumer into each tensor's adjoint.
    """

    def __init__(self):
        self.ops: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        popped = _TAPE_STACK.pop()
        assert popped is self, "tape stack corrupted"
        return False

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        self.ops.append((output, inputs, backward_fn))

    def __len__(self) -> int:
        return len(self.ops)


_TAPE_STACK: list[Tape] = []


def _tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(tape: Tape, loss: Tensor, params=None) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every requires_grad leaf.

    ``loss`` must be scalar. When ``params`` (an iterable of Tensors) is
    given, their gradient buffers are allocated first so parameters that the
    loss never touches end up holding exact zeros.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss.requires_grad:
        leaves[id(loss)] = loss
    for output, inputs, backward_fn in reversed(tape.ops):
        out_grad = adjoint.pop(id(output), None)
        if out_grad is None:
            continue
        for tensor, contrib in zip(inputs, backward_fn(out_grad)):
            if contrib is None:
                continue
            key = id(tensor)
            held = adjoint.get(key)
            adjoint[key] = contrib if held is None else held + contrib
            if tensor.requires_grad:
                leaves[key] = tensor
    for key, tensor in leaves.items():
        grad = adjoint.get(key)
        if grad is None:
            continue
        if tensor.grad is None:
            tensor.grad = np.zeros_like(tensor.data)
        tensor.grad += grad.reshape(tensor.data.shape)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        from ..config import DimensionError

        raise DimensionError(
            f"matmul shapes incompatible: {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)
    tape = _tape()
    if tape is not None:
        a_data, b_data = a.data, b.data

        def bwd(g):
            return g @ b_data.T, a_data.T @ g

        tape.record(out, (a, b), bwd)
    return out


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b)
    out = Tensor(a.data + b.data)
    tape = _tape()
    if tape is not None:
        a_shape, b_shape = a.data.shape, b.data.shape

        def bwd(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        tape.record(out, (a, b), bwd)
    return out


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor(b)
    out = Tensor(a.data - b.data)
    tape = _tape()
    if tape is not None:
        a_shape, b_shape = a.data.shape, b.data.shape

        def bwd(g):
            return _unbroadcast(g, a_shape), -_unbroadcast(g, b_shape)

        tape.record(out, (a, b), bwd)
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b)
    out = Tensor(a.data * b.data)
    tape = _tape()
    if tape is not None:
        a_data, b_data = a.data, b.data

        def bwd(g):
            return (
                _unbroadcast(g * b_data, a_data.shape),
                _unbroadcast(g * a_data, b_data.shape),
            )

        tape.record(out, (a, b), bwd)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)
    tape = _tape()
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * s,))
    return out


def add_scalar(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data + s)
    tape = _tape()
    if tape is not None:
        tape.record(out, (a,), lambda g: (g,))
    return out


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def exp(a: Tensor) -> Tensor:
    out = Tensor(np.exp(a.data))
    tape = _tape()
    if tape is not None:
        out_data = out.data
        tape.record(out, (a,), lambda g: (g * out_data,))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))
    tape = _tape()
    if tape is not None:
        a_data = a.data
        tape.record(out, (a,), lambda g: (g / a_data,))
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data)
    tape = _tape()
    if tape is not None:
        a_data = a.data
        tape.record(out, (a,), lambda g: (g * 2.0 * a_data,))
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    tape = _tape()
    if tape is not None:
        # subgradient at 0 is 0 (strict > keeps the tie-break deterministic)
        mask = a.data > 0.0
        tape.record(out, (a,), lambda g: (g * mask,))
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data))
    tape = _tape()
    if tape is not None:
        out_data = out.data
        tape.record(out, (a,), lambda g: (g * (1.0 - out_data * out_data),))
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)))
    tape = _tape()
    if tape is not None:
        out_data = out.data
        tape.record(out, (a,), lambda g: (g * out_data * (1.0 - out_data),))
    return out


def clip(a: Tensor, lo, hi) -> Tensor:
    """Clamp to [lo, hi]; bounds are constants (no gradient flows to them).

    Gradient passes through wherever the input lies inside the closed
    interval.
    """
    lo_data = lo.data if isinstance(lo, Tensor) else lo
    hi_data = hi.data if isinstance(hi, Tensor) else hi
    out = Tensor(np.clip(a.data, lo_data, hi_data))
    tape = _tape()
    if tape is not None:
        mask = (a.data >= lo_data) & (a.data <= hi_data)
        tape.record(out, (a,), lambda g: (g * mask,))
    return out


def minimum(a: Tensor, b) -> Tensor:
    b = _as_tensor(b)
    out = Tensor(np.minimum(a.data, b.data))
    tape = _tape()
    if tape is not None:
        # ties route the gradient to the first argument
        take_a = a.data <= b.data
        a_shape, b_shape = a.data.shape, b.data.shape

        def bwd(g):
            return (
                _unbroadcast(g * take_a, a_shape),
                _unbroadcast(g * ~take_a, b_shape),
            )

        tape.record(out, (a, b), bwd)
    return out


def maximum(a: Tensor, b) -> Tensor:
    b = _as_tensor(b)
    out = Tensor(np.maximum(a.data, b.data))
    tape = _tape()
    if tape is not None:
        take_a = a.data >= b.data
        a_shape, b_shape = a.data.shape, b.data.shape

        def bwd(g):
            return (
                _unbroadcast(g * take_a, a_shape),
                _unbroadcast(g * ~take_a, b_shape),
            )

        tape.record(out, (a, b), bwd)
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum())
    tape = _tape()
    if tape is not None:
        a_shape = a.data.shape
        tape.record(out, (a,), lambda g: (np.broadcast_to(g, a_shape).copy(),))
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean())
    tape = _tape()
    if tape is not None:
        a_shape = a.data.shape
        tape.record(out, (a,), lambda g: (np.broadcast_to(g / n, a_shape).copy(),))
    return out


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = Tensor(a.data.sum(axis=axis))
    tape = _tape()
    if tape is not None:
        a_shape = a.data.shape

        def bwd(g):
            return (np.broadcast_to(np.expand_dims(g, axis), a_shape).copy(),)

        tape.record(out, (a,), bwd)
    return out


def concat_cols(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))
    tape = _tape()
    if tape is not None:
        widths = [p.data.shape[1] for p in parts]
        bounds = np.cumsum([0] + widths)

        def bwd(g):
            return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(widths)))

        tape.record(out, tuple(parts), bwd)
    return out


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[:, start:stop].copy())
    tape = _tape()
    if tape is not None:
        a_shape = a.data.shape

        def bwd(g):
            full = np.zeros(a_shape)
            full[:, start:stop] = g
            return (full,)

        tape.record(out, (a,), bwd)
    return out
