"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from .checkpoint import ParamStore
from .tape import Tape, backward


def grad_check(loss_fn, params: ParamStore, h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must rebuild the forward computation from the current
    parameter values and return a scalar Tensor. Parameters are restored
    exactly; nothing else is mutated.
    """
    params.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss, params.tensors())
    analytic = {name: t.grad.copy() for name, t in params.items()}

    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.data.flat
        flat_grad = analytic[name].reshape(-1)
        for i in range(tensor.data.size):
            saved = flat[i]
            flat[i] = saved + h
            up = float(loss_fn().data.reshape(()))
            flat[i] = saved - h
            down = float(loss_fn().data.reshape(()))
            flat[i] = saved
            numeric = (up - down) / (2.0 * h)
            ana = flat_grad[i]
            denom = max(abs(ana), abs(numeric), 1e-8)
            worst = max(worst, abs(ana - numeric) / denom)
    return worst
