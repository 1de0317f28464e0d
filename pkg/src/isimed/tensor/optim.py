"""AdamW with decoupled weight decay and an exponential learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import NonFiniteGradient
from .autodiff import Tensor


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Dict[str, Tensor], state: OptimizerState, lr: float = None):
    """One AdamW update, in place on ``params`` and ``state``.

    update = -lr * m_hat / (sqrt(v_hat) + eps) - lr * weight_decay * param

    Gradients are zeroed afterwards. Parameters without a gradient are treated
    as having a zero gradient. Nothing is modified if any gradient is NaN/Inf.
    """
    lr = state.lr if lr is None else lr
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        update = m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p.data
        p.data = (p.data - lr * update).astype(p.data.dtype, copy=False)
        p.grad = None
    return params, state


def exp_lr(lr0: float, gamma: float, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return lr0 * gamma**epoch
