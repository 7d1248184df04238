"""Adam optimizer and the step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .params import ParameterStore


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-4
    decoupled: bool = False  # default is coupled L2 added to the gradient
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store: ParameterStore, state: AdamState, lr: float):
    """One Adam update over every parameter, in lexicographic name order."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in store.items():
        if p.grad is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")
        g = p.grad.astype(p.data.dtype, copy=False)
        if state.weight_decay and not state.decoupled:
            g = g + state.weight_decay * p.data
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        if state.weight_decay and state.decoupled:
            update = update + state.weight_decay * p.data
        p.data -= lr * update


def step_lr(epoch: int, base_lr: float) -> float:
    """Learning rate after cutting 30% every 20 epochs: ``base * 0.7^(epoch // 20)``."""
    if base_lr <= 0:
        raise ContractError(f"base_lr must be positive, got {base_lr}")
    if epoch < 0:
        raise ContractError(f"epoch must be non-negative, got {epoch}")
    return base_lr * 0.7 ** (epoch // 20)
