"""AdamW with decoupled weight decay and per-name learning-rate scales."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from ..tensor import NDTensor, ParamStore


@dataclass
class OptimizerState:
    """Moments and step count for a subset of named parameters."""

    names: list[str]
    base_lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, names: list[str], base_lr: float,
                   weight_decay: float = 0.0) -> "OptimizerState":
        state = cls(list(names), base_lr, weight_decay=weight_decay)
        for name in names:
            shape = params[name].shape
            state.m[name] = np.zeros(shape)
            state.v[name] = np.zeros(shape)
        return state


def adamw_step(params: ParamStore, grads: dict[str, np.ndarray],
               state: OptimizerState) -> None:
    """One decoupled-weight-decay update over ``state.names``.

    Effective learning rate is base_lr times the parameter's lr_scale.
    """
    missing = [n for n in state.names if n not in grads]
    if missing:
        raise UsageError(f"gradients missing for {missing[:3]}...")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name in state.names:
        g = np.asarray(grads[name])
        p = params[name]
        if g.shape != p.shape:
            raise UsageError(f"gradient shape {g.shape} != param {p.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        lr = state.base_lr * params.lr_scale(name)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new = p.array - lr * update
        if state.weight_decay:
            new = new - lr * state.weight_decay * p.array
        params.replace(name, NDTensor(new, check=False))
