"""Parameter-creation and layer helpers shared by the network modules.

Forward functions are pure: they read tensors out of a ParamStore by
hierarchical name (``"stad.rhatb1.sfb2.ln1.gamma"``) and never mutate it.
"""

from __future__ import annotations

import numpy as np

from ..tensor import NDTensor, ParamStore, he_uniform
from ..tensor import ops


# residual-branch terminals and output heads start small so deep
# residual stacks begin near the identity
RESIDUAL_GAIN = 0.1


def zeros(*shape) -> NDTensor:
    return NDTensor(np.zeros(shape), check=False)


def ones(*shape) -> NDTensor:
    return NDTensor(np.ones(shape), check=False)


def scalar(value: float) -> NDTensor:
    return NDTensor(np.asarray(float(value)), check=False)


def add_conv(p: ParamStore, name: str, rng, cin: int, cout: int, k: int = 3,
             gain: float = 1.0) -> None:
    p.add(f"{name}.w", he_uniform(rng, (k, k, cin, cout), k * k * cin, gain))
    p.add(f"{name}.b", zeros(cout))


def conv(x, p: ParamStore, name: str, dilation: int = 1, stride: int = 1):
    y = ops.conv2d(x, p[f"{name}.w"], mode="full", dilation=dilation, stride=stride)
    return ops.add(y, p[f"{name}.b"])


def add_dwconv(p: ParamStore, name: str, rng, c: int, k: int = 3,
               gain: float = 1.0) -> None:
    p.add(f"{name}.w", he_uniform(rng, (k, k, c), k * k, gain))
    p.add(f"{name}.b", zeros(c))


def dwconv(x, p: ParamStore, name: str, dilation: int = 1):
    y = ops.conv2d(x, p[f"{name}.w"], mode="depthwise", dilation=dilation)
    return ops.add(y, p[f"{name}.b"])


def add_pwconv(p: ParamStore, name: str, rng, cin: int, cout: int,
               gain: float = 1.0) -> None:
    p.add(f"{name}.w", he_uniform(rng, (cin, cout), cin, gain))
    p.add(f"{name}.b", zeros(cout))


def pwconv(x, p: ParamStore, name: str):
    y = ops.conv2d(x, p[f"{name}.w"], mode="pointwise")
    return ops.add(y, p[f"{name}.b"])


def add_layer_norm(p: ParamStore, name: str, c: int) -> None:
    p.add(f"{name}.gamma", ones(c))
    p.add(f"{name}.beta", zeros(c))


def layer_norm(x, p: ParamStore, name: str, eps: float = 1e-5):
    return ops.layer_norm(x, p[f"{name}.gamma"], p[f"{name}.beta"], eps)


def add_linear(p: ParamStore, name: str, rng, cin: int, cout: int,
               gain: float = 1.0) -> None:
    p.add(f"{name}.w", he_uniform(rng, (cin, cout), cin, gain))
    p.add(f"{name}.b", zeros(cout))


def linear(x, p: ParamStore, name: str):
    return ops.add(ops.matmul(x, p[f"{name}.w"]), p[f"{name}.b"])
