"""Finite-difference gradient oracle.

Central differences along probe directions, compared against the tape's
reverse-mode gradient. Small tensors are probed coordinate by coordinate;
large ones with seeded random unit directions (default 64 probes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import UsageError
from .core import NDTensor, Tape, backward


@dataclass
class GradCheckReport:
    max_rel_err: float
    tol: float
    probes: int
    per_input: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_err <= self.tol)

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: max_rel_err={self.max_rel_err:.3e} "
            f"(tol={self.tol:.1e}, probes={self.probes})"
        )


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def grad_check(
    f: Callable,
    xs: NDTensor | Sequence[NDTensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_exact: int = 64,
    probes: int = 64,
    seed: int = 0,
) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``f`` with central differences.

    ``xs`` are the tensors being differentiated; any other state ``f``
    closes over is held constant. Inputs with at most ``max_exact`` elements
    are probed along every coordinate, larger ones along ``probes`` random
    unit directions.
    """
    inputs = [xs] if isinstance(xs, NDTensor) else list(xs)
    if not inputs:
        raise UsageError("grad_check needs at least one input tensor")

    with Tape() as tape:
        loss = f(*inputs)
    if not isinstance(loss, NDTensor) or loss.size != 1:
        raise UsageError("grad_check requires a scalar-valued function")
    grads = backward(tape, loss, inputs)

    rng = np.random.default_rng(seed)
    total = 0
    worst = 0.0
    per_input = []
    for pos, (x, g) in enumerate(zip(inputs, grads)):
        if x.size <= max_exact:
            directions = np.eye(x.size)
        else:
            directions = rng.normal(size=(probes, x.size))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        local = 0.0
        base = x.array.reshape(-1)
        for v in directions:
            vt = v.reshape(x.shape)
            plus = [t for t in inputs]
            minus = [t for t in inputs]
            plus[pos] = NDTensor(base.reshape(x.shape) + h * vt, check=False)
            minus[pos] = NDTensor(base.reshape(x.shape) - h * vt, check=False)
            fd = (f(*plus).item() - f(*minus).item()) / (2.0 * h)
            ad = float(np.dot(g.array.reshape(-1), v))
            local = max(local, _rel_err(ad, fd))
            total += 1
        per_input.append(local)
        worst = max(worst, local)
    return GradCheckReport(worst, tol, total, per_input)
