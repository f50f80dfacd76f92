"""Core value types for the tensor layer.

NDTensor is the universal value type: a real-valued N-d array (row-major,
float64 for verification, float32 allowed for speed). Autodiff is tape-based:
primitives in :mod:`mocha.tensor.ops` record onto the active Tape, and
``backward`` replays the records in exact reverse execution order.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from ..errors import DimensionError, UsageError

_UID = itertools.count(1)

# When True, every op output is re-validated for NaN/Inf (slower).
_DEBUG_CHECKS = True


def set_debug_checks(enabled: bool) -> bool:
    """Toggle post-op finiteness validation. Returns the previous setting."""
    global _DEBUG_CHECKS
    previous = _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)
    return previous


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS


class NDTensor:
    """Real N-dimensional array with shape metadata.

    Invariants: ``prod(shape) == data.size`` and every element is finite.
    Values are treated as immutable once created; autodiff identity is the
    ``uid`` assigned at construction.
    """

    __slots__ = ("array", "uid")

    def __init__(self, values, dtype=None, check: bool = True):
        arr = np.asarray(values, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if not arr.flags.c_contiguous:
            # ascontiguousarray would promote 0-d scalars to rank 1
            arr = np.ascontiguousarray(arr) if arr.ndim else arr.copy()
        if check and not np.all(np.isfinite(arr)):
            raise UsageError("NDTensor rejects non-finite values (NaN/Inf)")
        self.array = arr
        self.uid = next(_UID)

    # -- metadata ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def dtype(self):
        return self.array.dtype

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the payload."""
        return self.array.reshape(-1)

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() requires a scalar, got shape {self.shape}")
        return float(self.array.reshape(-1)[0])

    def copy(self) -> "NDTensor":
        return NDTensor(self.array.copy(), check=False)

    def astype(self, dtype) -> "NDTensor":
        return NDTensor(self.array.astype(dtype), check=False)

    def __repr__(self) -> str:
        return f"NDTensor(shape={self.shape}, dtype={self.array.dtype.name}, uid={self.uid})"


def wrap_result(array: np.ndarray) -> NDTensor:
    """Wrap an op output, validating finiteness only in debug mode."""
    return NDTensor(array, check=_DEBUG_CHECKS)


def as_ndtensor(value) -> NDTensor:
    return value if isinstance(value, NDTensor) else NDTensor(value)


class _TapeEntry:
    __slots__ = ("name", "out_uids", "out_shapes", "in_uids", "bwd")

    def __init__(self, name, out_uids, out_shapes, in_uids, bwd):
        self.name = name
        self.out_uids = out_uids
        self.out_shapes = out_shapes
        self.in_uids = in_uids
        self.bwd = bwd


class Tape:
    """Ordered record of executed primitives for one forward/backward pass.

    Single-writer: enter the tape (``with Tape() as t:``) around the forward
    pass, then call :meth:`grad`. Entries are replayed in exact reverse
    execution order; entries whose outputs received no gradient are skipped.
    """

    _active = threading.local()

    def __init__(self):
        self._entries: list[_TapeEntry] = []
        self._known: set[int] = set()

    # -- recording ---------------------------------------------------------

    @classmethod
    def active(cls) -> "Tape | None":
        return getattr(cls._active, "tape", None)

    def __enter__(self) -> "Tape":
        if Tape.active() is not None:
            raise UsageError("a Tape is already active; tapes do not nest")
        Tape._active.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        Tape._active.tape = None
        return False

    def record(
        self,
        name: str,
        outputs: Sequence[NDTensor],
        inputs: Sequence[NDTensor],
        bwd: Callable,
    ) -> None:
        entry = _TapeEntry(
            name,
            tuple(t.uid for t in outputs),
            tuple(t.shape for t in outputs),
            tuple(t.uid for t in inputs),
            bwd,
        )
        self._entries.append(entry)
        self._known.update(entry.out_uids)
        self._known.update(entry.in_uids)

    @property
    def op_names(self) -> list[str]:
        """Names of recorded primitives, in execution order."""
        return [e.name for e in self._entries]

    def __len__(self) -> int:
        return len(self._entries)

    # -- reverse pass ------------------------------------------------------

    def grad(self, loss: NDTensor) -> dict[int, np.ndarray]:
        """Reverse-mode gradients of a scalar loss w.r.t. every taped value."""
        if loss.size != 1:
            raise UsageError(f"loss must be scalar, got shape {loss.shape}")
        if loss.uid not in self._known:
            raise UsageError("loss was not produced by an op recorded on this tape")
        grads: dict[int, np.ndarray] = {
            loss.uid: np.ones(loss.shape, dtype=loss.dtype)
        }
        for entry in reversed(self._entries):
            if not any(uid in grads for uid in entry.out_uids):
                continue
            gouts = []
            for uid, shape in zip(entry.out_uids, entry.out_shapes):
                g = grads.get(uid)
                if g is None:
                    g = np.zeros(shape)
                gouts.append(g)
            gins = entry.bwd(*gouts)
            if len(gins) != len(entry.in_uids):
                raise UsageError(
                    f"op {entry.name}: backward returned {len(gins)} grads "
                    f"for {len(entry.in_uids)} inputs"
                )
            for uid, g in zip(entry.in_uids, gins):
                if g is None:
                    continue
                acc = grads.get(uid)
                grads[uid] = g if acc is None else acc + g
        return grads


class ParamStore:
    """Named, insertion-ordered collection of trainable tensors.

    Each name carries an lr_scale multiplier (default 1.0) consumed by the
    optimizer; the trainer's stage-transition logic is the only writer.
    """

    def __init__(self):
        self._params: dict[str, NDTensor] = {}
        self._lr_scale: dict[str, float] = {}

    def add(self, name: str, value: NDTensor, lr_scale: float = 1.0) -> NDTensor:
        if name in self._params:
            raise UsageError(f"parameter {name!r} already exists")
        if lr_scale <= 0:
            raise UsageError(f"lr_scale must be positive, got {lr_scale}")
        self._params[name] = as_ndtensor(value)
        self._lr_scale[name] = float(lr_scale)
        return self._params[name]

    def __getitem__(self, name: str) -> NDTensor:
        try:
            return self._params[name]
        except KeyError:
            raise UsageError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self._params if n.startswith(prefix)]

    def items(self) -> Iterable[tuple[str, NDTensor]]:
        return self._params.items()

    def replace(self, name: str, value: NDTensor) -> None:
        """Swap the tensor behind a name (optimizer updates)."""
        old = self[name]
        if old.shape != value.shape:
            raise DimensionError(
                f"parameter {name!r}: shape {value.shape} != {old.shape}"
            )
        self._params[name] = value

    def lr_scale(self, name: str) -> float:
        self[name]
        return self._lr_scale[name]

    def set_lr_scale(self, name: str, scale: float) -> None:
        self[name]
        if scale <= 0:
            raise UsageError(f"lr_scale must be positive, got {scale}")
        self._lr_scale[name] = float(scale)

    def copy(self) -> "ParamStore":
        dup = ParamStore()
        for name, value in self.items():
            dup.add(name, value.copy(), self._lr_scale[name])
        return dup


def backward(tape: Tape, loss: NDTensor, params: ParamStore | Sequence[NDTensor]):
    """Gradients of ``loss`` w.r.t. ``params``, in ParamStore order.

    Parameters never touched by the forward pass get zero gradients.
    """
    grads = tape.grad(loss)
    if isinstance(params, ParamStore):
        tensors = [t for _, t in params.items()]
    else:
        tensors = list(params)
    out = []
    for t in tensors:
        g = grads.get(t.uid)
        out.append(NDTensor(np.zeros(t.shape) if g is None else g, check=False))
    return out


def he_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
    gain: float = 1.0,
) -> NDTensor:
    """Fan-in-scaled uniform init, U(-g*sqrt(6/fan_in), +g*sqrt(6/fan_in)).

    ``gain`` < 1 damps residual-branch terminals and output heads so deep
    residual stacks start near the identity.
    """
    bound = gain * float(np.sqrt(6.0 / max(fan_in, 1)))
    return NDTensor(rng.uniform(-bound, bound, size=shape))
