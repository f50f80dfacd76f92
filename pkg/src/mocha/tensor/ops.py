"""Differentiable primitives over NDTensor.

Every function computes eagerly with numpy and, when a Tape is active,
records a backward closure. Convolution uses the cross-correlation
convention (no kernel flip) with "same" zero padding. All accumulation
orders are fixed, so repeated runs are bit-identical.

Constants: any operand that is not an NDTensor (python scalar, numpy array)
is treated as a constant and receives no gradient.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, expit

from ..errors import DimensionError, UsageError
from . import fft as _fft
from .core import NDTensor, Tape, wrap_result

# Names of every primitive that can appear on a tape. The forward graph of
# the full model is checked against this registry (no warping/offset ops).
OP_REGISTRY = frozenset(
    {
        "add", "sub", "mul", "div", "neg", "abs", "square", "sqrt", "exp",
        "cos", "sin", "sum", "mean", "matmul", "conv2d", "layer_norm",
        "relu", "gelu", "sigmoid", "softmax", "pixel_shuffle",
        "pixel_unshuffle", "global_avg_pool", "fft2", "ifft2", "polar",
        "reshape", "transpose", "concat", "pad", "unpad", "roll",
        "take_index", "singular_values",
    }
)

_GUARD_ATAN2 = 1e-8  # added to |z|^2 in the phase adjoint


def _operand(v):
    """Split an operand into (tensor-or-None, raw array)."""
    if isinstance(v, NDTensor):
        return v, v.array
    return None, np.asarray(v, dtype=np.float64)


def _emit(name, outputs, inputs, bwd):
    tape = Tape.active()
    if tape is not None and inputs:
        tape.record(name, outputs, inputs, bwd)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape its operand had before broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def _binary(name, a, b, value, da, db):
    ta, aa = _operand(a)
    tb, bb = _operand(b)
    out = wrap_result(value(aa, bb))
    inputs, slots = [], []
    if ta is not None:
        inputs.append(ta)
        slots.append(("a", aa.shape))
    if tb is not None:
        inputs.append(tb)
        slots.append(("b", bb.shape))
    if inputs:
        def bwd(g):
            grads = []
            for which, shape in slots:
                raw = da(g, aa, bb) if which == "a" else db(g, aa, bb)
                grads.append(_unbroadcast(raw, shape))
            return grads
        _emit(name, (out,), inputs, bwd)
    return out


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _binary("div", a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def _unary(name, a, value, derivative):
    t, arr = _operand(a)
    out = wrap_result(value(arr))
    if t is not None:
        _emit(name, (out,), (t,), lambda g: (derivative(g, arr, out.array),))
    return out


def neg(a):
    return _unary("neg", a, lambda x: -x, lambda g, x, y: -g)


def absolute(a):
    return _unary("abs", a, np.abs, lambda g, x, y: g * np.sign(x))


def square(a):
    return _unary("square", a, np.square, lambda g, x, y: 2.0 * g * x)


def sqrt(a):
    def dsqrt(g, x, y):
        safe = np.where(y > 0, 2.0 * y, 1.0)
        return np.where(y > 0, g / safe, 0.0)
    return _unary("sqrt", a, np.sqrt, dsqrt)


def exp(a):
    return _unary("exp", a, np.exp, lambda g, x, y: g * y)


def cos(a):
    return _unary("cos", a, np.cos, lambda g, x, y: -g * np.sin(x))


def sin(a):
    return _unary("sin", a, np.sin, lambda g, x, y: g * np.cos(x))


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(a, axis=None, keepdims=False):
    t, arr = _operand(a)
    axes = _norm_axes(axis, arr.ndim)
    out = wrap_result(arr.sum(axis=axes, keepdims=keepdims))
    if t is not None:
        def bwd(g):
            gg = g
            if not keepdims:
                gg = np.expand_dims(gg, axes)
            return (np.broadcast_to(gg, arr.shape).copy(),)
        _emit("sum", (out,), (t,), bwd)
    return out


def tmean(a, axis=None, keepdims=False):
    t, arr = _operand(a)
    axes = _norm_axes(axis, arr.ndim)
    count = int(np.prod([arr.shape[i] for i in axes])) if axes else 1
    out = wrap_result(arr.mean(axis=axes, keepdims=keepdims))
    if t is not None:
        def bwd(g):
            gg = g
            if not keepdims:
                gg = np.expand_dims(gg, axes)
            return (np.broadcast_to(gg / count, arr.shape).copy(),)
        _emit("mean", (out,), (t,), bwd)
    return out


def global_avg_pool(x):
    """Per-channel spatial mean: (..., H, W, C) -> (..., 1, 1, C)."""
    t, arr = _operand(x)
    if arr.ndim < 3:
        raise DimensionError(f"global_avg_pool expects (..., H, W, C), got {arr.shape}")
    out = wrap_result(arr.mean(axis=(-3, -2), keepdims=True))
    if t is not None:
        count = arr.shape[-3] * arr.shape[-2]
        def bwd(g):
            return (np.broadcast_to(g / count, arr.shape).copy(),)
        _emit("global_avg_pool", (out,), (t,), bwd)
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    """Matrix product on the last two axes; leading axes broadcast."""
    ta, aa = _operand(a)
    tb, bb = _operand(b)
    if aa.ndim < 2 or bb.ndim < 2:
        raise DimensionError("matmul operands must have rank >= 2")
    if aa.shape[-1] != bb.shape[-2]:
        raise DimensionError(
            f"matmul inner extents disagree: {aa.shape} x {bb.shape}"
        )
    out = wrap_result(aa @ bb)
    inputs, slots = [], []
    if ta is not None:
        inputs.append(ta)
        slots.append("a")
    if tb is not None:
        inputs.append(tb)
        slots.append("b")
    if inputs:
        def bwd(g):
            grads = []
            for which in slots:
                if which == "a":
                    grads.append(_unbroadcast(g @ bb.swapaxes(-1, -2), aa.shape))
                else:
                    grads.append(_unbroadcast(aa.swapaxes(-1, -2) @ g, bb.shape))
            return grads
        _emit("matmul", (out,), inputs, bwd)
    return out


def _same_pad(extent, kernel, dilation, stride):
    eff = (kernel - 1) * dilation + 1
    out = -(-extent // stride)
    total = max((out - 1) * stride + eff - extent, 0)
    return out, total // 2, total - total // 2


def conv2d(x, w, mode="full", dilation=1, stride=1):
    """2-D cross-correlation with "same" zero padding.

    ``x`` is (..., H, W, C_in) with leading axes folded into a batch.
    Weight layout per mode:
      full:      (kh, kw, C_in, C_out)
      depthwise: (kh, kw, C) with C_out == C
      pointwise: (C_in, C_out), a 1x1 kernel
    """
    tx, xa = _operand(x)
    tw, wa = _operand(w)
    if xa.ndim < 3:
        raise DimensionError(f"conv2d expects (..., H, W, C), got {xa.shape}")
    if dilation < 1 or stride < 1:
        raise UsageError("dilation and stride must be >= 1")
    lead = xa.shape[:-3]
    h, wd, cin = xa.shape[-3:]

    if mode == "pointwise":
        if wa.ndim != 2 or wa.shape[0] != cin:
            raise DimensionError(
                f"pointwise kernel must be ({cin}, C_out), got {wa.shape}"
            )
        return matmul(x, w)

    if mode == "depthwise":
        if wa.ndim != 3 or wa.shape[2] != cin:
            raise DimensionError(
                f"depthwise kernel must be (kh, kw, {cin}), got {wa.shape}"
            )
        kh, kw = wa.shape[:2]
        cout = cin
    elif mode == "full":
        if wa.ndim != 4 or wa.shape[2] != cin:
            raise DimensionError(
                f"full kernel must be (kh, kw, {cin}, C_out), got {wa.shape}"
            )
        kh, kw, _, cout = wa.shape
    else:
        raise UsageError(f"unknown conv2d mode {mode!r}")

    oh, pt, pb = _same_pad(h, kh, dilation, stride)
    ow, pl, pr = _same_pad(wd, kw, dilation, stride)
    if (kh - 1) * dilation + 1 > h + pt + pb or (kw - 1) * dilation + 1 > wd + pl + pr:
        raise DimensionError("kernel larger than padded input")

    xb = xa.reshape((-1, h, wd, cin))
    xp = np.pad(xb, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    out = np.zeros((xb.shape[0], oh, ow, cout))
    taps = []
    for i in range(kh):
        for j in range(kw):
            sl = xp[:, i * dilation: i * dilation + (oh - 1) * stride + 1: stride,
                    j * dilation: j * dilation + (ow - 1) * stride + 1: stride, :]
            taps.append(sl)
            if mode == "depthwise":
                out += sl * wa[i, j]
            else:
                out += sl @ wa[i, j]
    result = wrap_result(out.reshape(lead + (oh, ow, cout)))

    inputs, slots = [], []
    if tx is not None:
        inputs.append(tx)
        slots.append("x")
    if tw is not None:
        inputs.append(tw)
        slots.append("w")
    if inputs:
        def bwd(g):
            gb = g.reshape((-1, oh, ow, cout))
            grads = []
            need_x = "x" in slots
            dxp = np.zeros_like(xp) if need_x else None
            dw = np.zeros_like(wa) if "w" in slots else None
            for idx, (i, j) in enumerate((i, j) for i in range(kh) for j in range(kw)):
                sl = taps[idx]
                if dw is not None:
                    if mode == "depthwise":
                        dw[i, j] = np.einsum("bhwc,bhwc->c", sl, gb)
                    else:
                        dw[i, j] = np.tensordot(sl, gb, axes=([0, 1, 2], [0, 1, 2]))
                if need_x:
                    view = dxp[:, i * dilation: i * dilation + (oh - 1) * stride + 1: stride,
                               j * dilation: j * dilation + (ow - 1) * stride + 1: stride, :]
                    if mode == "depthwise":
                        view += gb * wa[i, j]
                    else:
                        view += gb @ wa[i, j].T
            for which in slots:
                if which == "x":
                    dx = dxp[:, pt: pt + h, pl: pl + wd, :]
                    grads.append(dx.reshape(xa.shape))
                else:
                    grads.append(dw)
            return grads
        _emit("conv2d", (result,), inputs, bwd)
    return result


# ---------------------------------------------------------------------------
# normalization and activations
# ---------------------------------------------------------------------------

def layer_norm(x, gamma, beta, eps=1e-5):
    """Zero-mean unit-variance over the channel (last) axis, then affine."""
    if eps <= 0:
        raise UsageError("layer_norm eps must be positive")
    tx, xa = _operand(x)
    tg, ga = _operand(gamma)
    tb, ba = _operand(beta)
    c = xa.shape[-1]
    if ga.shape != (c,) or ba.shape != (c,):
        raise DimensionError(f"gamma/beta must have shape ({c},)")
    mu = xa.mean(axis=-1, keepdims=True)
    xc = xa - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = wrap_result(xhat * ga + ba)
    inputs, slots = [], []
    for t, name in ((tx, "x"), (tg, "gamma"), (tb, "beta")):
        if t is not None:
            inputs.append(t)
            slots.append(name)
    if inputs:
        def bwd(g):
            grads = []
            for which in slots:
                if which == "x":
                    gh = g * ga
                    m1 = gh.mean(axis=-1, keepdims=True)
                    m2 = (gh * xhat).mean(axis=-1, keepdims=True)
                    grads.append((gh - m1 - xhat * m2) * inv)
                elif which == "gamma":
                    grads.append(
                        (g * xhat).reshape(-1, c).sum(axis=0)
                    )
                else:
                    grads.append(g.reshape(-1, c).sum(axis=0))
            return grads
        _emit("layer_norm", (out,), inputs, bwd)
    return out


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """Exact erf formulation: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    def val(a):
        return 0.5 * a * (1.0 + erf(a * _INV_SQRT2))
    def dval(g, a, y):
        cdf = 0.5 * (1.0 + erf(a * _INV_SQRT2))
        pdf = np.exp(-0.5 * a * a) * _INV_SQRT_2PI
        return g * (cdf + a * pdf)
    return _unary("gelu", x, val, dval)


def relu(x):
    return _unary("relu", x, lambda a: np.maximum(a, 0.0),
                  lambda g, a, y: g * (a > 0))


def sigmoid(x):
    return _unary("sigmoid", x, expit, lambda g, a, y: g * y * (1.0 - y))


def softmax(x, axis):
    """Max-subtracted softmax along ``axis``; slices sum to one."""
    t, arr = _operand(x)
    ax = axis % arr.ndim
    shifted = arr - arr.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=ax, keepdims=True)
    out = wrap_result(y)
    if t is not None:
        def bwd(g):
            dot = (g * y).sum(axis=ax, keepdims=True)
            return (y * (g - dot),)
        _emit("softmax", (out,), (t,), bwd)
    return out


def activation(x, kind, axis=None):
    """Dispatcher over the supported nonlinearities."""
    if kind == "gelu":
        return gelu(x)
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        if axis is None:
            raise UsageError("softmax requires a designated axis")
        return softmax(x, axis)
    raise UsageError(f"unknown activation kind {kind!r}")


# ---------------------------------------------------------------------------
# rearrangement
# ---------------------------------------------------------------------------

def reshape(x, shape):
    t, arr = _operand(x)
    out = wrap_result(arr.reshape(shape))
    if t is not None:
        _emit("reshape", (out,), (t,), lambda g: (g.reshape(arr.shape),))
    return out


def transpose(x, axes):
    t, arr = _operand(x)
    axes = tuple(a % arr.ndim for a in axes)
    out = wrap_result(arr.transpose(axes))
    if t is not None:
        inv = tuple(np.argsort(axes))
        _emit("transpose", (out,), (t,), lambda g: (g.transpose(inv),))
    return out


def concat(parts, axis):
    tensors = [p if isinstance(p, NDTensor) else NDTensor(p) for p in parts]
    ax = axis % tensors[0].ndim
    out = wrap_result(np.concatenate([t.array for t in tensors], axis=ax))
    sizes = [t.shape[ax] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    def bwd(g):
        return [
            np.take(g, range(offsets[i], offsets[i + 1]), axis=ax)
            for i in range(len(tensors))
        ]
    _emit("concat", (out,), tuple(tensors), bwd)
    return out


def pad(x, pads):
    """Zero padding; ``pads`` is one (before, after) pair per axis."""
    t, arr = _operand(x)
    pads = tuple((int(b), int(a)) for b, a in pads)
    if len(pads) != arr.ndim:
        raise DimensionError("pad needs one (before, after) pair per axis")
    out = wrap_result(np.pad(arr, pads))
    if t is not None:
        sl = tuple(slice(b, b + n) for (b, _), n in zip(pads, arr.shape))
        _emit("pad", (out,), (t,), lambda g: (g[sl],))
    return out


def unpad(x, pads):
    """Inverse of :func:`pad`: crop (before, after) cells per axis."""
    t, arr = _operand(x)
    pads = tuple((int(b), int(a)) for b, a in pads)
    if len(pads) != arr.ndim:
        raise DimensionError("unpad needs one (before, after) pair per axis")
    sl = tuple(slice(b, n - a) for (b, a), n in zip(pads, arr.shape))
    out = wrap_result(arr[sl])
    if t is not None:
        _emit("unpad", (out,), (t,), lambda g: (np.pad(g, pads),))
    return out


def roll(x, shifts, axes):
    t, arr = _operand(x)
    out = wrap_result(np.roll(arr, shifts, axis=axes))
    if t is not None:
        inv = tuple(-s for s in shifts)
        _emit("roll", (out,), (t,), lambda g: (np.roll(g, inv, axis=axes),))
    return out


def take_index(x, axis, index):
    """Select one index along an axis (drops that axis)."""
    t, arr = _operand(x)
    ax = axis % arr.ndim
    out = wrap_result(np.take(arr, index, axis=ax))
    if t is not None:
        def bwd(g):
            full = np.zeros_like(arr)
            sl = [slice(None)] * arr.ndim
            sl[ax] = index
            full[tuple(sl)] = g
            return (full,)
        _emit("take_index", (out,), (t,), bwd)
    return out


def pixel_shuffle(x, r):
    """Sub-pixel rearrangement (..., H, W, r*r*C) -> (..., rH, rW, C).

    Input channel (dy*r + dx)*C + c lands at spatial offset (dy, dx) of
    output channel c.
    """
    t, arr = _operand(x)
    if arr.ndim < 3:
        raise DimensionError(f"pixel_shuffle expects (..., H, W, C), got {arr.shape}")
    h, w, ch = arr.shape[-3:]
    if ch % (r * r) != 0:
        raise DimensionError(f"channels {ch} not divisible by r^2 = {r * r}")
    c = ch // (r * r)
    lead = arr.shape[:-3]
    nl = len(lead)
    stage = arr.reshape(lead + (h, w, r, r, c))
    stage = np.moveaxis(stage, (nl + 2, nl + 3), (nl + 1, nl + 3))
    out = wrap_result(np.ascontiguousarray(stage).reshape(lead + (h * r, w * r, c)))
    if t is not None:
        _emit("pixel_shuffle", (out,), (t,),
              lambda g: (_unshuffle_array(g, r),))
    return out


def _unshuffle_array(arr: np.ndarray, r: int) -> np.ndarray:
    hr, wr, c = arr.shape[-3:]
    lead = arr.shape[:-3]
    nl = len(lead)
    stage = arr.reshape(lead + (hr // r, r, wr // r, r, c))
    stage = np.moveaxis(stage, (nl + 1, nl + 3), (nl + 2, nl + 3))
    return np.ascontiguousarray(stage).reshape(lead + (hr // r, wr // r, r * r * c))


def pixel_unshuffle(x, r):
    """Inverse of :func:`pixel_shuffle`."""
    t, arr = _operand(x)
    if arr.ndim < 3:
        raise DimensionError(f"pixel_unshuffle expects (..., H, W, C), got {arr.shape}")
    hr, wr = arr.shape[-3], arr.shape[-2]
    if hr % r or wr % r:
        raise DimensionError(f"spatial extents {(hr, wr)} not divisible by r={r}")
    out = wrap_result(_unshuffle_array(arr, r))
    if t is not None:
        def bwd(g):
            h, w, ch = g.shape[-3:]
            lead = g.shape[:-3]
            nl = len(lead)
            stage = g.reshape(lead + (h, w, r, r, ch // (r * r)))
            stage = np.moveaxis(stage, (nl + 2, nl + 3), (nl + 1, nl + 3))
            return (np.ascontiguousarray(stage).reshape(arr.shape),)
        _emit("pixel_unshuffle", (out,), (t,), bwd)
    return out


# ---------------------------------------------------------------------------
# spectral ops
# ---------------------------------------------------------------------------

class ComplexSpectrum:
    """Real/imaginary pair produced by the 2-D Fourier transform."""

    __slots__ = ("re", "im")

    def __init__(self, re: NDTensor, im: NDTensor):
        if re.shape != im.shape:
            raise DimensionError(
                f"spectrum halves disagree: {re.shape} vs {im.shape}"
            )
        self.re = re
        self.im = im

    @property
    def shape(self):
        return self.re.shape

    def complex_array(self) -> np.ndarray:
        return self.re.array + 1j * self.im.array


def fft2(x) -> ComplexSpectrum:
    """Unnormalized forward 2-D DFT.

    Rank-2 input is one (H, W) plane; rank >= 3 is (..., H, W, C) and the
    transform runs per channel and per leading index.
    """
    t, arr = _operand(x)
    spec = _fft.fft2_complex(arr)
    re = wrap_result(np.ascontiguousarray(spec.real))
    im = wrap_result(np.ascontiguousarray(spec.imag))
    if t is not None:
        def bwd(gre, gim):
            g = gre - 1j * gim  # conjugate of the cotangent
            return (np.ascontiguousarray(_fft.fft2_complex(g).real),)
        _emit("fft2", (re, im), (t,), bwd)
    return ComplexSpectrum(re, im)


def ifft2(spectrum: ComplexSpectrum) -> NDTensor:
    """1/(H*W)-normalized inverse transform; returns the real part."""
    sre, sim = spectrum.re, spectrum.im
    z = sre.array + 1j * sim.array
    rec = _fft.ifft2_complex(z)
    out = wrap_result(np.ascontiguousarray(rec.real))
    def bwd(g):
        ax = (-2, -1) if g.ndim == 2 else (-3, -2)
        n = g.shape[ax[0]] * g.shape[ax[1]]
        gz = _fft.fft2_complex(g) / n
        return (
            np.ascontiguousarray(gz.real),
            np.ascontiguousarray(gz.imag),
        )
    _emit("ifft2", (out,), (sre, sim), bwd)
    return out


def polar(re, im) -> tuple[NDTensor, NDTensor]:
    """Amplitude (Euclidean magnitude) and phase (two-argument arctangent).

    The phase adjoint adds 1e-8 to |z|^2 so near-zero bins stay finite.
    """
    tre, ra = _operand(re)
    tim, ia = _operand(im)
    if ra.shape != ia.shape:
        raise DimensionError(f"polar halves disagree: {ra.shape} vs {ia.shape}")
    amp_arr = np.hypot(ra, ia)
    ph_arr = np.arctan2(ia, ra)
    amp = wrap_result(amp_arr)
    ph = wrap_result(ph_arr)
    inputs, slots = [], []
    if tre is not None:
        inputs.append(tre)
        slots.append("re")
    if tim is not None:
        inputs.append(tim)
        slots.append("im")
    if inputs:
        def bwd(gamp, gph):
            r_safe = np.where(amp_arr > 0, amp_arr, 1.0)
            unit_re = np.where(amp_arr > 0, ra / r_safe, 0.0)
            unit_im = np.where(amp_arr > 0, ia / r_safe, 0.0)
            denom = ra * ra + ia * ia + _GUARD_ATAN2
            grads = []
            for which in slots:
                if which == "re":
                    grads.append(gamp * unit_re - gph * ia / denom)
                else:
                    grads.append(gamp * unit_im + gph * ra / denom)
            return grads
        _emit("polar", (amp, ph), inputs, bwd)
    return amp, ph


def amplitude(spectrum: ComplexSpectrum) -> NDTensor:
    return polar(spectrum.re, spectrum.im)[0]
