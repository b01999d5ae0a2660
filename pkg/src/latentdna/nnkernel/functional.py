"""Differentiable layer primitives with hand-written backward rules.

Batched layouts follow the usual channel-first convention: ``(N, C, L)`` for
1-D signals and ``(N, C, H, W)`` for images. The 1-D/2-D convolutions and
pooling also accept unbatched input and return unbatched output.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import DimensionError, Tensor, _accumulate, concat

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
CE_EPS = 1e-12


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


# ---------------------------------------------------------------------------
# raw numpy convolution kernels
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, oh: int, ow: int) -> np.ndarray:
    """Patches of ``xp`` (N,C,Hp,Wp) as ``(N, C*kh*kw, oh*ow)``."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (oh - 1) * sh + 1 : sh, : (ow - 1) * sw + 1 : sw]
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)


def _col2im(cols: np.ndarray, out_shape, kh, kw, sh, sw, oh, ow) -> np.ndarray:
    """Scatter-add patches ``(N, C*kh*kw, oh*ow)`` back onto ``out_shape``."""
    n, c = out_shape[:2]
    cols = cols.reshape(n, c, kh, kw, oh, ow)
    out = np.zeros(out_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + (oh - 1) * sh + 1 : sh, j : j + (ow - 1) * sw + 1 : sw] += cols[:, :, i, j]
    return out


def _pad2d(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if not (ph or pw):
        return x
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
    out[:, :, ph : ph + h, pw : pw + w] = x
    return out


def _batched_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum_n a[n] @ b[n].T`` for (N, P, K) and (N, Q, K)."""
    return np.matmul(a, b.transpose(0, 2, 1)).sum(axis=0)


def _conv_out(size: int, k: int, s: int, p: int) -> int:
    return (size + 2 * p - k) // s + 1


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """Cross-correlation of ``x`` (N,C,H,W) with ``weight`` (O,C,kh,kw)."""
    unbatched = x.ndim == 3
    if unbatched:
        x = x.reshape(1, *x.shape)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, ck, kh, kw = weight.shape
    if c != ck:
        raise DimensionError(f"conv2d channel axis: input has {c} channels, kernel expects {ck}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if sh < 1 or sw < 1:
        raise ValueError("stride must be >= 1")
    if kh > h + 2 * ph:
        raise DimensionError(f"conv2d height axis: kernel {kh} exceeds padded input {h + 2 * ph}")
    if kw > w + 2 * pw:
        raise DimensionError(f"conv2d width axis: kernel {kw} exceeds padded input {w + 2 * pw}")
    oh, ow = _conv_out(h, kh, sh, ph), _conv_out(w, kw, sw, pw)

    pointwise = kh == kw == 1 and sh == sw == 1 and ph == pw == 0
    if pointwise:
        xp = x.data
        cols = xp.reshape(n, c, h * w)
    else:
        xp = _pad2d(x.data, ph, pw)
        cols = _im2col(xp, kh, kw, sh, sw, oh, ow)
    wmat = weight.data.reshape(o, -1)
    out = np.matmul(wmat, cols)
    if bias is not None:
        out += bias.data.reshape(1, o, 1)
    out = out.reshape(n, o, oh, ow)

    def backward(g):
        gm = g.reshape(n, o, oh * ow)
        if weight.requires_grad:
            _accumulate(weight, _batched_outer(gm, cols).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, gm.sum(axis=(0, 2)))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, gm)
            if pointwise:
                _accumulate(x, gcols.reshape(x.shape))
            else:
                gxp = _col2im(gcols, xp.shape, kh, kw, sh, sw, oh, ow)
                _accumulate(x, gxp[:, :, ph : ph + h, pw : pw + w])

    parents = (x, weight) if bias is None else (x, weight, bias)
    res = Tensor._result(out, parents, backward)
    return res.reshape(res.shape[1:]) if unbatched else res


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x`` (N,C,L) with ``weight`` (O,C,K)."""
    unbatched = x.ndim == 2
    if unbatched:
        x = x.reshape(1, *x.shape)
    if x.ndim != 3 or weight.ndim != 3:
        raise DimensionError(f"conv1d expects 3-D input and kernel, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"conv1d channel axis: input has {x.shape[1]} channels, kernel expects {weight.shape[1]}"
        )
    if weight.shape[2] > x.shape[2] + 2 * padding:
        raise DimensionError(
            f"conv1d length axis: kernel {weight.shape[2]} exceeds padded input {x.shape[2] + 2 * padding}"
        )
    n, c, length = x.shape
    out = conv2d(
        x.reshape(n, c, 1, length),
        weight.reshape(weight.shape[0], c, 1, weight.shape[2]),
        bias,
        stride=(1, stride),
        padding=(0, padding),
    )
    out = out.reshape(n, weight.shape[0], out.shape[-1])
    return out.reshape(out.shape[1:]) if unbatched else out


def transposed_conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1) -> Tensor:
    """Adjoint of :func:`conv2d` (zero padding).

    ``weight`` has layout (C_in, C_out, kh, kw), i.e. the same array that a
    conv2d from C_out to C_in channels would use.
    """
    unbatched = x.ndim == 3
    if unbatched:
        x = x.reshape(1, *x.shape)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(
            f"transposed_conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}"
        )
    n, cin, h, w = x.shape
    ck, cout, kh, kw = weight.shape
    if cin != ck:
        raise DimensionError(f"transposed_conv2d channel axis: input has {cin} channels, kernel expects {ck}")
    sh, sw = _pair(stride)
    if sh < 1 or sw < 1:
        raise ValueError("stride must be >= 1")
    oh, ow = (h - 1) * sh + kh, (w - 1) * sw + kw

    xm = x.data.reshape(n, cin, h * w)
    wmat = weight.data.reshape(cin, -1)
    out = _col2im(np.matmul(wmat.T, xm), (n, cout, oh, ow), kh, kw, sh, sw, h, w)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)

    def backward(g):
        cols = _im2col(g, kh, kw, sh, sw, h, w)
        if x.requires_grad:
            _accumulate(x, np.matmul(wmat, cols).reshape(x.shape))
        if weight.requires_grad:
            _accumulate(weight, _batched_outer(xm, cols).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))

    parents = (x, weight) if bias is None else (x, weight, bias)
    res = Tensor._result(out, parents, backward)
    return res.reshape(res.shape[1:]) if unbatched else res


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    out = x @ weight.transpose(1, 0)
    return out if bias is None else out + bias


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def maxpool1d(x: Tensor, window: int) -> Tensor:
    """Non-overlapping max pool along the last axis.

    The backward pass routes each output gradient to the first (lowest
    index) maximiser of its window.
    """
    length = x.shape[-1]
    if window < 1 or length % window:
        raise DimensionError(f"maxpool1d length axis: window {window} does not divide {length}")
    lead = x.shape[:-1]
    xr = x.data.reshape(*lead, length // window, window)
    idx = xr.argmax(axis=-1)[..., None]
    out = np.take_along_axis(xr, idx, axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(xr)
        np.put_along_axis(full, idx, g[..., None], axis=-1)
        _accumulate(x, full.reshape(x.shape))

    return Tensor._result(out, (x,), backward)


def upsample_nearest(x: Tensor, factor: int, spatial_dims: int | None = None) -> Tensor:
    """Repeat every element ``factor`` times along the trailing spatial axes.

    ``spatial_dims`` defaults to ``ndim - 2`` for batched channel-first input
    (and 1 for 1-D/2-D input).
    """
    if factor < 1:
        raise ValueError("upsample factor must be >= 1")
    if spatial_dims is None:
        spatial_dims = max(1, x.ndim - 2)
    if factor == 1:
        return x
    axes = list(range(x.ndim - spatial_dims, x.ndim))
    out = x.data
    for ax in axes:
        out = np.repeat(out, factor, axis=ax)

    def backward(g):
        shape = []
        for i, s in enumerate(x.shape):
            if i in axes:
                shape.extend([s, factor])
            else:
                shape.append(s)
        red = tuple(i + 1 + axes.index(i) for i in axes)
        _accumulate(x, g.reshape(shape).sum(axis=red))

    return Tensor._result(out, (x,), backward)


# ---------------------------------------------------------------------------
# normalisation
# ---------------------------------------------------------------------------

def batchnorm(
    x: Tensor,
    scale: Tensor,
    shift: Tensor,
    training: bool,
    running_mean: np.ndarray | None = None,
    running_var: np.ndarray | None = None,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Per-channel batch normalisation over the batch and spatial axes.

    In training mode the running statistics (if given) are updated in place
    by an exponential moving average; the running variance tracks the
    unbiased estimate.
    """
    c = x.shape[1]
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)
    gamma = scale.data.reshape(bshape)
    beta = shift.data.reshape(bshape)

    if training:
        count = x.data.size // c
        if x.shape[0] < 2:
            raise DimensionError("batchnorm in train mode needs batch size >= 2")
        mean = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        if running_mean is not None:
            running_mean *= 1 - momentum
            running_mean += momentum * mean.reshape(c)
        if running_var is not None:
            running_var *= 1 - momentum
            running_var += momentum * var.reshape(c) * count / max(count - 1, 1)
    else:
        count = None
        mean = running_mean.reshape(bshape).astype(x.dtype)
        var = running_var.reshape(bshape).astype(x.dtype)

    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = xhat * gamma + beta

    def backward(g):
        gsum = g.sum(axis=axes, keepdims=True)
        gxsum = (g * xhat).sum(axis=axes, keepdims=True)
        if scale.requires_grad:
            _accumulate(scale, gxsum.reshape(c))
        if shift.requires_grad:
            _accumulate(shift, gsum.reshape(c))
        if x.requires_grad:
            if training:
                dx = g - gsum / count
                dx -= xhat * (gxsum / count)
                dx *= gamma * inv
            else:
                dx = g * (gamma * inv)
            _accumulate(x, dx)

    return Tensor._result(out, (x, scale, shift), backward)


def group_norm(x: Tensor, groups: int, scale: Tensor, shift: Tensor, eps: float = BN_EPS) -> Tensor:
    """Normalise each sample over channel groups and spatial positions."""
    n, c = x.shape[:2]
    if c % groups:
        raise DimensionError(f"group_norm channel axis: {c} channels not divisible by {groups} groups")
    xr = x.data.reshape(n, groups, -1)
    mean = xr.mean(axis=-1, keepdims=True)
    var = xr.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xr - mean) * inv).reshape(x.shape)
    bshape = (1, c) + (1,) * (x.ndim - 2)
    gamma = scale.data.reshape(bshape)
    out = xhat * gamma + shift.data.reshape(bshape)
    red = (0,) + tuple(range(2, x.ndim))

    def backward(g):
        if scale.requires_grad:
            _accumulate(scale, (g * xhat).sum(axis=red))
        if shift.requires_grad:
            _accumulate(shift, g.sum(axis=red))
        if x.requires_grad:
            dxhat = (g * gamma).reshape(n, groups, -1)
            xh = xhat.reshape(n, groups, -1)
            dx = inv * (
                dxhat - dxhat.mean(axis=-1, keepdims=True) - xh * (dxhat * xh).mean(axis=-1, keepdims=True)
            )
            _accumulate(x, dx.reshape(x.shape))

    return Tensor._result(out, (x, scale, shift), backward)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    if 0.0 <= slope <= 1.0:
        out = np.maximum(x.data, x.data * x.dtype.type(slope))
    else:
        out = np.where(x.data > 0, x.data, slope * x.data)

    def backward(g):
        mult = np.where(x.data > 0, x.dtype.type(1.0), x.dtype.type(slope))
        _accumulate(x, g * mult)

    return Tensor._result(out, (x,), backward)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    out = np.tanh(a * a.dtype.type(0.5))
    out += 1
    out *= 0.5
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return Tensor._result(s, (x,), lambda g: _accumulate(x, g * s * (1 - s)))


def swish(x: Tensor) -> Tensor:
    """``x * sigmoid(x)``."""
    s = _sigmoid(x.data)
    out = x.data * s
    return Tensor._result(out, (x,), lambda g: _accumulate(x, g * (s + out * (1 - s))))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(x, y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return Tensor._result(y, (x,), backward)


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def attention(
    query: Tensor,
    key: Tensor,
    value: Tensor,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
    wo: Tensor,
    heads: int,
    return_weights: bool = False,
):
    """Multi-head scaled dot-product attention without biases or dropout.

    ``query`` is (B, N, d), ``key``/``value`` are (B, M, d_kv); unbatched 2-D
    input is accepted. Projections are right-multiplied: ``wq`` is
    (d, inner), ``wk``/``wv`` are (d_kv, inner) and ``wo`` is (inner, d).
    Scores are scaled by ``1/sqrt(inner/heads)``.
    """
    unbatched = query.ndim == 2
    if unbatched:
        query = query.reshape(1, *query.shape)
        key = key.reshape(1, *key.shape)
        value = value.reshape(1, *value.shape)
    b, n, _ = query.shape
    m = key.shape[1]
    if value.shape[1] != m:
        raise DimensionError(f"attention token axis: key has {m} rows, value has {value.shape[1]}")
    inner = wq.shape[1]
    if inner % heads:
        raise DimensionError(f"attention feature axis: width {inner} not divisible by {heads} heads")
    dh = inner // heads

    q = (query @ wq).reshape(b, n, heads, dh).transpose(0, 2, 1, 3)
    k = (key @ wk).reshape(b, m, heads, dh).transpose(0, 2, 3, 1)
    v = (value @ wv).reshape(b, m, heads, dh).transpose(0, 2, 1, 3)
    weights = softmax((q @ k) * (1.0 / math.sqrt(dh)), axis=-1)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(b, n, inner) @ wo
    if unbatched:
        out = out.reshape(out.shape[1:])
    if return_weights:
        return out, weights
    return out


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def cross_entropy(probs: Tensor, target, axis: int = -1, reduction: str = "mean") -> Tensor:
    """``-sum(target * log(probs + 1e-12))`` over the class axis.

    ``reduction`` is applied over every remaining position: ``"mean"``,
    ``"sum"`` or ``"none"``.
    """
    target = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=probs.dtype)
    if target.shape != probs.shape:
        raise DimensionError(f"cross_entropy shapes differ: {probs.shape} vs {target.shape}")
    per = -((probs + CE_EPS).log() * Tensor(target.astype(probs.dtype))).sum(axis=axis)
    if reduction == "mean":
        return per.mean()
    if reduction == "sum":
        return per.sum()
    if reduction == "none":
        return per
    raise ValueError(f"unknown reduction {reduction!r}")


__all__ = [
    "attention",
    "batchnorm",
    "concat",
    "conv1d",
    "conv2d",
    "cross_entropy",
    "group_norm",
    "leaky_relu",
    "linear",
    "maxpool1d",
    "sigmoid",
    "softmax",
    "swish",
    "transposed_conv2d",
    "upsample_nearest",
]
