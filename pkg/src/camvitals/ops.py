"""Dense tensor kernels for the two-branch video networks.

All operations are pure functions over numpy float arrays in channels-last
layout (frames x rows x cols x channels for video features). Inputs are never
mutated, and identical inputs produce bitwise identical outputs on a given
host. Convolutions reduce over (kernel window, input channel) via a single
matmul per call; average pooling accumulates its window terms in a fixed
documented order so results match a scalar loop bit-for-bit.

The matching ``*_backward`` functions implement the exact adjoints used by
the training loop.
"""
from __future__ import annotations

import numpy as np

from . import rng

MAX_RANK = 5

ACTIVATIONS = ("tanh", "sigmoid", "linear")


class ShapeError(ValueError):
    """Raised when tensor extents are inconsistent with an operation."""


def as_tensor(data, dtype=np.float32) -> np.ndarray:
    """Coerce to a contiguous float tensor of rank 1..5."""
    arr = np.ascontiguousarray(data, dtype=dtype)
    if not 1 <= arr.ndim <= MAX_RANK:
        raise ShapeError(f"tensor rank {arr.ndim} outside supported range 1..{MAX_RANK}")
    return arr


def _require_rank(x: np.ndarray, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{what} must have rank {rank}, got rank {x.ndim} with dims {x.shape}")


def _im2col2d(x: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3 patch view of (N,H,W,C) as (N,H,W,3,3,C)."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    s = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(n, h, w, 3, 3, c),
        strides=(s[0], s[1], s[2], s[1], s[2], s[3]), writeable=False)


def _im2col3d(x: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3x3 patch view of (T,H,W,C) as (T,H,W,3,3,3,C)."""
    t, h, w, c = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (1, 1), (0, 0)))
    s = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(t, h, w, 3, 3, 3, c),
        strides=(s[0], s[1], s[2], s[0], s[1], s[2], s[3]), writeable=False)


def conv2d_cols(x: np.ndarray) -> np.ndarray:
    """Materialized patch matrix (T*H*W, 9*C); reusable by the backward pass."""
    t, h, w, c = x.shape
    return np.ascontiguousarray(_im2col2d(x)).reshape(t * h * w, 9 * c)


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
           cols: np.ndarray | None = None) -> np.ndarray:
    """Same-padded 3x3 convolution applied independently to each frame.

    Args:
        x: (T, H, W, Cin) frame stack.
        kernel: (3, 3, Cin, Cout) weights.
        bias: (Cout,) additive bias.
        cols: optional precomputed conv2d_cols(x).
    Returns:
        (T, H, W, Cout) feature stack with the input spatial extents.
    """
    _require_rank(x, 4, "conv2d input")
    _require_rank(kernel, 4, "conv2d kernel")
    if kernel.shape[:2] != (3, 3):
        raise ShapeError(f"conv2d kernel window must be 3x3, got {kernel.shape[:2]}")
    kin, kout = kernel.shape[2], kernel.shape[3]
    if x.shape[3] != kin:
        raise ShapeError(
            f"conv2d channel mismatch: input has {x.shape[3]} channels, kernel expects {kin}")
    if bias.shape != (kout,):
        raise ShapeError(f"conv2d bias dims {bias.shape} do not match {kout} output channels")
    t, h, w, _ = x.shape
    if cols is None:
        cols = conv2d_cols(x)
    out = cols @ kernel.reshape(9 * kin, kout)
    out += bias
    return out.reshape(t, h, w, kout)


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, grad_out: np.ndarray,
                    cols: np.ndarray | None = None, need_dx: bool = True):
    """Adjoint of conv2d; returns (grad_input, grad_kernel, grad_bias).

    ``cols`` reuses the forward's patch matrix; ``need_dx=False`` skips the
    input gradient (first layers) and returns None in its place.
    """
    t, h, w, cin = x.shape
    cout = kernel.shape[3]
    g = grad_out.reshape(t * h * w, cout)
    if cols is None:
        cols = conv2d_cols(x)
    grad_kernel = (cols.T @ g).reshape(kernel.shape)
    grad_bias = g.sum(axis=0)
    if not need_dx:
        return None, grad_kernel, grad_bias
    dcols = (g @ kernel.reshape(9 * cin, cout).T).reshape(t, h, w, 3, 3, cin)
    dxp = np.zeros((t, h + 2, w + 2, cin), dtype=dcols.dtype)
    for kh in range(3):
        for kw in range(3):
            dxp[:, kh:kh + h, kw:kw + w, :] += dcols[:, :, :, kh, kw, :]
    return dxp[:, 1:1 + h, 1:1 + w, :], grad_kernel, grad_bias


def conv3d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded 3x3x3 convolution over (frames, rows, cols) jointly.

    Args:
        x: (T, H, W, Cin) frame stack, T >= 1.
        kernel: (3, 3, 3, Cin, Cout) weights ordered (dt, dh, dw, Cin, Cout).
        bias: (Cout,) additive bias.
    """
    _require_rank(x, 4, "conv3d input")
    _require_rank(kernel, 5, "conv3d kernel")
    if kernel.shape[:3] != (3, 3, 3):
        raise ShapeError(f"conv3d kernel window must be 3x3x3, got {kernel.shape[:3]}")
    kin, kout = kernel.shape[3], kernel.shape[4]
    if x.shape[3] != kin:
        raise ShapeError(
            f"conv3d channel mismatch: input has {x.shape[3]} channels, kernel expects {kin}")
    if bias.shape != (kout,):
        raise ShapeError(f"conv3d bias dims {bias.shape} do not match {kout} output channels")
    t, h, w, _ = x.shape
    cols = _im2col3d(x).reshape(t * h * w, 27 * kin)
    out = cols @ kernel.reshape(27 * kin, kout)
    out += bias
    return out.reshape(t, h, w, kout)


def conv3d_backward(x: np.ndarray, kernel: np.ndarray, grad_out: np.ndarray,
                    need_dx: bool = True):
    """Adjoint of conv3d; returns (grad_input, grad_kernel, grad_bias)."""
    t, h, w, cin = x.shape
    cout = kernel.shape[4]
    g = grad_out.reshape(t * h * w, cout)
    cols = _im2col3d(x).reshape(t * h * w, 27 * cin)
    grad_kernel = (cols.T @ g).reshape(kernel.shape)
    grad_bias = g.sum(axis=0)
    if not need_dx:
        return None, grad_kernel, grad_bias
    dcols = (g @ kernel.reshape(27 * cin, cout).T).reshape(t, h, w, 3, 3, 3, cin)
    dxp = np.zeros((t + 2, h + 2, w + 2, cin), dtype=dcols.dtype)
    for kt in range(3):
        for kh in range(3):
            for kw in range(3):
                dxp[kt:kt + t, kh:kh + h, kw:kw + w, :] += dcols[:, :, :, kt, kh, kw, :]
    return dxp[1:1 + t, 1:1 + h, 1:1 + w, :], grad_kernel, grad_bias


def avg_pool(x: np.ndarray, window: tuple) -> np.ndarray:
    """Non-overlapping mean pooling with stride equal to the window.

    ``window`` is (2, 2) to pool rows/cols, or (2, 2, 2) to pool
    frames/rows/cols. An odd trailing extent is dropped. Each output value
    sums its window terms in lexicographic (dt, dh, dw) order and then
    multiplies by the reciprocal count, so a scalar loop with the same
    order reproduces results exactly.
    """
    _require_rank(x, 4, "avg_pool input")
    window = tuple(window)
    if window == (2, 2):
        axes = (1, 2)
    elif window == (2, 2, 2):
        axes = (0, 1, 2)
    else:
        raise ValueError(f"unsupported pooling window {window}; use (2, 2) or (2, 2, 2)")
    for ax in axes:
        if x.shape[ax] < 2:
            raise ShapeError(
                f"cannot pool dimension {ax} of extent {x.shape[ax]} with window 2")
    t, h, w, c = x.shape
    if window == (2, 2):
        h2, w2 = h // 2, w // 2
        v = x[:, :2 * h2, :2 * w2, :]
        out = v[:, 0::2, 0::2, :] + v[:, 0::2, 1::2, :]
        out = out + v[:, 1::2, 0::2, :]
        out = out + v[:, 1::2, 1::2, :]
        return out * x.dtype.type(0.25)
    t2, h2, w2 = t // 2, h // 2, w // 2
    v = x[:2 * t2, :2 * h2, :2 * w2, :]
    out = None
    for dt in range(2):
        for dh in range(2):
            for dw in range(2):
                term = v[dt::2, dh::2, dw::2, :]
                out = term.copy() if out is None else out + term
    return out * x.dtype.type(0.125)


def avg_pool_backward(x_shape: tuple, window: tuple, grad_out: np.ndarray) -> np.ndarray:
    """Adjoint of avg_pool: spread each output gradient over its window."""
    window = tuple(window)
    t, h, w, c = x_shape
    dx = np.zeros(x_shape, dtype=grad_out.dtype)
    if window == (2, 2):
        h2, w2 = h // 2, w // 2
        g = grad_out * grad_out.dtype.type(0.25)
        for dh in range(2):
            for dw in range(2):
                dx[:, dh:2 * h2:2, dw:2 * w2:2, :] = g
        return dx
    t2, h2, w2 = t // 2, h // 2, w // 2
    g = grad_out * grad_out.dtype.type(0.125)
    for dt in range(2):
        for dh in range(2):
            for dw in range(2):
                dx[dt:2 * t2:2, dh:2 * h2:2, dw:2 * w2:2, :] = g
    return dx


def dense(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map of row vectors: (N, F) @ (F, M) + bias."""
    _require_rank(x, 2, "dense input")
    _require_rank(weight, 2, "dense weight")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"dense inner extents differ: input has {x.shape[1]} features, "
            f"weight expects {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"dense bias dims {bias.shape} do not match {weight.shape[1]} outputs")
    return x @ weight + bias


def dense_backward(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray):
    """Adjoint of dense; returns (grad_input, grad_weight, grad_bias)."""
    return grad_out @ weight.T, x.T @ grad_out, grad_out.sum(axis=0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically safe logistic function (no overflow for large |x|)."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise nonlinearity: one of tanh, sigmoid, linear."""
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "linear":
        return x.copy()
    raise ValueError(f"unknown activation kind {kind!r}; expected one of {ACTIVATIONS}")


def activation_backward(out: np.ndarray, kind: str, grad_out: np.ndarray) -> np.ndarray:
    """Adjoint of activation, expressed through the forward output."""
    if kind == "tanh":
        return grad_out * (1.0 - out * out)
    if kind == "sigmoid":
        return grad_out * (out * (1.0 - out))
    if kind == "linear":
        return grad_out.copy()
    raise ValueError(f"unknown activation kind {kind!r}; expected one of {ACTIVATIONS}")


def dropout_mask(dims: tuple, rate: float, seed: int) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate).

    Masks come from a Philox stream keyed by ``seed``, so repeat calls with
    the same arguments are bitwise identical. Inference paths simply skip
    the mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    gen = rng.stream(seed, rng.STREAM_DROPOUT)
    keep = gen.random(size=tuple(dims)) >= rate
    scale = 1.0 / (1.0 - rate)
    return np.where(keep, np.float32(scale), np.float32(0.0)).astype(np.float32)
