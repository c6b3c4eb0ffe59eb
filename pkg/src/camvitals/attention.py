"""Soft spatial attention bridging the appearance and motion branches.

A 1x1 convolution plus sigmoid scores every spatial position of an
appearance feature map; the scores are l1-normalized and rescaled by half
the position count, which softens extremes and fixes the mask sum at
H*W/2 for any input. The resulting single-channel mask gates motion
features by elementwise product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import ShapeError, sigmoid


@dataclass(frozen=True)
class AttentionParams:
    """1x1 projection weights: kernel (1, 1, Cin, 1) and scalar bias (1,)."""

    kernel: np.ndarray
    bias: np.ndarray

    def validate(self) -> None:
        if self.kernel.ndim != 4 or self.kernel.shape[0] != 1 or self.kernel.shape[1] != 1:
            raise ShapeError(
                f"attention kernel must be 1x1xCinx1, got dims {self.kernel.shape}")
        if self.kernel.shape[3] != 1:
            raise ShapeError(
                f"attention kernel must emit a single channel, got {self.kernel.shape[3]}")
        if self.bias.shape != (1,):
            raise ShapeError(f"attention bias must be a single scalar, got dims {self.bias.shape}")


def attention_mask(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Normalized soft-attention mask for one appearance feature map.

    Args:
        x: (H, W, Cin) feature map; must be finite.
    Returns:
        (H, W, 1) mask with every entry positive and sum H*W/2.
    """
    if x.ndim != 3:
        raise ShapeError(f"attention_mask input must have rank 3, got {x.ndim}")
    out, _, _ = attention_mask_frames(x[None], params)
    return out[0]


def attention_mask_frames(x: np.ndarray, params: AttentionParams):
    """Per-frame masks for a stack of feature maps.

    Args:
        x: (N, H, W, Cin) appearance features; masks are normalized frame by
            frame so each frame's mask sums to H*W/2.
    Returns:
        (masks (N, H, W, 1), scores (N, H, W), score_sums (N,)); the last two
        feed the backward pass.
    """
    params.validate()
    if x.ndim != 4:
        raise ShapeError(f"attention_mask input must have rank 4, got {x.ndim}")
    cin = params.kernel.shape[2]
    if x.shape[3] != cin:
        raise ShapeError(
            f"attention channel mismatch: input has {x.shape[3]} channels, "
            f"kernel expects {cin}")
    if not np.isfinite(x).all():
        raise ValueError("attention_mask input contains non-finite values")
    n, h, w, _ = x.shape
    z = x @ params.kernel[0, 0, :, 0] + params.bias[0]
    s = sigmoid(z)
    sums = s.reshape(n, h * w).sum(axis=1)
    scale = x.dtype.type(h * w)
    masks = (scale * s) / (2.0 * sums[:, None, None]).astype(x.dtype)
    return masks[..., None], s, sums


def attention_mask_frames_backward(x: np.ndarray, params: AttentionParams,
                                   scores: np.ndarray, score_sums: np.ndarray,
                                   grad_mask: np.ndarray):
    """Adjoint of attention_mask_frames through the l1 normalization.

    The quotient rule is applied exactly: each score's gradient combines the
    direct mask term and the shared normalizer term.
    """
    n, h, w, _ = x.shape
    g = grad_mask[..., 0]
    c = 0.5 * h * w
    gs_dot = (g * scores).reshape(n, h * w).sum(axis=1)
    # d mask_i / d s_j = (c/S) delta_ij - c * s_i / S^2
    ds = (c / score_sums)[:, None, None] * g \
        - (c * gs_dot / (score_sums * score_sums))[:, None, None]
    dz = ds * scores * (1.0 - scores)
    omega = params.kernel[0, 0, :, 0]
    dx = dz[..., None] * omega
    domega = np.einsum("nhw,nhwc->c", dz, x)
    dbias = np.array([dz.sum()], dtype=x.dtype)
    return dx, domega.reshape(params.kernel.shape).astype(x.dtype), dbias


def apply_mask(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gate every frame and channel of (T, H, W, C) by one (H, W, 1) mask."""
    if x.ndim != 4:
        raise ShapeError(f"apply_mask input must have rank 4, got {x.ndim}")
    if mask.ndim != 3 or mask.shape[2] != 1:
        raise ShapeError(f"mask must be HxWx1, got dims {mask.shape}")
    if x.shape[1:3] != mask.shape[:2]:
        raise ShapeError(
            f"mask spatial dims {mask.shape[:2]} do not match input {x.shape[1:3]}")
    return x * mask
