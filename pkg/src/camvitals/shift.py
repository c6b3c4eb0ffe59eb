"""Parameter-free temporal shifting of channel chunks.

Within each consecutive window of ``window_len`` frames, the first channel
chunk reads one frame ahead, the second reads one frame behind, and the rest
stay put. Window edges are zero-filled so no information crosses window
boundaries. Shifting mixes no channels and adds no parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import ShapeError


@dataclass(frozen=True)
class ShiftSpec:
    """Channel-chunk sizes for a temporal shift over fixed-length windows."""

    window_len: int = 10
    left_chunk: int = 0
    right_chunk: int = 0
    static_chunk: int = 0

    @classmethod
    def divide(cls, channels: int, div: int = 3, window_len: int = 10) -> "ShiftSpec":
        """Shift channels//div each way; remainder stays static. div=0 disables."""
        part = channels // div if div > 0 else 0
        return cls(window_len=window_len, left_chunk=part, right_chunk=part,
                   static_chunk=channels - 2 * part)

    @classmethod
    def thirds(cls, channels: int, window_len: int = 10) -> "ShiftSpec":
        """Split channels into equal thirds; any remainder stays static."""
        return cls.divide(channels, 3, window_len)

    @property
    def channels(self) -> int:
        return self.left_chunk + self.right_chunk + self.static_chunk

    def validate(self, channels: int) -> None:
        if self.window_len < 1:
            raise ValueError(f"window_len must be >= 1, got {self.window_len}")
        if min(self.left_chunk, self.right_chunk, self.static_chunk) < 0:
            raise ValueError("chunk sizes must be non-negative")
        if self.channels != channels:
            raise ShapeError(
                f"shift chunks sum to {self.channels} but tensor has {channels} channels")


def temporal_shift(x: np.ndarray, spec: ShiftSpec) -> np.ndarray:
    """Shift channel chunks along time within each window of frames.

    Args:
        x: (T, H, W, C) stack with T a multiple of ``spec.window_len``.
    Returns:
        Shifted stack of identical dims; zero-filled at window edges.
    """
    if x.ndim != 4:
        raise ShapeError(f"temporal_shift input must have rank 4, got {x.ndim}")
    t, h, w, c = x.shape
    spec.validate(c)
    if t % spec.window_len != 0:
        raise ShapeError(
            f"frame count {t} is not a multiple of shift window {spec.window_len}")
    lo, hi = spec.left_chunk, spec.left_chunk + spec.right_chunk
    xw = x.reshape(t // spec.window_len, spec.window_len, h, w, c)
    out = np.zeros_like(xw)
    out[:, :-1, :, :, :lo] = xw[:, 1:, :, :, :lo]
    out[:, 1:, :, :, lo:hi] = xw[:, :-1, :, :, lo:hi]
    out[:, :, :, :, hi:] = xw[:, :, :, :, hi:]
    return out.reshape(t, h, w, c)


def temporal_shift_adjoint(grad_out: np.ndarray, spec: ShiftSpec) -> np.ndarray:
    """Adjoint of temporal_shift: the reverse index remap of the gradient."""
    if grad_out.ndim != 4:
        raise ShapeError(f"temporal_shift adjoint input must have rank 4, got {grad_out.ndim}")
    t, h, w, c = grad_out.shape
    spec.validate(c)
    if t % spec.window_len != 0:
        raise ShapeError(
            f"frame count {t} is not a multiple of shift window {spec.window_len}")
    lo, hi = spec.left_chunk, spec.left_chunk + spec.right_chunk
    gw = grad_out.reshape(t // spec.window_len, spec.window_len, h, w, c)
    out = np.zeros_like(gw)
    # Forward wrote frame t+1 into t for the left chunk, so its gradient
    # flows back one frame; symmetrically for the right chunk.
    out[:, 1:, :, :, :lo] = gw[:, :-1, :, :, :lo]
    out[:, :-1, :, :, lo:hi] = gw[:, 1:, :, :, lo:hi]
    out[:, :, :, :, hi:] = gw[:, :, :, :, hi:]
    return out.reshape(t, h, w, c)
