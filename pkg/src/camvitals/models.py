"""Two-branch convolutional attention networks for pulse and respiration.

Four trunk variants share one assembly: a motion branch over normalized
frame-difference stacks and an appearance branch over raw standardized
frames, bridged by two soft-attention masks placed before each pooling
stage.

  can2d   2D convolutions per frame in both branches; per-frame masks.
  can3d   3D convolutions over the whole window in both branches.
  hybrid  3D motion branch; single averaged-frame 2D appearance branch.
  tscan   2D motion branch with a temporal shift before every convolution;
          single averaged-frame appearance branch.

Single-frame appearance branches run once per window and their two masks
gate every motion frame. Pooling is spatial so every architecture keeps one
feature row per input frame; heads flatten frame by frame and map through
dense(hidden, tanh) -> dropout -> dense(1, linear). ``multi_task`` adds a
second head on the shared trunk.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import ops, rng, vtf
from .attention import (AttentionParams, attention_mask_frames,
                        attention_mask_frames_backward)
from .ops import ShapeError
from .shift import ShiftSpec, temporal_shift, temporal_shift_adjoint

ARCHS = ("can2d", "can3d", "hybrid", "tscan")
HEADS = ("bvp", "resp")

# Dropout mask stream labels, one per site in the graph.
_SITE_APP1 = 0
_SITE_MOT1 = 1
_SITE_MOT2 = 2
_SITE_HEAD = {"bvp": 3, "resp": 4}

_SPEC_FIELDS = ("arch", "multi_task", "window_len", "input_size", "filters",
                "hidden", "dropout", "shift_div")


class WeightError(ValueError):
    """Raised when a weight set does not match its model spec."""


@dataclass(frozen=True)
class ModelSpec:
    """Architecture descriptor for one network variant."""

    arch: str
    multi_task: bool = False
    window_len: int = 10
    input_size: int = 36
    filters: tuple = (32, 32, 64, 64)
    hidden: int = 128
    dropout: tuple = (0.25, 0.5)
    shift_div: int = 3

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        object.__setattr__(self, "dropout", tuple(float(r) for r in self.dropout))

    def validate(self) -> None:
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        if self.is_temporal and self.window_len < 2:
            raise ValueError(f"temporal arch {self.arch} needs window_len >= 2")
        if self.window_len < 1:
            raise ValueError("window_len must be positive")
        if self.input_size < 4 or self.input_size % 4 != 0:
            raise ValueError(
                f"input_size must be a positive multiple of 4 (two pooling stages), "
                f"got {self.input_size}")
        if len(self.filters) != 4 or min(self.filters) < 1:
            raise ValueError(f"filters must be four positive channel counts, got {self.filters}")
        if self.hidden < 1:
            raise ValueError("hidden width must be positive")
        if len(self.dropout) != 2 or not all(0.0 <= r < 1.0 for r in self.dropout):
            raise ValueError(f"dropout rates must lie in [0, 1), got {self.dropout}")
        if self.shift_div < 0:
            raise ValueError(f"shift_div must be >= 0 (0 disables shifting), got {self.shift_div}")

    @property
    def is_temporal(self) -> bool:
        return self.arch in ("can3d", "hybrid", "tscan")

    @property
    def motion_is_3d(self) -> bool:
        return self.arch in ("can3d", "hybrid")

    @property
    def appearance_is_3d(self) -> bool:
        return self.arch == "can3d"

    @property
    def single_frame_appearance(self) -> bool:
        return self.arch in ("hybrid", "tscan")

    @property
    def uses_shift(self) -> bool:
        return self.arch == "tscan"

    @property
    def heads(self) -> tuple:
        return HEADS if self.multi_task else HEADS[:1]

    @property
    def feature_size(self) -> int:
        side = self.input_size // 4
        return side * side * self.filters[3]

    def to_json_dict(self) -> dict:
        return {"arch": self.arch, "multi_task": self.multi_task,
                "window_len": self.window_len, "input_size": self.input_size,
                "filters": list(self.filters), "hidden": self.hidden,
                "dropout": list(self.dropout), "shift_div": self.shift_div}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ModelSpec":
        unknown = sorted(set(doc) - set(_SPEC_FIELDS))
        if unknown:
            raise ValueError(f"unknown model spec fields: {', '.join(unknown)}")
        if "arch" not in doc:
            raise ValueError("model spec is missing required field: arch")
        spec = cls(**doc)
        spec.validate()
        return spec

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "ModelSpec":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class WindowInput:
    """One model window: motion differences plus the appearance frames.

    ``appearance`` is the per-frame raw standardized stack (T, H, W, 3) for
    can2d/can3d, or the single averaged frame (H, W, 3) for hybrid/tscan.
    """

    motion: np.ndarray
    appearance: np.ndarray


def average_appearance(frames: np.ndarray) -> np.ndarray:
    """Collapse a (T, H, W, 3) window to its single mean frame."""
    if frames.ndim != 4:
        raise ShapeError(f"appearance window must have rank 4, got {frames.ndim}")
    return frames.mean(axis=0, dtype=frames.dtype)


def prepare_appearance(spec: ModelSpec, windows: np.ndarray) -> np.ndarray:
    """Adapt raw appearance windows (B, T, H, W, 3) to the arch's input."""
    if spec.single_frame_appearance:
        return windows.mean(axis=1, dtype=windows.dtype)
    return windows


def shift_specs(spec: ModelSpec) -> tuple:
    """Per-conv channel chunking for the tscan motion branch."""
    chans = (3,) + tuple(spec.filters[:3])
    return tuple(ShiftSpec.divide(c, spec.shift_div, spec.window_len) for c in chans)


def param_shapes(spec: ModelSpec) -> dict:
    """Canonical parameter names and extents, in initialization order."""
    spec.validate()
    c1, c2, c3, c4 = spec.filters
    shapes = {}

    def conv_shape(cin, cout, three_d):
        return (3, 3, 3, cin, cout) if three_d else (3, 3, cin, cout)

    chans = (3, c1, c2, c3)
    outs = (c1, c2, c3, c4)
    for i in range(4):
        shapes[f"appearance_conv{i + 1}_w"] = conv_shape(chans[i], outs[i], spec.appearance_is_3d)
        shapes[f"appearance_conv{i + 1}_b"] = (outs[i],)
    for i in range(4):
        shapes[f"motion_conv{i + 1}_w"] = conv_shape(chans[i], outs[i], spec.motion_is_3d)
        shapes[f"motion_conv{i + 1}_b"] = (outs[i],)
    shapes["attn1_w"] = (1, 1, c2, 1)
    shapes["attn1_b"] = (1,)
    shapes["attn2_w"] = (1, 1, c4, 1)
    shapes["attn2_b"] = (1,)
    for head in spec.heads:
        shapes[f"{head}_dense1_w"] = (spec.feature_size, spec.hidden)
        shapes[f"{head}_dense1_b"] = (spec.hidden,)
        shapes[f"{head}_dense2_w"] = (spec.hidden, 1)
        shapes[f"{head}_dense2_b"] = (1,)
    return shapes


def count_params(spec: ModelSpec) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(spec).values())


def _glorot_fans(shape: tuple) -> tuple:
    if len(shape) == 2:  # dense
        return shape[0], shape[1]
    if len(shape) == 4:  # 2d conv (covers 1x1 attention)
        rf = shape[0] * shape[1]
        return rf * shape[2], rf * shape[3]
    rf = shape[0] * shape[1] * shape[2]
    return rf * shape[3], rf * shape[4]


def build_model(spec: ModelSpec, init_seed: int = 0) -> dict:
    """Glorot-uniform weights and zero biases, drawn in canonical order."""
    gen = rng.stream(init_seed, rng.STREAM_INIT)
    weights = {}
    for name, shape in param_shapes(spec).items():
        if name.endswith("_b"):
            weights[name] = np.zeros(shape, dtype=np.float32)
            continue
        fan_in, fan_out = _glorot_fans(shape)
        limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
        weights[name] = gen.uniform(-limit, limit, size=shape).astype(np.float32)
    return weights


def check_weights(spec: ModelSpec, weights: dict) -> None:
    """Validate weight names and extents against the spec."""
    expected = param_shapes(spec)
    missing = sorted(set(expected) - set(weights))
    if missing:
        raise WeightError(f"weight set is missing parameters: {', '.join(missing)}")
    extra = sorted(set(weights) - set(expected))
    if extra:
        raise WeightError(f"weight set has unexpected parameters: {', '.join(extra)}")
    for name, shape in expected.items():
        if tuple(weights[name].shape) != shape:
            raise WeightError(
                f"parameter {name} has dims {tuple(weights[name].shape)}, "
                f"spec expects {shape}")


def save_weights(path, weights: dict) -> None:
    vtf.write_tensors(path, weights)


def load_weights(path, spec: ModelSpec) -> dict:
    weights = vtf.read_tensors(path)
    check_weights(spec, weights)
    return weights


# ---------------------------------------------------------------------------
# Forward / backward engine. Activations are kept frames-major
# (B*T, h, w, c) for motion and (B*T or B, h, w, c) for appearance; only 3D
# convolutions and single-frame mask broadcasting unfold the window axis.
# ---------------------------------------------------------------------------

# Forward patch matrices above this size are recomputed in backward rather
# than held in the training cache.
_COLS_CACHE_LIMIT = 128 * 1024 * 1024


def _conv_fwd(x, kernel, bias, three_d, batch, keep_cols=False):
    """Returns (output, reusable patch matrix or None)."""
    if three_d:
        t = x.shape[0] // batch
        xw = x.reshape(batch, t, *x.shape[1:])
        out = np.concatenate([ops.conv3d(xw[i], kernel, bias) for i in range(batch)])
        return out, None
    cols = ops.conv2d_cols(x)
    out = ops.conv2d(x, kernel, bias, cols=cols)
    keep = keep_cols and cols.nbytes <= _COLS_CACHE_LIMIT
    return out, (cols if keep else None)


def _conv_bwd(x, kernel, grad_out, three_d, batch, cols=None, need_dx=True):
    if not three_d:
        return ops.conv2d_backward(x, kernel, grad_out, cols=cols, need_dx=need_dx)
    t = x.shape[0] // batch
    xw = x.reshape(batch, t, *x.shape[1:])
    gw = grad_out.reshape(batch, t, *grad_out.shape[1:])
    dx = np.empty_like(x) if need_dx else None
    dk = np.zeros_like(kernel)
    db = np.zeros(kernel.shape[-1], dtype=kernel.dtype)
    for i in range(batch):
        dxi, dki, dbi = ops.conv3d_backward(xw[i], kernel, gw[i], need_dx=need_dx)
        if need_dx:
            dx[i * t:(i + 1) * t] = dxi
        dk += dki
        db += dbi
    return dx, dk, db


def _site_masks(rate, batch, example_shape, seeds, site):
    """Per-example dropout masks folded frames-major to match activations."""
    example_shape = tuple(example_shape)
    masks = np.empty((batch,) + example_shape, dtype=np.float32)
    for i in range(batch):
        masks[i] = ops.dropout_mask(example_shape, rate, rng.derive(int(seeds[i]), site))
    return masks.reshape((batch * example_shape[0],) + example_shape[1:])


def _attn_params(weights, idx):
    return AttentionParams(kernel=weights[f"attn{idx}_w"], bias=weights[f"attn{idx}_b"])


def _forward(spec, weights, motion, appearance, train, seeds, keep_cache):
    """Batched forward pass.

    Args:
        motion: (B, T, H, W, 3) difference windows.
        appearance: (B, T, H, W, 3) or, for single-frame archs, (B, H, W, 3).
        seeds: per-example dropout seeds, length B (train mode only).
    Returns:
        (outputs dict head -> (B, T), cache dict or None)
    """
    spec.validate()
    check_weights(spec, weights)
    if motion.ndim != 5:
        raise ShapeError(f"motion batch must have rank 5, got {motion.ndim}")
    B, T, H, W, C = motion.shape
    if (T, H, W, C) != (spec.window_len, spec.input_size, spec.input_size, 3):
        raise ShapeError(
            f"motion window dims {(T, H, W, C)} do not match spec "
            f"{(spec.window_len, spec.input_size, spec.input_size, 3)}")
    app_expected = (B, spec.input_size, spec.input_size, 3) if spec.single_frame_appearance \
        else (B, T, spec.input_size, spec.input_size, 3)
    if tuple(appearance.shape) != app_expected:
        raise ShapeError(
            f"appearance dims {tuple(appearance.shape)} do not match expected {app_expected}")
    if not np.isfinite(motion).all() or not np.isfinite(appearance).all():
        raise ValueError("model input contains non-finite values")

    rate1, rate2 = spec.dropout
    m3d, a3d = spec.motion_is_3d, spec.appearance_is_3d
    sh = shift_specs(spec) if spec.uses_shift else None
    cache = {} if keep_cache else None

    def remember(**kv):
        if cache is not None:
            cache.update(kv)

    keep_cols = keep_cache

    # Appearance branch: frames-major, Na = B for single-frame archs.
    a0 = appearance if spec.single_frame_appearance \
        else appearance.reshape(B * T, H, W, 3)
    Na = a0.shape[0]
    z, acols1 = _conv_fwd(a0, weights["appearance_conv1_w"],
                          weights["appearance_conv1_b"], a3d, B, keep_cols)
    a1 = ops.activation(z, "tanh")
    z, acols2 = _conv_fwd(a1, weights["appearance_conv2_w"],
                          weights["appearance_conv2_b"], a3d, B, keep_cols)
    a2 = ops.activation(z, "tanh")
    mask1, s1, sums1 = attention_mask_frames(a2, _attn_params(weights, 1))
    ap1 = ops.avg_pool(a2, (2, 2))
    if train:
        adrop = _site_masks(rate1, B, (Na // B,) + ap1.shape[1:], seeds, _SITE_APP1)
        ad1 = ap1 * adrop
    else:
        adrop, ad1 = None, ap1
    z, acols3 = _conv_fwd(ad1, weights["appearance_conv3_w"],
                          weights["appearance_conv3_b"], a3d, B, keep_cols)
    a3 = ops.activation(z, "tanh")
    z, acols4 = _conv_fwd(a3, weights["appearance_conv4_w"],
                          weights["appearance_conv4_b"], a3d, B, keep_cols)
    a4 = ops.activation(z, "tanh")
    mask2, s2, sums2 = attention_mask_frames(a4, _attn_params(weights, 2))
    remember(a0=a0, a1=a1, a2=a2, s1=s1, sums1=sums1, mask1=mask1, ap1=ap1,
             adrop=adrop, ad1=ad1, a3=a3, a4=a4, s2=s2, sums2=sums2, mask2=mask2,
             acols1=acols1, acols2=acols2, acols3=acols3, acols4=acols4)

    def gate(x, mask):
        # x: (B*T, h, w, c); mask: (Na, h, w, 1) with Na in {B, B*T}
        if mask.shape[0] == x.shape[0]:
            return x * mask
        xw = x.reshape(B, T, *x.shape[1:])
        return (xw * mask[:, None]).reshape(x.shape)

    # Motion branch.
    m0 = motion.reshape(B * T, H, W, 3)
    x1 = temporal_shift(m0, sh[0]) if sh else m0
    z, mcols1 = _conv_fwd(x1, weights["motion_conv1_w"],
                          weights["motion_conv1_b"], m3d, B, keep_cols)
    h1 = ops.activation(z, "tanh")
    x2 = temporal_shift(h1, sh[1]) if sh else h1
    z, mcols2 = _conv_fwd(x2, weights["motion_conv2_w"],
                          weights["motion_conv2_b"], m3d, B, keep_cols)
    h2 = ops.activation(z, "tanh")
    g1 = gate(h2, mask1)
    p1 = ops.avg_pool(g1, (2, 2))
    if train:
        mdrop1 = _site_masks(rate1, B, (T,) + p1.shape[1:], seeds, _SITE_MOT1)
        d1 = p1 * mdrop1
    else:
        mdrop1, d1 = None, p1
    x3 = temporal_shift(d1, sh[2]) if sh else d1
    z, mcols3 = _conv_fwd(x3, weights["motion_conv3_w"],
                          weights["motion_conv3_b"], m3d, B, keep_cols)
    h3 = ops.activation(z, "tanh")
    x4 = temporal_shift(h3, sh[3]) if sh else h3
    z, mcols4 = _conv_fwd(x4, weights["motion_conv4_w"],
                          weights["motion_conv4_b"], m3d, B, keep_cols)
    h4 = ops.activation(z, "tanh")
    g2 = gate(h4, mask2)
    p2 = ops.avg_pool(g2, (2, 2))
    if train:
        mdrop2 = _site_masks(rate1, B, (T,) + p2.shape[1:], seeds, _SITE_MOT2)
        d2 = p2 * mdrop2
    else:
        mdrop2, d2 = None, p2
    f = d2.reshape(B * T, spec.feature_size)
    remember(m0=m0, x1=x1, h1=h1, x2=x2, h2=h2, g1=g1, p1=p1, mdrop1=mdrop1,
             d1=d1, x3=x3, h3=h3, x4=x4, h4=h4, g2=g2, p2=p2, mdrop2=mdrop2,
             d2=d2, f=f, batch=B, frames=T,
             mcols1=mcols1, mcols2=mcols2, mcols3=mcols3, mcols4=mcols4)

    outputs = {}
    for head in spec.heads:
        z = ops.activation(ops.dense(f, weights[f"{head}_dense1_w"],
                                     weights[f"{head}_dense1_b"]), "tanh")
        if train:
            hdrop = _site_masks(rate2, B, (T, spec.hidden), seeds, _SITE_HEAD[head])
            zd = z * hdrop
        else:
            hdrop, zd = None, z
        y = ops.dense(zd, weights[f"{head}_dense2_w"], weights[f"{head}_dense2_b"])
        outputs[head] = y.reshape(B, T)
        remember(**{f"{head}_z": z, f"{head}_hdrop": hdrop, f"{head}_zd": zd})
    return outputs, cache


def _backward(spec, weights, cache, grad_heads):
    """Exact adjoint of _forward; returns parameter gradients by name."""
    B, T = cache["batch"], cache["frames"]
    m3d, a3d = spec.motion_is_3d, spec.appearance_is_3d
    sh = shift_specs(spec) if spec.uses_shift else None
    train = cache["mdrop1"] is not None
    grads = {}

    f = cache["f"]
    df = np.zeros_like(f)
    for head in spec.heads:
        gy = grad_heads[head].reshape(B * T, 1).astype(f.dtype)
        zd, z = cache[f"{head}_zd"], cache[f"{head}_z"]
        dzd, dw2, db2 = ops.dense_backward(zd, weights[f"{head}_dense2_w"], gy)
        grads[f"{head}_dense2_w"], grads[f"{head}_dense2_b"] = dw2, db2
        dz = dzd * cache[f"{head}_hdrop"] if train else dzd
        dz = ops.activation_backward(z, "tanh", dz)
        dfh, dw1, db1 = ops.dense_backward(f, weights[f"{head}_dense1_w"], dz)
        grads[f"{head}_dense1_w"], grads[f"{head}_dense1_b"] = dw1, db1
        df += dfh

    dd2 = df.reshape(cache["d2"].shape)
    dp2 = dd2 * cache["mdrop2"] if train else dd2
    dg2 = ops.avg_pool_backward(cache["g2"].shape, (2, 2), dp2)
    dh4, dmask2 = _gate_backward(dg2, cache["h4"], cache["mask2"], B, T)
    da4 = ops.activation_backward(cache["h4"], "tanh", dh4)
    dx4, dk, db = _conv_bwd(cache["x4"], weights["motion_conv4_w"], da4, m3d, B,
                            cols=cache["mcols4"])
    grads["motion_conv4_w"], grads["motion_conv4_b"] = dk, db
    dh3 = temporal_shift_adjoint(dx4, sh[3]) if sh else dx4
    da3m = ops.activation_backward(cache["h3"], "tanh", dh3)
    dx3, dk, db = _conv_bwd(cache["x3"], weights["motion_conv3_w"], da3m, m3d, B,
                            cols=cache["mcols3"])
    grads["motion_conv3_w"], grads["motion_conv3_b"] = dk, db
    dd1 = temporal_shift_adjoint(dx3, sh[2]) if sh else dx3
    dp1 = dd1 * cache["mdrop1"] if train else dd1
    dg1 = ops.avg_pool_backward(cache["g1"].shape, (2, 2), dp1)
    dh2, dmask1 = _gate_backward(dg1, cache["h2"], cache["mask1"], B, T)
    da2m = ops.activation_backward(cache["h2"], "tanh", dh2)
    dx2, dk, db = _conv_bwd(cache["x2"], weights["motion_conv2_w"], da2m, m3d, B,
                            cols=cache["mcols2"])
    grads["motion_conv2_w"], grads["motion_conv2_b"] = dk, db
    dh1 = temporal_shift_adjoint(dx2, sh[1]) if sh else dx2
    da1m = ops.activation_backward(cache["h1"], "tanh", dh1)
    _, dk, db = _conv_bwd(cache["x1"], weights["motion_conv1_w"], da1m, m3d, B,
                          cols=cache["mcols1"], need_dx=False)
    grads["motion_conv1_w"], grads["motion_conv1_b"] = dk, db

    # Appearance branch: gradients arrive through both attention masks.
    da4_attn, dk, db = attention_mask_frames_backward(
        cache["a4"], _attn_params(weights, 2), cache["s2"], cache["sums2"], dmask2)
    grads["attn2_w"], grads["attn2_b"] = dk, db
    da4a = ops.activation_backward(cache["a4"], "tanh", da4_attn)
    da3a, dk, db = _conv_bwd(cache["a3"], weights["appearance_conv4_w"], da4a, a3d, B,
                             cols=cache["acols4"])
    grads["appearance_conv4_w"], grads["appearance_conv4_b"] = dk, db
    da3a = ops.activation_backward(cache["a3"], "tanh", da3a)
    dad1, dk, db = _conv_bwd(cache["ad1"], weights["appearance_conv3_w"], da3a, a3d, B,
                             cols=cache["acols3"])
    grads["appearance_conv3_w"], grads["appearance_conv3_b"] = dk, db
    dap1 = dad1 * cache["adrop"] if train else dad1
    da2_pool = ops.avg_pool_backward(cache["a2"].shape, (2, 2), dap1)
    da2_attn, dk, db = attention_mask_frames_backward(
        cache["a2"], _attn_params(weights, 1), cache["s1"], cache["sums1"], dmask1)
    grads["attn1_w"], grads["attn1_b"] = dk, db
    da2 = ops.activation_backward(cache["a2"], "tanh", da2_pool + da2_attn)
    da1a, dk, db = _conv_bwd(cache["a1"], weights["appearance_conv2_w"], da2, a3d, B,
                             cols=cache["acols2"])
    grads["appearance_conv2_w"], grads["appearance_conv2_b"] = dk, db
    da1a = ops.activation_backward(cache["a1"], "tanh", da1a)
    _, dk, db = _conv_bwd(cache["a0"], weights["appearance_conv1_w"], da1a, a3d, B,
                          cols=cache["acols1"], need_dx=False)
    grads["appearance_conv1_w"], grads["appearance_conv1_b"] = dk, db
    return grads


def _gate_backward(dg, features, mask, batch, frames):
    """Adjoint of the mask gating; single-frame masks sum over the window."""
    dmask_full = (dg * features).sum(axis=3, keepdims=True)
    if mask.shape[0] == features.shape[0]:
        dx = dg * mask
        return dx, dmask_full
    fw = dg.reshape(batch, frames, *dg.shape[1:])
    dx = (fw * mask[:, None]).reshape(dg.shape)
    dmask = dmask_full.reshape(batch, frames, *dmask_full.shape[1:]).sum(axis=1)
    return dx, dmask


def forward(spec: ModelSpec, weights: dict, window: WindowInput,
            train_mode: bool = False, seed: int = 0) -> dict:
    """Run one window through the network.

    Returns a dict mapping head name to a (window_len,) waveform slice.
    Inference applies no dropout; train mode replays masks from ``seed``.
    """
    motion = np.asarray(window.motion)
    appearance = np.asarray(window.appearance)
    seeds = np.array([rng.derive(seed, rng.STREAM_DROPOUT, 0)], dtype=np.uint64)
    outputs, _ = _forward(spec, weights, motion[None], appearance[None],
                          train_mode, seeds, keep_cache=False)
    return {head: out[0] for head, out in outputs.items()}


def forward_batch(spec: ModelSpec, weights: dict, motion: np.ndarray,
                  appearance: np.ndarray, train_mode: bool = False,
                  seed: int = 0) -> dict:
    """Run a batch of windows; returns head -> (B, window_len) outputs."""
    B = motion.shape[0]
    seeds = np.array([rng.derive(seed, rng.STREAM_DROPOUT, i) for i in range(B)],
                     dtype=np.uint64)
    outputs, _ = _forward(spec, weights, motion, appearance, train_mode,
                          seeds, keep_cache=False)
    return outputs
