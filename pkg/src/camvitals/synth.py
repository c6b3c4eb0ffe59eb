"""Synthetic skin-video generator with exact ground-truth waveforms.

Pixel color composes a stationary skin/illuminant base with three
time-varying parts: an illumination modulation applied to every pixel, a
specular modulation on skin, and the pulsatile color term that carries the
physiology. The pulse waveform is a two-harmonic tone whose instantaneous
frequency is modulated by respiration (respiratory sinus arrhythmia), so
pulse and breathing are genuinely coupled in the rendered data. Skin lives
inside a centered ellipse; the background carries only the illumination
modulation plus sensor noise. Frames are quantized to 8-bit RGB, which is
the camera noise floor of the model.

Rendering is deterministic: all randomness (sensor noise, random
re-orientation) derives from per-frame counter streams of the seed.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import rng, vtf
from .data import TrainingSet
from .sigproc import SignalTrace, preprocess_clip

SCHEMA_VERSION = 1

MOTION_KINDS = ("static", "sway", "jump")

# Config fields that must be spelled out in a synth JSON document.
REQUIRED_FIELDS = ("fps", "duration_s", "hr_bpm", "br_bpm", "seed")


def _unit(v) -> tuple:
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if arr.shape != (3,) or norm == 0.0:
        raise ValueError(f"color vector must be a nonzero RGB triple, got {v}")
    return tuple(arr / norm)


@dataclass(frozen=True)
class SynthParams:
    """Scene and physiology parameters for one rendered clip."""

    fps: float = 30.0
    duration_s: float = 30.0
    height: int = 72
    width: int = 72
    hr_bpm: float = 72.0
    br_bpm: float = 15.0
    u_c: tuple = (0.77, 0.52, 0.36)       # stationary skin reflectance direction
    u_p: tuple = (0.33, 0.77, 0.53)       # pulsatile absorption direction
    u_s: tuple = (1.0, 1.0, 1.0)          # light source spectrum direction
    s_0: float = 0.05                     # stationary specular strength
    i_0: float = 0.9                      # stationary luminance
    pulse_amp: float = 0.015
    resp_amp: float = 0.012
    rsa_depth: float = 0.03               # fractional heart-period modulation
    psi_m: float = 0.02                   # illumination sensitivity to motion
    psi_p: float = 0.005                  # illumination sensitivity to physiology
    phi_m: float = 0.02                   # specular sensitivity to motion
    phi_p: float = 0.005                  # specular sensitivity to physiology
    motion_amp: float = 0.0               # horizontal displacement, pixels
    motion_kind: str = "static"
    sway_rate_hz: float = 0.4
    noise_sigma: float = 0.002
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u_c", _unit(self.u_c))
        object.__setattr__(self, "u_p", _unit(self.u_p))
        object.__setattr__(self, "u_s", _unit(self.u_s))

    def validate(self) -> None:
        if self.fps <= 0 or self.duration_s <= 0:
            raise ValueError("fps and duration_s must be positive")
        if self.fps <= 2.0 * self.hr_bpm / 60.0:
            raise ValueError(
                f"fps {self.fps} violates Nyquist for heart rate {self.hr_bpm} BPM")
        if self.height < 8 or self.width < 8:
            raise ValueError(f"resolution {self.height}x{self.width} too small (min 8x8)")
        if min(self.hr_bpm, self.br_bpm) <= 0:
            raise ValueError("hr_bpm and br_bpm must be positive")
        for name in ("pulse_amp", "resp_amp", "rsa_depth", "motion_amp", "noise_sigma",
                     "s_0", "i_0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.motion_kind not in MOTION_KINDS:
            raise ValueError(
                f"unknown motion_kind {self.motion_kind!r}; expected one of {MOTION_KINDS}")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        for key in ("u_c", "u_p", "u_s"):
            doc[key] = list(doc[key])
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SynthParams":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown synth config fields: {', '.join(unknown)}")
        missing = sorted(set(REQUIRED_FIELDS) - set(doc))
        if missing:
            raise ValueError(f"synth config is missing required fields: {', '.join(missing)}")
        params = cls(**doc)
        params.validate()
        return params


@dataclass
class GroundTruth:
    """Reference waveforms sampled at the clip frame rate."""

    bvp: SignalTrace
    resp: SignalTrace
    hr_bpm: float
    br_bpm: float


@dataclass
class VideoClip:
    """Frame stack (T, H, W, 3) of [0, 1] floats with its frame rate."""

    frames: np.ndarray
    fps: float


def synth_waveforms(params: SynthParams, n_frames: int | None = None) -> GroundTruth:
    """Reference pulse and respiration waveforms, unit peak amplitude.

    Respiration is a pure tone; the pulse is a two-harmonic tone whose
    instantaneous frequency is hr * (1 + rsa_depth * r(t)), integrated in
    closed form so the phase carries no cumulative error.
    """
    params.validate()
    n = params.n_frames if n_frames is None else int(n_frames)
    t = np.arange(n, dtype=np.float64) / params.fps
    f_br = params.br_bpm / 60.0
    f_hr = params.hr_bpm / 60.0
    resp = np.sin(2.0 * np.pi * f_br * t)
    if params.rsa_depth > 0.0:
        # integral of f_hr * (1 + depth * sin(2 pi f_br tau)) dtau
        phase = f_hr * (t + params.rsa_depth *
                        (1.0 - np.cos(2.0 * np.pi * f_br * t)) / (2.0 * np.pi * f_br))
    else:
        phase = f_hr * t
    bvp = np.sin(2.0 * np.pi * phase) + 0.5 * np.sin(4.0 * np.pi * phase)
    bvp = bvp / np.max(np.abs(bvp))
    peak = np.max(np.abs(resp))
    if peak > 0:
        resp = resp / peak
    return GroundTruth(bvp=SignalTrace(bvp, params.fps),
                       resp=SignalTrace(resp, params.fps),
                       hr_bpm=params.hr_bpm, br_bpm=params.br_bpm)


def _motion_signal(params: SynthParams, n: int) -> np.ndarray:
    """Dimensionless lateral motion trajectory in [-1, 1]."""
    if params.motion_kind == "static" or params.motion_amp == 0.0:
        return np.zeros(n)
    t = np.arange(n, dtype=np.float64) / params.fps
    if params.motion_kind == "sway":
        return np.sin(2.0 * np.pi * params.sway_rate_hz * t)
    # jump: a new uniform position once per second, constant in between
    gen = rng.stream(params.seed, rng.STREAM_MOTION)
    seconds = int(np.ceil(n / params.fps))
    positions = gen.uniform(-1.0, 1.0, size=max(seconds, 1))
    idx = np.minimum((t // 1.0).astype(int), seconds - 1)
    return positions[idx]


def skin_mask(params: SynthParams, offset_px: float = 0.0) -> np.ndarray:
    """Elliptical skin region, optionally displaced horizontally."""
    h, w = params.height, params.width
    yy = (np.arange(h) - (h - 1) / 2.0) / (0.42 * h)
    xx = (np.arange(w) - (w - 1) / 2.0 - offset_px) / (0.32 * w)
    return (yy[:, None] ** 2 + xx[None, :] ** 2) <= 1.0


_BG_COLOR = np.array([0.35, 0.35, 0.38])


def _render_core(params: SynthParams, n_frames: int | None = None):
    """Noise-free, pre-quantization float frames plus ground truth and mask."""
    params.validate()
    gt = synth_waveforms(params, n_frames)
    n = len(gt.bvp.samples)
    p_t = params.pulse_amp * gt.bvp.samples + params.resp_amp * gt.resp.samples
    m_t = _motion_signal(params, n)
    psi = params.psi_m * m_t + params.psi_p * p_t
    phi = params.phi_m * m_t + params.phi_p * p_t
    u_c = np.asarray(params.u_c)
    u_p = np.asarray(params.u_p)
    u_s = np.asarray(params.u_s)
    # (T, 3) colors: skin composes diffuse, specular and pulsatile parts;
    # the background sees only the illumination modulation.
    skin = params.i_0 * (u_c[None, :] * (1.0 + psi[:, None])
                         + u_s[None, :] * (params.s_0 + phi[:, None])
                         + u_p[None, :] * p_t[:, None])
    bg = params.i_0 * _BG_COLOR[None, :] * (1.0 + psi[:, None])
    offsets = params.motion_amp * m_t
    frames = np.empty((n, params.height, params.width, 3), dtype=np.float64)
    moving = params.motion_amp > 0.0 and params.motion_kind != "static"
    mask0 = skin_mask(params)
    for i in range(n):
        mask = skin_mask(params, offsets[i]) if moving else mask0
        frames[i] = np.where(mask[:, :, None], skin[i], bg[i])
    return frames, gt, mask0


def render_clip(params: SynthParams, n_frames: int | None = None):
    """Render one clip: (VideoClip, GroundTruth, skin mask).

    Adds per-frame Gaussian sensor noise (noise_sigma), clips to [0, 1],
    quantizes to 8-bit RGB, and maps back to floats. The returned mask is
    the nominal (motion-free) skin region.
    """
    frames, gt, mask = _render_core(params, n_frames)
    n = len(frames)
    if params.noise_sigma > 0.0:
        for i in range(n):
            gen = rng.stream(params.seed, rng.STREAM_FRAME_NOISE, i)
            frames[i] += gen.normal(0.0, params.noise_sigma, size=frames[i].shape)
    quant = np.round(np.clip(frames, 0.0, 1.0) * 255.0) / 255.0
    return VideoClip(frames=quant.astype(np.float32), fps=params.fps), gt, mask


def make_dataset(params_list, window_len: int = 10,
                 target_norm: str = "clip") -> TrainingSet:
    """Render clips and slice non-overlapping training windows.

    Each clip is rendered with one extra boundary frame so the difference
    stack covers exactly duration*fps samples (a 30 s clip at 30 fps yields
    90 ten-frame windows). Targets are the ground-truth waveforms sliced at
    the difference-frame indices, amplitude-normalized per clip (the
    waveforms are unit peak by construction). ``target_norm='window'``
    renormalizes each window slice instead; that erases the slow
    respiration amplitude structure and is kept only for comparison.
    """
    if target_norm not in ("clip", "window"):
        raise ValueError(f"target_norm must be 'clip' or 'window', got {target_norm!r}")
    if isinstance(params_list, SynthParams):
        params_list = [params_list]
    motion, appearance, bvp, resp = [], [], [], []
    fps = None
    for params in params_list:
        if fps is None:
            fps = params.fps
        elif params.fps != fps:
            raise ValueError("all clips in a dataset must share one frame rate")
        clip, gt, _ = render_clip(params, n_frames=params.n_frames + 1)
        if len(clip.frames) - 1 < window_len:
            raise ValueError(
                f"clip of {len(clip.frames)} frames is shorter than one "
                f"window of {window_len}")
        diff, raw = preprocess_clip(clip.frames)
        b_clip = _norm_window(gt.bvp.samples)
        r_clip = _norm_window(gt.resp.samples)
        n_windows = len(diff) // window_len
        for k in range(n_windows):
            sl = slice(k * window_len, (k + 1) * window_len)
            motion.append(diff[sl])
            appearance.append(raw[sl])
            if target_norm == "window":
                bvp.append(_norm_window(b_clip[sl]))
                resp.append(_norm_window(r_clip[sl]))
            else:
                bvp.append(b_clip[sl])
                resp.append(r_clip[sl])
    return TrainingSet(motion=np.stack(motion), appearance=np.stack(appearance),
                       bvp=np.stack(bvp).astype(np.float32),
                       resp=np.stack(resp).astype(np.float32),
                       fps=float(fps), window_len=window_len)


def _norm_window(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    return x / peak if peak > 0 else np.zeros_like(x)


# ---------------------------------------------------------------------------
# Clip storage: tensor container plus JSON sidecar
# ---------------------------------------------------------------------------

def save_clip(path_base, clip: VideoClip, params: SynthParams,
              gt: GroundTruth) -> tuple:
    """Write ``<base>.vtf`` frames and a ``<base>.json`` sidecar."""
    clip_path = f"{path_base}.vtf"
    sidecar_path = f"{path_base}.json"
    vtf.write_tensors(clip_path, {"frames": clip.frames})
    doc = {
        "schema_version": SCHEMA_VERSION,
        "fps": clip.fps,
        "params": params.to_json_dict(),
        "ground_truth": {
            "hr_bpm": gt.hr_bpm,
            "br_bpm": gt.br_bpm,
            "bvp": [float(v) for v in gt.bvp.samples],
            "resp": [float(v) for v in gt.resp.samples],
        },
    }
    with open(sidecar_path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return clip_path, sidecar_path


def load_clip(clip_path):
    """Read a clip container and, when present, its JSON sidecar.

    Returns (VideoClip, SynthParams | None, GroundTruth | None).
    """
    tensors = vtf.read_tensors(clip_path)
    if "frames" not in tensors:
        raise ValueError(f"{clip_path} holds no 'frames' tensor")
    frames = tensors["frames"]
    sidecar = os.path.splitext(str(clip_path))[0] + ".json"
    if not os.path.exists(sidecar):
        return VideoClip(frames=frames, fps=0.0), None, None
    with open(sidecar) as fh:
        doc = json.load(fh)
    fps = float(doc["fps"])
    params = SynthParams.from_json_dict(doc["params"]) if "params" in doc else None
    gt = None
    if "ground_truth" in doc:
        g = doc["ground_truth"]
        gt = GroundTruth(bvp=SignalTrace(np.asarray(g["bvp"]), fps),
                         resp=SignalTrace(np.asarray(g["resp"]), fps),
                         hr_bpm=float(g["hr_bpm"]), br_bpm=float(g["br_bpm"]))
    return VideoClip(frames=frames, fps=fps), params, gt


def export_rgb24(path, clip: VideoClip) -> None:
    """Dump frames as raw interleaved RGB24 bytes for external viewers."""
    data = np.round(np.clip(clip.frames, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(data.tobytes())
