"""Camera-based cardiopulmonary measurement toolkit.

Efficient two-branch video networks (2D/3D/hybrid/temporal-shift variants),
a from-scratch training path, classical pulse baselines, a synthetic
skin-video generator with exact ground truth, and the full signal
processing and metrics pipeline, plus a CPU latency benchmark.
"""

from .models import ModelSpec, WindowInput, build_model, forward, count_params
from .sigproc import BandSpec, SignalTrace, HR_BAND, BR_BAND
from .synth import GroundTruth, SynthParams, VideoClip, render_clip, synth_waveforms
from .train import AdadeltaState, LossConfig, adadelta_step, multitask_loss, train

__version__ = "0.1.0"

__all__ = [
    "AdadeltaState", "BandSpec", "BR_BAND", "GroundTruth", "HR_BAND",
    "LossConfig", "ModelSpec", "SignalTrace", "SynthParams", "VideoClip",
    "WindowInput", "adadelta_step", "build_model", "count_params", "forward",
    "multitask_loss", "render_clip", "synth_waveforms", "train",
]
