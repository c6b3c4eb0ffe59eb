import numpy as np
import pytest

from camvitals.baselines import RgbTraces
from camvitals.synth import SynthParams, render_clip


@pytest.fixture(scope="session")
def default_clip():
    """Default 30 s / 30 fps / 72 BPM / 15 br-min clip, rendered once."""
    params = SynthParams()
    clip, gt, mask = render_clip(params)
    return params, clip, gt, mask


@pytest.fixture(scope="session")
def default_traces(default_clip):
    params, clip, _gt, mask = default_clip
    return RgbTraces.from_clip(clip.frames, mask, params.fps)


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
