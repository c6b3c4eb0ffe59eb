"""Waveform construction, rendering invariants, and dataset slicing."""

import json

import numpy as np
import pytest
from scipy.signal import find_peaks

from camvitals import data, synth
from camvitals.sigproc import SignalTrace, estimate_rate, BandSpec
from camvitals.synth import (GroundTruth, SynthParams, load_clip, make_dataset,
                             render_clip, save_clip, skin_mask, synth_waveforms)


def quick_params(**kw):
    args = dict(duration_s=10.0, height=24, width=24)
    args.update(kw)
    return SynthParams(**args)


class TestParams:
    def test_color_vectors_normalized(self):
        p = SynthParams(u_c=(2.0, 0.0, 0.0))
        assert p.u_c == pytest.approx((1.0, 0.0, 0.0))

    def test_nyquist_check(self):
        with pytest.raises(ValueError, match="Nyquist"):
            SynthParams(fps=2.0, hr_bpm=72.0).validate()

    def test_resolution_check(self):
        with pytest.raises(ValueError, match="8x8"):
            SynthParams(height=4, width=12).validate()

    def test_json_missing_required_field_named(self):
        doc = SynthParams().to_json_dict()
        del doc["fps"]
        with pytest.raises(ValueError, match="fps"):
            SynthParams.from_json_dict(doc)

    def test_json_unknown_field_named(self):
        doc = SynthParams().to_json_dict()
        doc["sparkle"] = 1
        with pytest.raises(ValueError, match="sparkle"):
            SynthParams.from_json_dict(doc)

    def test_json_round_trip(self):
        p = SynthParams(hr_bpm=80.0, motion_kind="sway", motion_amp=2.0)
        q = SynthParams.from_json_dict(p.to_json_dict())
        assert p == q


class TestWaveforms:
    def test_pure_tone_without_rsa(self):
        p = SynthParams(rsa_depth=0.0)
        gt = synth_waveforms(p)
        est = estimate_rate(gt.bvp, BandSpec(0.75, 2.5))
        assert abs(est.bpm - 72.0) <= 0.5
        # constant period: zero crossings (rising) spaced by 60/hr
        s = gt.bvp.samples
        rising = np.where((s[:-1] < 0) & (s[1:] >= 0))[0]
        periods = np.diff(rising) / p.fps
        assert np.allclose(periods, 60.0 / 72.0, atol=2.0 / p.fps)

    def test_unit_peak_amplitude(self):
        gt = synth_waveforms(SynthParams())
        assert np.max(np.abs(gt.bvp.samples)) == pytest.approx(1.0)
        assert np.max(np.abs(gt.resp.samples)) == pytest.approx(1.0)

    def test_respiration_frequency(self):
        gt = synth_waveforms(SynthParams())
        est = estimate_rate(gt.resp, BandSpec(0.08, 0.5))
        assert abs(est.bpm - 15.0) <= 0.5

    def test_rsa_modulates_beat_intervals(self):
        p = SynthParams(rsa_depth=0.05, hr_bpm=72.0, br_bpm=15.0)
        gt = synth_waveforms(p)
        peaks, _ = find_peaks(gt.bvp.samples, distance=int(0.5 * p.fps * 60 / p.hr_bpm))
        times = peaks / p.fps
        intervals = np.diff(times)
        assert intervals.max() - intervals.min() > 0.01
        # dominant oscillation of the interval series sits at the breathing rate
        mids = (times[:-1] + times[1:]) / 2.0
        grid = np.arange(mids[0], mids[-1], 1.0 / p.fps)
        series = np.interp(grid, mids, intervals - intervals.mean())
        est = estimate_rate(SignalTrace(series, p.fps), BandSpec(0.1, 0.6))
        assert abs(est.bpm - 15.0) <= 1.5

    def test_ground_truth_independent_of_render_amplitudes(self):
        a = synth_waveforms(SynthParams(pulse_amp=0.0))
        b = synth_waveforms(SynthParams(pulse_amp=0.05))
        np.testing.assert_array_equal(a.bvp.samples, b.bvp.samples)


class TestRender:
    def test_static_scene_all_frames_identical(self):
        p = quick_params(pulse_amp=0.0, resp_amp=0.0, motion_amp=0.0, noise_sigma=0.0)
        clip, _, _ = render_clip(p)
        first = clip.frames[0]
        assert (clip.frames == first).all()

    def test_prequantization_variance_zero_when_static(self):
        p = quick_params(pulse_amp=0.0, resp_amp=0.0, motion_amp=0.0, noise_sigma=0.0)
        frames, _, _ = synth._render_core(p)
        # exactly zero temporal variance: every frame is bit-identical
        assert (frames == frames[0]).all()

    def test_seed_determinism_bitwise(self):
        p = quick_params(seed=5)
        a, _, _ = render_clip(p)
        b, _, _ = render_clip(p)
        np.testing.assert_array_equal(a.frames, b.frames)
        c, _, _ = render_clip(quick_params(seed=6))
        assert not np.array_equal(a.frames, c.frames)

    def test_green_trace_spectral_peak(self, default_clip):
        params, clip, _gt, mask = default_clip
        green = clip.frames[:, mask, 1].mean(axis=1)
        est = estimate_rate(SignalTrace(green, params.fps), BandSpec(0.75, 2.5))
        assert abs(est.bpm - 72.0) <= 0.5  # 1.2 Hz within one padded bin

    def test_pulse_amp_linearity_prequantization(self):
        base = quick_params(noise_sigma=0.0)
        double = quick_params(noise_sigma=0.0, pulse_amp=2 * base.pulse_amp,
                              resp_amp=0.0)
        single = quick_params(noise_sigma=0.0, pulse_amp=base.pulse_amp, resp_amp=0.0)
        mask = skin_mask(single)

        def inband_power(p):
            frames, _, _ = synth._render_core(p)
            g = frames[:, mask, 1].mean(axis=1)
            g = g - g.mean()
            amp = np.abs(np.fft.rfft(g))
            freqs = np.fft.rfftfreq(len(g), 1.0 / p.fps)
            sel = (freqs > 1.0) & (freqs < 1.4)
            return float((amp[sel] ** 2).sum())

        ratio = inband_power(double) / inband_power(single)
        assert abs(ratio - 4.0) <= 0.2  # amplitude x2 -> power x4 within 5%

    def test_skin_pulsatile_power_dominates_background(self, default_clip):
        params, clip, _gt, mask = default_clip

        def inband_power(trace):
            x = trace - trace.mean()
            amp = np.abs(np.fft.rfft(x))
            freqs = np.fft.rfftfreq(len(x), 1.0 / params.fps)
            sel = (freqs > 1.0) & (freqs < 1.4)
            return float((amp[sel] ** 2).sum())

        skin = clip.frames[:, mask, 1].mean(axis=1)
        bg = clip.frames[:, ~mask, 1].mean(axis=1)
        assert inband_power(skin) >= 10.0 * inband_power(bg)

    def test_motion_moves_the_skin_region(self):
        p = quick_params(motion_kind="sway", motion_amp=3.0, sway_rate_hz=0.5,
                         pulse_amp=0.0, resp_amp=0.0, noise_sigma=0.0)
        clip, _, _ = render_clip(p)
        assert not (clip.frames == clip.frames[0]).all()

    def test_jump_motion_seeded(self):
        p = quick_params(motion_kind="jump", motion_amp=4.0, seed=3)
        a, _, _ = render_clip(p)
        b, _, _ = render_clip(p)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_quantization_grid(self):
        clip, _, _ = render_clip(quick_params())
        scaled = clip.frames * 255.0
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-3)

    def test_frame_count(self, default_clip):
        _params, clip, _gt, _mask = default_clip
        assert clip.frames.shape == (900, 72, 72, 3)


def dataset_params(**kw):
    args = dict(duration_s=10.0, height=40, width=40)
    args.update(kw)
    return SynthParams(**args)


class TestDataset:
    def test_window_counts(self):
        # 30 s at 30 fps -> 90 windows (one extra boundary frame rendered)
        ds = make_dataset(dataset_params(duration_s=30.0), window_len=10)
        assert len(ds.motion) == 90
        assert ds.motion.shape[1:] == (10, 36, 36, 3)
        assert ds.bvp.shape == (90, 10)
        assert ds.resp.shape == (90, 10)

    def test_targets_have_window_length(self):
        ds = make_dataset(dataset_params(), window_len=10)
        assert ds.bvp.shape[1] == 10 and ds.appearance.shape[1] == 10

    def test_clip_too_short(self):
        with pytest.raises(ValueError, match="shorter"):
            make_dataset(dataset_params(duration_s=0.2), window_len=10)

    def test_disk_round_trip_bitwise(self, tmp_path):
        ds = make_dataset(dataset_params(duration_s=2.0), window_len=5)
        manifest = data.save_dataset(tmp_path / "ds", ds,
                                     split={"train": range(len(ds) - 2),
                                            "val": [len(ds) - 2, len(ds) - 1]})
        back = data.load_dataset(manifest)
        np.testing.assert_array_equal(back.motion, ds.motion)
        np.testing.assert_array_equal(back.appearance, ds.appearance)
        np.testing.assert_array_equal(back.bvp, ds.bvp)
        np.testing.assert_array_equal(back.resp, ds.resp)
        train = data.load_dataset(manifest, split="train")
        assert len(train) == len(ds) - 2
        with pytest.raises(ValueError, match="split"):
            data.load_dataset(manifest, split="test")

    def test_mixed_fps_rejected(self):
        with pytest.raises(ValueError, match="frame rate"):
            make_dataset([dataset_params(), dataset_params(fps=25.0)])


class TestClipIO:
    def test_save_load_round_trip(self, tmp_path):
        p = quick_params(seed=8)
        clip, gt, _ = render_clip(p)
        base = tmp_path / "clip_000"
        clip_path, sidecar = save_clip(base, clip, p, gt)
        back, params, gt2 = load_clip(clip_path)
        np.testing.assert_array_equal(back.frames, clip.frames)
        assert back.fps == p.fps
        assert params == p
        np.testing.assert_allclose(gt2.bvp.samples, gt.bvp.samples, atol=1e-12)
        doc = json.loads((tmp_path / "clip_000.json").read_text())
        assert doc["schema_version"] == 1

    def test_rgb24_export(self, tmp_path):
        p = quick_params(duration_s=1.0)
        clip, gt, _ = render_clip(p)
        path = tmp_path / "clip.rgb24"
        synth.export_rgb24(path, clip)
        raw = np.frombuffer(path.read_bytes(), np.uint8)
        assert len(raw) == clip.frames.size
        np.testing.assert_array_equal(
            raw.reshape(clip.frames.shape),
            np.round(clip.frames * 255.0).astype(np.uint8))
