"""Model assembly: determinism, structure, serialization, and composition."""

import numpy as np
import pytest

from camvitals import models, ops, rng
from camvitals.attention import AttentionParams, attention_mask, apply_mask
from camvitals.models import (ModelSpec, WeightError, WindowInput, build_model,
                              count_params, forward, load_weights, param_shapes,
                              save_weights, shift_specs)
from camvitals.shift import temporal_shift


def tiny_spec(arch, **kw):
    args = dict(arch=arch, multi_task=False, filters=(4, 4, 8, 8), hidden=8,
                input_size=12, window_len=4)
    args.update(kw)
    return ModelSpec(**args)


def random_window(spec, seed=0):
    gen = rng.stream(seed, 40)
    motion = gen.standard_normal(
        (spec.window_len, spec.input_size, spec.input_size, 3)).astype(np.float32)
    frames = gen.standard_normal(
        (spec.window_len, spec.input_size, spec.input_size, 3)).astype(np.float32)
    appearance = frames.mean(axis=0) if spec.single_frame_appearance else frames
    return WindowInput(motion=motion, appearance=appearance), frames


class TestSpec:
    def test_json_round_trip(self, tmp_path):
        spec = ModelSpec(arch="tscan", multi_task=True)
        path = tmp_path / "spec.json"
        spec.save_json(path)
        assert ModelSpec.load_json(path) == spec

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="extra_thing"):
            ModelSpec.from_json_dict({"arch": "tscan", "extra_thing": 1})

    def test_missing_arch_rejected(self):
        with pytest.raises(ValueError, match="arch"):
            ModelSpec.from_json_dict({"window_len": 10})

    def test_bad_arch_rejected(self):
        with pytest.raises(ValueError, match="resnet"):
            ModelSpec(arch="resnet").validate()

    def test_temporal_needs_window(self):
        with pytest.raises(ValueError, match="window_len"):
            ModelSpec(arch="tscan", window_len=1).validate()


class TestBuild:
    def test_same_seed_bitwise_identical(self):
        spec = tiny_spec("tscan", multi_task=True)
        a = build_model(spec, 11)
        b = build_model(spec, 11)
        assert list(a) == list(b)
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])
        c = build_model(spec, 12)
        assert any(not np.array_equal(a[n], c[n]) for n in a)

    def test_multi_task_adds_exactly_one_head(self):
        single = param_shapes(tiny_spec("tscan"))
        multi = param_shapes(tiny_spec("tscan", multi_task=True))
        extra = sorted(set(multi) - set(single))
        assert extra == ["resp_dense1_b", "resp_dense1_w", "resp_dense2_b",
                         "resp_dense2_w"]
        trunk = [n for n in single if not n.startswith("bvp_")]
        assert all(single[n] == multi[n] for n in trunk)

    def test_param_count_ordering(self):
        counts = {arch: count_params(tiny_spec(arch)) for arch in models.ARCHS}
        assert counts["tscan"] == counts["can2d"]
        assert counts["can3d"] > counts["hybrid"] > counts["tscan"]

    def test_biases_zero_and_kernels_bounded(self):
        spec = tiny_spec("hybrid")
        weights = build_model(spec, 0)
        for name, arr in weights.items():
            if name.endswith("_b"):
                assert not arr.any()
            else:
                fan = np.prod(arr.shape[:-1])
                limit = np.sqrt(6.0 / (fan + fan / arr.shape[-2] * arr.shape[-1]))
                assert np.abs(arr).max() <= limit * 1.5


class TestForward:
    @pytest.mark.parametrize("arch", models.ARCHS)
    def test_zero_weights_zero_outputs(self, arch):
        spec = tiny_spec(arch, multi_task=True)
        weights = {k: np.zeros_like(v) for k, v in build_model(spec, 0).items()}
        window, _ = random_window(spec)
        out = forward(spec, weights, window)
        for head in ("bvp", "resp"):
            np.testing.assert_array_equal(out[head], np.zeros(spec.window_len, np.float32))

    def test_duplicated_heads_emit_identical_waveforms(self):
        spec = tiny_spec("tscan", multi_task=True)
        weights = build_model(spec, 4)
        for part in ("dense1_w", "dense1_b", "dense2_w", "dense2_b"):
            weights[f"resp_{part}"] = weights[f"bvp_{part}"].copy()
        window, _ = random_window(spec)
        out = forward(spec, weights, window)
        np.testing.assert_array_equal(out["bvp"], out["resp"])

    def test_multitask_equals_two_single_task_networks(self):
        multi = tiny_spec("hybrid", multi_task=True)
        single = tiny_spec("hybrid", multi_task=False)
        weights = build_model(multi, 8)
        window, _ = random_window(multi)
        out = forward(multi, weights, window)
        trunk = {k: v for k, v in weights.items() if "dense" not in k}
        w_bvp = dict(trunk, **{k: weights[k] for k in weights if k.startswith("bvp_")})
        out_bvp = forward(single, w_bvp, window)
        w_resp = dict(trunk, **{f"bvp_{k.split('_', 1)[1]}": weights[k]
                                for k in weights if k.startswith("resp_")})
        out_resp = forward(single, w_resp, window)
        np.testing.assert_array_equal(out["bvp"], out_bvp["bvp"])
        np.testing.assert_array_equal(out["resp"], out_resp["bvp"])

    def test_zero_shift_tscan_matches_can2d_bitwise(self):
        spec_t = tiny_spec("tscan", multi_task=True, shift_div=0)
        spec_2 = tiny_spec("can2d", multi_task=True)
        weights = build_model(spec_t, 5)
        window, _ = random_window(spec_t, seed=2)
        tiled = np.broadcast_to(window.appearance,
                                (spec_t.window_len,) + window.appearance.shape).copy()
        out_t = forward(spec_t, weights, window)
        out_2 = forward(spec_2, weights, WindowInput(window.motion, tiled))
        for head in out_t:
            np.testing.assert_array_equal(out_t[head], out_2[head])

    def test_inference_deterministic_and_train_seeded(self):
        spec = tiny_spec("tscan")
        weights = build_model(spec, 1)
        window, _ = random_window(spec)
        a = forward(spec, weights, window)
        b = forward(spec, weights, window)
        np.testing.assert_array_equal(a["bvp"], b["bvp"])
        t1 = forward(spec, weights, window, train_mode=True, seed=5)
        t2 = forward(spec, weights, window, train_mode=True, seed=5)
        np.testing.assert_array_equal(t1["bvp"], t2["bvp"])
        t3 = forward(spec, weights, window, train_mode=True, seed=6)
        assert not np.array_equal(t1["bvp"], t3["bvp"])

    def test_forward_matches_hand_composed_ops(self):
        """tscan forward == explicit composition of the public operations."""
        spec = tiny_spec("tscan")
        weights = build_model(spec, 21)
        window, _ = random_window(spec, seed=9)
        out = forward(spec, weights, window)["bvp"]

        def conv_tanh(x, name):
            return ops.activation(
                ops.conv2d(x, weights[f"{name}_w"], weights[f"{name}_b"]), "tanh")

        # Appearance branch (single averaged frame).
        a = window.appearance[None]
        a = conv_tanh(a, "appearance_conv1")
        a = conv_tanh(a, "appearance_conv2")
        mask1 = attention_mask(a[0], AttentionParams(weights["attn1_w"], weights["attn1_b"]))
        a = ops.avg_pool(a, (2, 2))
        a = conv_tanh(a, "appearance_conv3")
        a = conv_tanh(a, "appearance_conv4")
        mask2 = attention_mask(a[0], AttentionParams(weights["attn2_w"], weights["attn2_b"]))

        sh = shift_specs(spec)
        m = conv_tanh(temporal_shift(window.motion, sh[0]), "motion_conv1")
        m = conv_tanh(temporal_shift(m, sh[1]), "motion_conv2")
        m = ops.avg_pool(apply_mask(m, mask1), (2, 2))
        m = conv_tanh(temporal_shift(m, sh[2]), "motion_conv3")
        m = conv_tanh(temporal_shift(m, sh[3]), "motion_conv4")
        m = ops.avg_pool(apply_mask(m, mask2), (2, 2))
        f = m.reshape(spec.window_len, -1)
        z = ops.activation(ops.dense(f, weights["bvp_dense1_w"], weights["bvp_dense1_b"]),
                           "tanh")
        y = ops.dense(z, weights["bvp_dense2_w"], weights["bvp_dense2_b"])[:, 0]
        np.testing.assert_allclose(out, y, rtol=0, atol=2e-6)

    def test_dim_mismatch_rejected(self):
        spec = tiny_spec("tscan")
        weights = build_model(spec, 0)
        bad_motion = np.zeros((4, 10, 10, 3), np.float32)
        app = np.zeros((12, 12, 3), np.float32)
        with pytest.raises(ops.ShapeError, match="motion"):
            forward(spec, weights, WindowInput(bad_motion, app))

    def test_non_finite_rejected(self):
        spec = tiny_spec("can2d")
        weights = build_model(spec, 0)
        window, _ = random_window(spec)
        window.motion[0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            forward(spec, weights, window)


class TestWeightsIO:
    def test_round_trip_bitwise(self, tmp_path):
        spec = tiny_spec("can3d", multi_task=True)
        weights = build_model(spec, 17)
        path = tmp_path / "w.vtf"
        save_weights(path, weights)
        loaded = load_weights(path, spec)
        assert list(loaded) == list(weights)
        for name in weights:
            np.testing.assert_array_equal(loaded[name], weights[name])

    def test_missing_parameter_named(self, tmp_path):
        spec = tiny_spec("tscan")
        weights = build_model(spec, 0)
        del weights["motion_conv2_b"]
        path = tmp_path / "w.vtf"
        save_weights(path, weights)
        with pytest.raises(WeightError, match="motion_conv2_b"):
            load_weights(path, spec)

    def test_wrong_arch_weights_rejected(self, tmp_path):
        spec3d = tiny_spec("can3d")
        path = tmp_path / "w3d.vtf"
        save_weights(path, build_model(spec3d, 0))
        with pytest.raises(WeightError, match="dims"):
            load_weights(path, tiny_spec("tscan"))

    def test_extra_parameter_rejected(self, tmp_path):
        spec = tiny_spec("tscan")
        weights = build_model(spec, 0)
        weights["stowaway"] = np.zeros(3, np.float32)
        path = tmp_path / "w.vtf"
        save_weights(path, weights)
        with pytest.raises(WeightError, match="stowaway"):
            load_weights(path, spec)
