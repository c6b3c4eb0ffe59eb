"""Single-threaded per-frame inference latency across architectures.

One iteration times the forward passes needed to produce BOTH vitals
(pulse and respiration) from a single window: one pass for a multi-task
model, two passes for a single-task model (one network per vital). The
iteration time divided by the window length gives milliseconds per frame.
Identical fixture inputs feed every architecture, and the forward passes
are deterministic, so timing spread is environmental only.
"""
from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .models import ARCHS, ModelSpec, build_model, forward_batch

SCHEMA_VERSION = 1

DEFAULT_MODELS = ("mt-tscan", "tscan", "hybrid", "can3d", "can2d")


def parse_model_token(token: str, window_len: int = 10, input_size: int = 36,
                      filters=(32, 32, 64, 64), hidden: int = 128) -> ModelSpec:
    """Map a CLI token like ``tscan`` or ``mt-tscan`` to a ModelSpec."""
    t = token.strip().lower()
    multi = t.startswith("mt-")
    arch = t[3:] if multi else t
    if arch not in ARCHS:
        raise ValueError(f"unknown model token {token!r}; arch must be one of {ARCHS}")
    return ModelSpec(arch=arch, multi_task=multi, window_len=window_len,
                     input_size=input_size, filters=tuple(filters), hidden=hidden)


@dataclass
class ModelLatency:
    """Latency distribution for one architecture."""

    model: str
    arch: str
    multi_task: bool
    median_ms_per_frame: float
    p10_ms_per_frame: float
    p90_ms_per_frame: float
    median_ms_per_window: float

    def to_json_dict(self) -> dict:
        return {"model": self.model, "arch": self.arch, "multi_task": self.multi_task,
                "median_ms_per_frame": self.median_ms_per_frame,
                "p10_ms_per_frame": self.p10_ms_per_frame,
                "p90_ms_per_frame": self.p90_ms_per_frame,
                "median_ms_per_window": self.median_ms_per_window}


@dataclass
class BenchReport:
    """Per-architecture latency summary for one host."""

    entries: list = field(default_factory=list)
    host: str = ""
    warmup: int = 0
    iters: int = 0
    threads: int = 1

    def entry(self, model: str) -> ModelLatency:
        for e in self.entries:
            if e.model == model:
                return e
        raise KeyError(f"no bench entry for model {model!r}")

    def to_json_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "host": self.host,
                "threads": self.threads, "warmup": self.warmup, "iters": self.iters,
                "entries": [e.to_json_dict() for e in self.entries]}

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def _fixture_inputs(window_len: int, input_size: int, seed: int):
    gen = rng.stream(seed, rng.STREAM_INIT, 999)
    motion = gen.standard_normal((1, window_len, input_size, input_size, 3))
    appearance = gen.standard_normal((1, window_len, input_size, input_size, 3))
    return motion.astype(np.float32), appearance.astype(np.float32)


def bench_models(models=DEFAULT_MODELS, iters: int = 100, warmup: int = 10,
                 seed: int = 0, window_len: int = 10, input_size: int = 36,
                 filters=(32, 32, 64, 64), hidden: int = 128) -> BenchReport:
    """Time inference for each model token on identical fixture inputs."""
    if iters < 30:
        raise ValueError(f"need at least 30 timing iterations, got {iters}")
    if warmup < 5:
        raise ValueError(f"need at least 5 warmup iterations, got {warmup}")
    motion, app_frames = _fixture_inputs(window_len, input_size, seed)
    app_single = app_frames.mean(axis=1, dtype=app_frames.dtype)
    report = BenchReport(host=f"{platform.platform()} / {platform.processor() or 'unknown cpu'}",
                         warmup=warmup, iters=iters, threads=1)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - present in the supported env
        import contextlib

        def threadpool_limits(limits):
            return contextlib.nullcontext()

    with threadpool_limits(limits=1):
        for token in models:
            spec = parse_model_token(token, window_len, input_size, filters, hidden)
            weights = build_model(spec, seed)
            appearance = app_single if spec.single_frame_appearance else app_frames
            passes = 1 if spec.multi_task else 2

            def run_once():
                for _ in range(passes):
                    forward_batch(spec, weights, motion, appearance)

            for _ in range(warmup):
                run_once()
            samples = np.empty(iters)
            for i in range(iters):
                t0 = time.perf_counter()
                run_once()
                samples[i] = (time.perf_counter() - t0) * 1000.0
            per_frame = samples / window_len
            p10, med, p90 = np.percentile(per_frame, [10, 50, 90])
            report.entries.append(ModelLatency(
                model=token, arch=spec.arch, multi_task=spec.multi_task,
                median_ms_per_frame=float(med), p10_ms_per_frame=float(p10),
                p90_ms_per_frame=float(p90),
                median_ms_per_window=float(np.median(samples))))
    return report
