"""Command-line surface for the measurement stack.

Verbs: ``synth`` (render labeled clips), ``infer`` (model forward over a
clip), ``train`` (fit a model on a window dataset), ``eval`` (rate metrics
between prediction and reference traces), ``baseline`` (classical pulse
methods), and ``bench`` (per-frame latency). All randomness flows through
explicit ``--seed`` flags; reports are JSON documents with a
``schema_version`` field. Exit codes: 0 success, 2 validation error,
1 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baselines, bench, data, models, sigproc, synth
from .train import LossConfig, train as run_training
from .models import ModelSpec
from .sigproc import (BR_BAND, HR_BAND, BandSpec, SignalTrace, MetricsReport,
                      WindowMetrics, butter_bandpass, estimate_rate,
                      preprocess_clip, read_trace_csv, snr_db, write_trace_csv)

SCHEMA_VERSION = 1


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    clip_docs = doc["clips"] if isinstance(doc, dict) and "clips" in doc else [doc]
    if not isinstance(clip_docs, list) or not clip_docs:
        raise ValueError("synth config must be a params object or {'clips': [...]}")
    os.makedirs(args.out, exist_ok=True)
    entries = []
    params_list = []
    for i, clip_doc in enumerate(clip_docs):
        if args.seed is not None:
            clip_doc = dict(clip_doc, seed=args.seed + i)
        params = synth.SynthParams.from_json_dict(clip_doc)
        params_list.append(params)
        clip, gt, _mask = synth.render_clip(params)
        base = os.path.join(args.out, f"clip_{i:03d}")
        clip_path, sidecar_path = synth.save_clip(base, clip, params, gt)
        if args.rgb24:
            synth.export_rgb24(base + ".rgb24", clip)
        entries.append({
            "clip": os.path.basename(clip_path),
            "sidecar": os.path.basename(sidecar_path),
            "frames": int(len(clip.frames)),
            "fps": params.fps,
            "hr_bpm": params.hr_bpm,
            "br_bpm": params.br_bpm,
            "seed": params.seed,
        })
    manifest = {"schema_version": SCHEMA_VERSION, "clips": entries}
    if args.dataset:
        dataset = synth.make_dataset(params_list, window_len=args.window_len)
        manifest["dataset_manifest"] = os.path.relpath(
            data.save_dataset(os.path.join(args.out, "dataset"), dataset), args.out)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"wrote {len(entries)} clip(s) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

def _clip_windows(spec: ModelSpec, frames: np.ndarray):
    """Slice a clip into model windows; returns (motion, appearance, dropped)."""
    diff, raw = preprocess_clip(frames, spec.input_size)
    length = spec.window_len
    n_windows = len(diff) // length
    if n_windows == 0:
        raise ValueError(
            f"clip of {len(frames)} frames yields no full {length}-frame window")
    dropped = len(diff) - n_windows * length
    motion = np.stack([diff[k * length:(k + 1) * length] for k in range(n_windows)])
    appearance = np.stack([raw[k * length:(k + 1) * length] for k in range(n_windows)])
    return motion, models.prepare_appearance(spec, appearance), dropped


def cmd_infer(args) -> int:
    spec = ModelSpec.load_json(args.model)
    weights = models.load_weights(args.weights, spec)
    clip, _params, _gt = synth.load_clip(args.clip)
    fps = clip.fps if clip.fps > 0 else (args.fps or 0.0)
    if fps <= 0:
        raise ValueError("clip has no sidecar frame rate; pass --fps")
    motion, appearance, dropped = _clip_windows(spec, clip.frames)
    outputs = models.forward_batch(spec, weights, motion, appearance)
    os.makedirs(args.out, exist_ok=True)
    written = {}
    for head, values in outputs.items():
        trace = SignalTrace(values.reshape(-1).astype(np.float64), fps)
        path = os.path.join(args.out, f"pred_{head}.csv")
        # Difference frames sit between raw frames, hence the half-sample shift.
        write_trace_csv(path, trace, t0=0.5 / fps)
        written[head] = os.path.basename(path)
    _write_json(os.path.join(args.out, "summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "frames": int(len(clip.frames)),
        "windows": int(motion.shape[0]),
        "outputs_per_head": int(outputs["bvp"].size),
        "dropped_difference_frames": int(dropped),
        "heads": written,
        "fps": fps,
    })
    print(f"wrote {len(written)} waveform(s) to {args.out} "
          f"({dropped} trailing difference frame(s) dropped)")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    spec = ModelSpec.load_json(args.model)
    dataset = data.load_dataset(args.manifest, split=args.split)
    weights, history = run_training(
        spec, dataset, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed if args.seed is not None else 0,
        cfg=LossConfig(alpha=args.alpha), verbose=args.verbose)
    os.makedirs(args.out, exist_ok=True)
    weights_path = os.path.join(args.out, "weights.vtf")
    models.save_weights(weights_path, weights)
    loss_path = os.path.join(args.out, "loss_history.csv")
    with open(loss_path, "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(history):
            fh.write(f"{i + 1},{loss:.8g}\n")
    _write_json(os.path.join(args.out, "summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "epochs": int(args.epochs),
        "windows": len(dataset),
        "final_loss": history[-1] if history else None,
        "weights": os.path.basename(weights_path),
        "loss_history": os.path.basename(loss_path),
    })
    print(f"trained {args.epochs} epoch(s) on {len(dataset)} windows -> {weights_path}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _bland_altman_svg(path, means, diffs) -> None:
    """Minimal static scatter of per-window (mean, difference) rates."""
    means = np.asarray(means)
    diffs = np.asarray(diffs)
    w, h, pad = 480, 360, 50
    x0, x1 = float(means.min()) - 1.0, float(means.max()) + 1.0
    span = max(float(np.abs(diffs).max()) * 1.2, 1.0)
    y0, y1 = -span, span

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def sy(y):
        return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad)

    bias = float(diffs.mean())
    lim = 1.96 * float(diffs.std())
    rows = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
            f'<rect width="{w}" height="{h}" fill="white"/>',
            f'<line x1="{pad}" y1="{sy(0)}" x2="{w - pad}" y2="{sy(0)}" '
            'stroke="#888" stroke-dasharray="4"/>']
    for level, color in ((bias, "#2060c0"), (bias + lim, "#c02020"), (bias - lim, "#c02020")):
        rows.append(f'<line x1="{pad}" y1="{sy(level)}" x2="{w - pad}" y2="{sy(level)}" '
                    f'stroke="{color}" stroke-width="1"/>')
    for x, y in zip(means, diffs):
        rows.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="#20a060"/>')
    rows.append(f'<text x="{w / 2}" y="{h - 12}" text-anchor="middle" font-size="12">'
                'mean rate (cycles/min)</text>')
    rows.append(f'<text x="14" y="{h / 2}" font-size="12" transform="rotate(-90 14 {h / 2})" '
                'text-anchor="middle">difference (cycles/min)</text>')
    rows.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def cmd_eval(args) -> int:
    pred = read_trace_csv(args.pred)
    truth = read_trace_csv(args.truth)
    if abs(pred.fs - truth.fs) > 0.01 * truth.fs:
        raise ValueError(
            f"sample rates differ: prediction {pred.fs:.3f} Hz vs reference {truth.fs:.3f} Hz")
    kind = args.kind
    band = BandSpec(args.band[0], args.band[1]) if args.band else \
        (HR_BAND if kind == "pulse" else BR_BAND)
    pred_f = butter_bandpass(pred, band)
    truth_f = butter_bandpass(truth, band)
    win = int(round(args.window_s * truth.fs))
    n_windows = min(len(pred_f.samples), len(truth_f.samples)) // win
    if n_windows == 0:
        raise ValueError(
            f"traces shorter than one {args.window_s:.0f} s evaluation window")
    entries = []
    for k in range(n_windows):
        sl = slice(k * win, (k + 1) * win)
        est = estimate_rate(SignalTrace(pred_f.samples[sl], pred.fs), band)
        ref = estimate_rate(SignalTrace(truth_f.samples[sl], truth.fs), band)
        quality = snr_db(SignalTrace(pred_f.samples[sl], pred.fs), ref.bpm, kind)
        entries.append(WindowMetrics(est_rate=est.bpm, ref_rate=ref.bpm, snr_db=quality))
    report = MetricsReport.from_windows(entries)
    os.makedirs(args.out, exist_ok=True)
    report.save_json(os.path.join(args.out, "metrics.json"))
    report.save_csv(os.path.join(args.out, "metrics.csv"))
    means = [(w.est_rate + w.ref_rate) / 2.0 for w in entries]
    diffs = [w.est_rate - w.ref_rate for w in entries]
    with open(os.path.join(args.out, "bland_altman.csv"), "w") as fh:
        fh.write("mean_rate,diff_rate\n")
        for m, d in zip(means, diffs):
            fh.write(f"{m:.6g},{d:.6g}\n")
    if args.svg:
        _bland_altman_svg(os.path.join(args.out, "bland_altman.svg"), means, diffs)
    rho = "n/a" if report.pearson_rho is None else f"{report.pearson_rho:.3f}"
    print(f"windows={n_windows} MAE={report.mae:.3f} RMSE={report.rmse:.3f} "
          f"rho={rho} SNR={report.mean_snr_db:.2f} dB")
    return 0


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------

def cmd_baseline(args) -> int:
    if (args.traces is None) == (args.clip is None):
        raise ValueError("pass exactly one of --traces or --clip")
    if args.traces is not None:
        traces = baselines.RgbTraces.from_csv(args.traces)
    else:
        clip, params, _gt = synth.load_clip(args.clip)
        fps = clip.fps if clip.fps > 0 else (args.fps or 0.0)
        if fps <= 0:
            raise ValueError("clip has no sidecar frame rate; pass --fps")
        mask = synth.skin_mask(params) if params is not None else None
        traces = baselines.RgbTraces.from_clip(clip.frames, mask, fps)
    method = {"pos": baselines.pos, "chrom": baselines.chrom,
              "ica": baselines.ica_pulse}[args.method]
    result = method(traces)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, f"{args.method}_bvp.csv")
    write_trace_csv(out_csv, result.trace)
    _write_json(os.path.join(args.out, f"{args.method}_summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "method": args.method,
        "samples": len(result.trace.samples),
        "fs": result.trace.fs,
        "skipped_windows": result.skipped_windows,
        "sources_used": result.sources_used,
    })
    print(f"wrote {out_csv}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def cmd_bench(args) -> int:
    tokens = [t for t in args.models.split(",") if t.strip()]
    report = bench.bench_models(
        tokens, iters=args.iters, warmup=args.warmup,
        seed=args.seed if args.seed is not None else 0,
        window_len=args.window_len, filters=tuple(args.filters), hidden=args.hidden)
    os.makedirs(args.out, exist_ok=True)
    report.save_json(os.path.join(args.out, "bench.json"))
    for e in report.entries:
        print(f"{e.model:>12}: median {e.median_ms_per_frame:8.3f} ms/frame "
              f"(p10 {e.p10_ms_per_frame:.3f}, p90 {e.p90_ms_per_frame:.3f})")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camvitals",
        description="Camera-based cardiopulmonary measurement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render synthetic labeled clips")
    p.add_argument("config", help="SynthParams JSON (or {'clips': [...]})")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seeds")
    p.add_argument("--dataset", action="store_true",
                   help="also slice a training window dataset")
    p.add_argument("--window-len", type=int, default=10)
    p.add_argument("--rgb24", action="store_true", help="also export raw RGB24 bytes")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("infer", help="run a model over a clip")
    p.add_argument("model", help="model spec JSON")
    p.add_argument("weights", help="weights container (.vtf)")
    p.add_argument("clip", help="clip container (.vtf)")
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float, default=None,
                   help="frame rate when the clip has no sidecar")
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="train a model on a window dataset")
    p.add_argument("model", help="model spec JSON")
    p.add_argument("manifest", help="dataset manifest JSON")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--split", default=None, help="manifest split name (default: all windows)")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="rate metrics between two waveform CSVs")
    p.add_argument("pred", help="predicted trace CSV")
    p.add_argument("truth", help="reference trace CSV")
    p.add_argument("--kind", choices=("pulse", "resp"), default="pulse")
    p.add_argument("--band", type=float, nargs=2, default=None,
                   metavar=("LO_HZ", "HI_HZ"), help="override the pass band")
    p.add_argument("--window-s", type=float, default=30.0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true", help="emit a Bland-Altman SVG")
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="classical pulse extraction")
    p.add_argument("method", choices=("pos", "chrom", "ica"))
    p.add_argument("--traces", default=None, help="t_s,r,g,b CSV")
    p.add_argument("--clip", default=None, help="clip container (.vtf)")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench", help="per-frame inference latency")
    p.add_argument("--models", default=",".join(bench.DEFAULT_MODELS))
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--window-len", type=int, default=10)
    p.add_argument("--filters", type=int, nargs=4, default=(32, 32, 64, 64))
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
