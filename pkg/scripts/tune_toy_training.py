"""Sweep optimizer/target knobs for the toy multi-task training setup.

Prints per-config loss trajectories so the default training configuration
can be picked from evidence rather than guesswork.
"""
import sys
import time

import numpy as np

from camvitals import models, rng
from camvitals.models import ModelSpec, build_model, prepare_appearance
from camvitals.synth import SynthParams, make_dataset
from camvitals.train import AdadeltaState, Batch, LossConfig, adadelta_step, backward


def run(tag, ds, hidden=16, eps=1e-7, rho=0.95, batch=8, epochs=60, seed=3):
    spec = ModelSpec(arch="tscan", multi_task=True, filters=(4, 4, 8, 8), hidden=hidden)
    weights = build_model(spec, seed)
    state = AdadeltaState.for_weights(weights, rho=rho, eps=eps)
    app = prepare_appearance(spec, ds.appearance)
    cfg = LossConfig()
    n = len(ds.motion)
    t0 = time.time()
    first = None
    for epoch in range(epochs):
        perm = rng.stream(seed, rng.STREAM_SHUFFLE, epoch).permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, batch)):
            idx = perm[start:start + batch]
            b = Batch(motion=ds.motion[idx], appearance=app[idx],
                      bvp=ds.bvp[idx], resp=ds.resp[idx])
            grads, loss = backward(spec, weights, b, cfg,
                                   rng.derive(seed, rng.STREAM_DROPOUT, epoch, step))
            weights = adadelta_step(weights, grads, state)
            total += loss * len(idx)
        if first is None:
            first = total / n
        if (epoch + 1) % 20 == 0 or epoch == 0:
            out, _ = models._forward(spec, weights, ds.motion, app, False, None, False)
            lb = float(np.mean(np.abs(out["bvp"] - ds.bvp)))
            lr = float(np.mean(np.abs(out["resp"] - ds.resp)))
            print(f"  [{tag}] ep{epoch + 1:3d} train {total / n:.4f} "
                  f"(ratio {total / n / first:.3f}) eval bvp {lb:.4f} resp {lr:.4f} "
                  f"{time.time() - t0:.0f}s", flush=True)
    return weights


def main():
    base = dict(duration_s=640 / 30.0, seed=11)
    ds_clip = make_dataset(SynthParams(**base), target_norm="clip")
    ds_clip_bigresp = make_dataset(SynthParams(resp_amp=0.025, **base), target_norm="clip")
    ds_win_bigresp = make_dataset(SynthParams(resp_amp=0.025, **base), target_norm="window")
    print("datasets ready", flush=True)

    run("clip eps1e-6", ds_clip, eps=1e-6)
    run("clip eps1e-6 bigresp", ds_clip_bigresp, eps=1e-6)
    run("win  eps1e-6 bigresp", ds_win_bigresp, eps=1e-6)
    run("clip eps1e-7 bigresp", ds_clip_bigresp, eps=1e-7)
    run("clip eps1e-6 rho0.9 bigresp", ds_clip_bigresp, eps=1e-6, rho=0.9)


if __name__ == "__main__":
    sys.exit(main())
