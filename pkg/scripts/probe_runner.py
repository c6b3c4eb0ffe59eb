"""Run one toy-training configuration probe (used during default tuning)."""
import sys
import time

import numpy as np

from camvitals import models, rng
from camvitals.models import ModelSpec, build_model, prepare_appearance
from camvitals.synth import SynthParams, make_dataset
from camvitals.train import AdadeltaState, Batch, LossConfig, adadelta_step, backward


def run(tag, ds, hidden=32, eps=1e-6, rho=0.95, batch=8, epochs=100, seed=3):
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
        if (epoch + 1) % 25 == 0 or epoch == 0:
            out, _ = models._forward(spec, weights, ds.motion, app, False, None, False)
            lb = float(np.mean(np.abs(out["bvp"] - ds.bvp)))
            lr = float(np.mean(np.abs(out["resp"] - ds.resp)))
            print(f"[{tag}] ep{epoch + 1:3d} train {total / n:.4f} "
                  f"ratio {total / n / first:.3f} bvp {lb:.4f} resp {lr:.4f} "
                  f"{time.time() - t0:.0f}s", flush=True)
    return weights


def main():
    which = sys.argv[1] if len(sys.argv) > 1 else "a"
    clean = SynthParams(duration_s=640 / 30.0, seed=11, pulse_amp=0.03,
                        resp_amp=0.03, noise_sigma=0.001)
    if which == "a":
        ds = make_dataset(clean)
        print("A: clean ds ready", flush=True)
        run("A1 clean eps1e-6 b8", ds, eps=1e-6, batch=8)
        run("A2 clean eps1e-5 b8", ds, eps=1e-5, batch=8)
    else:
        ds = make_dataset(clean)
        ds_def = make_dataset(SynthParams(duration_s=640 / 30.0, seed=11))
        print("B: datasets ready", flush=True)
        run("B1 clean eps1e-6 b4", ds, eps=1e-6, batch=4)
        run("B2 default eps1e-6 b4", ds_def, eps=1e-6, batch=4)


if __name__ == "__main__":
    main()
