"""Second tuning round: dropout-off overfit probes."""
import sys
import time

import numpy as np

from camvitals import models, rng
from camvitals.models import ModelSpec, build_model, prepare_appearance
from camvitals.synth import SynthParams, make_dataset
from camvitals.train import AdadeltaState, Batch, LossConfig, adadelta_step, backward


def run(tag, ds, hidden=32, eps=1e-6, rho=0.95, batch=4, epochs=100, seed=3,
        dropout=(0.0, 0.0)):
    spec = ModelSpec(arch="tscan", multi_task=True, filters=(4, 4, 8, 8),
                     hidden=hidden, dropout=dropout)
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
            print(f"[{tag}] ep{epoch + 1:3d} train {total / n:.4f} "
                  f"ratio {total / n / first:.3f} {time.time() - t0:.0f}s", flush=True)


def main():
    which = sys.argv[1]
    clean = SynthParams(duration_s=640 / 30.0, seed=11, pulse_amp=0.03,
                        resp_amp=0.03, noise_sigma=0.001)
    if which == "c":
        ds = make_dataset(clean)
        print("ds ready", flush=True)
        run("C1 nodrop rho.95", ds)
        run("C2 nodrop rho.90", ds, rho=0.90)
    else:
        strong = SynthParams(duration_s=640 / 30.0, seed=11, pulse_amp=0.05,
                             resp_amp=0.05, noise_sigma=0.0005)
        ds2 = make_dataset(strong)
        print("ds ready", flush=True)
        run("D1 strong nodrop rho.90", ds2, rho=0.90)
        run("D2 strong nodrop rho.90 eps1e-5", ds2, rho=0.90, eps=1e-5)


if __name__ == "__main__":
    main()
