"""Full acceptance-scale toy training validation: loss ratio + held-out rates."""
import sys
import time

import numpy as np

from camvitals import models
from camvitals.models import ModelSpec, prepare_appearance
from camvitals.sigproc import (BR_BAND, HR_BAND, SignalTrace, butter_bandpass,
                               estimate_rate, preprocess_clip)
from camvitals.synth import SynthParams, make_dataset, render_clip
from camvitals.train import LossConfig, train


def main():
    eps = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-6
    batch = int(sys.argv[2]) if len(sys.argv) > 2 else 4
    t0 = time.time()
    train_params = SynthParams(duration_s=640 / 30.0, seed=11, pulse_amp=0.03,
                               resp_amp=0.03, noise_sigma=0.001)
    ds = make_dataset(train_params)
    assert len(ds.motion) == 64
    t_data = time.time() - t0
    spec = ModelSpec(arch="tscan", multi_task=True, filters=(4, 4, 8, 8),
                     hidden=32, dropout=(0.0, 0.0))
    weights, history = train(spec, ds, epochs=200, batch_size=batch, seed=3,
                             eps=eps)
    t_train = time.time() - t0 - t_data
    ratio = history[-1] / history[0]
    print(f"eps={eps} batch={batch}: data {t_data:.0f}s train {t_train:.0f}s "
          f"epoch1 {history[0]:.4f} final {history[-1]:.4f} ratio {ratio:.4f}time")

    held = SynthParams(seed=99, pulse_amp=0.03, resp_amp=0.03, noise_sigma=0.001)
    clip, gt, _ = render_clip(held)
    diff, raw = preprocess_clip(clip.frames)
    L = spec.window_len
    n_win = len(diff) // L
    motion = np.stack([diff[k * L:(k + 1) * L] for k in range(n_win)])
    app = prepare_appearance(
        spec, np.stack([raw[k * L:(k + 1) * L] for k in range(n_win)]))
    out = models.forward_batch(spec, weights, motion, app)
    for head, band, ref in (("bvp", HR_BAND, 72.0), ("resp", BR_BAND, 15.0)):
        trace = SignalTrace(out[head].reshape(-1).astype(np.float64), held.fps)
        est = estimate_rate(butter_bandpass(trace, band), band)
        print(f"  {head}: {est.bpm:.2f} vs {ref} err {abs(est.bpm - ref):.2f} "
              f"ratio {est.peak_ratio:.2f}")
    print(f"total {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
