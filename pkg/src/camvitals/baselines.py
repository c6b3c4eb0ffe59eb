"""Unsupervised pulse extraction from spatially averaged color traces.

Three classical methods operating on the mean R/G/B skin-pixel traces:

  chrom  chrominance projection with per-window std-ratio tuning, Hann
         overlap-add at 50% window overlap.
  pos    plane-orthogonal-to-skin projection over 1.6 s sliding windows
         with one-frame steps and mean-subtracted overlap-add.
  ica    linear detrend, z-score, JADE source separation, and selection of
         the component with the strongest in-band spectral power.

All methods are invariant to uniform positive scaling of the input traces
(each window is normalized by its own mean or variance).
"""
from __future__ import annotations

from dataclasses import dataclass

import csv

import numpy as np
from scipy.signal import butter, detrend, filtfilt, get_window

from .jade import jade
from .sigproc import SignalTrace, periodogram

PULSE_BAND_HZ = (0.7, 2.5)
WINDOW_S = 1.6
CHROM_STEP_S = 0.8


@dataclass
class RgbTraces:
    """Per-frame spatial means of the skin pixels, one trace per channel."""

    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray
    fs: float

    def __post_init__(self):
        self.red = np.asarray(self.red, dtype=np.float64)
        self.green = np.asarray(self.green, dtype=np.float64)
        self.blue = np.asarray(self.blue, dtype=np.float64)
        if not len(self.red) == len(self.green) == len(self.blue):
            raise ValueError("channel traces must have equal lengths")
        if not self.fs > 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")

    def __len__(self) -> int:
        return len(self.red)

    @classmethod
    def from_clip(cls, frames: np.ndarray, mask: np.ndarray, fps: float) -> "RgbTraces":
        """Average the masked pixels of a (T, H, W, 3) clip per channel."""
        frames = np.asarray(frames)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ValueError(f"clip must be TxHxWx3, got dims {frames.shape}")
        if mask is None:
            mask = np.ones(frames.shape[1:3], dtype=bool)
        if mask.shape != frames.shape[1:3] or not mask.any():
            raise ValueError("mask must match the frame grid and select pixels")
        means = frames[:, mask, :].mean(axis=1)
        return cls(red=means[:, 0], green=means[:, 1], blue=means[:, 2], fs=fps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "r", "g", "b"])
            for i in range(len(self)):
                writer.writerow([f"{i / self.fs:.9f}", f"{self.red[i]:.8g}",
                                 f"{self.green[i]:.8g}", f"{self.blue[i]:.8g}"])

    @classmethod
    def from_csv(cls, path) -> "RgbTraces":
        times, rows = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:4]] != ["t_s", "r", "g", "b"]:
                raise ValueError(f"{path} is not a traces CSV (expected header 't_s,r,g,b')")
            for row in reader:
                if not row:
                    continue
                times.append(float(row[0]))
                rows.append([float(v) for v in row[1:4]])
        if len(rows) < 2:
            raise ValueError(f"traces CSV {path} needs at least two samples")
        dt = float(np.median(np.diff(times)))
        if dt <= 0:
            raise ValueError(f"traces CSV {path} has non-increasing timestamps")
        arr = np.asarray(rows)
        return cls(red=arr[:, 0], green=arr[:, 1], blue=arr[:, 2], fs=1.0 / dt)


@dataclass
class BaselineResult:
    """Recovered pulse plus method diagnostics."""

    trace: SignalTrace
    skipped_windows: int = 0   # pos: windows with a degenerate projection
    sources_used: int = 3      # ica: separation dimension actually used


def _window_filter(fs: float):
    b, a = butter(3, list(PULSE_BAND_HZ), btype="bandpass", fs=fs)
    padlen = 3 * (max(len(a), len(b)) - 1)
    return b, a, padlen


def _mean_normalize(win: np.ndarray) -> np.ndarray:
    mean = win.mean()
    if mean == 0.0:
        return np.zeros_like(win)
    return win / mean


def chrom(traces: RgbTraces) -> BaselineResult:
    """Chrominance-based pulse extraction.

    1.6 s windows stepped by 0.8 s; each window is mean-normalized per
    channel, band-pass filtered (zero-phase 3rd-order Butterworth,
    0.7-2.5 Hz), projected as 3(1-a/2) y_r - 2(1+a/2) y_g + (3a/2) y_b with
    a the std ratio of the two chrominance axes, then Hann-windowed and
    overlap-added at 50% overlap. A trailing partial window is dropped.
    """
    n = len(traces)
    fs = traces.fs
    length = int(round(WINDOW_S * fs))
    step = int(round(CHROM_STEP_S * fs))
    if n < length:
        raise ValueError(f"need at least {length} samples (1.6 s), got {n}")
    b, a, padlen = _window_filter(fs)
    hann = get_window("hann", length)
    out = np.zeros(n)
    channels = (traces.red, traces.green, traces.blue)
    for start in range(0, n - length + 1, step):
        sl = slice(start, start + length)
        yr, yg, yb = (filtfilt(b, a, _mean_normalize(ch[sl]),
                               padtype="odd", padlen=padlen) for ch in channels)
        ax = 3.0 * yr - 2.0 * yg
        bx = 1.5 * yr + yg - 1.5 * yb
        sb = bx.std()
        alpha = ax.std() / sb if sb > 0 else 0.0
        s_win = 3.0 * (1.0 - alpha / 2.0) * yr - 2.0 * (1.0 + alpha / 2.0) * yg \
            + (3.0 * alpha / 2.0) * yb
        out[sl] += hann * s_win
    return BaselineResult(trace=SignalTrace(out, fs))


def pos(traces: RgbTraces) -> BaselineResult:
    """Plane-orthogonal-to-skin pulse extraction.

    1.6 s windows stepped one frame; each window is divided by its channel
    means, projected onto the two tuned chrominance axes, mean-subtracted,
    and accumulated in place. Windows with a degenerate second axis
    (zero variance) are skipped and counted.
    """
    n = len(traces)
    fs = traces.fs
    length = int(round(WINDOW_S * fs))
    if n < length:
        raise ValueError(f"need at least {length} samples (1.6 s), got {n}")
    view = np.lib.stride_tricks.sliding_window_view
    wr = view(traces.red, length)
    wg = view(traces.green, length)
    wb = view(traces.blue, length)
    means_r, means_g, means_b = wr.mean(axis=1), wg.mean(axis=1), wb.mean(axis=1)
    out = np.zeros(n)
    skipped = 0
    for i in range(len(wr)):
        if means_r[i] == 0 or means_g[i] == 0 or means_b[i] == 0:
            skipped += 1
            continue
        xr, xg, xb = wr[i] / means_r[i], wg[i] / means_g[i], wb[i] / means_b[i]
        xs = xg - xb
        ys = -2.0 * xr + xg + xb
        sy = ys.std()
        if sy == 0.0:
            if xs.std() == 0.0:
                continue  # fully degenerate window contributes nothing
            skipped += 1
            continue
        s = xs + (xs.std() / sy) * ys
        out[i:i + length] += s - s.mean()
    return BaselineResult(trace=SignalTrace(out, fs), skipped_windows=skipped)


def ica_pulse(traces: RgbTraces) -> BaselineResult:
    """Source-separation pulse extraction.

    Channels are linearly detrended and z-scored, separated with JADE, and
    the component carrying the largest fraction of spectral power inside
    0.7-2.5 Hz is returned. A rank-deficient channel set degrades to a
    two-source separation (reported in the diagnostics).
    """
    n = len(traces)
    fs = traces.fs
    if n / fs < 10.0:
        raise ValueError(f"need at least 10 s of samples, got {n / fs:.2f} s")
    x = np.stack([traces.red, traces.green, traces.blue])
    x = detrend(x, axis=1, type="linear")
    stds = x.std(axis=1)
    live = stds > 0
    xz = np.zeros_like(x)
    xz[live] = (x[live] - x[live].mean(axis=1, keepdims=True)) / stds[live, None]
    cov = (xz @ xz.T) / n
    eigvals = np.linalg.eigvalsh(cov)
    m = 3
    if eigvals[0] < 1e-10 * max(eigvals[-1], np.finfo(np.float64).tiny):
        m = 2
    unmix = jade(xz, n_sources=m)
    sources = unmix @ xz
    best, best_ratio = 0, -1.0
    for i in range(m):
        freqs, amp = periodogram(sources[i], fs)
        power = amp * amp
        total = power.sum()
        if total <= 0:
            continue
        in_band = (freqs >= PULSE_BAND_HZ[0]) & (freqs <= PULSE_BAND_HZ[1])
        ratio = power[in_band].sum() / total
        if ratio > best_ratio:
            best, best_ratio = i, ratio
    return BaselineResult(trace=SignalTrace(sources[best], fs), sources_used=m)
