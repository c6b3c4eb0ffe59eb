"""Video preprocessing, band-pass filtering, rate estimation, and metrics.

Preprocessing follows the measurement pipeline's conventions: frames are
box-resampled to 36x36 with exact fractional-coverage weights, motion input
is the normalized difference of adjacent frames, and both streams are
standardized over the whole clip. Post-processing band-passes waveforms
with a zero-phase 2nd-order Butterworth filter and reads rates off a
Hann-windowed periodogram zero-padded 4x (0.5 cycles/min resolution on a
30 s window).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

EPS_DIFF = 1e-7
SNR_CAP_DB = 80.0
TARGET_SIZE = 36

# Peak-rate / SNR search ranges in cycles per minute.
PULSE_RANGE_CPM = (30.0, 240.0)
RESP_RANGE_CPM = (5.0, 30.0)


@dataclass
class SignalTrace:
    """Uniformly sampled 1-D waveform with its sample rate in Hz."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"trace must be 1-D, got rank {self.samples.ndim}")
        if not self.fs > 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")
        if not np.isfinite(self.samples).all():
            raise ValueError("trace contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs


@dataclass(frozen=True)
class BandSpec:
    """Pass band in Hz."""

    lo: float
    hi: float

    def validate(self, fs: float) -> None:
        if not 0 < self.lo < self.hi:
            raise ValueError(f"band edges must satisfy 0 < lo < hi, got ({self.lo}, {self.hi})")
        if self.hi >= fs / 2:
            raise ValueError(
                f"band edge {self.hi} Hz reaches Nyquist for fs={fs} Hz")


HR_BAND = BandSpec(0.75, 2.5)
BR_BAND = BandSpec(0.08, 0.5)


@dataclass
class RateEstimate:
    """Spectral-peak rate with a crude confidence indicator."""

    bpm: float
    peak_ratio: float
    low_confidence: bool


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def _box_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) fractional-coverage averaging weights for box resampling."""
    w = np.zeros((dst, src), dtype=np.float64)
    step = src / dst
    for i in range(dst):
        lo, hi = i * step, (i + 1) * step
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / step
    return w


def downsample_frame(frame: np.ndarray, size: int = TARGET_SIZE) -> np.ndarray:
    """Area-average one (H, W, 3) frame to (size, size, 3).

    Every output pixel is the mean of its source cell with exact fractional
    coverage at cell borders, so the frame mean is preserved.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"frame must be HxWx3, got dims {frame.shape}")
    h, w = frame.shape[:2]
    if h < size or w < size:
        raise ValueError(f"frame {h}x{w} is smaller than target {size}x{size}")
    rw = _box_weights(h, size)
    cw = _box_weights(w, size)
    out = np.einsum("ih,hwc,jw->ijc", rw, frame.astype(np.float64), cw)
    return out.astype(np.float32)


def downsample_clip(frames: np.ndarray, size: int = TARGET_SIZE) -> np.ndarray:
    """Box-resample every frame of a (T, H, W, 3) clip to (T, size, size, 3)."""
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[3] != 3:
        raise ValueError(f"clip must be TxHxWx3, got dims {frames.shape}")
    h, w = frames.shape[1:3]
    if h < size or w < size:
        raise ValueError(f"frames {h}x{w} are smaller than target {size}x{size}")
    rw = _box_weights(h, size)
    cw = _box_weights(w, size)
    out = np.einsum("ih,thwc,jw->tijc", rw, frames.astype(np.float64), cw)
    return out.astype(np.float32)


def standardize(x: np.ndarray) -> np.ndarray:
    """Zero-mean unit-std over the whole array; all-constant input yields zeros."""
    x = np.asarray(x, dtype=np.float32)
    mean = float(x.mean(dtype=np.float64))
    std = float(x.std(dtype=np.float64))
    if std == 0.0:
        return np.zeros_like(x)
    return ((x - mean) / std).astype(np.float32)


def normalized_difference(clip: np.ndarray, standardized: bool = True) -> np.ndarray:
    """Adjacent-frame contrast ratio d(t) = (c(t+1)-c(t)) / (c(t)+c(t+1)+eps).

    The small guard keeps dark pixels finite; the ratio is invariant to
    uniform brightness scaling up to that guard. With ``standardized`` the
    difference stack is z-scored over the clip afterwards.
    """
    clip = np.asarray(clip, dtype=np.float32)
    if clip.ndim != 4:
        raise ValueError(f"clip must be TxHxWxC, got rank {clip.ndim}")
    if clip.shape[0] < 2:
        raise ValueError("need at least two frames for differences")
    num = clip[1:] - clip[:-1]
    den = clip[:-1] + clip[1:] + np.float32(EPS_DIFF)
    d = num / den
    return standardize(d) if standardized else d


def preprocess_clip(frames: np.ndarray, size: int = TARGET_SIZE):
    """Full front end: downsample, standardized raw stack, difference stack.

    Returns (motion (T-1, size, size, 3), appearance (T, size, size, 3)),
    both standardized per clip.
    """
    small = downsample_clip(frames, size)
    motion = normalized_difference(small)
    appearance = standardize(small)
    return motion, appearance


# ---------------------------------------------------------------------------
# Filtering and spectral estimation
# ---------------------------------------------------------------------------

def butter_bandpass(trace: SignalTrace, band: BandSpec, order: int = 2) -> SignalTrace:
    """Zero-phase Butterworth band-pass (forward-backward application).

    The digital design uses the bilinear transform with pre-warped band
    edges; edges of the record are handled by odd reflection padding of
    three times the digital filter order.
    """
    band.validate(trace.fs)
    b, a = butter(order, [band.lo, band.hi], btype="bandpass", fs=trace.fs)
    padlen = 3 * (max(len(a), len(b)) - 1)
    if len(trace.samples) <= padlen:
        raise ValueError(
            f"trace of {len(trace.samples)} samples is too short to filter "
            f"(needs > {padlen})")
    out = filtfilt(b, a, trace.samples, padtype="odd", padlen=padlen)
    return SignalTrace(out, trace.fs)


def bandpass_response(band: BandSpec, fs: float, freqs_hz, order: int = 2) -> np.ndarray:
    """Analytic single-pass |H(f)| of the designed digital filter.

    Evaluates the transfer-function polynomials on the unit circle; serves
    as the independent oracle for the time-domain filtering path.
    """
    b, a = butter(order, [band.lo, band.hi], btype="bandpass", fs=fs)
    w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / fs
    zinv = np.exp(-1j * w)
    # H(z) = sum_k b_k z^-k / sum_k a_k z^-k evaluated on the unit circle.
    num = sum(bk * zinv ** k for k, bk in enumerate(b))
    den = sum(ak * zinv ** k for k, ak in enumerate(a))
    return np.abs(num / den)


def periodogram(x: np.ndarray, fs: float, pad: int = 4):
    """Hann-windowed amplitude spectrum, zero-padded ``pad``x, mean removed.

    Returns (freqs_hz, amplitude).
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("periodogram needs at least two samples")
    win = np.hanning(n)
    xw = (x - x.mean()) * win
    nfft = pad * n
    amp = np.abs(np.fft.rfft(xw, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    return freqs, amp


def estimate_rate(trace: SignalTrace, band: BandSpec) -> RateEstimate:
    """Dominant in-band spectral rate in cycles/min.

    ``peak_ratio`` compares the in-band peak against the strongest spectral
    content elsewhere; a ratio below 2 flags a low-confidence pick, e.g.
    when the band excludes the waveform's true tone.
    """
    band.validate(trace.fs)
    min_len = 2.0 / band.lo
    if trace.duration_s < min_len:
        raise ValueError(
            f"window of {trace.duration_s:.2f} s is too short for band lo "
            f"{band.lo} Hz (needs >= {min_len:.2f} s)")
    freqs, amp = periodogram(trace.samples, trace.fs)
    sel = (freqs >= band.lo) & (freqs <= band.hi)
    if not sel.any():
        raise ValueError("band contains no spectral bins")
    amp_band = amp[sel]
    peak = int(np.argmax(amp_band))
    outside = amp[~sel & (freqs > 0)]
    competitor = float(outside.max()) if len(outside) else 0.0
    ratio = float(amp_band[peak] / competitor) if competitor > 0 else float("inf")
    return RateEstimate(bpm=60.0 * float(freqs[sel][peak]), peak_ratio=ratio,
                        low_confidence=ratio < 2.0)


def snr_db(trace: SignalTrace, ref_rate_cpm: float, kind: str) -> float:
    """Template signal-to-noise ratio of a waveform spectrum, in dB.

    Spectral power within +/-6 cycles/min of the reference rate and
    +/-12 cycles/min of its first harmonic counts as signal; everything
    else inside the summation range (pulse 30..240, respiration 5..30
    cycles/min) counts as noise. The ratio is capped at +/-80 dB.
    """
    if kind == "pulse":
        lo, hi = PULSE_RANGE_CPM
    elif kind == "resp":
        lo, hi = RESP_RANGE_CPM
    else:
        raise ValueError(f"unknown SNR kind {kind!r}; expected 'pulse' or 'resp'")
    if not lo <= ref_rate_cpm <= hi:
        raise ValueError(
            f"reference rate {ref_rate_cpm} cycles/min outside summation "
            f"range [{lo}, {hi}]")
    if trace.duration_s < 2.0 * 60.0 / ref_rate_cpm:
        raise ValueError("trace shorter than two fundamental periods")
    freqs, amp = periodogram(trace.samples, trace.fs)
    cpm = freqs * 60.0
    region = (cpm >= lo) & (cpm <= hi)
    template = (np.abs(cpm - ref_rate_cpm) <= 6.0) | \
        (np.abs(cpm - 2.0 * ref_rate_cpm) <= 12.0)
    power = amp * amp
    num = float(power[region & template].sum())
    den = float(power[region & ~template].sum())
    if den <= 0.0:
        return SNR_CAP_DB
    if num <= 0.0:
        return -SNR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SNR_CAP_DB, SNR_CAP_DB))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def metrics(est_rates, ref_rates):
    """(MAE, RMSE, Pearson rho) across windows; rho is None without variance."""
    est = np.asarray(est_rates, dtype=np.float64)
    ref = np.asarray(ref_rates, dtype=np.float64)
    if est.shape != ref.shape or est.ndim != 1 or len(est) == 0:
        raise ValueError(
            f"need equal-length nonempty rate vectors, got {est.shape} and {ref.shape}")
    err = est - ref
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    rho = None
    if len(est) >= 2 and est.std() > 0 and ref.std() > 0:
        rho = float(np.corrcoef(est, ref)[0, 1])
    return mae, rmse, rho


@dataclass
class WindowMetrics:
    """Per-window rate pair plus waveform SNR."""

    est_rate: float
    ref_rate: float
    snr_db: float


@dataclass
class MetricsReport:
    """Per-window rates with aggregate error statistics."""

    windows: list = field(default_factory=list)
    mae: float = 0.0
    rmse: float = 0.0
    pearson_rho: float | None = None
    mean_snr_db: float = 0.0

    @classmethod
    def from_windows(cls, windows) -> "MetricsReport":
        est = [w.est_rate for w in windows]
        ref = [w.ref_rate for w in windows]
        mae, rmse, rho = metrics(est, ref)
        return cls(windows=list(windows), mae=mae, rmse=rmse, pearson_rho=rho,
                   mean_snr_db=float(np.mean([w.snr_db for w in windows])))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "windows": [{"est_rate": w.est_rate, "ref_rate": w.ref_rate,
                         "snr_db": w.snr_db} for w in self.windows],
            "mae": self.mae,
            "rmse": self.rmse,
            "pearson_rho": self.pearson_rho,
            "mean_snr_db": self.mean_snr_db,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "est_rate", "ref_rate", "snr_db"])
            for i, w in enumerate(self.windows):
                writer.writerow([i, f"{w.est_rate:.6g}", f"{w.ref_rate:.6g}",
                                 f"{w.snr_db:.6g}"])
            rho = "" if self.pearson_rho is None else f"{self.pearson_rho:.6g}"
            writer.writerow(["aggregate", f"{self.mae:.6g}", f"{self.rmse:.6g}", rho])


# ---------------------------------------------------------------------------
# Trace CSV I/O
# ---------------------------------------------------------------------------

def write_trace_csv(path, trace: SignalTrace, t0: float = 0.0) -> None:
    """Write a waveform as rows of ``t_s,value``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "value"])
        for i, v in enumerate(trace.samples):
            writer.writerow([f"{t0 + i / trace.fs:.9f}", f"{v:.8g}"])


def read_trace_csv(path) -> SignalTrace:
    """Read a ``t_s,value`` waveform; the rate comes from the time column."""
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["t_s", "value"]:
            raise ValueError(f"{path} is not a trace CSV (expected header 't_s,value')")
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            values.append(float(row[1]))
    if len(values) < 2:
        raise ValueError(f"trace CSV {path} needs at least two samples")
    dt = np.median(np.diff(times))
    if dt <= 0:
        raise ValueError(f"trace CSV {path} has non-increasing timestamps")
    return SignalTrace(np.asarray(values), fs=1.0 / float(dt))
