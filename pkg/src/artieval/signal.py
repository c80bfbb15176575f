"""FIR low-pass design, filtering, MFCC extraction, context stacking, and
trajectory resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import FrameSequence


@dataclass(frozen=True)
class FilterSpec:
    """Windowed-sinc low-pass parameters: N taps, cutoff f_c, sample rate f_s."""

    n_taps: int
    cutoff_hz: float
    sample_rate_hz: float

    def __post_init__(self):
        if self.n_taps < 3:
            raise ValueError(f"need at least 3 taps, got {self.n_taps}")
        if not (0 < self.cutoff_hz < self.sample_rate_hz / 2):
            raise ValueError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {self.sample_rate_hz / 2}) Hz"
            )


@dataclass(frozen=True)
class MfccConfig:
    """MFCC front-end parameters.

    With deltas and context enabled the stacked dimensionality is
    n_coeffs * 3 * (2*context + 1), i.e. 429 for the defaults.
    """

    n_coeffs: int = 13
    window_ms: float = 25.0
    stride_ms: float = 10.0
    context: int = 5
    include_deltas: bool = True
    pre_emphasis: float = 0.97
    n_mel_filters: int = 26
    log_floor: float = 1e-10

    @property
    def stacked_dim(self) -> int:
        d = self.n_coeffs * (3 if self.include_deltas else 1)
        return d * (2 * self.context + 1)


def design_lowpass(spec: FilterSpec) -> np.ndarray:
    """Hanning-windowed sinc low-pass weights, normalized to unit DC gain.

    w(n) proportional to (1 - cos(2*pi*n/(N-1))) * sinc(2*pi*f_t*(n - (N-1)/2))
    with f_t = cutoff/rate and sinc(x) = sin(x)/x, sinc(0) = 1.  The
    proportionality constant is resolved so sum(w) = 1.
    """
    n_taps = spec.n_taps
    n = np.arange(n_taps, dtype=np.float64)
    hanning = 1.0 - np.cos(2.0 * np.pi * n / (n_taps - 1))
    f_t = spec.cutoff_hz / spec.sample_rate_hz
    arg = 2.0 * np.pi * f_t * (n - (n_taps - 1) / 2.0)
    # np.sinc is the normalized sin(pi x)/(pi x); divide the argument by pi
    # to get the plain sin(x)/x convention.
    w = hanning * np.sinc(arg / np.pi)
    return w / w.sum()


def frequency_response(w: np.ndarray, freqs_hz, sample_rate_hz: float) -> np.ndarray:
    """Magnitude of the DTFT of w at the given frequencies."""
    w = np.asarray(w, dtype=np.float64)
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    n = np.arange(len(w))
    phase = np.exp(-2j * np.pi * np.outer(freqs / sample_rate_hz, n))
    return np.abs(phase @ w)


def apply_filter(seq: FrameSequence, w: np.ndarray, padding: str = "replicate") -> FrameSequence:
    """Per-channel 1-D convolution with same-size output.

    padding is "zero" or "replicate" and controls the values assumed
    beyond the sequence edges.  The kernel is centered on tap (len(w)-1)//2,
    so an impulse reproduces w centered at the impulse.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("filter weights must be a non-empty 1-D vector")
    if padding not in ("zero", "replicate"):
        raise ValueError(f"unknown padding mode {padding!r}")
    center = (w.size - 1) // 2
    pad_left = w.size - 1 - center
    pad_right = center
    mode = "edge" if padding == "replicate" else "constant"
    padded = np.pad(seq.frames, ((pad_left, pad_right), (0, 0)), mode=mode)
    out = np.empty_like(seq.frames)
    for c in range(seq.num_channels):
        out[:, c] = np.convolve(padded[:, c], w, mode="valid")
    return seq.with_frames(out)


def _mel(freq_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz) / 700.0)


def _mel_inv(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def _mel_filterbank(n_filters: int, nfft: int, rate: float) -> np.ndarray:
    """Triangular mel filterbank over the rfft bins, 0 .. rate/2."""
    points = _mel_inv(np.linspace(_mel(0.0), _mel(rate / 2.0), n_filters + 2))
    bins = np.floor((nfft + 1) * points / rate).astype(int)
    fb = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for i in range(lo, mid):
            fb[j, i] = (i - lo) / max(mid - lo, 1)
        for i in range(mid, hi):
            fb[j, i] = (hi - i) / max(hi - mid, 1)
    return fb


def mfcc(waveform: np.ndarray, rate: float, cfg: MfccConfig = MfccConfig()) -> FrameSequence:
    """Mel-frequency cepstral coefficients of a mono waveform.

    25 ms Hamming windows every 10 ms (by default), pre-emphasis 0.97,
    26 triangular mel filters, log floored at 1e-10, orthonormal DCT-II,
    coefficient 0 kept as the first of the n_coeffs outputs.  Frame count
    is floor((samples - window) / stride) + 1; frame rate 1000/stride_ms.
    """
    x = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("empty waveform")
    if rate < 8000:
        raise ValueError(f"sample rate {rate} Hz too low, need >= 8 kHz")
    win = int(round(cfg.window_ms * rate / 1000.0))
    step = int(round(cfg.stride_ms * rate / 1000.0))
    if x.size < win:
        raise ValueError(f"waveform shorter than one window ({x.size} < {win} samples)")

    emph = np.concatenate(([x[0]], x[1:] - cfg.pre_emphasis * x[:-1]))
    n_frames = (x.size - win) // step + 1
    idx = np.arange(win)[None, :] + step * np.arange(n_frames)[:, None]
    frames = emph[idx] * np.hamming(win)

    nfft = 1
    while nfft < win:
        nfft *= 2
    pspec = np.abs(np.fft.rfft(frames, nfft, axis=1)) ** 2 / nfft
    fb = _mel_filterbank(cfg.n_mel_filters, nfft, rate)
    energies = np.maximum(pspec @ fb.T, cfg.log_floor)
    cepstra = scipy.fft.dct(np.log(energies), type=2, norm="ortho", axis=1)
    coeffs = cepstra[:, : cfg.n_coeffs]

    names = tuple(f"mfcc{i}" for i in range(cfg.n_coeffs))
    return FrameSequence(coeffs, 1000.0 / cfg.stride_ms, names)


def add_deltas(seq: FrameSequence) -> FrameSequence:
    """Append delta and delta-delta channels (regression over +/-2 frames,
    edge replication).  Output channel order: originals, deltas, delta-deltas."""
    if seq.num_frames < 3:
        raise ValueError(f"need at least 3 frames for deltas, got {seq.num_frames}")

    def delta(x):
        p = np.pad(x, ((2, 2), (0, 0)), mode="edge")
        # sum_{n=1,2} n*(x[t+n] - x[t-n]) / (2 * sum n^2)
        return (1.0 * (p[3:-1] - p[1:-3]) + 2.0 * (p[4:] - p[:-4])) / 10.0

    d = delta(seq.frames)
    dd = delta(d)
    names = (
        seq.channel_names
        + tuple(f"{n}_d" for n in seq.channel_names)
        + tuple(f"{n}_dd" for n in seq.channel_names)
    )
    return FrameSequence(np.hstack([seq.frames, d, dd]), seq.rate_hz, names)


def stack_context(seq: FrameSequence, k: int = 5) -> FrameSequence:
    """Concatenate each frame with its k neighbours on each side
    (edge replication), giving (2k+1)*D channels.  k=0 is the identity."""
    if k < 0:
        raise ValueError(f"context size must be >= 0, got {k}")
    if k == 0:
        return seq
    padded = np.pad(seq.frames, ((k, k), (0, 0)), mode="edge")
    t = seq.num_frames
    blocks = [padded[off : off + t] for off in range(2 * k + 1)]
    names = tuple(
        f"{n}@{off:+d}" for off in range(-k, k + 1) for n in seq.channel_names
    )
    return FrameSequence(np.hstack(blocks), seq.rate_hz, names)


def resample(seq: FrameSequence, target_hz: float) -> FrameSequence:
    """Linearly interpolate onto a target_hz grid starting at t=0.

    Downsampling only; callers smooth beforehand so aliasing is controlled
    by the smoothing step.
    """
    if target_hz > seq.rate_hz:
        raise ValueError(
            f"upsampling requested ({seq.rate_hz} Hz -> {target_hz} Hz)"
        )
    if target_hz == seq.rate_hz:
        return seq
    t_in = np.arange(seq.num_frames) / seq.rate_hz
    n_out = int((seq.num_frames - 1) * target_hz / seq.rate_hz + 1e-9) + 1
    t_out = np.arange(n_out) / target_hz
    out = np.empty((n_out, seq.num_channels))
    for c in range(seq.num_channels):
        out[:, c] = np.interp(t_out, t_in, seq.frames[:, c])
    return FrameSequence(out, target_hz, seq.channel_names)
