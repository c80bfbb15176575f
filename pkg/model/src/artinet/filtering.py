"""Windowed-sinc low-pass design for the fixed smoothing layer.

The same Hanning-windowed sinc the evaluation toolkit uses for
trajectory presmoothing and exposes through `artieval filter-design`:

    w(n) ~ (1 - cos(2*pi*n/(N-1))) * sinc(2*pi*f_t*(n - (N-1)/2))

with f_t = cutoff/rate, sinc(x) = sin(x)/x, and the weights normalized
to unit sum (unit DC gain).  The arithmetic below matches that design
operation for operation, so the layer's weights agree bit for bit with
the CSV that command prints.
"""

from __future__ import annotations

import numpy as np


def design_lowpass(n_taps: int, cutoff_hz: float, rate_hz: float) -> np.ndarray:
    """Return the N filter weights as float64, summing to exactly the
    normalized total (unit DC gain)."""
    if n_taps < 3:
        raise ValueError(f"need at least 3 taps, got {n_taps}")
    if not (0 < cutoff_hz < rate_hz / 2):
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, {rate_hz / 2}) Hz")
    n = np.arange(n_taps, dtype=np.float64)
    hanning = 1.0 - np.cos(2.0 * np.pi * n / (n_taps - 1))
    f_t = cutoff_hz / rate_hz
    arg = 2.0 * np.pi * f_t * (n - (n_taps - 1) / 2.0)
    # np.sinc is the normalized sin(pi x)/(pi x); divide the argument by pi
    # to get the plain sin(x)/x convention.
    w = hanning * np.sinc(arg / np.pi)
    return w / w.sum()
