"""Vocal-tract variables derived from lip and tongue channels.

VLA  = ULy - LLy                      vertical lip aperture
HPRO = (ULx + LLx) / 2                horizontal lip protrusion
TTC  = TTx / sqrt(TTx^2 + TTy^2)      tongue tip constriction cosine
TBC  = TBx / sqrt(TBx^2 + TBy^2)      tongue body constriction cosine
"""

from __future__ import annotations

import logging

import numpy as np

from .core import FrameSequence, TrajectorySet

log = logging.getLogger(__name__)

# variable name -> source channels
TRACT_SOURCES = {
    "VLA": ("ULy", "LLy"),
    "HPRO": ("ULx", "LLx"),
    "TTC": ("TTx", "TTy"),
    "TBC": ("TBx", "TBy"),
}


def _cosine_off_horizontal(x: np.ndarray, y: np.ndarray, name: str) -> np.ndarray:
    radius = np.sqrt(x * x + y * y)
    zero = radius == 0.0
    n_zero = int(zero.sum())
    if n_zero:
        # physically impossible for calibrated EMA; flag, don't abort
        log.warning("%s: %d zero-radius frame(s), cosine set to 0", name, n_zero)
    out = np.zeros_like(x)
    np.divide(x, radius, out=out, where=~zero)
    return out


def compute_tract_variables(traj: TrajectorySet) -> TrajectorySet:
    """Append VLA, HPRO, TTC, TBC to traj.

    Each variable is computed only when all its source channels are
    present and available; otherwise it is appended as zeros and marked
    unavailable, so downstream masking excludes it.
    """
    for name in TRACT_SOURCES:
        if name in traj.channel_names:
            raise ValueError(f"input already contains tract variable {name!r}")

    t = traj.num_frames
    new_cols = []
    new_avail = []
    for name, sources in TRACT_SOURCES.items():
        derivable = all(
            s in traj.channel_names and traj.is_available(s) for s in sources
        )
        if not derivable:
            new_cols.append(np.zeros(t))
            new_avail.append(False)
            continue
        a = traj.seq.channel(sources[0])
        b = traj.seq.channel(sources[1])
        if name == "VLA":
            new_cols.append(a - b)
        elif name == "HPRO":
            new_cols.append((a + b) / 2.0)
        else:
            new_cols.append(_cosine_off_horizontal(a, b, name))
        new_avail.append(True)

    frames = np.hstack([traj.seq.frames] + [c[:, None] for c in new_cols])
    names = traj.channel_names + tuple(TRACT_SOURCES)
    seq = FrameSequence(frames, traj.rate_hz, names)
    return TrajectorySet(seq, traj.available + tuple(new_avail))
