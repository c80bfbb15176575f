"""Corpus-level conditioning: silence trimming, per-speaker MFCC
normalization, trajectory pre-smoothing, and rolling-window articulatory
normalization."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import FrameSequence, TrajectorySet, UtteranceRecord
from .signal import FilterSpec, apply_filter, design_lowpass

log = logging.getLogger(__name__)

SILENCE_LABELS = frozenset({"", "sil", "silence", "sp", "spn", "pau", "h#", "#", "<sil>"})


def _frame_range(onset_s: float, offset_s: float, rate_hz: float, n_frames: int):
    """Frame indices i with onset <= i/rate < offset, clamped to the file."""
    start = math.ceil(onset_s * rate_hz - 1e-9)
    stop = math.ceil(offset_s * rate_hz - 1e-9)
    return max(0, start), min(n_frames, stop)


def trim_silence(u: UtteranceRecord, silence_labels=SILENCE_LABELS) -> UtteranceRecord:
    """Drop leading/trailing frames outside the first/last non-silence
    interval, keeping acoustic and articulatory streams frame-aligned.

    Frame values are never changed, only a contiguous span is selected.
    Without intervals the record is returned unchanged with a warning.
    """
    if u.intervals is None:
        log.warning("utterance %s has no intervals; not trimmed", u.id)
        return u
    speech = [iv for iv in u.intervals if iv[2].strip().lower() not in silence_labels]
    if not speech:
        log.warning("utterance %s has no speech intervals; not trimmed", u.id)
        return u
    start_s = speech[0][0]
    end_s = speech[-1][1]

    acoustic = u.acoustic
    articulatory = u.articulatory
    if acoustic is not None:
        a0, a1 = _frame_range(start_s, end_s, acoustic.rate_hz, acoustic.num_frames)
        acoustic = acoustic.slice_frames(a0, a1)
    if articulatory is not None:
        r0, r1 = _frame_range(
            start_s, end_s, articulatory.rate_hz, articulatory.num_frames
        )
        articulatory = articulatory.with_seq(articulatory.seq.slice_frames(r0, r1))

    # off-by-one drift between streams at a common rate: shorter length wins
    if (
        acoustic is not None
        and articulatory is not None
        and acoustic.rate_hz == articulatory.rate_hz
    ):
        n = min(acoustic.num_frames, articulatory.num_frames)
        acoustic = acoustic.slice_frames(0, n)
        articulatory = articulatory.with_seq(articulatory.seq.slice_frames(0, n))

    new_intervals = tuple(
        (on - start_s, min(off, end_s) - start_s, lab)
        for on, off, lab in u.intervals
        if off > start_s and on < end_s
    )
    return UtteranceRecord(
        id=u.id,
        speaker_id=u.speaker_id,
        corpus_id=u.corpus_id,
        acoustic=acoustic,
        articulatory=articulatory,
        intervals=new_intervals,
    )


def normalize_mfcc(seqs: list[FrameSequence]) -> tuple[list[FrameSequence], np.ndarray, np.ndarray]:
    """Z-normalize each channel over one speaker's concatenated frames.

    Returns the normalized sequences plus the (mean, std) vectors used.
    Zero-variance channels are mean-centered but left unscaled.
    """
    if not seqs:
        raise ValueError("no utterances to normalize")
    names = seqs[0].channel_names
    for s in seqs:
        if s.channel_names != names:
            raise ValueError("inconsistent channel names across a speaker's utterances")
    pooled = np.vstack([s.frames for s in seqs])
    if pooled.shape[0] < 2:
        raise ValueError("need at least 2 frames per speaker to normalize")
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    degenerate = std == 0.0
    if degenerate.any():
        log.warning(
            "zero-variance channel(s) %s centered but not scaled",
            [names[i] for i in np.flatnonzero(degenerate)],
        )
    scale = np.where(degenerate, 1.0, std)
    out = [s.with_frames((s.frames - mean) / scale) for s in seqs]
    return out, mean, std


@dataclass
class SpeakerStats:
    """Normalization state for one speaker: global per-channel mean/std and
    the per-utterance rolling means, enough to invert the normalization."""

    speaker_id: str
    channels: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    rolling_means: dict[str, np.ndarray]  # utterance id -> per-channel mean

    def to_dict(self) -> dict:
        return {
            "speaker_id": self.speaker_id,
            "channels": list(self.channels),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "rolling_means": {
                utt: [float(v) for v in vec] for utt, vec in self.rolling_means.items()
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SpeakerStats":
        return cls(
            speaker_id=obj["speaker_id"],
            channels=tuple(obj["channels"]),
            mean=np.asarray(obj["mean"], dtype=np.float64),
            std=np.asarray(obj["std"], dtype=np.float64),
            rolling_means={
                utt: np.asarray(vec, dtype=np.float64)
                for utt, vec in obj["rolling_means"].items()
            },
        )

    def denormalize(self, seq: FrameSequence, utt_id: str) -> FrameSequence:
        """Invert rolling normalization: x*std + rolling_mean(utterance)."""
        if seq.channel_names != self.channels:
            raise ValueError("channel names do not match stats")
        offset = self.rolling_means[utt_id]
        scale = np.where(self.std == 0.0, 1.0, self.std)
        return seq.with_frames(seq.frames * scale + offset)


def rolling_normalize(
    trajs: list[TrajectorySet],
    utt_ids: list[str],
    speaker_id: str,
    window: int = 60,
) -> tuple[list[TrajectorySet], SpeakerStats]:
    """Center each channel by the mean over the `window` previous and
    following recordings (frame-pooled), then divide by the speaker-global
    standard deviation.

    At the corpus edges the window keeps its full 2*window+1 span by
    extending inward, so for corpora of at most 2*window+1 utterances the
    result is bit-for-bit identical to plain z-normalization.  trajs must
    be in recording order.  Unavailable channels pass through untouched.
    """
    if not trajs:
        raise ValueError("no utterances to normalize")
    if len(utt_ids) != len(trajs):
        raise ValueError("need one utterance id per trajectory set")
    names = trajs[0].channel_names
    avail = trajs[0].available
    for t in trajs:
        if t.channel_names != names or t.available != avail:
            raise ValueError("inconsistent channels/masks across a speaker's utterances")

    frames = [t.seq.frames for t in trajs]
    pooled = np.vstack(frames)
    std = pooled.std(axis=0)
    degenerate = std == 0.0
    if degenerate.any():
        log.warning(
            "speaker %s: zero-variance channel(s) %s centered but not scaled",
            speaker_id,
            [names[i] for i in np.flatnonzero(degenerate)],
        )
    scale = np.where(degenerate, 1.0, std)
    avail_arr = np.asarray(avail, dtype=bool)

    out = []
    rolling_means = {}
    n = len(trajs)
    for i in range(n):
        lo = max(0, min(i - window, n - 1 - 2 * window))
        hi = min(n - 1, max(i + window, 2 * window))
        window_frames = frames[lo] if lo == hi else np.vstack(frames[lo : hi + 1])
        center = window_frames.mean(axis=0)
        rolling_means[utt_ids[i]] = center
        normalized = (frames[i] - center) / scale
        new = np.where(avail_arr[None, :], normalized, frames[i])
        out.append(trajs[i].with_seq(trajs[i].seq.with_frames(new)))

    stats = SpeakerStats(
        speaker_id=speaker_id,
        channels=names,
        mean=pooled.mean(axis=0),
        std=std,
        rolling_means=rolling_means,
    )
    return out, stats


def presmooth(traj: TrajectorySet, cutoff_hz: float, n_taps: int = 50) -> TrajectorySet:
    """Low-pass each available channel with the windowed-sinc design at the
    trajectory's own rate; unavailable channels pass through bit-identical."""
    w = design_lowpass(FilterSpec(n_taps, cutoff_hz, traj.rate_hz))
    smoothed = apply_filter(traj.seq, w, padding="replicate")
    avail = np.asarray(traj.available, dtype=bool)
    frames = np.where(avail[None, :], smoothed.frames, traj.seq.frames)
    return traj.with_seq(traj.seq.with_frames(frames))
