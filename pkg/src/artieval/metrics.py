"""Reconstruction scoring: RMSE, Pearson correlation, and the combined
RMSE - beta*PCC loss.

Conventions (mirroring how scores are reported): RMSE is computed on
every channel except the dimensionless TTC/TBC cosines; PCC is computed
on every available channel.  Channels whose availability mask is False
contribute to nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TRACT_COSINE_CHANNELS, FrameSequence


@dataclass(frozen=True)
class MetricResult:
    """Per-channel values plus their unweighted mean over included channels."""

    per_channel: dict[str, float]
    aggregate: float
    flagged: tuple[str, ...] = ()  # channels hitting a degenerate rule


def _check_pair(pred: FrameSequence, ref: FrameSequence, mask) -> np.ndarray:
    if pred.channel_names != ref.channel_names:
        raise ValueError("pred and ref channel names differ")
    if pred.frames.shape != ref.frames.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.frames.shape} vs ref {ref.frames.shape}"
        )
    if mask is None:
        return np.ones(pred.num_channels, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (pred.num_channels,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({pred.num_channels},)")
    return mask


def rmse(pred: FrameSequence, ref: FrameSequence, mask=None) -> MetricResult:
    """Per-channel root-mean-square error over frames, TTC/TBC excluded."""
    mask = _check_pair(pred, ref, mask)
    per_channel = {}
    for c, name in enumerate(pred.channel_names):
        if not mask[c] or name in TRACT_COSINE_CHANNELS:
            continue
        diff = pred.frames[:, c] - ref.frames[:, c]
        per_channel[name] = float(np.sqrt(np.mean(diff * diff)))
    agg = float(np.mean(list(per_channel.values()))) if per_channel else 0.0
    return MetricResult(per_channel, agg)


def pcc(pred: FrameSequence, ref: FrameSequence, mask=None) -> MetricResult:
    """Per-channel Pearson correlation over frames, every available channel.

    A channel with zero variance in either argument gets PCC 0 and is
    flagged (the correlation is undefined there; 0 is neutral in the
    combined loss).
    """
    mask = _check_pair(pred, ref, mask)
    per_channel = {}
    flagged = []
    for c, name in enumerate(pred.channel_names):
        if not mask[c]:
            continue
        x = pred.frames[:, c]
        y = ref.frames[:, c]
        xc = x - x.mean()
        yc = y - y.mean()
        sx = np.sqrt(np.mean(xc * xc))
        sy = np.sqrt(np.mean(yc * yc))
        if sx == 0.0 or sy == 0.0:
            per_channel[name] = 0.0
            flagged.append(name)
            continue
        r = float(np.mean(xc * yc) / (sx * sy))
        per_channel[name] = min(1.0, max(-1.0, r))
    agg = float(np.mean(list(per_channel.values()))) if per_channel else 0.0
    return MetricResult(per_channel, agg, tuple(flagged))


def combined_loss(pred: FrameSequence, ref: FrameSequence, mask=None,
                  beta: float = 1000.0) -> float:
    """Mean-over-channels RMSE minus beta times mean-over-channels PCC."""
    return rmse(pred, ref, mask).aggregate - beta * pcc(pred, ref, mask).aggregate


@dataclass
class ReconReport:
    """Reconstruction scores for a set of utterance pairs.

    rmse_mm is present only when normalization stats were supplied to
    invert the rolling normalization; rmse_norm and pcc are computed on
    the sequences as given.
    """

    channels: tuple[str, ...]
    mask: tuple[bool, ...]
    n_frames: int
    n_utterances: int
    pooling: str  # "frames" or "utterances"
    rmse_norm: MetricResult = None
    pcc: MetricResult = None
    rmse_mm: MetricResult | None = None
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def mr(m):
            if m is None:
                return None
            return {
                "per_channel": dict(sorted(m.per_channel.items())),
                "aggregate": m.aggregate,
                "flagged": sorted(m.flagged),
            }

        return {
            "channels": list(self.channels),
            "mask": list(self.mask),
            "n_frames": self.n_frames,
            "n_utterances": self.n_utterances,
            "pooling": self.pooling,
            "rmse_norm": mr(self.rmse_norm),
            "rmse_mm": mr(self.rmse_mm),
            "pcc": mr(self.pcc),
            "combined_loss": self.rmse_norm.aggregate - 1000.0 * self.pcc.aggregate,
            "flags": self.flags,
        }


def _mean_results(results: list[MetricResult]) -> MetricResult:
    """Unweighted per-utterance average of per-channel values."""
    keys = sorted({k for r in results for k in r.per_channel})
    per_channel = {
        k: float(np.mean([r.per_channel[k] for r in results if k in r.per_channel]))
        for k in keys
    }
    agg = float(np.mean(list(per_channel.values()))) if per_channel else 0.0
    flagged = tuple(sorted({f for r in results for f in r.flagged}))
    return MetricResult(per_channel, agg, flagged)


def _normalize_pairs(pairs):
    norm = []
    for item in pairs:
        if len(item) == 2:
            p, r = item
            m = None
        else:
            p, r, m = item
        norm.append((p, r, tuple(bool(b) for b in m) if m is not None else None))
    names = norm[0][0].channel_names
    for p, r, m in norm:
        if p.channel_names != names or r.channel_names != names:
            raise ValueError("inconsistent channel names across pairs")
        if m is not None and len(m) != len(names):
            raise ValueError("mask length does not match channel count")
    return norm, names


def _pool(pairs, names, masks, metric):
    """Frame-pooled metric with possibly differing per-pair masks.

    With a uniform mask, one call on the concatenated matrices; otherwise
    each channel is pooled over the pairs that admit it.
    """
    rate = pairs[0][0].rate_hz
    if all(m == masks[0] for m in masks):
        pooled_p = FrameSequence(np.vstack([p.frames for p, _, _ in pairs]), rate, names)
        pooled_r = FrameSequence(np.vstack([r.frames for _, r, _ in pairs]), rate, names)
        return metric(pooled_p, pooled_r, masks[0])
    per_channel = {}
    flagged = []
    for i, name in enumerate(names):
        cols_p = [p.frames[:, i] for (p, _, _), m in zip(pairs, masks) if m[i]]
        cols_r = [r.frames[:, i] for (_, r, _), m in zip(pairs, masks) if m[i]]
        if not cols_p:
            continue
        one_p = FrameSequence(np.concatenate(cols_p)[:, None], rate, (name,))
        one_r = FrameSequence(np.concatenate(cols_r)[:, None], rate, (name,))
        res = metric(one_p, one_r)
        per_channel.update(res.per_channel)
        flagged.extend(res.flagged)
    agg = float(np.mean(list(per_channel.values()))) if per_channel else 0.0
    return MetricResult(per_channel, agg, tuple(sorted(flagged)))


def score_pairs(pairs, mm_pairs=None, per_utterance: bool = False) -> ReconReport:
    """Score a test set of (pred, ref, mask) FrameSequence triples.

    mask may be None (all channels included) and the channel sets must be
    identical throughout.  mm_pairs: optional parallel list of
    denormalized (pred, ref) pairs for the original-unit RMSE, scored
    under the same masks.  Default pooling concatenates all test frames
    per channel; per_utterance averages per-utterance scores instead.
    """
    if not pairs:
        raise ValueError("no utterance pairs to score")
    pairs, names = _normalize_pairs(pairs)
    masks = [m if m is not None else (True,) * len(names) for _, _, m in pairs]
    if mm_pairs is not None:
        mm_triples = [
            (p, r, m) for (p, r), m in zip(mm_pairs, masks)
        ]
        mm_triples, _ = _normalize_pairs(mm_triples)

    if per_utterance:
        rmse_norm = _mean_results([rmse(p, r, m) for (p, r, _), m in zip(pairs, masks)])
        pcc_all = _mean_results([pcc(p, r, m) for (p, r, _), m in zip(pairs, masks)])
        rmse_mm = (
            _mean_results([rmse(p, r, m) for p, r, m in mm_triples])
            if mm_pairs is not None
            else None
        )
    else:
        rmse_norm = _pool(pairs, names, masks, rmse)
        pcc_all = _pool(pairs, names, masks, pcc)
        rmse_mm = (
            _pool(mm_triples, names, masks, rmse) if mm_pairs is not None else None
        )

    effective_mask = tuple(any(m[i] for m in masks) for i in range(len(names)))
    flags = {}
    if pcc_all.flagged:
        flags["pcc_zero_variance"] = sorted(pcc_all.flagged)
    return ReconReport(
        channels=names,
        mask=effective_mask,
        n_frames=sum(p.num_frames for p, _, _ in pairs),
        n_utterances=len(pairs),
        pooling="per-utterance" if per_utterance else "frames",
        rmse_norm=rmse_norm,
        pcc=pcc_all,
        rmse_mm=rmse_mm,
        flags=flags,
    )
