"""Loading training utterances from a corpus manifest.

Each usable manifest entry supplies an acoustic AFV1 file (the network
input) and an articulatory AFV1 file (the reference).  Reference columns
are reordered to the network's channel list; a channel the file lacks,
or one missing from the entry's "available" list, is zero-filled and
masked out so it contributes nothing to the loss or its gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .formats import FormatError, ManifestEntry, read_afv1, read_manifest


@dataclass
class Utterance:
    """One training example: input frames, aligned reference, channel mask."""

    id: str
    speaker: str
    acoustic: torch.Tensor  # (T, input_dim)
    reference: torch.Tensor  # (T, n_channels), columns in network order
    available: tuple[bool, ...]

    @property
    def num_frames(self) -> int:
        return self.acoustic.shape[0]


def _align_reference(entry: ManifestEntry, frames: np.ndarray, names, channels):
    listed = entry.available_channels()
    columns = np.zeros((frames.shape[0], len(channels)))
    mask = []
    index = {n: i for i, n in enumerate(names)}
    for c, channel in enumerate(channels):
        present = channel in index and (listed is None or channel in listed)
        if present:
            columns[:, c] = frames[:, index[channel]]
        mask.append(present)
    return columns, tuple(mask)


def load_utterance(entry: ManifestEntry, base: Path, channels, input_dim: int,
                   dtype=torch.float32) -> Utterance:
    if entry.acoustic is None:
        raise FormatError(f"utterance {entry.id!r} has no acoustic features")
    if entry.articulatory is None:
        raise FormatError(f"utterance {entry.id!r} has no articulatory reference")
    ac_frames, _, _ = read_afv1(base / entry.acoustic)
    if ac_frames.shape[1] != input_dim:
        raise FormatError(
            f"utterance {entry.id!r}: acoustic features have {ac_frames.shape[1]} "
            f"channels, network expects {input_dim}"
        )
    ar_frames, _, ar_names = read_afv1(base / entry.articulatory)
    if ar_frames.shape[0] != ac_frames.shape[0]:
        raise FormatError(
            f"utterance {entry.id!r}: {ac_frames.shape[0]} acoustic frames vs "
            f"{ar_frames.shape[0]} articulatory frames"
        )
    reference, mask = _align_reference(entry, ar_frames, ar_names, channels)
    return Utterance(
        id=entry.id,
        speaker=entry.speaker,
        acoustic=torch.as_tensor(ac_frames, dtype=dtype),
        reference=torch.as_tensor(reference, dtype=dtype),
        available=mask,
    )


def load_training_set(manifest_path, channels, input_dim: int,
                      dtype=torch.float32) -> list[Utterance]:
    """Load every entry of a manifest that carries both feature streams."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    utterances = [
        load_utterance(e, base, tuple(channels), input_dim, dtype)
        for e in read_manifest(manifest_path)
        if e.acoustic is not None and e.articulatory is not None
    ]
    if not utterances:
        raise FormatError(f"{manifest_path}: no entries with both feature streams")
    return utterances
