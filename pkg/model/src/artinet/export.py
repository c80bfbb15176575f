"""Write network reconstructions as articulatory feature files.

One file per manifest utterance, named `<id>_articulatory.afv1`, with
the network's channel names and frame rate.  A companion manifest lists
every written file and, per utterance, which channels carry measured
data — channels the caller declares unavailable are left out of that
list so downstream scoring can mask them.
"""

from __future__ import annotations

import os
from pathlib import Path

import torch

from .data import ManifestEntry
from .formats import FormatError, read_afv1, read_manifest, write_afv1, write_manifest
from .network import InversionNetwork

RECONSTRUCTION_SUFFIX = "_articulatory.afv1"


def export_reconstructions(
    net: InversionNetwork,
    manifest_path: str | Path,
    out_dir: str | Path,
    unavailable: dict[str, tuple[str, ...]] | None = None,
) -> list[Path]:
    """Run net over every manifest utterance and write the results.

    unavailable maps utterance id -> channel names to flag as not
    measured for that utterance.  Returns the written feature paths, in
    manifest order.  The output manifest goes to out_dir/manifest.jsonl.
    """
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    unavailable = unavailable or {}
    base = manifest_path.parent
    spec = net.spec

    net.eval()
    written: list[Path] = []
    out_entries: list[ManifestEntry] = []
    for entry in read_manifest(manifest_path):
        if entry.acoustic is None:
            raise FormatError(f"utterance {entry.id!r} has no acoustic features")
        frames, _rate, _names = read_afv1(base / entry.acoustic)
        if frames.shape[1] != spec.input_dim:
            raise FormatError(
                f"utterance {entry.id!r} has {frames.shape[1]} acoustic "
                f"dimensions, the network expects {spec.input_dim}"
            )
        with torch.no_grad():
            pred = net(torch.as_tensor(frames, dtype=torch.float32))
        name = f"{entry.id}{RECONSTRUCTION_SUFFIX}"
        write_afv1(pred.numpy(), spec.frame_rate_hz, spec.channels, out_dir / name)
        written.append(out_dir / name)

        missing = set(unavailable.get(entry.id, ()))
        extra = dict(entry.extra)
        extra["available"] = [c for c in spec.channels if c not in missing]

        # Manifest paths are relative to the manifest's own directory, so
        # paths copied from the input manifest must be rebased onto out_dir.
        def rebase(rel):
            if rel is None:
                return None
            return os.path.relpath(base / rel, out_dir)

        out_entries.append(
            ManifestEntry(
                id=entry.id,
                speaker=entry.speaker,
                corpus=entry.corpus,
                audio=rebase(entry.audio),
                acoustic=rebase(entry.acoustic),
                articulatory=name,
                intervals=entry.intervals,
                extra=extra,
            )
        )

    write_manifest(out_entries, out_dir / "manifest.jsonl")
    return written
