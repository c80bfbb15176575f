"""Helpers for the inversion-network suite.

Lives in its own module (not conftest) so imports are unambiguous when
this suite is collected together with the evaluation toolkit's suite.
"""

from __future__ import annotations

import math
import shutil

import pytest

artinet = pytest.importorskip("artinet")

import numpy as np  # noqa: E402
import torch  # noqa: E402

from artinet import (  # noqa: E402
    ManifestEntry,
    NetworkSpec,
    Utterance,
    write_afv1,
    write_manifest,
)

# ---------------------------------------------------------------------------
# Acceptance summary (printed by the conftest terminal hook)

acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    acceptance_lines.append(line)


# ---------------------------------------------------------------------------
# Executables for cross-component tests


def find_cli(name: str) -> str:
    path = shutil.which(name)
    if path is None:
        pytest.skip(f"{name} executable not on PATH")
    return path


# ---------------------------------------------------------------------------
# Network and data helpers


def tiny_spec(channels=("TTx", "TTC"), input_dim=4, units=4, taps=9) -> NetworkSpec:
    """Smallest useful network: 4-wide layers, 9-tap smoother."""
    return NetworkSpec(
        channels=tuple(channels),
        input_dim=input_dim,
        dense_units=units,
        recurrent_units=units,
        recurrent_layers=2,
        smoothing_taps=taps,
        smoothing_cutoff_hz=10.0,
        frame_rate_hz=100.0,
    )


def sine_trajectories(rng, n_frames: int, n_channels: int, rate_hz: float = 100.0,
                      utt_index: int = 0) -> np.ndarray:
    """Unit-amplitude sinusoids, 1-4 Hz, random phase: smooth trajectories
    well inside the 10 Hz smoothing passband."""
    t = np.arange(n_frames) / rate_hz
    cols = [
        np.sin(2 * np.pi * (1.0 + 0.7 * j + 0.3 * utt_index) * t
               + rng.uniform(0.0, 2 * np.pi))
        for j in range(n_channels)
    ]
    return np.stack(cols, axis=1)


def sine_utterances(channels, input_dim: int, n_utts: int = 5, base_frames: int = 60,
                    seed: int = 42) -> list[Utterance]:
    """Synthetic set: sinusoidal trajectories and pseudo-acoustics that are
    a fixed random linear image of them, so the mapping is exactly
    learnable."""
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((len(channels), input_dim)) / math.sqrt(len(channels))
    utts = []
    for i in range(n_utts):
        n_frames = base_frames + 10 * i
        traj = sine_trajectories(rng, n_frames, len(channels), utt_index=i)
        acoustic = traj @ proj
        utts.append(
            Utterance(
                id=f"sine{i}",
                speaker="synth",
                acoustic=torch.as_tensor(acoustic, dtype=torch.float32),
                reference=torch.as_tensor(traj, dtype=torch.float32),
                available=(True,) * len(channels),
            )
        )
    return utts


def write_corpus(root, utterances, channels, rate_hz: float = 100.0):
    """Write utterances as AFV1 pairs plus a manifest; returns its path."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for u in utterances:
        names = [f"a{k}" for k in range(u.acoustic.shape[1])]
        write_afv1(u.acoustic.numpy(), rate_hz, names, root / f"{u.id}_acoustic.afv1")
        write_afv1(u.reference.numpy(), rate_hz, list(channels),
                   root / f"{u.id}_articulatory.afv1")
        entries.append(
            ManifestEntry(
                id=u.id,
                speaker=u.speaker,
                corpus="synth",
                acoustic=f"{u.id}_acoustic.afv1",
                articulatory=f"{u.id}_articulatory.afv1",
            )
        )
    manifest = root / "manifest.jsonl"
    write_manifest(entries, manifest)
    return manifest
