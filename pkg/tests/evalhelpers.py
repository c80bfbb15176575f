"""Independent reference implementations (oracles) and corpus builders.

The oracles here deliberately avoid the library's own code paths: brute
force loops, exhaustive path enumeration, and direct formula evaluation.
Tests compare the fast implementations against these.

This module has a unique name (not ``conftest``) so it can be imported
unambiguously when several test suites run in one pytest invocation.
"""

from __future__ import annotations

import math

import numpy as np

from artieval.core import (
    FrameSequence,
    ManifestEntry,
    TrajectorySet,
    write_feature_file,
    write_manifest,
)

# ---------------------------------------------------------------------------
# Acceptance summary

# test_acceptance.py records one line per released guarantee; the conftest
# hook prints them in a dedicated section so they survive output capture.
acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    acceptance_lines.append(line)


# ---------------------------------------------------------------------------
# Oracles


def enumerate_monotone_paths(t1: int, t2: int):
    """All index paths (0,0) -> (t1-1, t2-1) with steps (1,0), (0,1), (1,1)."""

    def rec(i, j, acc):
        if i == t1 - 1 and j == t2 - 1:
            yield acc
            return
        if i + 1 < t1 and j + 1 < t2:
            yield from rec(i + 1, j + 1, acc + [(i + 1, j + 1)])
        if i + 1 < t1:
            yield from rec(i + 1, j, acc + [(i + 1, j)])
        if j + 1 < t2:
            yield from rec(i, j + 1, acc + [(i, j + 1)])

    yield from rec(0, 0, [(0, 0)])


def dtw_enumeration_oracle(dist: np.ndarray):
    """Brute-force DTW over a precomputed distance matrix.

    Returns (best_sum, means_of_sum_optimal_paths, best_mean) where
    means_of_sum_optimal_paths collects sum/length for every path whose
    summed distance ties the optimum (exact float equality), and
    best_mean is the minimum of sum/length over ALL paths.
    """
    best_sum = math.inf
    sum_optimal_means = []
    best_mean = math.inf
    for path in enumerate_monotone_paths(*dist.shape):
        s = 0.0
        for i, j in path:
            s += dist[i, j]
        m = s / len(path)
        if s < best_sum:
            best_sum = s
            sum_optimal_means = [m]
        elif s == best_sum:
            sum_optimal_means.append(m)
        if m < best_mean:
            best_mean = m
    return best_sum, sum_optimal_means, best_mean


def random_walk_sequence(rng, num_frames: int, dim: int, step: float = 0.05) -> np.ndarray:
    """Smooth random trajectory: unit-scale start plus small increments.

    Adjacent frames of sampled articulator or cepstral tracks are highly
    correlated; a random walk with small steps reproduces that texture for
    the alignment checks. Independent frames would not: alignment on them
    is dominated by detours through accidentally cheap frame pairs.
    """
    start = rng.standard_normal(dim)
    if num_frames == 1:
        return start[None, :]
    steps = step * rng.standard_normal((num_frames - 1, dim))
    return np.vstack([start[None, :], start[None, :] + np.cumsum(steps, axis=0)])


def rmse_oracle(pred: np.ndarray, ref: np.ndarray) -> float:
    """Two-loop root mean squared error over one channel."""
    acc = 0.0
    for p, r in zip(pred.tolist(), ref.tolist()):
        acc += (p - r) ** 2
    return math.sqrt(acc / len(pred))


def pcc_oracle(pred: np.ndarray, ref: np.ndarray) -> float:
    """Direct two-pass Pearson correlation over one channel."""
    n = len(pred)
    mp = sum(pred.tolist()) / n
    mr = sum(ref.tolist()) / n
    cov = sp = sr = 0.0
    for p, r in zip(pred.tolist(), ref.tolist()):
        cov += (p - mp) * (r - mr)
        sp += (p - mp) ** 2
        sr += (r - mr) ** 2
    if sp == 0.0 or sr == 0.0:
        return 0.0
    return cov / math.sqrt(sp * sr)


def rolling_normalize_oracle(
    frames_list: list[np.ndarray], window: int
) -> list[np.ndarray]:
    """O(n^2) direct implementation of the rolling normalization.

    The window spans 2*window+1 recordings, sliding inward at the corpus
    edges so it never shrinks while the corpus can fill it.
    """
    n = len(frames_list)
    pooled = np.vstack(frames_list)
    std = pooled.std(axis=0)
    out = []
    for i in range(n):
        lo = max(0, min(i - window, n - 1 - 2 * window))
        hi = min(n - 1, max(i + window, 2 * window))
        pooled_window = np.vstack(frames_list[lo : hi + 1])
        mean = pooled_window.mean(axis=0)
        out.append((frames_list[i] - mean) / std)
    return out


def delta_oracle(channel: np.ndarray) -> np.ndarray:
    """Per-frame +/-2 regression delta with edge replication, one channel."""
    t = len(channel)
    out = np.empty(t)
    for i in range(t):
        num = 0.0
        for k in (1, 2):
            fwd = channel[min(i + k, t - 1)]
            bwd = channel[max(i - k, 0)]
            num += k * (fwd - bwd)
        out[i] = num / 10.0
    return out


def dft_gain_oracle(weights: np.ndarray, freq_hz: float, rate_hz: float) -> float:
    """|H(f)| evaluated term by term from the DTFT definition."""
    re = im = 0.0
    for n, w in enumerate(weights.tolist()):
        ang = -2.0 * math.pi * freq_hz * n / rate_hz
        re += w * math.cos(ang)
        im += w * math.sin(ang)
    return math.hypot(re, im)


# ---------------------------------------------------------------------------
# Synthetic ABX corpus


def make_abx_corpus(
    root,
    kind: str = "separable",
    n_phones: int = 6,
    n_speakers: int = 4,
    tokens_per_speaker: int = 30,
    dim: int = 8,
    noise: float = 0.05,
    seed: int = 12345,
):
    """Write a synthetic ABX corpus: one AFV1 feature file per speaker with
    tokens packed back to back, plus item files for the raw layout and for
    the names the preprocess stage would emit, plus a corpus manifest.

    kind="separable": each phone is a distinct constant basis vector plus
    small noise.  kind="noise": every frame is i.i.d. standard normal,
    fresh per token.

    Returns (features_dir, raw_items_path, manifest_path, preprocessed_items_path).
    """
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    phones = [f"p{i}" for i in range(n_phones)]
    contexts = [("k", "t"), ("s", "n"), ("t", "k"), ("n", "s")]
    rate = 100.0
    channel_names = tuple(f"f{i}" for i in range(dim))

    raw_rows = []
    pre_rows = []
    entries = []
    for s in range(n_speakers):
        speaker = f"spk{s}"
        file_id = f"{speaker}_feats"
        frames = []
        cursor = 0
        for phone_i, phone in enumerate(phones):
            for tok in range(tokens_per_speaker):
                length = int(rng.integers(5, 16))
                if kind == "separable":
                    vec = np.zeros(dim)
                    vec[phone_i] = 1.0
                    block = vec + noise * rng.standard_normal((length, dim))
                else:
                    block = rng.standard_normal((length, dim))
                frames.append(block)
                prev, nxt = contexts[tok % len(contexts)]
                onset = cursor / rate
                offset = (cursor + length) / rate
                raw_rows.append(
                    f"{file_id} {onset:.2f} {offset:.2f} {phone} {prev} {nxt} {speaker}"
                )
                pre_rows.append(
                    f"{file_id}_acoustic {onset:.2f} {offset:.2f} {phone} {prev} {nxt} {speaker}"
                )
                cursor += length
        seq = FrameSequence(np.vstack(frames), rate, channel_names)
        write_feature_file(seq, root / f"{file_id}.afv1")
        entries.append(
            ManifestEntry(
                id=file_id, speaker=speaker, corpus="synth", acoustic=f"{file_id}.afv1"
            )
        )

    header = "#file onset offset #phone prev next speaker"
    raw_items = root / "phones_raw.item"
    raw_items.write_text("\n".join([header, *raw_rows]) + "\n", encoding="utf-8")
    pre_items = root / "phones_preprocessed.item"
    pre_items.write_text("\n".join([header, *pre_rows]) + "\n", encoding="utf-8")
    manifest = root / "manifest.jsonl"
    write_manifest(entries, manifest)
    return root, raw_items, manifest, pre_items


# ---------------------------------------------------------------------------
# Toy articulatory corpus with audio, trajectories, and transcription spans


TOY_CHANNELS = ("TTx", "TTy", "TBx", "TBy", "ULx", "ULy", "LLx", "LLy")


def _smooth_walk(rng, t: int, dim: int) -> np.ndarray:
    steps = rng.standard_normal((t, dim))
    walk = np.cumsum(steps, axis=0)
    kernel = np.ones(15) / 15.0
    out = np.empty_like(walk)
    for d in range(dim):
        out[:, d] = np.convolve(np.pad(walk[:, d], 7, mode="edge"), kernel, "valid")
    return out


def make_toy_corpus(root, n_speakers: int = 2, n_utts: int = 3, seed: int = 777):
    """Audio at 16 kHz plus 200 Hz canonical trajectories per utterance,
    with silence at both ends marked in the transcription intervals."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for s in range(n_speakers):
        speaker = f"toyspk{s}"
        for u in range(n_utts):
            utt = f"{speaker}_u{u}"
            dur = 1.2 + 0.2 * u
            n_audio = int(dur * 16000)
            tone = np.sin(2 * np.pi * (200 + 50 * s + 20 * u) * np.arange(n_audio) / 16000)
            audio = 0.3 * tone + 0.05 * rng.standard_normal(n_audio)
            audio_seq = FrameSequence(audio[:, None], 16000.0, ("samples",))
            write_feature_file(audio_seq, root / f"{utt}_audio.afv1")

            n_art = int(dur * 200)
            art = 10.0 + 2.0 * _smooth_walk(rng, n_art, len(TOY_CHANNELS))
            art_seq = FrameSequence(art, 200.0, TOY_CHANNELS)
            write_feature_file(art_seq, root / f"{utt}_art.afv1")

            entries.append(
                ManifestEntry(
                    id=utt,
                    speaker=speaker,
                    corpus="toy",
                    audio=f"{utt}_audio.afv1",
                    articulatory=f"{utt}_art.afv1",
                    intervals=[
                        [0.0, 0.15, "sil"],
                        [0.15, dur - 0.2, "speech"],
                        [dur - 0.2, dur, "sil"],
                    ],
                )
            )
    manifest = root / "manifest.jsonl"
    write_manifest(entries, manifest)
    return root, manifest


# ---------------------------------------------------------------------------
# Small helpers


def seq_of(values, rate=100.0, names=None) -> FrameSequence:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if names is None:
        names = tuple(f"c{i}" for i in range(arr.shape[1]))
    return FrameSequence(arr, rate, tuple(names))


def traj_of(values, names, available=None, rate=100.0) -> TrajectorySet:
    seq = seq_of(values, rate=rate, names=names)
    if available is None:
        available = (True,) * seq.num_channels
    return TrajectorySet(seq, tuple(available))
