"""Shared domain types, the articulator channel vocabulary, and the AFV1
on-disk feature format.

AFV1 binary layout (little-endian throughout):

    bytes 0..3   magic  b"AFV1"
    u32          T, number of frames
    u32          D, number of channels
    f64          frame rate in Hz
    D times:     u16 byte length, then that many bytes of UTF-8 channel name
    T*D f32      frame values, row-major (frame 0 channel 0, frame 0
                 channel 1, ..., frame 1 channel 0, ...)

Values are stored at 32-bit precision; in-memory arrays are float64.  The
write/read round-trip is therefore bit-exact for float32-representable
values, which is what every file produced by this toolkit contains.

The sidecar manifest is a JSON-lines file, one utterance per line:

    {"id": ..., "speaker": ..., "corpus": ...,
     "audio": relpath or null,         # raw waveform (wav)
     "acoustic": relpath or null,      # AFV1 acoustic features
     "articulatory": relpath or null,  # AFV1 articulatory trajectories
     "intervals": [[onset_s, offset_s, "label"], ...] or null}

Line order in the manifest is the recording order used by the rolling
normalization window.  Paths are relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"AFV1"

# Canonical articulator channels: sagittal x/y per coil, plus the four
# derived vocal-tract variables.  Positional channels are in millimeters,
# TTC/TBC are dimensionless cosines.
CANONICAL_CHANNELS = (
    "TTx", "TTy", "TBx", "TBy", "TDx", "TDy",
    "ULx", "ULy", "LLx", "LLy", "LIx", "LIy",
    "Vx", "Vy", "VLA", "HPRO", "TTC", "TBC",
)
TRACT_COSINE_CHANNELS = ("TTC", "TBC")


class FeatureFormatError(Exception):
    """Raised when an AFV1 file or manifest cannot be decoded."""


@dataclass(frozen=True)
class FrameSequence:
    """A time-major matrix of named feature channels at a fixed frame rate.

    frames is a T x D float64 array, finite everywhere; channel_names has
    exactly D unique entries.
    """

    frames: np.ndarray
    rate_hz: float
    channel_names: tuple[str, ...]

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-D (T x D), got shape {frames.shape}")
        t, d = frames.shape
        if t < 1 or d < 1:
            raise ValueError(f"need T >= 1 and D >= 1, got T={t}, D={d}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain NaN or Inf")
        names = tuple(self.channel_names)
        if len(names) != d:
            raise ValueError(f"{len(names)} channel names for D={d} channels")
        if len(set(names)) != len(names):
            raise ValueError("duplicate channel names")
        if not (self.rate_hz > 0):
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_channels(self) -> int:
        return self.frames.shape[1]

    def channel_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    def channel(self, name: str) -> np.ndarray:
        return self.frames[:, self.channel_index(name)]

    def with_frames(self, frames: np.ndarray) -> "FrameSequence":
        """Same channels and rate, new frame values."""
        return FrameSequence(frames, self.rate_hz, self.channel_names)

    def slice_frames(self, start: int, stop: int) -> "FrameSequence":
        return FrameSequence(self.frames[start:stop], self.rate_hz, self.channel_names)


@dataclass(frozen=True)
class TrajectorySet:
    """Articulatory channels with a per-channel availability mask.

    Positional channels are in millimeters, TTC/TBC dimensionless.  A
    channel marked unavailable is excluded from every metric and loss
    term; its stored values carry no meaning.
    """

    seq: FrameSequence
    available: tuple[bool, ...]

    def __post_init__(self):
        for name in self.seq.channel_names:
            if name not in CANONICAL_CHANNELS:
                raise ValueError(f"{name!r} is not a canonical articulator channel")
        avail = tuple(bool(a) for a in self.available)
        if len(avail) != self.seq.num_channels:
            raise ValueError(
                f"availability mask has {len(avail)} entries for "
                f"{self.seq.num_channels} channels"
            )
        object.__setattr__(self, "available", avail)

    @property
    def channel_names(self) -> tuple[str, ...]:
        return self.seq.channel_names

    @property
    def rate_hz(self) -> float:
        return self.seq.rate_hz

    @property
    def num_frames(self) -> int:
        return self.seq.num_frames

    def is_available(self, name: str) -> bool:
        return self.available[self.seq.channel_index(name)]

    def available_channels(self) -> tuple[str, ...]:
        return tuple(
            n for n, a in zip(self.seq.channel_names, self.available) if a
        )

    def with_seq(self, seq: FrameSequence) -> "TrajectorySet":
        if seq.channel_names != self.seq.channel_names:
            raise ValueError("channel names changed; build a new TrajectorySet")
        return TrajectorySet(seq, self.available)


def full_mask(seq: FrameSequence) -> TrajectorySet:
    """Wrap seq as a TrajectorySet with every channel available."""
    return TrajectorySet(seq, (True,) * seq.num_channels)


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: id, provenance, and its feature streams.

    intervals, when present, are (onset_s, offset_s, label) transcription
    spans, non-overlapping and ordered by onset.
    """

    id: str
    speaker_id: str
    corpus_id: str
    acoustic: FrameSequence | None = None
    articulatory: TrajectorySet | None = None
    intervals: tuple[tuple[float, float, str], ...] | None = None

    def __post_init__(self):
        if self.acoustic is None and self.articulatory is None:
            raise ValueError(f"utterance {self.id!r} has no feature stream")
        if self.intervals is not None:
            spans = tuple(
                (float(on), float(off), str(lab)) for on, off, lab in self.intervals
            )
            prev_off = -np.inf
            for on, off, _ in spans:
                if off <= on:
                    raise ValueError(f"interval ({on}, {off}) is empty or inverted")
                if on < prev_off:
                    raise ValueError("intervals overlap or are out of order")
                prev_off = off
            object.__setattr__(self, "intervals", spans)

    def with_streams(
        self,
        acoustic: FrameSequence | None = None,
        articulatory: TrajectorySet | None = None,
    ) -> "UtteranceRecord":
        """Copy with one or both feature streams replaced."""
        return UtteranceRecord(
            id=self.id,
            speaker_id=self.speaker_id,
            corpus_id=self.corpus_id,
            acoustic=acoustic if acoustic is not None else self.acoustic,
            articulatory=articulatory if articulatory is not None else self.articulatory,
            intervals=self.intervals,
        )


# ---------------------------------------------------------------------------
# AFV1 read / write


def write_feature_file(seq: FrameSequence, path) -> None:
    """Write seq to path in AFV1 format.

    Frame values are cast to float32; values too large for float32 are an
    error rather than a silent overflow to inf.
    """
    with np.errstate(over="ignore"):
        payload = seq.frames.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("frame values overflow float32 storage")
    parts = [MAGIC, struct.pack("<IId", seq.num_frames, seq.num_channels, seq.rate_hz)]
    for name in seq.channel_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"channel name too long: {name[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(payload.tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_feature_file(path) -> FrameSequence:
    """Read an AFV1 file written by write_feature_file."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    off = 4
    try:
        t, d, rate = struct.unpack_from("<IId", data, off)
    except struct.error:
        raise FeatureFormatError(f"{path}: truncated header") from None
    off += struct.calcsize("<IId")
    names = []
    for _ in range(d):
        try:
            (nlen,) = struct.unpack_from("<H", data, off)
        except struct.error:
            raise FeatureFormatError(f"{path}: truncated channel table") from None
        off += 2
        if off + nlen > len(data):
            raise FeatureFormatError(f"{path}: truncated channel name")
        names.append(data[off:off + nlen].decode("utf-8"))
        off += nlen
    if len(set(names)) != len(names):
        raise FeatureFormatError(f"{path}: duplicate channel names")
    expected = t * d * 4
    got = len(data) - off
    if got < expected:
        raise FeatureFormatError(
            f"{path}: payload truncated ({got} bytes for declared {t}x{d})"
        )
    if got > expected:
        raise FeatureFormatError(f"{path}: {got - expected} trailing bytes")
    values = np.frombuffer(data, dtype="<f4", count=t * d, offset=off)
    frames = values.astype(np.float64).reshape(t, d)
    try:
        return FrameSequence(frames, rate, tuple(names))
    except ValueError as exc:
        raise FeatureFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class ManifestEntry:
    """One line of a corpus manifest; paths are manifest-relative."""

    id: str
    speaker: str
    corpus: str
    audio: str | None = None
    acoustic: str | None = None
    articulatory: str | None = None
    intervals: list | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "speaker": self.speaker,
            "corpus": self.corpus,
            "audio": self.audio,
            "acoustic": self.acoustic,
            "articulatory": self.articulatory,
            "intervals": self.intervals,
        }
        obj.update(self.extra)
        return obj


_MANIFEST_KEYS = {"id", "speaker", "corpus", "audio", "acoustic", "articulatory", "intervals"}


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FeatureFormatError(f"{path}:{lineno}: bad JSON ({exc})") from None
            try:
                entry = ManifestEntry(
                    id=obj["id"],
                    speaker=obj["speaker"],
                    corpus=obj["corpus"],
                    audio=obj.get("audio"),
                    acoustic=obj.get("acoustic"),
                    articulatory=obj.get("articulatory"),
                    intervals=obj.get("intervals"),
                    extra={k: v for k, v in obj.items() if k not in _MANIFEST_KEYS},
                )
            except KeyError as exc:
                raise FeatureFormatError(
                    f"{path}:{lineno}: missing manifest field {exc}"
                ) from None
            entries.append(entry)
    return entries


def write_manifest(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Generic CSV adapter (normalized intermediate for external corpora)


def read_csv_features(path, rate_hz: float) -> FrameSequence:
    """Read a CSV of features: header row of channel names, one row per frame.

    The adapter for bringing externally-prepared trajectories or features
    into AFV1 without writing a corpus-specific parser.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeatureFormatError(f"{path}: empty CSV") from None
        names = tuple(h.strip() for h in header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise FeatureFormatError(
                    f"{path}:{lineno}: {len(row)} fields, expected {len(names)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FeatureFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FeatureFormatError(f"{path}: no data rows")
    return FrameSequence(np.array(rows, dtype=np.float64), rate_hz, names)
