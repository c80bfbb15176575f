"""AFV1 feature files and JSON-lines corpus manifests.

AFV1 layout (little-endian): magic b"AFV1", u32 frame count T, u32
channel count D, f64 frame rate in Hz, then D channel names (u16 byte
length + UTF-8 bytes each), then T*D float32 values row-major.  A
manifest holds one JSON object per line with at least "id", "speaker",
and "corpus"; file paths are relative to the manifest's directory and
unknown keys ride along untouched.  Both formats are shared with the
evaluation toolkit, which documents them byte by byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"AFV1"


class FormatError(Exception):
    """An AFV1 file or manifest that cannot be decoded."""


def write_afv1(frames: np.ndarray, rate_hz: float, channel_names, path) -> None:
    """Write a T x D frame matrix as an AFV1 file (values stored as float32)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise ValueError(f"frames must be a non-empty T x D matrix, got {frames.shape}")
    names = tuple(str(n) for n in channel_names)
    if len(names) != frames.shape[1]:
        raise ValueError(f"{len(names)} channel names for {frames.shape[1]} channels")
    if len(set(names)) != len(names):
        raise ValueError("duplicate channel names")
    if not rate_hz > 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    if not np.all(np.isfinite(frames)):
        raise ValueError("frames contain NaN or Inf")
    with np.errstate(over="ignore"):
        payload = frames.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("frame values overflow float32 storage")
    parts = [MAGIC, struct.pack("<IId", frames.shape[0], frames.shape[1], float(rate_hz))]
    for name in names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"channel name too long: {name[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(payload.tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_afv1(path) -> tuple[np.ndarray, float, tuple[str, ...]]:
    """Read an AFV1 file; returns (frames as float64 T x D, rate_hz, names)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    off = 4
    try:
        t, d, rate = struct.unpack_from("<IId", data, off)
    except struct.error:
        raise FormatError(f"{path}: truncated header") from None
    off += struct.calcsize("<IId")
    names = []
    for _ in range(d):
        try:
            (nlen,) = struct.unpack_from("<H", data, off)
        except struct.error:
            raise FormatError(f"{path}: truncated channel table") from None
        off += 2
        if off + nlen > len(data):
            raise FormatError(f"{path}: truncated channel name")
        names.append(data[off:off + nlen].decode("utf-8"))
        off += nlen
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate channel names")
    expected = t * d * 4
    got = len(data) - off
    if got < expected:
        raise FormatError(f"{path}: payload truncated ({got} bytes for declared {t}x{d})")
    if got > expected:
        raise FormatError(f"{path}: {got - expected} trailing bytes")
    values = np.frombuffer(data, dtype="<f4", count=t * d, offset=off)
    return values.astype(np.float64).reshape(t, d), float(rate), tuple(names)


@dataclass
class ManifestEntry:
    """One manifest line; paths are relative to the manifest's directory."""

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

    def available_channels(self) -> list[str] | None:
        """The per-utterance list of measured articulatory channels.

        Preprocessed manifests record it under the "available" key; None
        means the manifest does not restrict availability.
        """
        avail = self.extra.get("available")
        if avail is None:
            return None
        return [str(n) for n in avail]


_KNOWN_KEYS = {"id", "speaker", "corpus", "audio", "acoustic", "articulatory", "intervals"}


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
                raise FormatError(f"{path}:{lineno}: bad JSON ({exc})") from None
            try:
                entries.append(
                    ManifestEntry(
                        id=obj["id"],
                        speaker=obj["speaker"],
                        corpus=obj["corpus"],
                        audio=obj.get("audio"),
                        acoustic=obj.get("acoustic"),
                        articulatory=obj.get("articulatory"),
                        intervals=obj.get("intervals"),
                        extra={k: v for k, v in obj.items() if k not in _KNOWN_KEYS},
                    )
                )
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing manifest field {exc}") from None
    return entries


def write_manifest(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")
