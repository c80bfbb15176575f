"""ABX phone discrimination: item files, triplet enumeration, DTW scoring,
and hierarchical aggregation into within- and across-speaker error rates.

Item file format (whitespace-separated, one header line):

    #file onset offset #phone prev next speaker
    s1_u1 0.10 0.35 eh b g spk1
    ...

Aggregation: triplet correctness (ties score 0.5) is pooled per
(phone-pair, context, speaker-group) cell; cell accuracies are averaged
over speaker groups within a (pair, context), then over contexts within
a pair; pairs with fewer than min_contexts contexts or on the exclusion
list are dropped; the global error is 1 minus the mean over surviving
pairs.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import FrameSequence
from .dtw import dtw_distance

log = logging.getLogger(__name__)


class AbxError(Exception):
    """Raised when an ABX evaluation cannot produce a score."""


@dataclass(frozen=True)
class AbxItem:
    """A phone-labeled segment of a feature file with its triphone context."""

    file_id: str
    onset_s: float
    offset_s: float
    phone: str
    prev: str
    next: str
    speaker_id: str

    def __post_init__(self):
        if not (self.offset_s > self.onset_s):
            raise ValueError(
                f"item {self.file_id} has offset {self.offset_s} <= onset {self.onset_s}"
            )


@dataclass(frozen=True)
class Triplet:
    """One (A, B, X) comparison; A is the correct answer (same phone as X)."""

    a: AbxItem
    b: AbxItem
    x: AbxItem
    mode: str  # "within" or "across"


@dataclass
class ContrastCell:
    """Accumulated correctness for one (pair, context, speaker-group) cell."""

    phone_pair: tuple[str, str]  # sorted
    context: tuple[str, str]  # (prev, next)
    speaker_group: tuple  # (speaker,) within; (speaker_ab, speaker_x) across
    n_triplets: int = 0
    sum_correct: float = 0.0

    @property
    def accuracy(self) -> float:
        return self.sum_correct / self.n_triplets

    @property
    def key(self) -> tuple:
        return (self.phone_pair, self.context, self.speaker_group)


@dataclass
class AbxReport:
    """Hierarchical ABX accuracies and the global error rate."""

    mode: str
    global_error: float
    global_accuracy: float
    pair_accuracy: dict  # pair key -> context-averaged accuracy
    pair_context_accuracy: dict  # (pair, context) key -> speaker-averaged accuracy
    cells: list  # per-cell records
    excluded: list  # {pair, reason} records
    n_triplets: int
    n_items_dropped: int
    speaker_pairs_ordered: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "global_error": self.global_error,
            "global_accuracy": self.global_accuracy,
            "pair_accuracy": self.pair_accuracy,
            "pair_context_accuracy": self.pair_context_accuracy,
            "cells": self.cells,
            "excluded": self.excluded,
            "n_triplets": self.n_triplets,
            "n_items_dropped": self.n_items_dropped,
            "speaker_pairs_ordered": self.speaker_pairs_ordered,
            **self.extra,
        }


def pair_key(p1: str, p2: str) -> str:
    return "/".join(sorted((p1, p2)))


def context_key(prev: str, nxt: str) -> str:
    return f"{prev}/{nxt}"


# ---------------------------------------------------------------------------
# Parsing


def parse_item_file(path) -> list[AbxItem]:
    """Parse a ZeroSpeech-style item file; the first line is a header."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1:
                continue
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 7:
                raise AbxError(f"{path}:{lineno}: {len(fields)} columns, expected 7")
            file_id, onset, offset, phone, prev, nxt, speaker = fields
            try:
                onset_f = float(onset)
                offset_f = float(offset)
            except ValueError:
                raise AbxError(f"{path}:{lineno}: non-numeric onset/offset") from None
            if offset_f <= onset_f:
                raise AbxError(f"{path}:{lineno}: offset {offset} <= onset {onset}")
            items.append(
                AbxItem(file_id, onset_f, offset_f, phone, prev, nxt, speaker)
            )
    return items


def parse_exclusion_file(path) -> frozenset:
    """Phone pairs to exclude, one 'phone1 phone2' pair per line; # comments."""
    pairs = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise AbxError(f"{path}:{lineno}: expected two phones per line")
            pairs.add(tuple(sorted(fields)))
    return frozenset(pairs)


def frame_slice(seq: FrameSequence, item: AbxItem) -> FrameSequence:
    """Frames with index i satisfying onset <= i/rate < offset."""
    rate = seq.rate_hz
    start = math.ceil(item.onset_s * rate - 1e-9)
    stop = math.ceil(item.offset_s * rate - 1e-9)
    if start < 0 or stop > seq.num_frames:
        raise AbxError(
            f"item {item.file_id} [{item.onset_s}, {item.offset_s}) outside file "
            f"bounds ({seq.num_frames} frames at {rate} Hz)"
        )
    if stop <= start:
        raise AbxError(
            f"item {item.file_id} [{item.onset_s}, {item.offset_s}) yields no frames"
        )
    return seq.slice_frames(start, stop)


# ---------------------------------------------------------------------------
# Triplet enumeration


def _cell_rng(seed: int, key: tuple) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{key!r}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _subsample(triplets: list, max_per_cell, rng_factory) -> list:
    if max_per_cell is None or len(triplets) <= max_per_cell:
        return triplets
    idx = rng_factory().choice(len(triplets), size=max_per_cell, replace=False)
    return [triplets[i] for i in sorted(idx)]


def build_triplets(
    items: list[AbxItem],
    mode: str,
    max_triplets_per_cell: int | None = None,
    seed: int = 0,
):
    """Yield (cell_key, triplets) for every populated cell, in sorted key
    order.  Both phone orientations are generated (each phone serves as
    the correct answer) and pooled in the same cell.  Oversized cells are
    reduced to a deterministic pseudo-random subset."""
    if mode not in ("within", "across"):
        raise ValueError(f"mode must be 'within' or 'across', got {mode!r}")

    # (prev, next) -> phone -> speaker -> [items]
    by_context: dict = {}
    for it in items:
        by_context.setdefault((it.prev, it.next), {}).setdefault(
            it.phone, {}
        ).setdefault(it.speaker_id, []).append(it)

    for context in sorted(by_context):
        phones = by_context[context]
        phone_names = sorted(phones)
        for i1, p1 in enumerate(phone_names):
            for p2 in phone_names[i1 + 1 :]:
                pair = (p1, p2)
                if mode == "within":
                    speakers = sorted(set(phones[p1]) & set(phones[p2]))
                    for spk in speakers:
                        triplets = []
                        for pa, pb in ((p1, p2), (p2, p1)):
                            a_toks = phones[pa][spk]
                            b_toks = phones[pb][spk]
                            for a in a_toks:
                                for x in a_toks:
                                    if x is a:
                                        continue
                                    for b in b_toks:
                                        triplets.append(Triplet(a, b, x, mode))
                        if triplets:
                            key = (pair, context, (spk,))
                            yield key, _subsample(
                                triplets,
                                max_triplets_per_cell,
                                lambda k=key: _cell_rng(seed, k),
                            )
                else:
                    ab_speakers = sorted(set(phones[p1]) & set(phones[p2]))
                    x_speakers = sorted(set(phones[p1]) | set(phones[p2]))
                    for s_ab in ab_speakers:
                        for s_x in x_speakers:
                            if s_x == s_ab:
                                continue
                            triplets = []
                            for pa, pb in ((p1, p2), (p2, p1)):
                                if s_x not in phones[pa]:
                                    continue
                                a_toks = phones[pa][s_ab]
                                b_toks = phones[pb][s_ab]
                                x_toks = phones[pa][s_x]
                                for a in a_toks:
                                    for x in x_toks:
                                        for b in b_toks:
                                            triplets.append(Triplet(a, b, x, mode))
                            if triplets:
                                key = (pair, context, (s_ab, s_x))
                                yield key, _subsample(
                                    triplets,
                                    max_triplets_per_cell,
                                    lambda k=key: _cell_rng(seed, k),
                                )


# ---------------------------------------------------------------------------
# Scoring


def score_triplet(t: Triplet, segment_of) -> float:
    """delta = dtw(B, X) - dtw(A, X); 1 if A is closer, 0 if B is, 0.5 on a tie."""
    delta = dtw_distance(segment_of(t.b), segment_of(t.x)) - dtw_distance(
        segment_of(t.a), segment_of(t.x)
    )
    if delta > 0:
        return 1.0
    if delta < 0:
        return 0.0
    return 0.5


def _score_cell(key, triplets, segments) -> ContrastCell:
    cache: dict = {}

    def dist(i1: AbxItem, i2: AbxItem) -> float:
        k = (i1, i2) if (i1.file_id, i1.onset_s) <= (i2.file_id, i2.onset_s) else (i2, i1)
        if k not in cache:
            cache[k] = dtw_distance(segments[k[0]], segments[k[1]])
        return cache[k]

    cell = ContrastCell(phone_pair=key[0], context=key[1], speaker_group=key[2])
    for t in triplets:
        delta = dist(t.b, t.x) - dist(t.a, t.x)
        correct = 1.0 if delta > 0 else (0.0 if delta < 0 else 0.5)
        cell.n_triplets += 1
        cell.sum_correct += correct
    return cell


def evaluate(
    items: list[AbxItem],
    features: dict[str, FrameSequence],
    mode: str,
    min_contexts: int = 3,
    exclusions: frozenset = frozenset(),
    max_triplets_per_cell: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> AbxReport:
    """Run the full ABX evaluation over parsed items and loaded features.

    The report is identical for any thread count: cells are scored
    independently and merged in sorted key order.
    """
    segments = {}
    dropped = 0
    usable = []
    for it in items:
        if it.file_id not in features:
            raise AbxError(f"item references unknown feature file {it.file_id!r}")
        try:
            segments[it] = frame_slice(features[it.file_id], it).frames
        except AbxError as exc:
            dropped += 1
            log.info("dropping item: %s", exc)
            continue
        usable.append(it)

    cells_in = list(
        build_triplets(usable, mode, max_triplets_per_cell=max_triplets_per_cell, seed=seed)
    )
    if threads > 1 and len(cells_in) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(
                pool.map(lambda kt: _score_cell(kt[0], kt[1], segments), cells_in)
            )
    else:
        cells = [_score_cell(k, t, segments) for k, t in cells_in]

    report = aggregate(cells, min_contexts=min_contexts, exclusions=exclusions)
    report.mode = mode
    report.n_items_dropped = dropped
    return report


# ---------------------------------------------------------------------------
# Aggregation


def aggregate(
    cells: list[ContrastCell],
    min_contexts: int = 3,
    exclusions: frozenset = frozenset(),
) -> AbxReport:
    """Average cells over speaker groups, then contexts, then pairs."""
    # pair -> context -> [cell accuracies]
    tree: dict = {}
    for cell in sorted(cells, key=lambda c: c.key):
        if cell.n_triplets == 0:
            continue
        tree.setdefault(cell.phone_pair, {}).setdefault(cell.context, []).append(
            cell.accuracy
        )

    pair_context_accuracy = {}
    pair_accuracy = {}
    excluded = []
    for pair in sorted(tree):
        pkey = pair_key(*pair)
        if pair in exclusions or tuple(sorted(pair)) in exclusions:
            excluded.append({"pair": pkey, "reason": "on exclusion list"})
            continue
        contexts = tree[pair]
        if len(contexts) < min_contexts:
            excluded.append(
                {
                    "pair": pkey,
                    "reason": f"only {len(contexts)} context(s), need {min_contexts}",
                }
            )
            continue
        ctx_means = []
        for ctx in sorted(contexts):
            m = float(np.mean(contexts[ctx]))
            pair_context_accuracy[f"{pkey}|{context_key(*ctx)}"] = m
            ctx_means.append(m)
        pair_accuracy[pkey] = float(np.mean(ctx_means))

    if not pair_accuracy:
        raise AbxError("no evaluable contrasts")

    score = float(np.mean(list(pair_accuracy.values())))
    cell_records = [
        {
            "pair": pair_key(*c.phone_pair),
            "context": context_key(*c.context),
            "speakers": list(c.speaker_group),
            "n_triplets": c.n_triplets,
            "sum_correct": c.sum_correct,
            "accuracy": c.accuracy,
        }
        for c in sorted(cells, key=lambda c: c.key)
        if c.n_triplets > 0
    ]
    return AbxReport(
        mode="",
        global_error=1.0 - score,
        global_accuracy=score,
        pair_accuracy=pair_accuracy,
        pair_context_accuracy=pair_context_accuracy,
        cells=cell_records,
        excluded=excluded,
        n_triplets=sum(c.n_triplets for c in cells),
        n_items_dropped=0,
    )
