"""Batch drivers behind the CLI: declarative TOML configuration, corpus
preprocessing, reconstruction scoring over file trees, ABX evaluation over
feature directories, and the multi-stage runner.

Config schema (TOML)::

    out_dir = "out"                 # required for `run`
    stages = ["preprocess", "abx"]  # any of: preprocess, model, score-recon, abx

    [filter]
    taps = 50                       # presmoothing kernel length

    [[corpus]]
    name = "toy"
    manifest = "toy/manifest.jsonl" # path relative to the config file
    smoothing_cutoff_hz = 10.0      # 20.0 for EMA-IEEE-like data
    rolling_window = 60
    channels = ["TTx", "TTy"]       # articulatory channels treated as available;
                                    # omit to take every channel in the files
    exclude_speakers = []

    [abx]
    items = "toy/phones.item"
    mode = "within"                 # or "across"
    min_contexts = 3
    seed = 0
    exclusions = "toy/excl.txt"     # optional
    max_triplets_per_cell = 0       # 0 = no subsampling
    features = "articulatory"       # which preprocessed stream to score

    [metrics]
    per_utterance = false
    pred = "recon"                  # directory of predicted AFV1 files
    ref = "preprocessed ref dir"    # defaults to the preprocessed articulatory dir
    exclude_channels = []

    [model]
    command = ["python", "-m", "somepkg.infer"]  # argv prefix; the input
                                    # manifest path and output directory are
                                    # appended as the final two arguments

Every JSON report embeds the sha256 of the config file and the toolkit
version.  All drivers are deterministic: given identical inputs they produce
byte-identical outputs at any thread count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .abx import AbxError, evaluate, parse_exclusion_file, parse_item_file
from .core import (
    FeatureFormatError,
    FrameSequence,
    ManifestEntry,
    TrajectorySet,
    UtteranceRecord,
    full_mask,
    read_feature_file,
    read_manifest,
    write_feature_file,
    write_manifest,
)
from .metrics import score_pairs
from .preprocess import (
    SpeakerStats,
    normalize_mfcc,
    presmooth,
    rolling_normalize,
    trim_silence,
)
from .signal import MfccConfig, add_deltas, mfcc, resample, stack_context
from .tract import compute_tract_variables

log = logging.getLogger(__name__)

OUTPUT_RATE_HZ = 100.0


class ConfigError(Exception):
    """Raised when a pipeline configuration is invalid; names the field."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class CorpusConfig:
    name: str
    manifest: Path
    smoothing_cutoff_hz: float = 10.0
    rolling_window: int = 60
    channels: tuple[str, ...] | None = None
    exclude_speakers: tuple[str, ...] = ()


@dataclass
class AbxConfig:
    items: Path
    mode: str = "within"
    min_contexts: int = 3
    seed: int = 0
    exclusions: Path | None = None
    max_triplets_per_cell: int = 0
    features: str = "articulatory"


@dataclass
class MetricsConfig:
    per_utterance: bool = False
    pred: Path | None = None
    ref: Path | None = None
    exclude_channels: tuple[str, ...] = ()


@dataclass
class PipelineConfig:
    path: Path
    sha256: str
    out_dir: Path
    stages: tuple[str, ...]
    corpora: list[CorpusConfig]
    filter_taps: int = 50
    abx: AbxConfig | None = None
    metrics: MetricsConfig | None = None
    model_command: tuple[str, ...] | None = None

    def report_meta(self) -> dict:
        return {"config_sha256": self.sha256, "toolkit_version": __version__}


_STAGES = ("preprocess", "model", "score-recon", "abx")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return table[key]


def load_config(path) -> PipelineConfig:
    """Parse and validate a pipeline config; referenced paths must exist.

    The config path is resolved first, so every derived path (out_dir,
    manifests, item files) is absolute and the pipeline behaves the same
    no matter where the process was started from.
    """
    path = Path(path).resolve()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None

    base = path.parent
    stages = tuple(data.get("stages", ["preprocess"]))
    for s in stages:
        if s not in _STAGES:
            raise ConfigError(f"stages: unknown stage {s!r} (expected one of {_STAGES})")

    corpora = []
    for i, tbl in enumerate(data.get("corpus", [])):
        where = f"corpus[{i}]"
        manifest = base / _require(tbl, "manifest", where)
        if not manifest.is_file():
            raise ConfigError(f"{where}.manifest: no such file: {manifest}")
        cutoff = float(tbl.get("smoothing_cutoff_hz", 10.0))
        if not (0 < cutoff < OUTPUT_RATE_HZ / 2):
            raise ConfigError(
                f"{where}.smoothing_cutoff_hz: {cutoff} not in (0, {OUTPUT_RATE_HZ / 2})"
            )
        window = int(tbl.get("rolling_window", 60))
        if window < 0:
            raise ConfigError(f"{where}.rolling_window: must be >= 0")
        channels = tbl.get("channels")
        corpora.append(
            CorpusConfig(
                name=str(_require(tbl, "name", where)),
                manifest=manifest,
                smoothing_cutoff_hz=cutoff,
                rolling_window=window,
                channels=tuple(channels) if channels is not None else None,
                exclude_speakers=tuple(tbl.get("exclude_speakers", ())),
            )
        )
    if not corpora:
        raise ConfigError("corpus: at least one [[corpus]] entry is required")

    abx_cfg = None
    if "abx" in data:
        tbl = data["abx"]
        items = base / _require(tbl, "items", "abx")
        if not items.is_file():
            raise ConfigError(f"abx.items: no such file: {items}")
        mode = tbl.get("mode", "within")
        if mode not in ("within", "across"):
            raise ConfigError(f"abx.mode: {mode!r} is not 'within' or 'across'")
        exclusions = tbl.get("exclusions")
        if exclusions is not None:
            exclusions = base / exclusions
            if not exclusions.is_file():
                raise ConfigError(f"abx.exclusions: no such file: {exclusions}")
        abx_cfg = AbxConfig(
            items=items,
            mode=mode,
            min_contexts=int(tbl.get("min_contexts", 3)),
            seed=int(tbl.get("seed", 0)),
            exclusions=exclusions,
            max_triplets_per_cell=int(tbl.get("max_triplets_per_cell", 0)),
            features=tbl.get("features", "articulatory"),
        )
    if "abx" in stages and abx_cfg is None:
        raise ConfigError("stages: 'abx' requested but no [abx] table present")

    metrics_cfg = None
    if "metrics" in data:
        tbl = data["metrics"]
        pred = tbl.get("pred")
        ref = tbl.get("ref")
        metrics_cfg = MetricsConfig(
            per_utterance=bool(tbl.get("per_utterance", False)),
            pred=base / pred if pred is not None else None,
            ref=base / ref if ref is not None else None,
            exclude_channels=tuple(tbl.get("exclude_channels", ())),
        )
    if "score-recon" in stages and metrics_cfg is None:
        raise ConfigError("stages: 'score-recon' requested but no [metrics] table present")

    model_command = None
    if "model" in data:
        cmd = _require(data["model"], "command", "model")
        if not isinstance(cmd, list) or not all(isinstance(c, str) for c in cmd) or not cmd:
            raise ConfigError("model.command: expected a non-empty list of strings")
        model_command = tuple(cmd)
    if "model" in stages and model_command is None:
        raise ConfigError("stages: 'model' requested but no [model] table present")

    taps = int(data.get("filter", {}).get("taps", 50))
    if taps < 3:
        raise ConfigError("filter.taps: must be >= 3")

    out_dir = data.get("out_dir")
    if out_dir is None:
        raise ConfigError("out_dir: missing required field")

    return PipelineConfig(
        path=path,
        sha256=hashlib.sha256(raw).hexdigest(),
        out_dir=base / out_dir,
        stages=stages,
        corpora=corpora,
        filter_taps=taps,
        abx=abx_cfg,
        metrics=metrics_cfg,
        model_command=model_command,
    )


# ---------------------------------------------------------------------------
# Report writers


def write_json_report(obj: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_recon_csv(report_dict: dict, path: Path) -> None:
    """Per-channel metric table; one row per channel plus an aggregate row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics = ("rmse_norm", "pcc", "rmse_mm")
    channels = sorted(
        {ch for m in metrics for ch in (report_dict.get(m) or {}).get("per_channel", {})}
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", *metrics])
        for ch in channels:
            row = [ch]
            for m in metrics:
                per = (report_dict.get(m) or {}).get("per_channel", {})
                row.append(repr(per[ch]) if ch in per else "")
            w.writerow(row)
        agg = ["aggregate"]
        for m in metrics:
            sec = report_dict.get(m)
            agg.append(repr(sec["aggregate"]) if sec else "")
        w.writerow(agg)


# ---------------------------------------------------------------------------
# Preprocess driver


def _load_waveform(path: Path) -> tuple:
    seq = read_feature_file(path)
    if seq.num_channels != 1:
        raise FeatureFormatError(f"{path}: waveform file must have 1 channel")
    return seq.frames[:, 0], seq.rate_hz


def _acoustic_pipeline(entry: ManifestEntry, base: Path) -> FrameSequence | None:
    if entry.audio is not None:
        samples, rate = _load_waveform(base / entry.audio)
        feats = mfcc(samples, rate, MfccConfig())
        feats = add_deltas(feats)
        return stack_context(feats, 5)
    if entry.acoustic is not None:
        return read_feature_file(base / entry.acoustic)
    return None


def _articulatory_pipeline(
    entry: ManifestEntry, base: Path, cfg: CorpusConfig, taps: int
) -> TrajectorySet | None:
    if entry.articulatory is None:
        return None
    seq = read_feature_file(base / entry.articulatory)
    if cfg.channels is None:
        available = tuple(True for _ in seq.channel_names)
    else:
        available = tuple(n in cfg.channels for n in seq.channel_names)
    traj = TrajectorySet(seq, available)
    traj = presmooth(traj, cfg.smoothing_cutoff_hz, n_taps=taps)
    traj = traj.with_seq(resample(traj.seq, OUTPUT_RATE_HZ))
    return compute_tract_variables(traj)


def preprocess_corpus(cfg: CorpusConfig, out_dir: Path, filter_taps: int = 50):
    """Run the full conditioning chain over one corpus manifest.

    Stage order per utterance: MFCC + deltas + context on audio;
    presmooth at native rate, resample to 100 Hz, tract variables on
    trajectories; silence trimming on the aligned pair.  Then per
    speaker: feature z-normalization and rolling articulatory
    normalization in manifest (recording) order.

    Returns (manifest entries written, speaker stats by id).
    """
    entries = read_manifest(cfg.manifest)
    base = cfg.manifest.parent
    out_dir = Path(out_dir)
    corpus_out = out_dir / cfg.name
    corpus_out.mkdir(parents=True, exist_ok=True)

    # speaker -> list of (entry, acoustic | None, traj | None), manifest order
    by_speaker: dict = {}
    order: list[str] = []
    for entry in entries:
        if entry.speaker in cfg.exclude_speakers:
            continue
        acoustic = _acoustic_pipeline(entry, base)
        traj = _articulatory_pipeline(entry, base, cfg, filter_taps)
        record = UtteranceRecord(
            id=entry.id,
            speaker_id=entry.speaker,
            corpus_id=cfg.name,
            acoustic=acoustic,
            articulatory=traj,
            intervals=tuple(tuple(iv) for iv in entry.intervals)
            if entry.intervals
            else None,
        )
        record = trim_silence(record)
        if entry.speaker not in by_speaker:
            by_speaker[entry.speaker] = []
            order.append(entry.speaker)
        by_speaker[entry.speaker].append(record)

    out_entries = []
    stats_by_speaker: dict[str, SpeakerStats] = {}
    for speaker in order:
        records = by_speaker[speaker]
        acoustics = [r.acoustic for r in records if r.acoustic is not None]
        if acoustics:
            normalized, _, _ = normalize_mfcc(acoustics)
            it = iter(normalized)
            records = [
                r.with_streams(acoustic=next(it)) if r.acoustic is not None else r
                for r in records
            ]
        trajs = [r.articulatory for r in records if r.articulatory is not None]
        if trajs:
            utt_ids = [r.id for r in records if r.articulatory is not None]
            normalized_t, stats = rolling_normalize(
                trajs, utt_ids, speaker, window=cfg.rolling_window
            )
            stats_by_speaker[speaker] = stats
            it = iter(normalized_t)
            records = [
                r.with_streams(articulatory=next(it))
                if r.articulatory is not None
                else r
                for r in records
            ]
        for r in records:
            ent = ManifestEntry(id=r.id, speaker=speaker, corpus=cfg.name)
            if r.acoustic is not None:
                rel = f"{r.id}_acoustic.afv1"
                write_feature_file(r.acoustic, corpus_out / rel)
                ent.acoustic = rel
            if r.articulatory is not None:
                rel = f"{r.id}_articulatory.afv1"
                write_feature_file(r.articulatory.seq, corpus_out / rel)
                ent.articulatory = rel
                ent.extra["available"] = [
                    n for n in r.articulatory.seq.channel_names
                    if r.articulatory.is_available(n)
                ]
            out_entries.append(ent)

    write_manifest(out_entries, corpus_out / "manifest.jsonl")
    stats_obj = {s: st.to_dict() for s, st in sorted(stats_by_speaker.items())}
    write_json_report(stats_obj, corpus_out / "speaker_stats.json")
    return out_entries, stats_by_speaker


# ---------------------------------------------------------------------------
# Reconstruction scoring driver


def load_mask_config(path) -> tuple:
    """Mask TOML: optional `available` (whitelist) and `exclude` lists."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read mask config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    available = data.get("available")
    exclude = tuple(data.get("exclude", ()))
    return (tuple(available) if available is not None else None), exclude


def _channel_mask(seq: FrameSequence, available, exclude) -> tuple:
    return tuple(
        (available is None or n in available) and n not in exclude
        for n in seq.channel_names
    )


def _collect_afv1(root: Path, pattern: str = "*.afv1") -> dict:
    return {
        str(p.relative_to(root)): p for p in sorted(root.rglob(pattern))
    }


def load_speaker_stats(path) -> dict[str, SpeakerStats]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {s: SpeakerStats.from_dict(d) for s, d in data.items()}


def score_recon_dirs(
    pred_dir,
    ref_dir,
    mask_path=None,
    stats_path=None,
    per_utterance: bool = False,
    pattern: str = "*.afv1",
    exclude: tuple = (),
) -> dict:
    """Score predicted against reference AFV1 trees, paired by relative path.

    With speaker stats, also reports RMSE in original units by inverting
    the rolling normalization (the utterance id is the file stem up to the
    first '_articulatory'/'_acoustic' suffix, or the whole stem).
    """
    pred_dir, ref_dir = Path(pred_dir), Path(ref_dir)
    preds = _collect_afv1(pred_dir, pattern)
    refs = _collect_afv1(ref_dir, pattern)
    if not refs:
        raise FeatureFormatError(f"{ref_dir}: no files matching {pattern} found")
    missing = sorted(set(refs) - set(preds))
    extra = sorted(set(preds) - set(refs))
    if missing or extra:
        raise FeatureFormatError(
            f"prediction/reference trees do not match: "
            f"missing from pred: {missing or 'none'}; unmatched in pred: {extra or 'none'}"
        )

    available, cfg_exclude = (None, ()) if mask_path is None else load_mask_config(mask_path)
    exclude = tuple(exclude) + tuple(cfg_exclude)
    stats = load_speaker_stats(stats_path) if stats_path is not None else None

    pairs = []
    mm_pairs = [] if stats is not None else None
    for rel in sorted(refs):
        p = read_feature_file(preds[rel])
        r = read_feature_file(refs[rel])
        mask = _channel_mask(r, available, exclude)
        pairs.append((p, r, mask))
        if stats is not None:
            utt_id = Path(rel).stem
            for suffix in ("_articulatory", "_acoustic"):
                if utt_id.endswith(suffix):
                    utt_id = utt_id[: -len(suffix)]
            st = next(
                (s for s in stats.values() if utt_id in s.rolling_means), None
            )
            if st is None:
                raise ConfigError(
                    f"speaker stats cover no utterance id {utt_id!r} (from {rel})"
                )
            mm_pairs.append((st.denormalize(p, utt_id), st.denormalize(r, utt_id)))

    report = score_pairs(pairs, mm_pairs=mm_pairs, per_utterance=per_utterance)
    return report.to_dict()


# ---------------------------------------------------------------------------
# ABX driver


def abx_over_dir(
    features_dir,
    items_path,
    mode: str,
    min_contexts: int = 3,
    exclusions_path=None,
    seed: int = 0,
    max_triplets_per_cell: int = 0,
    threads: int = 1,
) -> dict:
    """Evaluate ABX over a directory of <file_id>.afv1 feature files."""
    features_dir = Path(features_dir)
    items = parse_item_file(items_path)
    exclusions = (
        parse_exclusion_file(exclusions_path)
        if exclusions_path is not None
        else frozenset()
    )
    features = {}
    for file_id in sorted({it.file_id for it in items}):
        path = features_dir / f"{file_id}.afv1"
        if not path.is_file():
            raise AbxError(f"missing feature file for item file_id {file_id!r}: {path}")
        features[file_id] = read_feature_file(path)
    report = evaluate(
        items,
        features,
        mode,
        min_contexts=min_contexts,
        exclusions=exclusions,
        max_triplets_per_cell=max_triplets_per_cell or None,
        seed=seed,
        threads=threads,
    )
    return report.to_dict()


# ---------------------------------------------------------------------------
# Pipeline runner


def _model_stage(config: PipelineConfig, entries_by_corpus: dict) -> None:
    """Hand the external model a manifest of acoustic AFV1 files; it must
    write one file named <id>_articulatory.afv1 per entry into the given
    output directory so predictions pair with the preprocessed references.

    The command runs from the config file's directory, so relative paths
    in model.command mean the same thing as every other config path; the
    manifest and output directory are passed absolute."""
    model_in = config.out_dir / "model_input.jsonl"
    model_out = config.out_dir / "model_output"
    model_out.mkdir(parents=True, exist_ok=True)
    inputs = []
    for corpus, entries in entries_by_corpus.items():
        for e in entries:
            if e.acoustic is not None:
                # model_input.jsonl sits one level above the corpus trees, so
                # re-anchor the corpus-relative paths at the manifest location
                inputs.append(
                    ManifestEntry(id=e.id, speaker=e.speaker, corpus=corpus,
                                  acoustic=f"{corpus}/{e.acoustic}")
                )
    if not inputs:
        raise ConfigError("model stage: no acoustic features were produced")
    write_manifest(inputs, model_in)
    cmd = [*config.model_command, str(model_in), str(model_out)]
    log.info("running model: %s", " ".join(cmd))
    proc = subprocess.run(cmd, cwd=config.path.parent)
    if proc.returncode != 0:
        raise RuntimeError(
            f"model command exited with status {proc.returncode}: {' '.join(cmd)}"
        )


def run_pipeline(config: PipelineConfig, threads: int = 1) -> list[Path]:
    """Execute the configured stages in order; returns written report paths."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    entries_by_corpus: dict = {}

    if "preprocess" in config.stages:
        for corpus in config.corpora:
            entries, _ = preprocess_corpus(
                corpus, config.out_dir, filter_taps=config.filter_taps
            )
            entries_by_corpus[corpus.name] = entries
            log.info("preprocessed %d utterances for corpus %s", len(entries), corpus.name)

    if "model" in config.stages:
        _model_stage(config, entries_by_corpus)

    if "score-recon" in config.stages:
        m = config.metrics
        pred = m.pred if m.pred is not None else config.out_dir / "model_output"
        ref = m.ref
        pattern = "*.afv1"
        stats_path = None
        if ref is None:
            if len(config.corpora) != 1:
                raise ConfigError(
                    "metrics.ref: required when more than one corpus is configured"
                )
            # preprocessed corpus trees mix acoustic and articulatory files;
            # only the articulatory ones have model predictions to pair with
            ref = config.out_dir / config.corpora[0].name
            pattern = "*_articulatory.afv1"
            candidate = ref / "speaker_stats.json"
            if candidate.is_file():
                stats_path = candidate
        report = score_recon_dirs(
            pred,
            ref,
            stats_path=stats_path,
            per_utterance=m.per_utterance,
            pattern=pattern,
            exclude=m.exclude_channels,
        )
        report.update(config.report_meta())
        out_json = config.out_dir / "recon_report.json"
        write_json_report(report, out_json)
        write_recon_csv(report, config.out_dir / "recon_report.csv")
        written += [out_json, config.out_dir / "recon_report.csv"]

    if "abx" in config.stages:
        a = config.abx
        if a.features in ("articulatory", "acoustic"):
            if len(config.corpora) != 1:
                raise ConfigError(
                    "abx.features: name a directory when more than one corpus is configured"
                )
            feat_dir = config.out_dir / config.corpora[0].name
        else:
            feat_dir = config.path.parent / a.features
        report = abx_over_dir(
            feat_dir,
            a.items,
            a.mode,
            min_contexts=a.min_contexts,
            exclusions_path=a.exclusions,
            seed=a.seed,
            max_triplets_per_cell=a.max_triplets_per_cell,
            threads=threads,
        )
        report.update(config.report_meta())
        out_json = config.out_dir / "abx_report.json"
        write_json_report(report, out_json)
        written.append(out_json)

    return written
