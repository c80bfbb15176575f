"""Command-line entry points.

Subcommands: filter-design, import-csv, preprocess, tract, score-recon,
abx, run.  Exit codes: 0 success, 1 input error (bad arguments, malformed
files, invalid config), 2 internal error.  Set ARTIEVAL_LOG=DEBUG|INFO|...
to control log verbosity (default WARNING).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abx import AbxError
from .core import (
    FeatureFormatError,
    TrajectorySet,
    read_csv_features,
    read_feature_file,
    write_feature_file,
)
from .pipeline import (
    ConfigError,
    abx_over_dir,
    load_config,
    preprocess_corpus,
    run_pipeline,
    score_recon_dirs,
    write_json_report,
    write_recon_csv,
)
from .signal import FilterSpec, design_lowpass, frequency_response
from .tract import compute_tract_variables

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

_INPUT_ERRORS = (ConfigError, FeatureFormatError, AbxError, ValueError, OSError)


class _Parser(argparse.ArgumentParser):
    # usage problems are input errors (exit 1), not internal errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _args_hash(args: argparse.Namespace, keys: list[str]) -> str:
    """Stable hash of the effective parameters for flag-driven commands."""
    obj = {k: getattr(args, k) for k in keys}
    blob = json.dumps({k: str(v) for k, v in obj.items()}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_filter_design(args) -> int:
    spec = FilterSpec(args.taps, args.cutoff, args.rate)
    w = design_lowpass(spec)
    freqs = np.linspace(0.0, args.rate / 2, args.response_points)
    gains = frequency_response(w, freqs, args.rate)
    out = sys.stdout
    out.write("index,weight\n")
    for i, v in enumerate(w):
        out.write(f"{i},{float(v)!r}\n")
    out.write("\n")
    out.write("freq_hz,gain\n")
    for f, g in zip(freqs, gains):
        out.write(f"{float(f)!r},{float(g)!r}\n")
    return EXIT_OK


def _cmd_import_csv(args) -> int:
    seq = read_csv_features(args.csv, args.rate)
    write_feature_file(seq, args.out)
    log.info("wrote %s (%d frames, %d channels)", args.out, seq.num_frames, seq.num_channels)
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    config = load_config(args.config)
    manifest = Path(args.manifest).resolve()
    matches = [c for c in config.corpora if c.manifest.resolve() == manifest]
    if not matches:
        if len(config.corpora) == 1:
            matches = [config.corpora[0]]
            matches[0].manifest = Path(args.manifest)
        else:
            raise ConfigError(
                f"config has no corpus entry with manifest {args.manifest} "
                "and more than one corpus is configured"
            )
    entries, _ = preprocess_corpus(
        matches[0], Path(args.out), filter_taps=config.filter_taps
    )
    log.info("preprocessed %d utterances", len(entries))
    return EXIT_OK


def _cmd_tract(args) -> int:
    seq = read_feature_file(args.infile)
    if args.available is not None:
        names = {n.strip() for n in args.available.split(",") if n.strip()}
        mask = tuple(n in names for n in seq.channel_names)
    else:
        mask = tuple(True for _ in seq.channel_names)
    traj = compute_tract_variables(TrajectorySet(seq, mask))
    write_feature_file(traj.seq, args.out)
    unavailable = [
        n for n in traj.seq.channel_names if not traj.is_available(n)
    ]
    if unavailable:
        log.warning("channels marked unavailable: %s", ",".join(unavailable))
    return EXIT_OK


def _cmd_score_recon(args) -> int:
    report = score_recon_dirs(
        args.pred,
        args.ref,
        mask_path=args.mask,
        stats_path=args.stats,
        per_utterance=args.per_utterance,
        pattern=args.pattern,
    )
    report["toolkit_version"] = __version__
    report["config_sha256"] = (
        _file_hash(args.mask)
        if args.mask is not None
        else _args_hash(args, ["pred", "ref", "stats", "per_utterance", "pattern"])
    )
    out_json = Path(args.out)
    write_json_report(report, out_json)
    write_recon_csv(report, out_json.with_suffix(".csv"))
    print(f"rmse={report['rmse_norm']['aggregate']!r} pcc={report['pcc']['aggregate']!r}")
    return EXIT_OK


def _cmd_abx(args) -> int:
    report = abx_over_dir(
        args.features,
        args.items,
        args.mode,
        min_contexts=args.min_contexts,
        exclusions_path=args.exclusions,
        seed=args.seed,
        max_triplets_per_cell=args.max_triplets,
        threads=args.threads,
    )
    report["toolkit_version"] = __version__
    report["config_sha256"] = _args_hash(
        args,
        ["features", "items", "mode", "min_contexts", "exclusions", "seed", "max_triplets"],
    )
    write_json_report(report, Path(args.out))
    print(f"global_error={report['global_error']!r} n_triplets={report['n_triplets']}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_config(args.config)
    written = run_pipeline(config, threads=args.threads)
    for path in written:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="artieval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter-design", parents=[], help="print low-pass weights and response")
    p.add_argument("--taps", type=int, required=True)
    p.add_argument("--cutoff", type=float, required=True, metavar="HZ")
    p.add_argument("--rate", type=float, required=True, metavar="HZ")
    p.add_argument("--response-points", type=int, default=513)
    p.set_defaults(func=_cmd_filter_design)

    p = sub.add_parser("import-csv", help="convert header+rows CSV to an AFV1 file")
    p.add_argument("--csv", required=True)
    p.add_argument("--rate", type=float, required=True, metavar="HZ")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_import_csv)

    p = sub.add_parser("preprocess", help="condition one corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--config", required=True, metavar="C.toml")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("tract", help="append vocal-tract variables to a trajectory file")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE.afv1")
    p.add_argument("--out", required=True, metavar="FILE.afv1")
    p.add_argument("--available", help="comma-separated available channels")
    p.set_defaults(func=_cmd_tract)

    p = sub.add_parser("score-recon", help="score predicted against reference AFV1 trees")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--ref", required=True, metavar="DIR")
    p.add_argument("--mask", metavar="CONFIG")
    p.add_argument("--stats", metavar="STATS.json")
    p.add_argument("--per-utterance", action="store_true")
    p.add_argument("--pattern", default="*.afv1", metavar="GLOB",
                   help="pair only files matching this pattern in both trees")
    p.add_argument("--out", default="recon_report.json")
    p.set_defaults(func=_cmd_score_recon)

    p = sub.add_parser("abx", help="ABX phone discrimination over a feature directory")
    p.add_argument("--features", required=True, metavar="DIR")
    p.add_argument("--items", required=True, metavar="FILE")
    p.add_argument("--mode", choices=["within", "across"], required=True)
    p.add_argument("--min-contexts", type=int, default=3)
    p.add_argument("--exclusions", metavar="FILE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-triplets", type=int, default=0, metavar="N",
                   help="per-cell triplet cap, 0 = unlimited")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="abx_report.json")
    p.set_defaults(func=_cmd_abx)

    p = sub.add_parser("run", help="run the configured pipeline stages")
    p.add_argument("--config", required=True, metavar="C.toml")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ARTIEVAL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # a downstream consumer (head, less) closed the pipe; die quietly,
        # parking stdout on devnull so interpreter-exit flushing cannot raise
        try:
            devnull = os.open(os.devnull, os.O_WRONLY)
            try:
                os.dup2(devnull, sys.stdout.fileno())
            finally:
                os.close(devnull)
        except (OSError, ValueError):
            pass
        return EXIT_INPUT
    except _INPUT_ERRORS as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - report, exit 2, never traceback
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
