"""Command-line interface: train a network, run inference over a manifest.

`artinet infer --checkpoint CKPT MANIFEST OUT_DIR` keeps the manifest
and output directory as trailing positionals so an evaluation pipeline
can append them to a fixed command prefix.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch
import yaml

from . import __version__
from .export import export_reconstructions
from .formats import FormatError
from .network import InversionNetwork, NetworkSpec
from .train import TrainConfig, TrainingDiverged, train_from_manifests

CHECKPOINT_FORMAT = "artinet-checkpoint-v1"


class CliError(Exception):
    """User-facing error; message printed to stderr, exit code 1."""


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise CliError(f"{where} is missing required key {key!r}")
    return mapping[key]


def _section(cfg: dict, key: str) -> dict:
    value = cfg.get(key, {})
    if not isinstance(value, dict):
        raise CliError(f"config section {key!r} must be a mapping")
    return value


def _reject_unknown(mapping: dict, allowed: tuple[str, ...], where: str):
    """A misspelled key would silently fall back to its default; refuse it."""
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise CliError(
            f"unknown {where} key(s) {', '.join(map(repr, unknown))}; "
            f"expected one of {', '.join(sorted(allowed))}"
        )


def load_train_config(path: Path) -> tuple[NetworkSpec, TrainConfig, list[Path], list[Path]]:
    """Parse a YAML training config; paths are relative to the file."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise CliError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError("config must be a YAML mapping")
    _reject_unknown(cfg, ("seed", "network", "train", "data"), "config")

    network = _section(cfg, "network")
    _reject_unknown(
        network,
        ("channels", "input_dim", "dense_units", "recurrent_units",
         "recurrent_layers", "smoothing"),
        "'network'",
    )
    channels = _require(network, "channels", "config section 'network'")
    if not isinstance(channels, list) or not all(isinstance(c, str) for c in channels):
        raise CliError("network.channels must be a list of channel names")
    smoothing = network.get("smoothing", {})
    if not isinstance(smoothing, dict):
        raise CliError("network.smoothing must be a mapping")
    _reject_unknown(smoothing, ("taps", "cutoff_hz", "rate_hz"), "'network.smoothing'")
    _reject_unknown(
        _section(cfg, "train"),
        ("learning_rate", "batch_size", "patience", "beta", "max_epochs"),
        "'train'",
    )
    _reject_unknown(
        _section(cfg, "data"), ("train_manifests", "val_manifests"), "'data'"
    )
    try:
        spec = NetworkSpec(
            channels=tuple(channels),
            input_dim=int(network.get("input_dim", 429)),
            dense_units=int(network.get("dense_units", 300)),
            recurrent_units=int(network.get("recurrent_units", 300)),
            recurrent_layers=int(network.get("recurrent_layers", 2)),
            smoothing_taps=int(smoothing.get("taps", 50)),
            smoothing_cutoff_hz=float(smoothing.get("cutoff_hz", 10.0)),
            frame_rate_hz=float(smoothing.get("rate_hz", 100.0)),
        )
        train_cfg = TrainConfig(
            learning_rate=float(_section(cfg, "train").get("learning_rate", 0.001)),
            batch_size=int(_section(cfg, "train").get("batch_size", 10)),
            patience=int(_section(cfg, "train").get("patience", 5)),
            beta=float(_section(cfg, "train").get("beta", 1000.0)),
            max_epochs=int(_section(cfg, "train").get("max_epochs", 500)),
            seed=int(cfg.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config value: {exc}") from exc

    data = _section(cfg, "data")
    base = path.parent
    train_manifests = [base / p for p in _require(data, "train_manifests", "config section 'data'")]
    val_manifests = [base / p for p in _require(data, "val_manifests", "config section 'data'")]
    if not train_manifests or not val_manifests:
        raise CliError("data.train_manifests and data.val_manifests must be non-empty")
    return spec, train_cfg, train_manifests, val_manifests


def save_checkpoint(path: Path, net: InversionNetwork, history=None, train_cfg=None):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "network": net.spec.to_dict(),
        "state_dict": net.state_dict(),
    }
    if history is not None:
        payload["history"] = history.to_dict()
    if train_cfg is not None:
        payload["train_config"] = train_cfg.to_dict()
    torch.save(payload, path)


def load_checkpoint(path: Path) -> InversionNetwork:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except OSError as exc:
        raise CliError(f"cannot read checkpoint: {exc}") from exc
    except Exception as exc:  # torch raises its own deserialization errors
        raise CliError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CliError(f"{path} is not an {CHECKPOINT_FORMAT} checkpoint")
    try:
        spec = NetworkSpec.from_dict(payload["network"])
        net = InversionNetwork(spec)
        net.load_state_dict(payload["state_dict"])
    except (KeyError, TypeError, ValueError, RuntimeError) as exc:
        raise CliError(f"checkpoint {path} is malformed: {exc}") from exc
    net.eval()
    return net


def _cmd_train(args) -> int:
    spec, train_cfg, train_manifests, val_manifests = load_train_config(Path(args.config))
    torch.manual_seed(train_cfg.seed)
    net = InversionNetwork(spec)
    try:
        history = train_from_manifests(net, train_manifests, val_manifests, train_cfg)
    except TrainingDiverged as exc:
        raise CliError(f"training diverged: {exc}") from exc
    except (FormatError, OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    out = Path(args.out)
    save_checkpoint(out, net, history, train_cfg)
    last = history.epochs[-1]
    print(
        json.dumps(
            {
                "checkpoint": str(out),
                "epochs": last.epoch,
                "best_epoch": history.best_epoch,
                "best_val_loss": last.best_val_loss,
                "stopped_early": history.stopped_early,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_infer(args) -> int:
    net = load_checkpoint(Path(args.checkpoint))
    try:
        written = export_reconstructions(net, args.manifest, args.output_dir)
    except (FormatError, OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    print(json.dumps({"written": len(written), "output_dir": args.output_dir}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artinet",
        description="Recurrent network mapping acoustic features to articulatory trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a YAML config")
    p.add_argument("--config", required=True, help="YAML training configuration")
    p.add_argument("--out", default="checkpoint.pt", help="checkpoint path to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="write reconstructions for a manifest")
    p.add_argument("--checkpoint", required=True, help="checkpoint from `artinet train`")
    p.add_argument("manifest", help="manifest of utterances with acoustic features")
    p.add_argument("output_dir", help="directory for the reconstructed feature files")
    p.set_defaults(func=_cmd_infer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
