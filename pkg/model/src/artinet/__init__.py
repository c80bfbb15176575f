"""Acoustic-to-articulatory inversion network.

Maps stacked acoustic feature frames to articulator trajectories with two
dense layers, a stacked bidirectional LSTM, a linear readout, and a fixed
low-pass convolution, trained with a combined RMSE minus scaled Pearson
correlation loss.  All file exchange uses the AFV1 feature container and
the JSON-lines corpus manifest, so the trained model plugs directly into
the `artieval` scoring commands.
"""

from .filtering import design_lowpass
from .formats import (
    FormatError,
    ManifestEntry,
    read_afv1,
    read_manifest,
    write_afv1,
    write_manifest,
)
from .loss import rmse_aggregate, training_loss
from .network import InversionNetwork, NetworkSpec
from .train import (
    History,
    TrainConfig,
    TrainingDiverged,
    evaluate_loss,
    train,
    train_from_manifests,
)
from .data import Utterance, load_training_set, load_utterance
from .export import export_reconstructions

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "History",
    "InversionNetwork",
    "ManifestEntry",
    "NetworkSpec",
    "TrainConfig",
    "TrainingDiverged",
    "Utterance",
    "design_lowpass",
    "evaluate_loss",
    "export_reconstructions",
    "load_training_set",
    "load_utterance",
    "read_afv1",
    "read_manifest",
    "rmse_aggregate",
    "train",
    "train_from_manifests",
    "training_loss",
    "write_afv1",
    "write_manifest",
    "__version__",
]
