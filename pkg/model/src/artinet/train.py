"""Training loop: Adam, mini-batches over utterances, early stopping on
validation loss, best-weights restore.

Each optimizer step averages the per-utterance combined loss over one
batch; padded frames from ragged batching never reach the loss.  After
every epoch the validation loss is computed, and training stops once it
has failed to improve for more than `patience` consecutive epochs
(patience 0 stops at the first non-improving epoch).  Whatever stops
training, the weights that achieved the best validation loss are
restored before returning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .data import Utterance, load_training_set
from .loss import training_loss
from .network import InversionNetwork


class TrainingDiverged(RuntimeError):
    """The loss became NaN or infinite; carries where it happened."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    learning_rate: float = 0.001
    batch_size: int = 10
    patience: int = 5
    beta: float = 1000.0
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "beta": self.beta,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
        }


@dataclass
class EpochStats:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float
    best_val_loss: float  # best seen up to and including this epoch

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_val_loss": self.best_val_loss,
        }


@dataclass
class History:
    """Per-epoch losses plus how and where training ended."""

    seed: int
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "epochs": [e.to_dict() for e in self.epochs],
        }


def _utterance_losses(net: InversionNetwork, batch: list[Utterance], beta: float):
    preds = net.forward_sequences([u.acoustic for u in batch])
    return [
        training_loss(p, u.reference, net.spec.channels, u.available, beta)
        for p, u in zip(preds, batch)
    ]


def evaluate_loss(net: InversionNetwork, utterances: list[Utterance], beta: float,
                  batch_size: int = 10) -> float:
    """Mean per-utterance combined loss, without gradients."""
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(utterances), batch_size):
            batch = utterances[start:start + batch_size]
            total += sum(l.item() for l in _utterance_losses(net, batch, beta))
    return total / len(utterances)


def _snapshot(net: InversionNetwork) -> dict:
    return {k: v.detach().clone() for k, v in net.state_dict().items()}


def train(
    net: InversionNetwork,
    train_set: list[Utterance],
    val_set: list[Utterance],
    cfg: TrainConfig = TrainConfig(),
    on_epoch=None,
) -> History:
    """Optimize net in place; returns the training history.

    on_epoch, when given, is called after each epoch with the EpochStats
    and the live network; returning False ends training (best weights are
    still restored).  Raises TrainingDiverged the moment any train or
    validation loss is NaN or infinite.
    """
    if not train_set:
        raise ValueError("training set is empty")
    if not val_set:
        raise ValueError("validation set is empty")

    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    shuffler = torch.Generator().manual_seed(cfg.seed)
    history = History(seed=cfg.seed)
    best_val = math.inf
    best_state = _snapshot(net)
    bad_epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        net.train()
        order = torch.randperm(len(train_set), generator=shuffler).tolist()
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            optimizer.zero_grad()
            losses = _utterance_losses(net, batch, cfg.beta)
            loss = torch.stack(losses).mean()
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"training loss is {value} at epoch {epoch}, "
                    f"batch starting at utterance {start} "
                    f"(ids: {[u.id for u in batch]})"
                )
            loss.backward()
            optimizer.step()
            loss_sum += sum(l.item() for l in losses)
        train_loss = loss_sum / len(train_set)

        net.eval()
        val_loss = evaluate_loss(net, val_set, cfg.beta, cfg.batch_size)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"validation loss is {val_loss} at epoch {epoch}")

        if val_loss < best_val:
            best_val = val_loss
            best_state = _snapshot(net)
            history.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1

        stats = EpochStats(epoch, train_loss, val_loss, best_val)
        history.epochs.append(stats)

        if on_epoch is not None and on_epoch(stats, net) is False:
            break
        if bad_epochs > cfg.patience:
            history.stopped_early = True
            break

    net.load_state_dict(best_state)
    net.eval()
    return history


def train_from_manifests(
    net: InversionNetwork,
    train_manifests,
    val_manifests,
    cfg: TrainConfig = TrainConfig(),
    on_epoch=None,
) -> History:
    """Load both splits from manifest files and train.

    The splits must be disjoint by utterance id; training on what is
    being validated would silence the early stopping.
    """
    channels = net.spec.channels
    dim = net.spec.input_dim
    train_set: list[Utterance] = []
    for m in train_manifests:
        train_set.extend(load_training_set(m, channels, dim))
    val_set: list[Utterance] = []
    for m in val_manifests:
        val_set.extend(load_training_set(m, channels, dim))
    overlap = {u.id for u in train_set} & {u.id for u in val_set}
    if overlap:
        raise ValueError(
            f"train and validation manifests overlap on {sorted(overlap)[:5]}"
        )
    return train(net, train_set, val_set, cfg, on_epoch)
