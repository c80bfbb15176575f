"""The inversion network: dense feature extractor, stacked bidirectional
LSTM, linear readout, and a fixed low-pass convolution on the output.

The smoothing layer's weights come from the windowed-sinc design and are
registered as a buffer, never as a parameter: optimizers cannot touch
them, while gradients still flow through the convolution to every
trainable layer.  Output trajectories always have exactly as many frames
as the input.

Weight initialization is torch's default uniform fan-in scaling; seed
the global generator (torch.manual_seed) before construction to make a
network reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence, pad_sequence

from .filtering import design_lowpass


@dataclass(frozen=True)
class NetworkSpec:
    """Shape of the network: layer widths, output channels, smoothing."""

    channels: tuple[str, ...]
    input_dim: int = 429
    dense_units: int = 300
    recurrent_units: int = 300
    recurrent_layers: int = 2
    smoothing_taps: int = 50
    smoothing_cutoff_hz: float = 10.0
    frame_rate_hz: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if not self.channels:
            raise ValueError("need at least one output channel")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate output channel names")
        for name, value in (
            ("input_dim", self.input_dim),
            ("dense_units", self.dense_units),
            ("recurrent_units", self.recurrent_units),
            ("recurrent_layers", self.recurrent_layers),
        ):
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**{**d, "channels": tuple(d["channels"])})


class InversionNetwork(nn.Module):
    """Acoustic frames in, smoothed articulatory trajectories out."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        self.dense1 = nn.Linear(spec.input_dim, spec.dense_units)
        self.dense2 = nn.Linear(spec.dense_units, spec.dense_units)
        self.lstm = nn.LSTM(
            spec.dense_units,
            spec.recurrent_units,
            num_layers=spec.recurrent_layers,
            bidirectional=True,
            batch_first=True,
        )
        self.readout = nn.Linear(2 * spec.recurrent_units, len(spec.channels))
        kernel = torch.from_numpy(
            design_lowpass(spec.smoothing_taps, spec.smoothing_cutoff_hz, spec.frame_rate_hz)
        )
        # a buffer, not a parameter: excluded from parameters() and from
        # every optimizer, still saved in checkpoints
        self.register_buffer("smoothing_kernel", kernel)

    # ----------------------------------------------------------------- forward

    def _check_input(self, x: torch.Tensor) -> None:
        if x.shape[-1] != self.spec.input_dim:
            raise ValueError(
                f"input has {x.shape[-1]} channels, network expects {self.spec.input_dim}"
            )
        if x.shape[-2] < 1:
            raise ValueError("input must contain at least one frame")

    def _features(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.dense2(F.relu(self.dense1(x))))

    def _smooth(self, y: torch.Tensor) -> torch.Tensor:
        """Fixed low-pass convolution along time, zero padding, same length."""
        squeeze = y.dim() == 2
        if squeeze:
            y = y.unsqueeze(0)
        b, t, c = y.shape
        n = self.smoothing_kernel.shape[0]
        flat = y.transpose(1, 2).reshape(b * c, 1, t)
        left = (n - 1) // 2
        padded = F.pad(flat, (left, n - 1 - left))
        weight = self.smoothing_kernel.to(dtype=y.dtype).view(1, 1, n)
        out = F.conv1d(padded, weight).reshape(b, c, t).transpose(1, 2)
        return out.squeeze(0) if squeeze else out

    def pre_smoothing(self, x: torch.Tensor) -> torch.Tensor:
        """Readout activations before the fixed low-pass layer."""
        self._check_input(x)
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        out, _ = self.lstm(self._features(x))
        y = self.readout(out)
        return y.squeeze(0) if squeeze else y

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(T, input_dim) -> (T, n_channels), or batched with a leading dim."""
        return self._smooth(self.pre_smoothing(x))

    def forward_sequences(self, seqs: list[torch.Tensor]) -> list[torch.Tensor]:
        """Forward a ragged batch; returns one (T_i, n_channels) per input.

        The recurrent pass is batched over zero-padded sequences but packed
        by true length, and the readout and smoothing run on each sequence's
        valid region only, so padding never influences any prediction.
        """
        for s in seqs:
            self._check_input(s)
        lengths = [s.shape[0] for s in seqs]
        padded = pad_sequence(seqs, batch_first=True)
        packed = pack_padded_sequence(
            self._features(padded), lengths, batch_first=True, enforce_sorted=False
        )
        out, _ = self.lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True)
        return [self._smooth(self.readout(out[i, :t])) for i, t in enumerate(lengths)]
