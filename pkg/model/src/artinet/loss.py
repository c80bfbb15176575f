"""The training objective: RMSE minus a scaled Pearson correlation.

Mirrors the evaluation toolkit's combined loss channel for channel: the
RMSE term averages per-channel root-mean-square errors over every scored
channel except the dimensionless TTC/TBC cosines; the correlation term
averages the per-channel Pearson coefficients (clamped to [-1, 1], with
zero-variance channels contributing a constant 0) over every scored
channel; the loss is rmse - beta * pcc.  Channels whose availability
flag is False enter neither term and therefore receive exactly zero
gradient.
"""

from __future__ import annotations

import torch

TRACT_COSINE_CHANNELS = ("TTC", "TBC")


def training_loss(
    pred: torch.Tensor,
    ref: torch.Tensor,
    channel_names,
    available=None,
    beta: float = 1000.0,
) -> torch.Tensor:
    """Combined loss of one utterance: (T, C) prediction against reference.

    channel_names gives the C column names; available is an optional
    per-channel truth sequence (None scores everything).  Differentiable
    with respect to pred; the result is a scalar tensor on pred's graph
    even when every channel is masked (in which case it is exactly zero
    with zero gradients).
    """
    names = tuple(channel_names)
    if pred.dim() != 2 or ref.dim() != 2:
        raise ValueError("pred and ref must be 2-D (frames x channels)")
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs ref {tuple(ref.shape)}")
    if len(names) != pred.shape[1]:
        raise ValueError(f"{len(names)} channel names for {pred.shape[1]} channels")
    if available is not None:
        available = tuple(bool(a) for a in available)
        if len(available) != len(names):
            raise ValueError(
                f"availability mask has {len(available)} entries for {len(names)} channels"
            )

    rmse_terms = []
    pcc_terms = []
    for c, name in enumerate(names):
        if available is not None and not available[c]:
            continue
        p = pred[:, c]
        r = ref[:, c]
        if name not in TRACT_COSINE_CHANNELS:
            diff = p - r
            rmse_terms.append(torch.sqrt(torch.mean(diff * diff)))
        pc = p - p.mean()
        rc = r - r.mean()
        sp = torch.sqrt(torch.mean(pc * pc))
        sr = torch.sqrt(torch.mean(rc * rc))
        if sp.item() == 0.0 or sr.item() == 0.0:
            # correlation undefined; scored as a constant 0, no gradient
            pcc_terms.append(torch.zeros((), dtype=pred.dtype, device=pred.device))
        else:
            pcc_terms.append(torch.clamp(torch.mean(pc * rc) / (sp * sr), -1.0, 1.0))

    zero = (pred.sum() * 0.0) if pred.requires_grad else torch.zeros(
        (), dtype=pred.dtype, device=pred.device
    )
    rmse_agg = torch.stack(rmse_terms).mean() if rmse_terms else zero
    pcc_agg = torch.stack(pcc_terms).mean() if pcc_terms else zero
    return rmse_agg - beta * pcc_agg


def rmse_aggregate(pred: torch.Tensor, ref: torch.Tensor, channel_names, available=None) -> float:
    """The RMSE half of the loss alone, as a float (TTC/TBC excluded)."""
    with torch.no_grad():
        return float(training_loss(pred, ref, channel_names, available, beta=0.0))
