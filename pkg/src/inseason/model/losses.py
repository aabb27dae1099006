"""Training objectives: masked-reconstruction MSE and the focal loss."""

from __future__ import annotations

import numpy as np

from ..errors import ZeroMaskLoss
from . import autodiff as ad
from .autodiff import Tensor

PT_FLOOR = 1e-12


def mae_step_selection(valid: np.ndarray, masked: np.ndarray, steps_per_token: int) -> np.ndarray:
    """Expand token-level masked-and-valid flags to step level: (B, S) -> (B, L)."""
    sel = masked & valid
    return np.repeat(sel, steps_per_token, axis=1)


def mae_loss(
    reconstruction: dict[str, Tensor],
    target: dict[str, np.ndarray],
    step_selection: dict[str, np.ndarray],
    step_valid: dict[str, np.ndarray],
) -> Tensor:
    """MSE over steps of masked-and-valid tokens, across all satellites.

    Unmasked and padded steps contribute nothing, so their gradients are
    exactly zero.
    """
    total = None
    count = 0
    for sat, recon in reconstruction.items():
        sel = (step_selection[sat] & step_valid[sat])[:, :, None].astype(np.float64)
        count += int(sel.sum()) * recon.data.shape[2]
        diff = ad.add(recon, -Tensor(target[sat]))
        contrib = ad.tsum(ad.mul(ad.mul(diff, diff), sel))
        total = contrib if total is None else ad.add(total, contrib)
    if count == 0:
        raise ZeroMaskLoss("no masked valid steps; training config must guarantee >= 1 mask")
    return ad.mul(total, 1.0 / count)


def focal_loss(probs: Tensor, true_class: np.ndarray, gamma: float) -> Tensor:
    """-(1 - p_t)^gamma * log(p_t), averaged over the batch.

    p_t is clamped at 1e-12 before the log. gamma = 0 reduces exactly to
    cross-entropy.
    """
    b, c = probs.data.shape
    onehot = np.zeros((b, c))
    onehot[np.arange(b), np.asarray(true_class, dtype=np.int64)] = 1.0
    p_t = ad.tsum(ad.mul(probs, Tensor(onehot)), axis=1)
    p_t = ad.clamp_min(p_t, PT_FLOOR)
    nll = ad.mul(ad.log(p_t), -1.0)
    if gamma == 0.0:
        return ad.tmean(nll)
    modulator = ad.power(ad.clamp_min(ad.add(ad.mul(p_t, -1.0), 1.0), PT_FLOOR), gamma)
    return ad.tmean(ad.mul(modulator, nll))
