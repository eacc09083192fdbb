"""Classification and segmentation losses.

Both accept numpy arrays or torch tensors; gradients flow when given torch
tensors with ``requires_grad``.
"""

from __future__ import annotations

import numpy as np
import torch
from torch.nn import functional as F

from ..errors import InvalidInputError, ShapeError


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x))


def ce_label_smooth(logits, target: int, eps: float, num_classes: int):
    """Cross entropy against a label-smoothed target distribution.

    The target puts 1 - eps on the true class plus a uniform eps / K over all
    K classes; eps = 0 is plain cross entropy.
    """
    if num_classes < 2:
        raise InvalidInputError(f"num_classes must be >= 2, got {num_classes}")
    if not 0.0 <= eps < 1.0:
        raise InvalidInputError(f"eps must be in [0, 1), got {eps}")
    if not 0 <= target < num_classes:
        raise IndexError(f"target {target} outside [0, {num_classes})")
    logits = _as_tensor(logits)
    if logits.shape[-1] != num_classes:
        raise ShapeError(f"logits last dim {logits.shape[-1]} != num_classes {num_classes}")
    log_probs = F.log_softmax(logits, dim=-1)
    q = torch.full_like(log_probs, eps / num_classes)
    q[..., target] += 1.0 - eps
    return -(q * log_probs).sum(dim=-1)


def ce_label_smooth_batch(logits, targets, eps: float):
    """Batched mean of :func:`ce_label_smooth` for a (N, K) logit matrix."""
    logits = _as_tensor(logits)
    targets = _as_tensor(targets).long()
    k = logits.shape[-1]
    log_probs = F.log_softmax(logits, dim=-1)
    nll = -log_probs.gather(1, targets[:, None]).squeeze(1)
    smooth = -log_probs.mean(dim=-1)
    return ((1.0 - eps) * nll + eps * smooth).mean()


def dice_loss(pred_probs, mask, smooth: float = 1.0):
    """Soft Dice loss: 1 - (2*sum(p*m) + s) / (sum(p) + sum(m) + s)."""
    pred = _as_tensor(pred_probs)
    target = _as_tensor(mask)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {tuple(pred.shape)} != mask shape {tuple(target.shape)}")
    pred = pred.double() if not pred.is_floating_point() else pred
    target = target.to(pred.dtype)
    inter = (pred * target).sum()
    return 1.0 - (2.0 * inter + smooth) / (pred.sum() + target.sum() + smooth)


def segmentation_loss(pred_probs, mask, dice_w: float, ce_w: float, smooth: float = 1.0):
    """Weighted sum dice_w * dice + ce_w * binary cross entropy."""
    pred = _as_tensor(pred_probs)
    target = _as_tensor(mask).to(pred.dtype if pred.is_floating_point() else torch.float64)
    d = dice_loss(pred, target, smooth=smooth)
    eps = 1e-7
    p = pred.clamp(eps, 1.0 - eps)
    bce = -(target * p.log() + (1.0 - target) * (1.0 - p).log()).mean()
    return dice_w * d + ce_w * bce


def dice_coefficient(pred_binary, mask) -> float:
    """Hard Dice of two binary masks; empty vs empty is defined as 1.0."""
    p = np.asarray(pred_binary).astype(bool)
    m = np.asarray(mask).astype(bool)
    if p.shape != m.shape:
        raise ShapeError(f"prediction shape {p.shape} != mask shape {m.shape}")
    denom = p.sum() + m.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * np.logical_and(p, m).sum() / denom)
