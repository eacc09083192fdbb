"""Evaluation metrics for classification and segmentation models."""

from __future__ import annotations

import numpy as np
import torch
from scipy import ndimage
from sklearn import metrics as skm

from ..errors import InvalidInputError, ShapeError
from .losses import dice_coefficient


def classification_metrics(scores, labels, positive_scores=None) -> dict:
    """Metric bundle for per-sample class scores.

    ``scores``: (N, K) class scores; ``labels``: (N,) true class indices.
    For binary problems (K == 2) the threshold-based metrics use argmax
    predictions and AUC uses the positive-class score (trapezoidal ROC with
    rank-averaged ties).  Multiclass inputs report top-k accuracy only.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise ShapeError(f"scores {scores.shape} incompatible with labels {labels.shape}")
    n, k = scores.shape
    order = np.argsort(-scores, axis=1)
    top1 = float(np.mean(order[:, 0] == labels))
    topk = min(5, k)
    top5 = float(np.mean([labels[i] in order[i, :topk] for i in range(n)]))
    out = {"top1": top1, "top5": top5, "accuracy": top1}
    if k != 2:
        return out
    if len(np.unique(labels)) < 2:
        raise InvalidInputError("AUC is undefined on a single-class dataset")
    pred = order[:, 0]
    pos = positive_scores if positive_scores is not None else scores[:, 1]
    tp = int(np.sum((pred == 1) & (labels == 1)))
    tn = int(np.sum((pred == 0) & (labels == 0)))
    fp = int(np.sum((pred == 1) & (labels == 0)))
    fn = int(np.sum((pred == 0) & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    out.update(
        auc=float(skm.roc_auc_score(labels, pos)),
        precision=precision,
        recall=recall,
        specificity=tn / (tn + fp) if tn + fp else 0.0,
        f1=2 * precision * recall / (precision + recall) if precision + recall else 0.0,
    )
    return out


def evaluate_classification(model, dataset, batch_size: int = 16) -> dict:
    """Run a classifier over (input, label) pairs and compute metrics.

    ``model`` is a callable mapping a (N, C, ...) float tensor to logits, or
    a BackboneModel with an attached head.
    """
    net = getattr(model, "net", model)
    scores = []
    labels = []
    batch = []
    def flush():
        if not batch:
            return
        x = torch.from_numpy(np.stack([b for b, _ in batch]).astype(np.float32))
        with torch.no_grad():
            logits = net(x)
        scores.append(logits.numpy())
        labels.extend(l for _, l in batch)
        batch.clear()
    for sample, label in dataset:
        arr = sample.data if hasattr(sample, "data") else np.asarray(sample)
        batch.append((arr, int(label)))
        if len(batch) == batch_size:
            flush()
    flush()
    return classification_metrics(np.concatenate(scores), np.array(labels))


def largest_connected_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest foreground component of a binary mask."""
    mask = np.asarray(mask).astype(bool)
    labeled, n = ndimage.label(mask)
    if n <= 1:
        return mask
    sizes = ndimage.sum(mask, labeled, range(1, n + 1))
    return labeled == (1 + int(np.argmax(sizes)))


def evaluate_segmentation(model, dataset, threshold: float = 0.5,
                          keep_largest_cc: bool = False) -> dict:
    """Mean and population standard deviation of per-case Dice.

    ``model`` maps a (C, D, H, W) array to per-voxel foreground
    probabilities of the same spatial shape; predictions are thresholded at
    0.5.  Empty prediction vs empty ground truth counts as Dice 1.0.
    """
    dices = []
    for sample, mask in dataset:
        arr = sample.data if hasattr(sample, "data") else np.asarray(sample)
        gt = mask.data if hasattr(mask, "data") else np.asarray(mask)
        pred = model(arr)
        pred = pred.data if hasattr(pred, "data") else np.asarray(pred)
        binary = np.squeeze(pred) >= threshold
        if keep_largest_cc:
            binary = largest_connected_component(binary)
        dices.append(dice_coefficient(binary, np.squeeze(gt) > 0.5))
    dices = np.asarray(dices)
    return {
        "dice_per_case_mean": float(dices.mean()),
        "dice_per_case_sd": float(dices.std()),  # population (divide-by-n) convention
        "dice_per_case": [float(d) for d in dices],
    }
