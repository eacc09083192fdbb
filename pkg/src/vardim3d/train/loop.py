"""Pre-training and fine-tuning loops.

Both loops are driven by one integer seed that governs initialization
consumption order, shuffling and augmentation; with a fixed thread count
they produce bitwise-identical checkpoints across runs on one platform.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from ..backbone.model import BackboneModel
from ..checkpoint import Checkpoint
from ..convert import transplant_svd
from ..errors import ConfigError, DataError
from ..vardim import PlanarImage, to_pseudo3d
from .losses import ce_label_smooth_batch
from .metrics import evaluate_classification
from .schedules import ScheduleSpec, lr_at


@dataclass(frozen=True)
class SGDSpec:
    momentum: float = 0.9
    weight_decay: float = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    schedule: ScheduleSpec
    epochs: int
    batch_size: int = 16
    optimizer: SGDSpec = SGDSpec()
    label_smoothing_eps: float = 0.0
    loss_weights: tuple = (0.5, 1.0)     # (dice_w, ce_w) for segmentation presets
    seed: int = 0
    freeze: str = "none"                 # "none" | "fix_res1"
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.label_smoothing_eps < 1.0:
            raise ConfigError(f"label_smoothing_eps must be in [0, 1), got {self.label_smoothing_eps}")
        if any(w < 0 for w in self.loss_weights):
            raise ConfigError(f"loss weights must be >= 0, got {self.loss_weights}")
        if self.freeze not in ("none", "fix_res1"):
            raise ConfigError(f"unknown freeze mode {self.freeze!r}")

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True, default=str).encode()
        ).hexdigest()[:16]


@dataclass
class TrainLog:
    """Step and epoch records of one training run."""

    steps: list = field(default_factory=list)    # dicts: step, epoch, lr, loss
    epochs: list = field(default_factory=list)   # dicts: epoch, lr, loss, accuracy

    def final_loss(self):
        return self.epochs[-1]["loss"] if self.epochs else None


FROZEN_PREFIXES_FIX_RES1 = ("stem.", "layer1.")


def apply_freeze(net, mode: str) -> list:
    """Disable gradients for frozen tensors; returns the frozen names."""
    frozen = []
    for name, p in net.named_parameters():
        if mode == "fix_res1" and name.startswith(FROZEN_PREFIXES_FIX_RES1):
            p.requires_grad_(False)
            frozen.append(name)
        else:
            p.requires_grad_(True)
    return frozen


def _train_classifier(net, inputs, labels, config: TrainConfig) -> TrainLog:
    """Plain SGD classification loop over in-memory (N, C, ...) arrays."""
    torch.set_num_threads(config.threads)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    n = len(inputs)
    params = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.SGD(
        params,
        lr=config.schedule.base_lr,
        momentum=config.optimizer.momentum,
        weight_decay=config.optimizer.weight_decay,
    )
    log = TrainLog()
    step = 0
    # BN stays in eval mode while its stage is frozen only if the whole net
    # is frozen; freezing here is parameter-level, matching the freeze
    # contract (tensors bitwise unchanged).
    frozen_bn_prefixes = FROZEN_PREFIXES_FIX_RES1 if config.freeze == "fix_res1" else ()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        net.train()
        for mod_name, mod in net.named_modules():
            if mod_name.startswith(tuple(frozen_bn_prefixes)) and hasattr(mod, "running_mean"):
                mod.eval()  # keep frozen running stats bitwise unchanged
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x = torch.from_numpy(np.stack([inputs[i] for i in idx]).astype(np.float32))
            y = torch.as_tensor([labels[i] for i in idx], dtype=torch.long)
            lr = lr_at(config.schedule, min(step, config.schedule.total_steps))
            for group in opt.param_groups:
                group["lr"] = lr
            opt.zero_grad()
            logits = net(x)
            loss = ce_label_smooth_batch(logits, y, config.label_smoothing_eps)
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
            epoch_correct += int((logits.argmax(dim=1) == y).sum())
            log.steps.append({"step": step, "epoch": epoch, "lr": lr,
                              "loss": float(loss.detach())})
            step += 1
        log.epochs.append({
            "epoch": epoch,
            "lr": log.steps[-1]["lr"],
            "loss": epoch_loss / n,
            "accuracy": epoch_correct / n,
        })
    net.eval()
    return log


def pretrain(model: BackboneModel, dataset2d, config: TrainConfig):
    """Supervised pre-training on 2D labeled images reformulated as pseudo-3D.

    ``dataset2d`` yields (PlanarImage, class index) pairs.  Returns the
    trained checkpoint (fingerprint carries the config digest) and the log.
    """
    if not model.config.depth_preserve:
        raise ConfigError("pre-training expects a depth-preserving backbone")
    if model.net.adapt is None:
        raise ConfigError("pre-training needs a backbone with a classification head")
    inputs = []
    labels = []
    for image, label in dataset2d:
        if not isinstance(image, PlanarImage):
            image = PlanarImage(np.asarray(image))
        if image.data.shape[0] != 3:
            raise DataError(f"pre-training sample must have 3 channels, got {image.data.shape[0]}")
        inputs.append(to_pseudo3d(image).data)
        labels.append(int(label))
    apply_freeze(model.net, "none")
    log = _train_classifier(model.net, inputs, labels, config)
    ckpt = model.to_checkpoint()
    ckpt.fingerprint["train_config"] = config.digest()
    return ckpt, log


def finetune(model: BackboneModel, dataset3d, config: TrainConfig,
             init: Checkpoint | None = None, eval_dataset=None):
    """Fine-tune a 3D classifier from a transplanted checkpoint or scratch.

    ``dataset3d`` yields (Volume, class index) pairs.  ``init`` is matched
    through the transplantation route, so it may come from a backbone with a
    different stride/pooling configuration.  With ``freeze="fix_res1"`` the
    stem and first-stage tensors are left bitwise unchanged.
    Returns (model, metrics); metrics include the training log.
    """
    if init is not None:
        ckpt, report = transplant_svd(init, model.config)
        model.load_checkpoint(ckpt, strict=False)
    apply_freeze(model.net, config.freeze)
    inputs = []
    labels = []
    for vol, label in dataset3d:
        inputs.append(vol.data if hasattr(vol, "data") else np.asarray(vol))
        labels.append(int(label))
    log = _train_classifier(model.net, inputs, labels, config)
    held_out = eval_dataset if eval_dataset is not None else dataset3d
    metrics = evaluate_classification(model, held_out)
    metrics["train_log"] = log
    return model, metrics
