import math

import numpy as np
import pytest
import torch

from vardim3d import (
    ConfigError,
    InvalidInputError,
    ScheduleSpec,
    ShapeError,
    ce_label_smooth,
    ce_label_smooth_batch,
    dice_coefficient,
    dice_loss,
    lesion_detection_step_schedule,
    lr_at,
    segmentation_loss,
)


def test_ce_uniform_logits_gives_log_k():
    val = float(ce_label_smooth(np.zeros(2), 0, 0.0, 2))
    assert abs(val - math.log(2.0)) < 1e-7
    val4 = float(ce_label_smooth(np.zeros(4), 2, 0.0, 4))
    assert abs(val4 - math.log(4.0)) < 1e-7


def test_ce_smoothed_worked_example():
    # logits (ln 3, 0) -> probs (3/4, 1/4); q = (0.95, 0.05)
    val = float(ce_label_smooth(np.array([math.log(3.0), 0.0]), 0, 0.1, 2))
    expected = -(0.95 * math.log(0.75) + 0.05 * math.log(0.25))
    assert abs(val - 0.342613) < 1e-4
    assert abs(val - expected) < 1e-9


def test_ce_validation():
    with pytest.raises(InvalidInputError):
        ce_label_smooth(np.zeros(2), 0, -0.1, 2)
    with pytest.raises(InvalidInputError):
        ce_label_smooth(np.zeros(2), 0, 1.0, 2)
    with pytest.raises(InvalidInputError):
        ce_label_smooth(np.zeros(1), 0, 0.0, 1)
    with pytest.raises(IndexError):
        ce_label_smooth(np.zeros(2), 2, 0.0, 2)
    with pytest.raises(ShapeError):
        ce_label_smooth(np.zeros(3), 0, 0.0, 2)


def test_ce_batch_matches_per_sample_mean():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((6, 4))
    targets = rng.integers(0, 4, size=6)
    eps = 0.2
    batch = float(ce_label_smooth_batch(logits, targets, eps))
    singles = np.mean([
        float(ce_label_smooth(logits[i], int(targets[i]), eps, 4)) for i in range(6)
    ])
    assert abs(batch - singles) < 1e-6


def test_dice_worked_examples():
    ones = np.ones(8)
    zeros = np.zeros(8)
    half = np.array([1.0, 1.0])
    mask_half = np.array([1.0, 0.0])
    assert abs(float(dice_loss(ones, ones, smooth=0.0)) - 0.0) < 1e-6
    assert abs(float(dice_loss(ones, zeros, smooth=0.0)) - 1.0) < 1e-6
    assert abs(float(dice_loss(half, mask_half, smooth=0.0)) - 1.0 / 3.0) < 1e-6


def test_dice_smooth_keeps_empty_empty_finite():
    zeros = np.zeros(8)
    assert abs(float(dice_loss(zeros, zeros, smooth=1.0))) < 1e-6


def test_dice_shape_check():
    with pytest.raises(ShapeError):
        dice_loss(np.zeros(4), np.zeros(5))


def test_segmentation_loss_weighted_sum():
    rng = np.random.default_rng(1)
    p = rng.uniform(0.05, 0.95, size=(2, 3, 3))
    m = (rng.uniform(size=(2, 3, 3)) > 0.5).astype(float)
    d = float(dice_loss(p, m))
    bce = float(-np.mean(m * np.log(p) + (1 - m) * np.log(1 - p)))
    total = float(segmentation_loss(p, m, dice_w=0.3, ce_w=1.0))
    assert abs(total - (0.3 * d + 1.0 * bce)) < 1e-5


def test_dice_coefficient_conventions():
    assert dice_coefficient(np.zeros(4), np.zeros(4)) == 1.0
    assert dice_coefficient(np.ones(4), np.ones(4)) == 1.0
    assert dice_coefficient(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0])) == 0.5


def test_cosine_endpoints_and_midpoint():
    s = ScheduleSpec("cosine", 0.1, 100)
    assert lr_at(s, 0) == 0.1
    assert abs(lr_at(s, 50) - 0.05) < 1e-12
    assert abs(lr_at(s, 100)) < 1e-12


def test_step_preset_milestone_values():
    s = lesion_detection_step_schedule(steps_per_epoch=1, base_lr=0.02)
    assert s.milestones == (16, 22)
    assert lr_at(s, 0) == 0.02
    assert abs(lr_at(s, 15) - 0.02) < 1e-12
    assert abs(lr_at(s, 16) - 0.002) < 1e-12
    assert abs(lr_at(s, 21) - 0.002) < 1e-12
    assert abs(lr_at(s, 22) - 0.0002) < 1e-12
    assert abs(lr_at(s, 24) - 0.0002) < 1e-12


def test_polynomial_power_09():
    s = ScheduleSpec("polynomial", 0.01, 200, power=0.9, min_lr=1e-5)
    assert lr_at(s, 0) == 0.01
    assert abs(lr_at(s, 200) - 1e-5) < 1e-15
    expected = (0.01 - 1e-5) * (1 - 0.5) ** 0.9 + 1e-5
    assert abs(lr_at(s, 100) - expected) < 1e-15
    # strictly decreasing
    lrs = [lr_at(s, t) for t in range(0, 201, 10)]
    assert all(a > b for a, b in zip(lrs, lrs[1:]))


def test_schedule_validation():
    with pytest.raises(ConfigError):
        ScheduleSpec("linear", 0.1, 10)
    with pytest.raises(ConfigError):
        ScheduleSpec("cosine", 0.0, 10)
    with pytest.raises(ConfigError):
        ScheduleSpec("cosine", 0.1, 0)
    with pytest.raises(ConfigError):
        ScheduleSpec("polynomial", 0.1, 10, min_lr=0.2)
    with pytest.raises(InvalidInputError):
        lr_at(ScheduleSpec("cosine", 0.1, 10), 11)
    with pytest.raises(InvalidInputError):
        lr_at(ScheduleSpec("cosine", 0.1, 10), -1)


def test_losses_accept_torch_tensors_with_grad():
    logits = torch.tensor([0.3, -0.2, 0.1], requires_grad=True, dtype=torch.float64)
    loss = ce_label_smooth(logits, 1, 0.1, 3)
    loss.backward()
    assert logits.grad is not None and torch.isfinite(logits.grad).all()
