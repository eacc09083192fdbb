import numpy as np
import pytest
import torch

from vardim3d import (
    ClassificationHead,
    ConfigError,
    GroupTransformModule,
    ShapeError,
    Volume,
    build_gtm_bank,
    classify_head,
    gtm_bank_checkpoint_tensors,
    gtm_fuse,
    pyramid_adapt,
)


def test_classification_head_pools_then_projects():
    head = ClassificationHead(4, 3, dim=3, seed=0)
    x = np.random.default_rng(0).standard_normal((4, 2, 5, 5)).astype(np.float32)
    logits = classify_head(Volume(x), head)
    pooled = x.mean(axis=(1, 2, 3))
    expected = head.fc.weight.detach().numpy() @ pooled + head.fc.bias.detach().numpy()
    np.testing.assert_allclose(logits, expected, atol=1e-5)


def test_classification_head_rejects_single_class():
    with pytest.raises(ConfigError):
        ClassificationHead(8, 1)


def test_gtm_matches_numpy_oracle():
    rng = np.random.default_rng(3)
    c, d, h, w = 6, 5, 4, 4
    weight = rng.standard_normal((c, d)).astype(np.float32)
    bias = rng.standard_normal(c).astype(np.float32)
    x = rng.standard_normal((c, d, h, w)).astype(np.float32)
    fused = gtm_fuse(Volume(x), (weight, bias))
    oracle = np.einsum("cdhw,cd->chw", x, weight) + bias[:, None, None]
    np.testing.assert_allclose(fused, oracle, atol=1e-5)
    assert fused.shape == (c, h, w)


def test_gtm_initial_weight_selects_center_slice():
    gtm = GroupTransformModule(4, 5, noise=0.0)
    x = np.random.default_rng(1).standard_normal((4, 5, 3, 3)).astype(np.float32)
    fused = gtm_fuse(Volume(x), gtm)
    np.testing.assert_allclose(fused, x[:, 2], atol=1e-6)


def test_gtm_shape_check():
    gtm = GroupTransformModule(4, 5)
    with pytest.raises(ShapeError):
        gtm(torch.zeros(1, 4, 3, 2, 2))


def test_pyramid_adapt_levels():
    rng = np.random.default_rng(2)
    channels = (64, 64, 128)
    depths = (9, 5, 3)
    feats = [
        Volume(rng.standard_normal((c, d, 8, 8)).astype(np.float32))
        for c, d in zip(channels, depths)
    ]
    bank = build_gtm_bank(channels, depths, seed=0)
    pyr = pyramid_adapt(feats, bank)
    assert pyr.per_level_depth == [9, 5, 3]
    assert [lv.shape for lv in pyr.levels] == [(64, 8, 8), (64, 8, 8), (128, 8, 8)]


def test_pyramid_adapt_length_mismatch():
    bank = build_gtm_bank((4,), (3,))
    with pytest.raises(ConfigError):
        pyramid_adapt([], bank)


def test_gtm_bank_checkpoint_names():
    bank = build_gtm_bank((4, 8), (3, 5), seed=0)
    tensors = gtm_bank_checkpoint_tensors(bank)
    assert set(tensors) == {
        "adapt.gtm.level0.weight", "adapt.gtm.level0.bias",
        "adapt.gtm.level1.weight", "adapt.gtm.level1.bias",
    }
    assert tensors["adapt.gtm.level1.weight"].shape == (8, 5)
