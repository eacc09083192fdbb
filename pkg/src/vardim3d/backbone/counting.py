"""Parameter and multiply-accumulate accounting.

Convention: one MAC = one FLOP, and only convolution and linear layers are
counted (norms, activations and pooling are ignored).  Counts are measured
on the actual module graph via forward hooks, so they are exact for
whatever architecture variant was built.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import ShapeError
from .model import BackboneModel


def count_params(model) -> int:
    """Number of learnable scalars (convs, norms, and any attached head)."""
    net = model.net if isinstance(model, BackboneModel) else model
    return sum(p.numel() for p in net.parameters())


def count_flops(model, input_shape) -> int:
    """MACs of one forward pass on a (C, D, H, W) (or (C, H, W) for 2D) input."""
    net = model.net if isinstance(model, BackboneModel) else model
    total = 0
    hooks = []

    def conv_hook(module, inputs, output):
        nonlocal total
        out_elems = output.numel()
        kernel = int(np.prod(module.kernel_size))
        total += out_elems * (module.in_channels // module.groups) * kernel

    def linear_hook(module, inputs, output):
        nonlocal total
        n = output.numel() // output.shape[-1]
        total += n * module.in_features * module.out_features

    for m in net.modules():
        if isinstance(m, (nn.Conv2d, nn.Conv3d)):
            hooks.append(m.register_forward_hook(conv_hook))
        elif isinstance(m, nn.Linear):
            hooks.append(m.register_forward_hook(linear_hook))

    if len(input_shape) not in (3, 4):
        raise ShapeError(f"input shape must be (C, D, H, W) or (C, H, W), got {input_shape}")
    x = torch.zeros(1, *input_shape)
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            net(x)
    finally:
        for h in hooks:
            h.remove()
        if was_training:
            net.train()
    return total
