from .config import BackboneConfig, Stride3, detection_config
from .counting import count_flops, count_params
from .model import (
    BackboneModel,
    ResNet,
    build_backbone,
    build_reference_2d,
    forward_features,
    init_parameters,
    load_state_tensors,
    state_tensors,
)
from .shapes import depth_sample_indices, depth_sample_out, infer_shapes

__all__ = [
    "BackboneConfig",
    "Stride3",
    "detection_config",
    "count_flops",
    "count_params",
    "BackboneModel",
    "ResNet",
    "build_backbone",
    "build_reference_2d",
    "forward_features",
    "init_parameters",
    "load_state_tensors",
    "state_tensors",
    "infer_shapes",
    "depth_sample_out",
    "depth_sample_indices",
]
