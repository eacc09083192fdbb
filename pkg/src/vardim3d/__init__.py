"""Pseudo-3D pre-training for 3D networks.

The package reformulates 2D RGB images as single-channel pseudo-3D volumes,
trains depth-preserving 3D ResNet backbones on them, and transplants the
resulting weights into vanilla 3D networks.  Baseline 2D-to-3D kernel
conversions (inflation, zero-pad extension, view-planar splitting) are
provided for comparison.
"""

from .adapt import (
    ClassificationHead,
    GroupTransformModule,
    PyramidFeatures,
    build_gtm_bank,
    classify_head,
    gtm_bank_checkpoint_tensors,
    gtm_fuse,
    pyramid_adapt,
)
from .backbone import (
    BackboneConfig,
    BackboneModel,
    ResNet,
    Stride3,
    build_backbone,
    build_reference_2d,
    count_flops,
    count_params,
    depth_sample_indices,
    depth_sample_out,
    detection_config,
    forward_features,
    infer_shapes,
    init_parameters,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .convert import (
    AcsConvParams,
    ConversionReport,
    ConversionRule,
    acs_conv_forward,
    acs_partition,
    acs_split,
    apply_rule,
    diff_report,
    extend_zeropad,
    inflate_i3d,
    target_manifest,
    transplant_svd,
)
from .data import (
    LabeledSample,
    SynthTaskSpec,
    augment,
    dataset_from_checkpoint,
    dataset_to_checkpoint,
    load_image_folder,
    materialize_image_folder,
    synth2d_corpus,
    synth3d_task,
)
from .errors import (
    ConfigError,
    DataError,
    IncompatibleArchitectureError,
    IntegrityError,
    InvalidInputError,
    ShapeError,
    Vardim3dError,
)
from .train import (
    ScheduleSpec,
    SGDSpec,
    TrainConfig,
    TrainLog,
    apply_freeze,
    ce_label_smooth,
    ce_label_smooth_batch,
    classification_metrics,
    dice_coefficient,
    dice_loss,
    evaluate_classification,
    evaluate_segmentation,
    finetune,
    largest_connected_component,
    lesion_detection_step_schedule,
    lr_at,
    pretrain,
    segmentation_loss,
    sliding_window_infer,
    window_grid,
    window_starts,
)
from .vardim import PlanarImage, Volume, from_pseudo3d, to_pseudo3d, window_intensity

__version__ = "0.1.0"

__all__ = [
    "PlanarImage", "Volume", "to_pseudo3d", "from_pseudo3d", "window_intensity",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
    "BackboneConfig", "Stride3", "detection_config", "BackboneModel", "ResNet",
    "build_backbone", "build_reference_2d", "forward_features", "init_parameters",
    "infer_shapes", "depth_sample_out", "depth_sample_indices",
    "count_params", "count_flops",
    "ClassificationHead", "classify_head", "GroupTransformModule", "gtm_fuse",
    "PyramidFeatures", "build_gtm_bank", "pyramid_adapt", "gtm_bank_checkpoint_tensors",
    "ConversionRule", "ConversionReport", "apply_rule", "diff_report",
    "transplant_svd", "inflate_i3d", "extend_zeropad", "acs_split",
    "acs_partition", "AcsConvParams", "acs_conv_forward", "target_manifest",
    "ScheduleSpec", "lr_at", "lesion_detection_step_schedule",
    "SGDSpec", "TrainConfig", "TrainLog", "apply_freeze", "pretrain", "finetune",
    "ce_label_smooth", "ce_label_smooth_batch", "dice_loss", "dice_coefficient",
    "segmentation_loss",
    "classification_metrics", "evaluate_classification", "evaluate_segmentation",
    "largest_connected_component",
    "sliding_window_infer", "window_grid", "window_starts",
    "LabeledSample", "SynthTaskSpec", "synth3d_task", "synth2d_corpus",
    "load_image_folder", "materialize_image_folder",
    "dataset_to_checkpoint", "dataset_from_checkpoint", "augment",
    "Vardim3dError", "InvalidInputError", "ConfigError", "ShapeError",
    "IncompatibleArchitectureError", "IntegrityError", "DataError",
    "__version__",
]
