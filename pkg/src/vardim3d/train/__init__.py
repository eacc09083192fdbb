from .infer import sliding_window_infer, window_grid, window_starts
from .loop import SGDSpec, TrainConfig, TrainLog, apply_freeze, finetune, pretrain
from .losses import (
    ce_label_smooth,
    ce_label_smooth_batch,
    dice_coefficient,
    dice_loss,
    segmentation_loss,
)
from .metrics import (
    classification_metrics,
    evaluate_classification,
    evaluate_segmentation,
    largest_connected_component,
)
from .schedules import ScheduleSpec, lesion_detection_step_schedule, lr_at

__all__ = [
    "sliding_window_infer", "window_grid", "window_starts",
    "SGDSpec", "TrainConfig", "TrainLog", "apply_freeze", "finetune", "pretrain",
    "ce_label_smooth", "ce_label_smooth_batch", "dice_coefficient", "dice_loss",
    "segmentation_loss",
    "classification_metrics", "evaluate_classification", "evaluate_segmentation",
    "largest_connected_component",
    "ScheduleSpec", "lesion_detection_step_schedule", "lr_at",
]
