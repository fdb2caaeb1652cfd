"""Target-adaptive patch losses and evaluation metrics for infrared
small target detection."""

__version__ = "0.1.0"

from .ccl import LabelMap, component_pixels, label_components
from .losses import (
    LossValue,
    TdaConfig,
    adaptive_exponent,
    base_loss,
    build_tda_objective,
    grad_check,
    soft_iou,
    tda_image_loss,
    tda_target_loss,
    total_loss,
)
from .metrics import (
    EvalConfig,
    EvalReport,
    binned_pd,
    detection_stats,
    evaluate_dataset,
    pd_fa,
    pixel_iou,
    roc,
)
from .patch import Patch, crop_resize, crop_resize_backward
from .raster import (
    DatasetManifest,
    load_gray,
    load_manifest,
    load_mask,
    load_prob,
    save_gray,
    save_manifest,
    save_mask,
    save_prob,
)
from .synth import (
    DiskTarget,
    FitLossSpec,
    FitResult,
    SceneSpec,
    fit_prediction,
    generate_scene,
)
from .targets import (
    BBox,
    DatasetStats,
    TargetDescriptor,
    dataset_stats,
    dilate_bbox,
    extract_targets,
    load_stats,
    local_contrast,
    save_stats,
)
