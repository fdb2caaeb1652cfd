"""Per-target descriptors and training-set statistics.

A target is one connected component of the ground-truth mask. Its scale
is its pixel count; its local contrast is the mean image intensity over
the target minus the mean over the background pixels of a region
(normally the dilated bounding box). Pixels of *other* targets inside
the region count as background.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ccl import LabelMap, label_components
from .errors import (
    DegenerateRegionError,
    EmptyTrainingSetError,
    ShapeMismatchError,
)
from .raster import DatasetManifest, load_gray, load_mask

logger = logging.getLogger(__name__)

DEFAULT_STATS_DILATION = 3


@dataclass(frozen=True)
class BBox:
    """Inclusive pixel bounds."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def contains(self, other: "BBox") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)


@dataclass(frozen=True)
class TargetDescriptor:
    label: int
    bbox: BBox
    dilated_bbox: BBox
    scale: int
    contrast: float


@dataclass(frozen=True)
class DatasetStats:
    s_mean: float
    c_mean: float
    n_targets: int
    dilation: int = DEFAULT_STATS_DILATION


def dilate_bbox(b: BBox, d: int, width: int, height: int) -> BBox:
    """Extend each side by d pixels, clipped to the image bounds."""
    if d < 0:
        raise ValueError(f"dilation must be >= 0, got {d}")
    return BBox(
        max(b.x0 - d, 0),
        max(b.y0 - d, 0),
        min(b.x1 + d, width - 1),
        min(b.y1 + d, height - 1),
    )


def component_bboxes(lm: LabelMap) -> list[BBox]:
    """Tight bounding boxes for labels 1..count."""
    n = lm.count
    if n == 0:
        return []
    ys, xs = np.nonzero(lm.labels)
    labs = lm.labels[ys, xs] - 1
    x0 = np.full(n, lm.width, dtype=np.int64)
    y0 = np.full(n, lm.height, dtype=np.int64)
    x1 = np.full(n, -1, dtype=np.int64)
    y1 = np.full(n, -1, dtype=np.int64)
    np.minimum.at(x0, labs, xs)
    np.minimum.at(y0, labs, ys)
    np.maximum.at(x1, labs, xs)
    np.maximum.at(y1, labs, ys)
    return [BBox(int(a), int(b), int(c), int(d))
            for a, b, c, d in zip(x0, y0, x1, y1)]


def local_contrast(image: np.ndarray, lm: LabelMap, label: int,
                   region: BBox) -> float:
    """mean(target intensity) - mean(background intensity) inside region."""
    sub_img = image[region.y0:region.y1 + 1, region.x0:region.x1 + 1]
    sub_lab = lm.labels[region.y0:region.y1 + 1, region.x0:region.x1 + 1]
    on_target = sub_lab == label
    if not on_target.any():
        raise ValueError(f"region contains no pixels of target {label}")
    if on_target.all():
        raise DegenerateRegionError(
            f"target {label} fills its region; no background pixels")
    return float(sub_img[on_target].mean() - sub_img[~on_target].mean())


def extract_targets(mask: np.ndarray, image: np.ndarray, lm: LabelMap,
                    d: int) -> list[TargetDescriptor]:
    """One descriptor per component, ordered by label.

    Contrast is measured over the d-dilated bounding box. If a target
    fills its dilated region, contrast falls back to
    mean(target) - mean(whole image) and a warning is logged.
    """
    if mask.shape != image.shape:
        raise ShapeMismatchError(
            f"mask {mask.shape} vs image {image.shape}")
    h, w = mask.shape
    sizes = np.bincount(lm.labels.ravel(), minlength=lm.count + 1)
    out = []
    for label, bbox in enumerate(component_bboxes(lm), start=1):
        dbox = dilate_bbox(bbox, d, w, h)
        try:
            contrast = local_contrast(image, lm, label, dbox)
        except DegenerateRegionError:
            contrast = float(
                image[lm.labels == label].mean() - image.mean())
            logger.warning(
                "target %d fills its dilated region; contrast falls back "
                "to global image mean", label)
        out.append(TargetDescriptor(label, bbox, dbox,
                                    int(sizes[label]), contrast))
    return out


def dataset_stats(manifest: DatasetManifest,
                  d_eval: int = DEFAULT_STATS_DILATION) -> DatasetStats:
    """Mean scale and contrast over every target of every train image."""
    scales: list[int] = []
    contrasts: list[float] = []
    for entry in manifest.split_entries("train"):
        mask = load_mask(manifest.mask_file(entry))
        image = load_gray(manifest.image_file(entry))
        if mask.shape != image.shape:
            raise ShapeMismatchError(
                f"{entry.image_path}: image {image.shape} vs "
                f"mask {mask.shape}")
        lm = label_components(mask)
        for t in extract_targets(mask, image, lm, d_eval):
            scales.append(t.scale)
            contrasts.append(t.contrast)
    if not scales:
        raise EmptyTrainingSetError("no targets in any train-split image")
    return DatasetStats(
        s_mean=float(np.mean(scales)),
        c_mean=float(np.mean(contrasts)),
        n_targets=len(scales),
        dilation=d_eval,
    )


def save_stats(path: str | Path, stats: DatasetStats) -> None:
    payload = {
        "s_mean": stats.s_mean,
        "c_mean": stats.c_mean,
        "n_targets": stats.n_targets,
        "dilation": stats.dilation,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_stats(path: str | Path) -> DatasetStats:
    payload = json.loads(Path(path).read_text())
    return DatasetStats(
        s_mean=float(payload["s_mean"]),
        c_mean=float(payload["c_mean"]),
        n_targets=int(payload["n_targets"]),
        dilation=int(payload["dilation"]),
    )
