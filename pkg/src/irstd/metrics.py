"""Detection-oriented evaluation: pixel IoU, probability of detection,
false-alarm rate, ROC sweeps, and detection rate binned by target scale
or local contrast.

Conventions (stated because published numbers rarely pin them down):

- predictions binarize as value > threshold (strict);
- under the centroid rule a ground-truth target counts as detected when
  some predicted component's centroid lies within ``dist_px`` (Euclidean,
  inclusive) of its centroid; predicted components matched to any target
  contribute no false-alarm pixels, unmatched ones contribute all of
  theirs;
- under the overlap rule a target is detected when any positive pixel
  lands on it, and false-alarm pixels are positives outside the
  ground-truth foreground;
- the false-alarm rate aggregates pixel counts over the whole dataset
  (not a mean of per-image ratios) and is reported in units of 1e-6;
- scale/contrast bins are cumulative ranges (0, k]: each bin covers all
  targets with attribute <= k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ccl import LabelMap, label_components
from .errors import EmptyDatasetError, ShapeMismatchError
from .targets import extract_targets

MATCH_RULES = ("centroid", "overlap")

DEFAULT_BINS_SCALE = (20, 40, 60, 80, 100, 120, 140)
DEFAULT_BINS_CONTRAST = (30, 60, 90, 120, 150)


def _check_increasing(bins, name):
    if any(b1 >= b2 for b1, b2 in zip(bins, bins[1:])):
        raise ValueError(f"{name} bounds must be strictly increasing")


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = 0.5
    match_rule: str = "centroid"
    dist_px: float = 3.0
    bins_scale: tuple[int, ...] = DEFAULT_BINS_SCALE
    bins_contrast: tuple[int, ...] = DEFAULT_BINS_CONTRAST
    contrast_dilation: int = 3
    # default sweep stays inside (0, 1): the degenerate endpoints predict
    # everything/nothing and carry no information about the scores
    roc_thresholds: tuple[float, ...] = tuple(
        round(0.05 * i, 2) for i in range(1, 20))

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0,1], got {self.threshold}")
        if self.match_rule not in MATCH_RULES:
            raise ValueError(f"match_rule must be one of {MATCH_RULES}")
        _check_increasing(self.bins_scale, "scale bin")
        _check_increasing(self.bins_contrast, "contrast bin")


@dataclass(frozen=True)
class BinStat:
    upper: float
    pd: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    iou: float
    pd: float
    fa_e6: float
    roc: list[tuple[float, float, float]]  # (threshold, fa_e6, pd)
    binned_scale: list[BinStat] = field(default_factory=list)
    binned_contrast: list[BinStat] = field(default_factory=list)


def _centroids(lm: LabelMap) -> np.ndarray:
    """(count, 2) array of (x, y) centroids for labels 1..count."""
    if lm.count == 0:
        return np.zeros((0, 2))
    ys, xs = np.nonzero(lm.labels)
    labs = lm.labels[ys, xs]
    n = np.bincount(labs, minlength=lm.count + 1)[1:]
    sx = np.bincount(labs, weights=xs, minlength=lm.count + 1)[1:]
    sy = np.bincount(labs, weights=ys, minlength=lm.count + 1)[1:]
    return np.stack([sx / n, sy / n], axis=1)


@dataclass(frozen=True)
class ImageMatch:
    """Per-image matching outcome at one threshold."""

    detected: np.ndarray  # bool per ground-truth target
    fa_pixels: int
    total_targets: int
    pixels: int


def match_targets(pred: np.ndarray, mask: np.ndarray, cfg: EvalConfig,
                  threshold: float | None = None) -> ImageMatch:
    if pred.shape != mask.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs mask {mask.shape}")
    thr = cfg.threshold if threshold is None else threshold
    pred_bin = (pred > thr).astype(np.uint8)
    lm_gt = label_components(mask)

    if cfg.match_rule == "overlap":
        hits = pred_bin.astype(bool) & (lm_gt.labels > 0)
        detected_labels = np.unique(lm_gt.labels[hits])
        detected = np.zeros(lm_gt.count, dtype=bool)
        detected[detected_labels - 1] = True
        fa = int((pred_bin.astype(bool) & (lm_gt.labels == 0)).sum())
        return ImageMatch(detected, fa, lm_gt.count, mask.size)

    lm_pred = label_components(pred_bin)
    cg = _centroids(lm_gt)
    cp = _centroids(lm_pred)
    if lm_gt.count and lm_pred.count:
        dist = np.linalg.norm(cg[:, None, :] - cp[None, :, :], axis=2)
        close = dist <= cfg.dist_px
        detected = close.any(axis=1)
        matched_pred = close.any(axis=0)
    else:
        detected = np.zeros(lm_gt.count, dtype=bool)
        matched_pred = np.zeros(lm_pred.count, dtype=bool)
    pred_sizes = np.bincount(lm_pred.labels.ravel(),
                             minlength=lm_pred.count + 1)[1:]
    fa = int(pred_sizes[~matched_pred].sum())
    return ImageMatch(detected, fa, lm_gt.count, mask.size)


def detection_stats(pred: np.ndarray, mask: np.ndarray,
                    cfg: EvalConfig) -> tuple[int, int, int, int]:
    """(detected targets, total targets, false-alarm pixels, image pixels)."""
    m = match_targets(pred, mask, cfg)
    return int(m.detected.sum()), m.total_targets, m.fa_pixels, m.pixels


def pd_fa(per_image: list[tuple[int, int, int, int]]) -> tuple[float, float]:
    """Aggregate detection rate and false-alarm rate (x 1e-6)."""
    if not per_image:
        raise EmptyDatasetError("no images to aggregate")
    det = sum(s[0] for s in per_image)
    tot = sum(s[1] for s in per_image)
    fa = sum(s[2] for s in per_image)
    pix = sum(s[3] for s in per_image)
    pd = det / tot if tot else 0.0
    return pd, 1e6 * fa / pix


def pixel_iou(preds: list[np.ndarray], gts: list[np.ndarray],
              threshold: float = 0.5) -> float:
    """Dataset-aggregated TP / (TP + FP + FN) at the given threshold."""
    if not preds:
        raise EmptyDatasetError("no images")
    if len(preds) != len(gts):
        raise ShapeMismatchError(f"{len(preds)} preds vs {len(gts)} masks")
    tp = fp = fn = 0
    for pred, gt in zip(preds, gts):
        if pred.shape != gt.shape:
            raise ShapeMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
        pb = pred > threshold
        gb = gt > 0
        tp += int((pb & gb).sum())
        fp += int((pb & ~gb).sum())
        fn += int((~pb & gb).sum())
    union = tp + fp + fn
    return tp / union if union else 0.0


def roc(preds: list[np.ndarray], gts: list[np.ndarray], cfg: EvalConfig,
        thresholds: tuple[float, ...] | None = None
        ) -> list[tuple[float, float, float]]:
    """One (threshold, fa_e6, pd) row per threshold."""
    if not preds:
        raise EmptyDatasetError("no images")
    if thresholds is None:
        thresholds = cfg.roc_thresholds
    if any(t1 >= t2 for t1, t2 in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    if thresholds and not (0.0 <= thresholds[0] and thresholds[-1] <= 1.0):
        raise ValueError("thresholds must lie in [0, 1]")
    rows = []
    for thr in thresholds:
        stats = [
            _as_stats(match_targets(p, g, cfg, threshold=thr))
            for p, g in zip(preds, gts)
        ]
        pd, fa = pd_fa(stats)
        rows.append((float(thr), fa, pd))
    return rows


def _as_stats(m: ImageMatch) -> tuple[int, int, int, int]:
    return int(m.detected.sum()), m.total_targets, m.fa_pixels, m.pixels


def binned_pd(preds: list[np.ndarray], gts: list[np.ndarray],
              images: list[np.ndarray], cfg: EvalConfig,
              axis: str = "scale") -> list[BinStat]:
    """Detection rate over cumulative attribute bins (0, k].

    axis selects the per-target attribute: component pixel count
    ("scale") or local contrast over the bbox dilated by
    ``contrast_dilation`` ("contrast").
    """
    if axis not in ("scale", "contrast"):
        raise ValueError(f"axis must be 'scale' or 'contrast', got {axis!r}")
    if not preds:
        raise EmptyDatasetError("no images")
    attrs: list[float] = []
    hits: list[bool] = []
    for pred, mask, image in zip(preds, gts, images):
        m = match_targets(pred, mask, cfg)
        lm = label_components(mask)
        descriptors = extract_targets(mask, image, lm, cfg.contrast_dilation)
        for t, det in zip(descriptors, m.detected):
            attrs.append(t.scale if axis == "scale" else t.contrast)
            hits.append(bool(det))
    attr_arr = np.asarray(attrs)
    hit_arr = np.asarray(hits, dtype=bool)
    bins = cfg.bins_scale if axis == "scale" else cfg.bins_contrast
    out = []
    for upper in bins:
        sel = attr_arr <= upper
        n = int(sel.sum())
        pd = float(hit_arr[sel].sum() / n) if n else 0.0
        out.append(BinStat(float(upper), pd, n))
    return out


def evaluate_dataset(preds: list[np.ndarray], gts: list[np.ndarray],
                     images: list[np.ndarray], cfg: EvalConfig) -> EvalReport:
    if not preds:
        raise EmptyDatasetError("no images")
    stats = [_as_stats(match_targets(p, g, cfg)) for p, g in zip(preds, gts)]
    pd, fa = pd_fa(stats)
    return EvalReport(
        iou=pixel_iou(preds, gts, cfg.threshold),
        pd=pd,
        fa_e6=fa,
        roc=roc(preds, gts, cfg),
        binned_scale=binned_pd(preds, gts, images, cfg, "scale"),
        binned_contrast=binned_pd(preds, gts, images, cfg, "contrast"),
    )


def roc_csv(rows: list[tuple[float, float, float]]) -> str:
    lines = ["threshold,fa_e6,pd"]
    lines += [f"{t:.9g},{fa:.9g},{pd:.9g}" for t, fa, pd in rows]
    return "\n".join(lines) + "\n"


def bins_csv(bins: list[BinStat]) -> str:
    lines = ["bin_upper,n,pd"]
    lines += [f"{b.upper:.9g},{b.n},{b.pd:.9g}" for b in bins]
    return "\n".join(lines) + "\n"
