"""Segmentation losses with forward values and analytic gradients.

The target-adaptive patch loss scores each ground-truth target through a
fixed-size patch around its dilated bounding box:

    L_patch = -(1 - I^p) * ln(I)

where I is the eps-smoothed soft IoU of the resampled prediction
against the resampled label, and the exponent p grows for smaller and
lower-contrast targets:

    p = 1 + sigmoid(-scale / scale_mean) + sigmoid(-contrast / contrast_mean)

The per-image value is the mean over targets; its gradient reaches the
full-resolution prediction through the crop-resize adjoint, so it is
exactly zero outside the union of dilated boxes. The exponent depends
only on the label and input image and is treated as a constant.

All losses act on probabilities (post-activation), not logits. Log-based
losses clamp probabilities away from {0, 1} before taking logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ccl import label_components
from .errors import DegenerateRegionError, ShapeMismatchError, StatsError
from .patch import DEFAULT_PATCH_SIZE, Patch, ResamplePlan, make_plan
from .targets import DatasetStats, component_bboxes, dilate_bbox, local_contrast

BASE_LOSSES = ("bce", "focal", "tversky", "iou", "dice")

DEFAULT_EPS = 1e-6
LOG_CLAMP = 1e-7


@dataclass(frozen=True)
class TdaConfig:
    """Knobs of the target-adaptive patch loss.

    pred_mode chooses how prediction patches are resampled. Both modes
    are exact linear operators on pixel values, so gradients flow either
    way; nearest (the default) uses the same sampling grid as the label
    patch, which makes a perfect prediction score exactly zero.
    """

    patch_size: int = DEFAULT_PATCH_SIZE
    d_min: int = 2
    d_max: int = 5
    w_T: float = 0.2
    eps: float = DEFAULT_EPS
    p_override: float | None = None
    pred_mode: str = "nearest"

    def __post_init__(self):
        if self.pred_mode not in ("nearest", "bilinear"):
            raise ValueError(f"bad pred_mode {self.pred_mode!r}")
        if not 0 < self.eps <= 1e-3:
            raise ValueError(f"eps must be in (0, 1e-3], got {self.eps}")
        if self.d_min > self.d_max or self.d_min < 0:
            raise ValueError(
                f"bad dilation range [{self.d_min}, {self.d_max}]")
        if self.w_T < 0:
            raise ValueError(f"w_T must be >= 0, got {self.w_T}")
        if self.p_override is not None and self.p_override <= 0:
            raise ValueError(
                f"fixed exponent must be > 0, got {self.p_override}")


@dataclass(frozen=True)
class TargetTerm:
    """Per-target breakdown of one image-loss evaluation."""

    label: int
    scale: int
    contrast: float
    p: float
    soft_iou: float
    loss: float


@dataclass
class LossValue:
    value: float
    grad: np.ndarray | None = None
    per_target: list[TargetTerm] | None = None


@dataclass(frozen=True)
class SoftSets:
    inter: float
    psum: float
    gsum: float


def _patch_data(x) -> np.ndarray:
    return x.data if isinstance(x, Patch) else np.asarray(x, dtype=np.float64)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape {a.shape} vs {b.shape}")


def soft_sets(pred, gt) -> SoftSets:
    p = _patch_data(pred).ravel()
    g = _patch_data(gt).ravel()
    if p.shape != g.shape:
        raise ShapeMismatchError(f"shape {p.shape} vs {g.shape}")
    return SoftSets(float(p @ g), float(p.sum()), float(g.sum()))


def soft_iou(pred, gt, eps: float = DEFAULT_EPS) -> float:
    """(inter + eps) / (union + eps); 1.0 on two empty patches."""
    s = soft_sets(pred, gt)
    union = s.psum + s.gsum - s.inter
    return (s.inter + eps) / (union + eps)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def adaptive_exponent(scale: float, contrast: float, stats: DatasetStats,
                      p_override: float | None = None) -> float:
    """Exponent 1 + sigmoid(-s/s_mean) + sigmoid(-c/c_mean).

    Strictly decreasing in both scale and contrast for positive means;
    equals 2 at (0, 0) and approaches 1 for large easy targets.
    """
    if p_override is not None:
        if p_override <= 0:
            raise ValueError(f"fixed exponent must be > 0, got {p_override}")
        return float(p_override)
    if stats.s_mean <= 0:
        raise StatsError(f"s_mean must be > 0, got {stats.s_mean}")
    if stats.c_mean == 0:
        raise StatsError("c_mean is 0; adaptive exponent undefined")
    return (1.0 + sigmoid(-scale / stats.s_mean)
            + sigmoid(-contrast / stats.c_mean))


def tda_target_loss(pred, gt, p: float, eps: float = DEFAULT_EPS,
                    with_grad: bool = False) -> LossValue:
    """-(1 - I^p) * ln(I) for one patch; gradient w.r.t. the prediction
    patch when requested (p is a constant)."""
    if p <= 0:
        raise ValueError(f"exponent must be > 0, got {p}")
    pd = _patch_data(pred)
    gd = _patch_data(gt)
    _check_same_shape(pd, gd)
    s = soft_sets(pd, gd)
    union = s.psum + s.gsum - s.inter
    i_val = (s.inter + eps) / (union + eps)
    value = -(1.0 - i_val ** p) * math.log(i_val)
    if not with_grad:
        return LossValue(value)
    # dL/dI, then chain through I = (inter+eps)/(union+eps)
    dl_di = p * i_val ** (p - 1) * math.log(i_val) - (1.0 - i_val ** p) / i_val
    denom = (union + eps) ** 2
    di_dp = (gd * (union + eps) - (s.inter + eps) * (1.0 - gd)) / denom
    return LossValue(value, dl_di * di_dp)


@dataclass(frozen=True)
class _PatchTarget:
    label: int
    scale: int
    contrast: float
    p: float
    plan: ResamplePlan
    gt_patch: np.ndarray


@dataclass(frozen=True)
class TdaObjective:
    """Patch geometry, label patches and exponents frozen for one
    (mask, image, stats, config, seed); evaluate against any prediction.

    Building once and evaluating many times keeps iterative optimizers
    from re-running labeling every step.
    """

    shape: tuple[int, int]
    eps: float
    targets: tuple[_PatchTarget, ...] = field(default_factory=tuple)

    def evaluate(self, pred: np.ndarray, with_grad: bool = True,
                 details: bool = False) -> LossValue:
        if pred.shape != self.shape:
            raise ShapeMismatchError(f"pred {pred.shape} vs {self.shape}")
        n = len(self.targets)
        grad = np.zeros(self.shape) if with_grad else None
        if n == 0:
            return LossValue(0.0, grad, [] if details else None)
        total = 0.0
        terms = [] if details else None
        for t in self.targets:
            pred_patch = t.plan.forward(pred)
            lv = tda_target_loss(pred_patch, t.gt_patch, t.p, self.eps,
                                 with_grad=with_grad)
            total += lv.value
            if grad is not None:
                t.plan.backward_into(lv.grad / n, grad)
            if terms is not None:
                terms.append(TargetTerm(
                    t.label, t.scale, t.contrast, t.p,
                    soft_iou(pred_patch, t.gt_patch, self.eps), lv.value))
        return LossValue(total / n, grad, terms)


def build_tda_objective(mask: np.ndarray, image: np.ndarray,
                        stats: DatasetStats, cfg: TdaConfig,
                        rng_seed: int) -> TdaObjective:
    """Extract targets and freeze per-target patch plans and exponents.

    Each target draws its own dilation uniformly from
    [d_min, d_max] (seeded, in label order); its contrast is measured
    over that dilated box.
    """
    if mask.shape != image.shape:
        raise ShapeMismatchError(f"mask {mask.shape} vs image {image.shape}")
    h, w = mask.shape
    lm = label_components(mask)
    sizes = np.bincount(lm.labels.ravel(), minlength=lm.count + 1)
    rng = np.random.default_rng(rng_seed)
    dilations = rng.integers(cfg.d_min, cfg.d_max + 1, size=lm.count)
    targets = []
    for label, bbox in enumerate(component_bboxes(lm), start=1):
        dbox = dilate_bbox(bbox, int(dilations[label - 1]), w, h)
        try:
            contrast = local_contrast(image, lm, label, dbox)
        except DegenerateRegionError:
            contrast = float(image[lm.labels == label].mean() - image.mean())
        p = adaptive_exponent(float(sizes[label]), contrast, stats,
                              cfg.p_override)
        plan = make_plan(dbox, cfg.patch_size, cfg.pred_mode, h, w)
        gt_plan = make_plan(dbox, cfg.patch_size, "nearest", h, w)
        targets.append(_PatchTarget(label, int(sizes[label]), contrast, p,
                                    plan, gt_plan.forward(mask)))
    return TdaObjective((h, w), cfg.eps, tuple(targets))


def tda_image_loss(pred: np.ndarray, mask: np.ndarray, image: np.ndarray,
                   stats: DatasetStats, cfg: TdaConfig, rng_seed: int,
                   with_grad: bool = True,
                   details: bool = False) -> LossValue:
    """Mean patch loss over all targets of one image (0 when empty)."""
    if pred.shape != mask.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs mask {mask.shape}")
    objective = build_tda_objective(mask, image, stats, cfg, rng_seed)
    return objective.evaluate(pred, with_grad=with_grad, details=details)


def total_loss(base: LossValue, tda: LossValue, w_T: float) -> LossValue:
    """base + w_T * tda, values and gradients alike."""
    value = base.value + w_T * tda.value
    if base.grad is None and tda.grad is None:
        return LossValue(value)
    if base.grad is None or tda.grad is None:
        raise ShapeMismatchError(
            "cannot combine a gradient-carrying loss with a value-only one")
    if base.grad.shape != tda.grad.shape:
        raise ShapeMismatchError(
            f"gradient shapes {base.grad.shape} vs {tda.grad.shape}")
    return LossValue(value, base.grad + w_T * tda.grad)


def base_loss(kind: str, pred: np.ndarray, gt: np.ndarray, *,
              gamma: float = 2.0, alpha: float = 0.3, beta: float = 0.7,
              eps: float = DEFAULT_EPS, with_grad: bool = False) -> LossValue:
    """Whole-image reference losses: bce, focal, tversky, iou, dice."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    n = pred.size

    if kind in ("bce", "focal"):
        if kind == "focal" and gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {gamma}")
        pc = np.clip(pred, LOG_CLAMP, 1.0 - LOG_CLAMP)
        # clamp derivative: zero where the raw prediction sits outside
        inner = (pred >= LOG_CLAMP) & (pred <= 1.0 - LOG_CLAMP)
        log_p = np.log(pc)
        log_q = np.log1p(-pc)
        if kind == "bce":
            value = float(np.mean(-(gt * log_p + (1.0 - gt) * log_q)))
            if not with_grad:
                return LossValue(value)
            grad = (-gt / pc + (1.0 - gt) / (1.0 - pc)) / n
        else:
            wpos = (1.0 - pc) ** gamma
            wneg = pc ** gamma
            value = float(np.mean(-(gt * wpos * log_p
                                    + (1.0 - gt) * wneg * log_q)))
            if not with_grad:
                return LossValue(value)
            dpos = gamma * (1.0 - pc) ** (gamma - 1.0) * log_p - wpos / pc \
                if gamma > 0 else -wpos / pc
            dneg = wneg / (1.0 - pc) - gamma * pc ** (gamma - 1.0) * log_q \
                if gamma > 0 else wneg / (1.0 - pc)
            grad = (gt * dpos + (1.0 - gt) * dneg) / n
        return LossValue(value, np.where(inner, grad, 0.0))

    if kind == "iou":
        s = soft_sets(pred, gt)
        union = s.psum + s.gsum - s.inter
        value = 1.0 - (s.inter + eps) / (union + eps)
        if not with_grad:
            return LossValue(value)
        grad = -(gt * (union + eps) - (s.inter + eps) * (1.0 - gt)) \
            / (union + eps) ** 2
        return LossValue(float(value), grad)

    if kind == "dice":
        s = soft_sets(pred, gt)
        denom = s.psum + s.gsum + eps
        value = 1.0 - (2.0 * s.inter + eps) / denom
        if not with_grad:
            return LossValue(float(value))
        grad = -(2.0 * gt * denom - (2.0 * s.inter + eps)) / denom ** 2
        return LossValue(float(value), grad)

    if kind == "tversky":
        if alpha <= 0 or beta <= 0:
            raise ValueError(f"alpha, beta must be > 0, got {alpha}, {beta}")
        s = soft_sets(pred, gt)
        fp = float((pred * (1.0 - gt)).sum())
        fn = float(((1.0 - pred) * gt).sum())
        denom = s.inter + alpha * fp + beta * fn + eps
        value = 1.0 - (s.inter + eps) / denom
        if not with_grad:
            return LossValue(float(value))
        ddenom = gt + alpha * (1.0 - gt) - beta * gt
        grad = -(gt * denom - (s.inter + eps) * ddenom) / denom ** 2
        return LossValue(float(value), grad)

    raise ValueError(f"unknown loss kind {kind!r}; expected {BASE_LOSSES}")


def grad_check(loss_closure, pred: np.ndarray, eps_fd: float = 1e-4,
               n_samples: int = 50, rng_seed: int = 0,
               rel_floor: float = 1e-7,
               pixels: list[tuple[int, int]] | None = None) -> float:
    """Max relative error between the closure's analytic gradient and
    central finite differences over sampled pixels.

    The closure maps a prediction grid to a LossValue carrying a
    gradient. Per pixel the error is |a - f| / max(|a|, |f|, rel_floor);
    the floor keeps finite-difference noise from dominating gradients
    that are (near) zero.
    """
    analytic = loss_closure(pred).grad
    if analytic is None:
        raise ValueError("closure did not produce a gradient")
    if pixels is None:
        rng = np.random.default_rng(rng_seed)
        flat = rng.choice(pred.size, size=min(n_samples, pred.size),
                          replace=False)
        pixels = [divmod(int(i), pred.shape[1]) for i in flat]
    worst = 0.0
    work = pred.copy()
    for y, x in pixels:
        orig = work[y, x]
        work[y, x] = orig + eps_fd
        f_plus = loss_closure(work).value
        work[y, x] = orig - eps_fd
        f_minus = loss_closure(work).value
        work[y, x] = orig
        fd = (f_plus - f_minus) / (2.0 * eps_fd)
        a = float(analytic[y, x])
        err = abs(a - fd) / max(abs(a), abs(fd), rel_floor)
        worst = max(worst, err)
    return worst
