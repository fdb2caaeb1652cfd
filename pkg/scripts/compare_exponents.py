#!/usr/bin/env python3
"""Fit-demo ablation: fixed exponents (1, 2, 3) versus the adaptive one.

Optimizes a free prediction map against iou + w_T * patch loss on a
three-target scene whose smallest target has low contrast, then reports
per-target soft IoU after a fixed step budget. Adaptive weighting tends
to close the gap on the small/low-contrast target fastest.
"""

import argparse

import numpy as np

from irstd.ccl import label_components
from irstd.losses import TdaConfig
from irstd.synth import DiskTarget, FitLossSpec, SceneSpec, fit_prediction, generate_scene
from irstd.targets import DatasetStats, extract_targets


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=600)
    parser.add_argument("--step-size", type=float, default=2.0)
    parser.add_argument("--w_T", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    spec = SceneSpec(
        width=128, height=128, background_level=100.0, noise_sigma=5.0,
        targets=(DiskTarget(24, 22, 2.0, 15.0),
                 DiskTarget(80, 40, 4.0, 40.0),
                 DiskTarget(46, 92, 6.1, 60.0)))
    image, mask = generate_scene(spec, 2024)
    descs = extract_targets(mask, image, label_components(mask), 3)
    stats = DatasetStats(
        s_mean=float(np.mean([t.scale for t in descs])),
        c_mean=float(np.mean([t.contrast for t in descs])),
        n_targets=len(descs))
    print(f"targets: scales={[t.scale for t in descs]} "
          f"contrasts={[round(t.contrast, 1) for t in descs]}")
    print(f"{'setting':>10s}  pixel_iou  per-target soft IoU")
    for label, p_fix in [("p=1", 1.0), ("p=2", 2.0), ("p=3", 3.0),
                         ("adaptive", None)]:
        cfg = TdaConfig(w_T=args.w_T, p_override=p_fix)
        result = fit_prediction(image, mask, stats,
                                FitLossSpec(base_kind="iou", w_T=args.w_T,
                                            cfg=cfg),
                                steps=args.steps, step_size=args.step_size,
                                seed=args.seed)
        per_target = " ".join(f"{v:.4f}" for v in result.per_target_soft_iou)
        print(f"{label:>10s}  {result.final_pixel_iou:9.4f}  {per_target}")


if __name__ == "__main__":
    main()
