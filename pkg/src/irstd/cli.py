"""Command-line surface.

Subcommands: stats, loss, eval, roc, bins, gradcheck, synth, fitdemo.
JSON output uses sorted keys and floats rounded to 9 significant digits
so repeated runs are byte-identical and diffs stay meaningful.

Exit codes: 0 ok, 2 input/format error, 3 empty dataset or training
set, 4 gradient-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    EmptyDatasetError,
    EmptyTrainingSetError,
    FormatError,
)
from .losses import (
    BASE_LOSSES,
    TdaConfig,
    base_loss,
    grad_check,
    tda_image_loss,
    total_loss,
)
from .metrics import (
    EvalConfig,
    bins_csv,
    binned_pd,
    evaluate_dataset,
    roc,
    roc_csv,
)
from .raster import (
    load_gray,
    load_manifest,
    load_mask,
    load_prob,
    save_gray,
    save_mask,
)
from .synth import (
    FitLossSpec,
    fit_prediction,
    generate_scene,
    load_scene_spec,
    scene_spec_from_json,
)
from .targets import dataset_stats, load_stats, save_stats


def _round9(obj):
    """Round every float to 9 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def fmt_json(obj) -> str:
    return json.dumps(_round9(obj), sort_keys=True,
                      separators=(",", ":")) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    payload = json.loads(Path(path).read_text())
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    return payload


def _pick(value, config: dict, key: str, default):
    if value is not None:
        return value
    return config.get(key, default)


def _tda_config(args, config: dict) -> TdaConfig:
    return TdaConfig(
        patch_size=int(_pick(args.patch_size, config, "patch_size", 48)),
        d_min=int(_pick(args.d_min, config, "d_min", 2)),
        d_max=int(_pick(args.d_max, config, "d_max", 5)),
        w_T=float(_pick(args.w_t, config, "w_T", 0.2)),
        eps=float(_pick(args.eps, config, "eps", 1e-6)),
        p_override=args.fixed_p if args.fixed_p is not None
        else config.get("p_override"),
    )


def _eval_config(args, config: dict) -> EvalConfig:
    kwargs = {}
    if "bins_scale" in config:
        kwargs["bins_scale"] = tuple(config["bins_scale"])
    if "bins_contrast" in config:
        kwargs["bins_contrast"] = tuple(config["bins_contrast"])
    return EvalConfig(
        threshold=float(_pick(args.threshold, config, "threshold", 0.5)),
        match_rule=_pick(args.match, config, "match_rule", "centroid"),
        dist_px=float(_pick(args.dist, config, "dist_px", 3.0)),
        contrast_dilation=int(
            _pick(getattr(args, "dilation", None), config,
                  "contrast_dilation", 3)),
        **kwargs,
    )


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    stats = dataset_stats(manifest, d_eval=args.dilation)
    if args.out:
        save_stats(args.out, stats)
        print(f"{stats.n_targets} train targets: "
              f"s_mean={stats.s_mean:.9g} c_mean={stats.c_mean:.9g} "
              f"-> {args.out}")
    else:
        sys.stdout.write(fmt_json({
            "s_mean": stats.s_mean, "c_mean": stats.c_mean,
            "n_targets": stats.n_targets, "dilation": stats.dilation,
        }))
    return 0


def cmd_loss(args) -> int:
    config = _load_config(args.config)
    cfg = _tda_config(args, config)
    pred = load_prob(args.pred)
    mask = load_mask(args.mask)
    image = load_gray(args.image)
    stats = load_stats(args.stats)
    want_grad = args.grad_out is not None
    base = base_loss(args.base, pred, mask, gamma=args.gamma,
                     alpha=args.alpha, beta=args.beta, eps=cfg.eps,
                     with_grad=want_grad)
    tda = tda_image_loss(pred, mask, image, stats, cfg, args.seed,
                         with_grad=want_grad, details=True)
    combined = total_loss(base, tda, cfg.w_T)
    if want_grad:
        Path(args.grad_out).write_bytes(
            combined.grad.astype("<f4").tobytes())
    report = {
        "loss": combined.value,
        "base_kind": args.base,
        "base_loss": base.value,
        "tda_loss": tda.value,
        "w_T": cfg.w_T,
        "per_target": [
            {"label": t.label, "p_t": t.p, "s_t": t.scale, "c_t": t.contrast,
             "soft_iou": t.soft_iou, "loss": t.loss}
            for t in tda.per_target
        ],
    }
    _emit(fmt_json(report), args.out)
    return 0


def _load_eval_inputs(pred_dir: str, manifest_path: str):
    manifest = load_manifest(manifest_path)
    entries = manifest.split_entries("test")
    if not entries:
        raise EmptyDatasetError("manifest has no test entries")
    preds, gts, images, missing = [], [], [], []
    for entry in entries:
        pred_file = Path(pred_dir) / (Path(entry.image_path).stem + ".pgm")
        if not pred_file.exists():
            missing.append(str(pred_file))
            continue
        preds.append(load_prob(pred_file))
        gts.append(load_mask(manifest.mask_file(entry)))
        images.append(load_gray(manifest.image_file(entry)))
    if missing:
        for name in missing:
            print(f"missing prediction: {name}", file=sys.stderr)
        raise FormatError(f"{len(missing)} prediction file(s) missing")
    return preds, gts, images


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    preds, gts, images = _load_eval_inputs(args.pred_dir, args.manifest)
    report = evaluate_dataset(preds, gts, images, cfg)
    payload = {
        "iou": report.iou,
        "pd": report.pd,
        "fa_e6": report.fa_e6,
        "threshold": cfg.threshold,
        "match_rule": cfg.match_rule,
        "n_images": len(preds),
        "roc": [{"threshold": t, "fa_e6": fa, "pd": pd}
                for t, fa, pd in report.roc],
        "binned_scale": [{"upper": b.upper, "pd": b.pd, "n": b.n}
                         for b in report.binned_scale],
        "binned_contrast": [{"upper": b.upper, "pd": b.pd, "n": b.n}
                            for b in report.binned_contrast],
    }
    _emit(fmt_json(payload), args.out)
    return 0


def cmd_roc(args) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    preds, gts, _ = _load_eval_inputs(args.pred_dir, args.manifest)
    if args.thresholds:
        thresholds = tuple(float(t) for t in args.thresholds.split(","))
    elif args.num_thresholds:
        n = args.num_thresholds
        thresholds = tuple(i / (n - 1) for i in range(n))
    else:
        thresholds = cfg.roc_thresholds
    rows = roc(preds, gts, cfg, thresholds)
    _emit(roc_csv(rows), args.out)
    return 0


def cmd_bins(args) -> int:
    config = _load_config(args.config)
    cfg = _eval_config(args, config)
    preds, gts, images = _load_eval_inputs(args.pred_dir, args.manifest)
    bins = binned_pd(preds, gts, images, cfg, args.axis)
    _emit(bins_csv(bins), args.out)
    return 0


def _gradcheck_scene(seed: int):
    """Seeded 64x64 random scene plus interior random prediction."""
    from .synth import DiskTarget, SceneSpec
    spec = SceneSpec(
        width=64, height=64, background_level=90.0, noise_sigma=4.0,
        targets=(DiskTarget(14, 12, 2.0, 60.0),
                 DiskTarget(40, 30, 4.0, 25.0),
                 DiskTarget(22, 48, 3.0, 40.0)),
    )
    image, mask = generate_scene(spec, seed)
    rng = np.random.default_rng(seed + 1)
    pred = rng.uniform(0.05, 0.95, size=mask.shape)
    return image, mask, pred


def gradcheck_losses(seed: int, eps_fd: float, w_t: float = 0.2):
    """Max relative finite-difference error per loss kind."""
    from .ccl import label_components
    from .targets import DatasetStats, extract_targets
    image, mask, pred = _gradcheck_scene(seed)
    lm = label_components(mask)
    descs = extract_targets(mask, image, lm, 3)
    stats = DatasetStats(
        s_mean=float(np.mean([t.scale for t in descs])),
        c_mean=float(np.mean([t.contrast for t in descs])),
        n_targets=len(descs),
    )
    cfg = TdaConfig(w_T=w_t)

    def tda_closure(p):
        return tda_image_loss(p, mask, image, stats, cfg, seed)

    def combined_closure(p):
        return total_loss(
            base_loss("iou", p, mask, with_grad=True),
            tda_image_loss(p, mask, image, stats, cfg, seed), w_t)

    cases = {
        "bce": lambda p: base_loss("bce", p, mask, with_grad=True),
        "focal": lambda p: base_loss("focal", p, mask, gamma=2.0,
                                     with_grad=True),
        "tversky_0.3_0.7": lambda p: base_loss("tversky", p, mask, alpha=0.3,
                                               beta=0.7, with_grad=True),
        "tversky_0.7_0.3": lambda p: base_loss("tversky", p, mask, alpha=0.7,
                                               beta=0.3, with_grad=True),
        "iou": lambda p: base_loss("iou", p, mask, with_grad=True),
        "dice": lambda p: base_loss("dice", p, mask, with_grad=True),
        "tda": tda_closure,
        "combined": combined_closure,
    }
    return {
        name: grad_check(closure, pred, eps_fd=eps_fd, rng_seed=seed)
        for name, closure in cases.items()
    }


def cmd_gradcheck(args) -> int:
    errors = gradcheck_losses(args.seed, args.eps_fd)
    worst = max(errors.values())
    sys.stdout.write(fmt_json({
        "errors": errors, "max_error": worst, "tol": args.tol,
        "ok": worst < args.tol,
    }))
    return 0 if worst < args.tol else 4


def cmd_synth(args) -> int:
    if args.spec:
        spec = load_scene_spec(args.spec)
    else:
        spec = scene_spec_from_json(json.loads(sys.stdin.read()))
    image, mask = generate_scene(spec, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_name = f"{args.name}.pgm"
    mask_name = f"{args.name}_mask.pgm"
    save_gray(out_dir / image_name, image)
    save_mask(out_dir / mask_name, mask)
    manifest_path = out_dir / "manifest.csv"
    if not manifest_path.exists():
        manifest_path.write_text("image_path,mask_path,split\n")
    with open(manifest_path, "a", newline="") as fh:
        fh.write(f"{image_name},{mask_name},{args.split}\n")
    sys.stdout.write(fmt_json({
        "image": str(out_dir / image_name),
        "mask": str(out_dir / mask_name),
        "foreground_pixels": int(mask.sum()),
        "split": args.split,
    }))
    return 0


def cmd_fitdemo(args) -> int:
    config = _load_config(args.config)
    cfg = _tda_config(args, config)
    image = load_gray(args.image)
    mask = load_mask(args.mask)
    stats = load_stats(args.stats)
    spec = FitLossSpec(
        base_kind=None if args.base == "none" else args.base,
        w_T=cfg.w_T, cfg=cfg,
        gamma=args.gamma, alpha=args.alpha, beta=args.beta,
    )
    result = fit_prediction(image, mask, stats, spec, args.steps,
                            args.step_size, args.seed)
    if args.traj_out:
        lines = ["step,loss"]
        lines += [f"{i},{v:.9g}"
                  for i, v in enumerate(result.loss_trajectory)]
        Path(args.traj_out).write_text("\n".join(lines) + "\n")
    if args.pred_out:
        from .raster import save_prob
        save_prob(args.pred_out, result.final_pred)
    sys.stdout.write(fmt_json({
        "steps": args.steps,
        "loss_first": result.loss_trajectory[0],
        "loss_last": result.loss_trajectory[-1],
        "final_pixel_iou": result.final_pixel_iou,
        "per_target_soft_iou": result.per_target_soft_iou,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irstd",
        description="Target-adaptive patch losses and detection metrics "
                    "for infrared small target imagery.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="training-set target statistics")
    p.add_argument("manifest")
    p.add_argument("--dilation", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("loss", help="combined loss of one prediction")
    p.add_argument("pred")
    p.add_argument("mask")
    p.add_argument("image")
    p.add_argument("stats")
    p.add_argument("--base", choices=BASE_LOSSES, default="iou")
    p.add_argument("--w_T", dest="w_t", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-p", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--d-min", type=int, default=None)
    p.add_argument("--d-max", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.7)
    p.add_argument("--grad-out", default=None,
                   help="write the combined gradient as raw "
                        "little-endian float32")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_loss)

    def eval_flags(p, dilation=False):
        p.add_argument("pred_dir")
        p.add_argument("manifest")
        p.add_argument("stats", nargs="?", default=None)
        p.add_argument("--threshold", type=float, default=None)
        p.add_argument("--match", choices=("centroid", "overlap"),
                       default=None)
        p.add_argument("--dist", type=float, default=None)
        if dilation:
            p.add_argument("--dilation", type=int, default=None)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="full evaluation report")
    eval_flags(p, dilation=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="threshold sweep as CSV")
    eval_flags(p)
    p.add_argument("--thresholds", default=None,
                   help="comma-separated ascending values in [0,1]")
    p.add_argument("--num-thresholds", type=int, default=None,
                   help="N evenly spaced thresholds over [0,1] inclusive")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("bins", help="detection rate per attribute bin")
    eval_flags(p, dilation=True)
    p.add_argument("--axis", choices=("scale", "contrast"), default="scale")
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--eps-fd", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--spec", default=None,
                   help="scene JSON (default: read stdin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--name", default="scene")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fitdemo",
                       help="optimize a free prediction map by descent")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--base", default="iou",
                   choices=BASE_LOSSES + ("none",))
    p.add_argument("--w_T", dest="w_t", type=float, default=None)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--step-size", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-p", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--d-min", type=int, default=None)
    p.add_argument("--d-max", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.7)
    p.add_argument("--traj-out", default=None)
    p.add_argument("--pred-out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_fitdemo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EmptyTrainingSetError, EmptyDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
