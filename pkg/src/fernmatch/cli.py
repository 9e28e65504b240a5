"""fernmatch command line: train, match, eval, inspect.

Exit codes: 0 success, 1 usage, 2 data/format error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .baseline import attach_reference_patches
from .config import ConfigError, RunConfig, load_config
from .detector import DetectorParams
from .evaluate import run_eval, write_eval_csv
from .geometry import (
    best_correspondence_per_class,
    collect_correspondences,
    ransac_homography,
)
from .image import GrayImage, PgmError, load_pgm, save_pgm
from .model_io import ModelFormatError, load_model, save_model
from .training import InsufficientKeypointsError, train_model, training_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

MATCH_CSV_HEADER = "model_x,model_y,test_x,test_y,log_score,is_inlier"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fernmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a run config")
    p_train.add_argument("--config", required=True)

    p_match = sub.add_parser("match", help="match a model against one image")
    p_match.add_argument("--model", required=True)
    p_match.add_argument("--image", required=True)
    p_match.add_argument("--out", required=True)
    p_match.add_argument("--min-score", type=float, default=-math.inf)
    p_match.add_argument("--ransac-iterations", type=int, default=1000)
    p_match.add_argument("--ransac-tol", type=float, default=3.0)
    p_match.add_argument("--seed", type=int, default=0)

    p_eval = sub.add_parser("eval", help="held-out-warp evaluation vs the NCC baseline")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--test-warps", type=int, required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--split-seed", type=int, default=None,
                        help="override the held-out warp stream seed")

    p_inspect = sub.add_parser("inspect", help="print a model file's header and report")
    p_inspect.add_argument("--model", required=True)

    return parser


def _train_from_config(config: RunConfig):
    model_image = load_pgm(config.model_image)
    seeds = config.derived_seeds()
    return model_image, train_model(
        model_image,
        ranges=config.ranges,
        num_warps=config.num_warps,
        h=config.h,
        m=config.m,
        s=config.s,
        n_r=config.n_r,
        selection_seed=seeds.selection,
        train_seed=seeds.training,
        ensemble_seed=seeds.ensemble,
        detector=config.detector,
        patch_side=config.patch_side,
    )


def model_path_for(config: RunConfig) -> str:
    return os.path.join(config.output_dir, "model.fern")


def cmd_train(args) -> int:
    config = load_config(args.config)
    _, model = _train_from_config(config)
    os.makedirs(config.output_dir, exist_ok=True)
    save_model(model, model_path_for(config))
    report_path = os.path.join(config.output_dir, "training_report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(training_report(model), f, indent=2)
        f.write("\n")
    print(f"model written to {model_path_for(config)}")
    print(f"training report written to {report_path}")
    return EXIT_OK


def _annotate(image: GrayImage, correspondences, inlier_flags) -> GrayImage:
    """Inliers get 3x3 white squares, outliers single white pixels."""
    pixels = image.pixels.copy()
    for corr, is_inlier in zip(correspondences, inlier_flags):
        x, y = int(corr.test_point[0]), int(corr.test_point[1])
        if is_inlier:
            x0, x1 = max(0, x - 1), min(image.width, x + 2)
            y0, y1 = max(0, y - 1), min(image.height, y + 2)
            pixels[y0:y1, x0:x1] = 255
        else:
            if 0 <= y < image.height and 0 <= x < image.width:
                pixels[y, x] = 255
    return GrayImage(pixels)


def cmd_match(args) -> int:
    model = load_model(args.model)
    test = load_pgm(args.image)
    os.makedirs(args.out, exist_ok=True)

    correspondences = collect_correspondences(
        model, test, detector=_detector_for_side(model.patch_side),
        min_log_score=args.min_score,
    )
    fit = ransac_homography(
        best_correspondence_per_class(correspondences),
        iterations=args.ransac_iterations,
        inlier_tol_px=args.ransac_tol,
        seed=args.seed,
    )

    # flag every listed correspondence against the final homography
    inlier_flags = [False] * len(correspondences)
    if fit is not None and correspondences:
        h = fit[0]
        src = np.array([c.model_point for c in correspondences])
        dst = np.array([c.test_point for c in correspondences])
        residuals = np.sqrt(((h.project(src) - dst) ** 2).sum(axis=1))
        inlier_flags = (residuals <= args.ransac_tol).tolist()

    save_pgm(_annotate(test, correspondences, inlier_flags),
             os.path.join(args.out, "annotated.pgm"))

    with open(os.path.join(args.out, "correspondences.csv"), "w", encoding="utf-8") as f:
        f.write(MATCH_CSV_HEADER + "\n")
        for corr, flag in zip(correspondences, inlier_flags):
            f.write(
                f"{corr.model_point[0]!r},{corr.model_point[1]!r},"
                f"{corr.test_point[0]!r},{corr.test_point[1]!r},"
                f"{corr.log_score!r},{1 if flag else 0}\n"
            )

    with open(os.path.join(args.out, "homography.txt"), "w", encoding="utf-8") as f:
        if fit is None:
            f.write("no-model\n")
        else:
            f.write(" ".join(f"{v:.17g}" for v in fit[0].matrix.ravel()) + "\n")

    if fit is None:
        print(f"no-model ({len(correspondences)} correspondences)")
    else:
        print(f"{sum(inlier_flags)} inliers / {len(correspondences)} correspondences")
    return EXIT_OK


def _detector_for_side(patch_side: int) -> DetectorParams:
    base = DetectorParams()
    return DetectorParams(
        max_keypoints=base.max_keypoints,
        min_score=base.min_score,
        nms_radius=base.nms_radius,
        border=patch_side // 2,
    )


def cmd_eval(args) -> int:
    config = load_config(args.config)
    seeds = config.derived_seeds()
    model_file = model_path_for(config)
    model_image = load_pgm(config.model_image)
    if os.path.isfile(model_file):
        model = load_model(model_file)
        attach_reference_patches(model, model_image)
    else:
        _, model = _train_from_config(config)
        os.makedirs(config.output_dir, exist_ok=True)
        save_model(model, model_file)

    eval_seed = args.split_seed if args.split_seed is not None else seeds.evaluation
    records, summary = run_eval(
        model, model_image, config, args.test_warps,
        eval_seed=eval_seed, ransac_seed=seeds.ransac,
    )

    os.makedirs(args.out, exist_ok=True)
    write_eval_csv(records, os.path.join(args.out, "eval.csv"))
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")

    print(f"frames: {summary['frames']}")
    for method in ("ferns", "ncc"):
        stats = summary[method]
        print(
            f"{method}: recognition {stats['mean_recognition_rate']:.3f}, "
            f"inliers {stats['mean_inliers']:.1f}, "
            f"classify {stats['mean_classify_us_per_keypoint']:.1f} us/kp"
        )
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    report = training_report(model)
    print(f"patch_side: {model.patch_side}")
    print(f"ferns: {model.ensemble.num_ferns}")
    print(f"tests_per_fern: {model.ensemble.tests_per_fern}")
    print(f"classes: {model.num_classes}")
    print(f"regularizer: {model.table.n_r}")
    print(f"ensemble_seed: {model.ensemble.seed}")
    print(f"total_samples: {report['total_samples']}")
    print(f"empty_bin_fraction: {report['empty_bin_fraction']:.4f}")
    for cls in report["classes"]:
        print(
            f"class {cls['class_id']}: point=({cls['model_x']:.1f}, {cls['model_y']:.1f}) "
            f"stability={cls['stability']:.3f} samples={cls['samples']}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    handlers = {
        "train": cmd_train,
        "match": cmd_match,
        "eval": cmd_eval,
        "inspect": cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, PgmError, ModelFormatError, InsufficientKeypointsError) as exc:
        print(f"fernmatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fernmatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"fernmatch {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
