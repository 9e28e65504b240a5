"""Held-out-warp evaluation: recognition rates, inliers per frame, timing.

Every test frame is a fresh warp of the model image from a seed stream
disjoint from training. Ground-truth keypoint positions come from the warp's
forward map. Both methods (ferns, NCC baseline) classify the same detected
patches; each frame yields one record per method.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .baseline import ncc_baseline_classify
from .classifier import classify
from .config import RunConfig
from .detector import detect_keypoints
from .geometry import Correspondence, best_correspondence_per_class, ransac_homography
from .image import GrayImage, PatchBorderError, extract_patch
from .training import TrainedModel
from .warp import apply_warp, map_points, sample_warp

EVAL_CSV_HEADER = (
    "frame,method,total_gt,detected,recognized,recognition_rate,"
    "num_correspondences,num_inliers,classify_us_per_keypoint"
)

RECOGNITION_RADIUS_PX = 3.0


@dataclass(frozen=True)
class EvalRecord:
    frame: int
    method: str
    total_gt: int
    detected: int
    recognized: int
    recognition_rate: float
    num_correspondences: int
    num_inliers: int
    classify_us_per_keypoint: float

    def csv_row(self) -> str:
        return (
            f"{self.frame},{self.method},{self.total_gt},{self.detected},"
            f"{self.recognized},{self.recognition_rate!r},"
            f"{self.num_correspondences},{self.num_inliers},"
            f"{self.classify_us_per_keypoint:.3f}"
        )


def _classify_frame(model: TrainedModel, patches, classify_one):
    """Run one method over all patches, timing the loop."""
    predictions = []
    scores = []
    start = time.perf_counter()
    for patch in patches:
        class_id, score = classify_one(patch)
        predictions.append(class_id)
        scores.append(score)
    elapsed = time.perf_counter() - start
    us_per_kp = (elapsed * 1e6 / len(patches)) if patches else 0.0
    return predictions, scores, us_per_kp


def _frame_record(
    frame_idx: int,
    method: str,
    model: TrainedModel,
    kp_points: np.ndarray,
    predictions,
    scores,
    us_per_kp: float,
    gt_points: np.ndarray,
    present: np.ndarray,
    min_score: float,
    ransac_iterations: int,
    ransac_tol_px: float,
    ransac_seed: int,
) -> EvalRecord:
    total = int(present.sum())
    detected = 0
    recognized = 0
    if total and len(kp_points):
        d2 = ((gt_points[:, None, :] - kp_points[None, :, :]) ** 2).sum(axis=2)
        near = d2 <= RECOGNITION_RADIUS_PX**2
        preds = np.asarray(predictions)
        for i in np.flatnonzero(present):
            near_kps = np.flatnonzero(near[i])
            if len(near_kps) == 0:
                continue
            detected += 1
            if np.any(preds[near_kps] == i):
                recognized += 1

    correspondences = [
        Correspondence(
            model_point=model.classes[cid].model_point,
            test_point=(float(x), float(y)),
            log_score=float(score),
        )
        for (x, y), cid, score in zip(kp_points, predictions, scores)
        if score >= min_score
    ]
    fit = ransac_homography(
        best_correspondence_per_class(correspondences),
        iterations=ransac_iterations,
        inlier_tol_px=ransac_tol_px,
        seed=ransac_seed,
    )
    num_inliers = len(fit[1]) if fit is not None else 0

    return EvalRecord(
        frame=frame_idx,
        method=method,
        total_gt=total,
        detected=detected,
        recognized=recognized,
        recognition_rate=(recognized / total) if total else 0.0,
        num_correspondences=len(correspondences),
        num_inliers=num_inliers,
        classify_us_per_keypoint=us_per_kp,
    )


def run_eval(
    model: TrainedModel,
    model_image: GrayImage,
    config: RunConfig,
    num_test_warps: int,
    eval_seed: int,
    ransac_seed: int,
) -> tuple[list[EvalRecord], dict]:
    """Evaluate ferns and the NCC baseline over held-out warps."""
    if model.reference_patches is None:
        raise ValueError("model needs reference patches for the NCC baseline")

    side = model.patch_side
    border = max(config.detector.border, side // 2)
    shape = (model_image.height, model_image.width)
    model_pts = np.array([c.model_point for c in model.classes], dtype=np.float64)

    records: list[EvalRecord] = []
    rng = np.random.default_rng(eval_seed)
    for frame_idx in range(num_test_warps):
        params = sample_warp(config.ranges, rng)
        frame = apply_warp(model_image, params)
        gt = map_points(params, model_pts, shape)
        present = (
            (gt[:, 0] >= border)
            & (gt[:, 0] <= model_image.width - 1 - border)
            & (gt[:, 1] >= border)
            & (gt[:, 1] <= model_image.height - 1 - border)
        )

        keypoints = detect_keypoints(
            frame,
            max_count=config.detector.max_keypoints,
            min_score=config.detector.min_score,
            nms_radius=config.detector.nms_radius,
            border=border,
        )
        patches = []
        kp_points = []
        for kp in keypoints:
            try:
                patches.append(extract_patch(frame, (kp.x, kp.y), side))
            except PatchBorderError:
                continue
            kp_points.append((kp.x, kp.y))
        kp_points = np.asarray(kp_points, dtype=np.float64).reshape(-1, 2)

        fern_preds, fern_scores, fern_us = _classify_frame(
            model,
            patches,
            lambda p: classify(model.table, model.ensemble, p)[:2],
        )
        ncc_preds, ncc_scores, ncc_us = _classify_frame(
            model, patches, lambda p: ncc_baseline_classify(model, p)
        )

        records.append(
            _frame_record(
                frame_idx, "ferns", model, kp_points, fern_preds, fern_scores,
                fern_us, gt, present, config.min_log_score,
                config.ransac_iterations, config.ransac_tol_px,
                ransac_seed + 2 * frame_idx,
            )
        )
        records.append(
            _frame_record(
                frame_idx, "ncc", model, kp_points, ncc_preds, ncc_scores,
                ncc_us, gt, present, -math.inf,
                config.ransac_iterations, config.ransac_tol_px,
                ransac_seed + 2 * frame_idx + 1,
            )
        )

    return records, summarize(records)


def summarize(records: list[EvalRecord]) -> dict:
    summary: dict = {"frames": len({r.frame for r in records})}
    for method in ("ferns", "ncc"):
        rows = [r for r in records if r.method == method]
        if rows:
            summary[method] = {
                "mean_recognition_rate": float(np.mean([r.recognition_rate for r in rows])),
                "mean_inliers": float(np.mean([r.num_inliers for r in rows])),
                "mean_classify_us_per_keypoint": float(
                    np.mean([r.classify_us_per_keypoint for r in rows])
                ),
            }
        else:
            summary[method] = {
                "mean_recognition_rate": 0.0,
                "mean_inliers": 0.0,
                "mean_classify_us_per_keypoint": 0.0,
            }
    return summary


def write_eval_csv(records: list[EvalRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(EVAL_CSV_HEADER + "\n")
        for record in records:
            f.write(record.csv_row() + "\n")
