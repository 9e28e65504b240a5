"""Correspondences, normalized-DLT homography, and seeded RANSAC.

Per-keypoint classifications become object-level detections here: classify
every test keypoint, fit a homography to the implied model-to-test pairs,
and count inliers. A frame with no consistent model is a valid outcome
(None), not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import classify
from .detector import DetectorParams, detect_keypoints
from .image import GrayImage, PatchBorderError, extract_patch
from .training import TrainedModel


class DegenerateGeometryError(ValueError):
    """Point configuration does not determine a homography."""


@dataclass(frozen=True)
class Correspondence:
    model_point: tuple[float, float]
    test_point: tuple[float, float]
    log_score: float


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map, normalized so matrix[2, 2] == 1."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(np.linalg.det(self.matrix)) <= 1e-12:
            raise DegenerateGeometryError("homography is not invertible")

    def project(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the homography."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        q = np.hstack([pts, ones]) @ self.matrix.T
        return q[:, :2] / q[:, 2:3]


def _normalization(pts: np.ndarray) -> np.ndarray:
    """Hartley isotropic normalization: centroid to origin, mean dist sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if dist < 1e-12:
        raise DegenerateGeometryError("coincident points")
    scale = math.sqrt(2.0) / dist
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_homography_dlt(pairs: list[Correspondence]) -> Homography:
    """Normalized DLT from >= 4 correspondences (4 is the minimal case)."""
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 correspondences, got {len(pairs)}")
    src = np.array([c.model_point for c in pairs], dtype=np.float64)
    dst = np.array([c.test_point for c in pairs], dtype=np.float64)

    t_src = _normalization(src)
    t_dst = _normalization(dst)
    sn = (np.hstack([src, np.ones((len(src), 1))]) @ t_src.T)[:, :2]
    dn = (np.hstack([dst, np.ones((len(dst), 1))]) @ t_dst.T)[:, :2]

    n = len(pairs)
    a = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v

    _, sv, vt = np.linalg.svd(a)
    if sv[0] < 1e-12 or sv[7] / sv[0] < 1e-10:
        raise DegenerateGeometryError("rank-deficient correspondence system")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    if abs(h[2, 2]) < 1e-12:
        raise DegenerateGeometryError("homography at infinity")
    h /= h[2, 2]
    if abs(np.linalg.det(h)) <= 1e-12:
        raise DegenerateGeometryError("singular homography")
    return Homography(h)


def _inlier_mask(
    h: Homography, src: np.ndarray, dst: np.ndarray, tol: float
) -> np.ndarray:
    residual = np.sqrt(((h.project(src) - dst) ** 2).sum(axis=1))
    return residual <= tol


def ransac_homography(
    correspondences: list[Correspondence],
    iterations: int = 1000,
    inlier_tol_px: float = 3.0,
    seed: int = 0,
) -> tuple[Homography, np.ndarray] | None:
    """Largest-consensus homography and inlier indices, or None.

    Each iteration fits the DLT to 4 distinct random correspondences
    (degenerate samples are skipped) and counts points reprojecting within
    inlier_tol_px. The best model is refit on all its inliers; if the
    refit loses consensus, the pre-refit model is kept. Deterministic in
    seed. Returns None when fewer than 4 correspondences exist or no
    sample reaches 4 inliers.
    """
    n = len(correspondences)
    if n < 4:
        return None
    src = np.array([c.model_point for c in correspondences], dtype=np.float64)
    dst = np.array([c.test_point for c in correspondences], dtype=np.float64)

    rng = np.random.default_rng(seed)
    best_count = 0
    best_h: Homography | None = None
    best_mask: np.ndarray | None = None
    for _ in range(iterations):
        idx = rng.choice(n, size=4, replace=False)
        sample = [correspondences[i] for i in idx]
        try:
            h = estimate_homography_dlt(sample)
        except DegenerateGeometryError:
            continue
        mask = _inlier_mask(h, src, dst, inlier_tol_px)
        count = int(mask.sum())
        if count > best_count:
            best_count, best_h, best_mask = count, h, mask

    if best_h is None or best_count < 4:
        return None

    inlier_idx = np.flatnonzero(best_mask)
    try:
        refit = estimate_homography_dlt([correspondences[i] for i in inlier_idx])
        refit_mask = _inlier_mask(refit, src, dst, inlier_tol_px)
        if int(refit_mask.sum()) >= best_count:
            return refit, np.flatnonzero(refit_mask)
    except DegenerateGeometryError:
        pass
    return best_h, inlier_idx


def best_correspondence_per_class(
    correspondences: list[Correspondence],
) -> list[Correspondence]:
    """Keep only the highest-scoring correspondence for each model point.

    Every test keypoint classifies to some class, so raw correspondence
    lists carry one entry per keypoint and mostly-wrong duplicates per
    class. Reducing to the best candidate per class raises RANSAC's
    inlier ratio from h/num_keypoints to roughly the recognition rate.
    Deterministic: ties keep the earlier entry; output preserves input
    order.
    """
    best: dict[tuple[float, float], int] = {}
    for i, corr in enumerate(correspondences):
        key = corr.model_point
        j = best.get(key)
        if j is None or correspondences[j].log_score < corr.log_score:
            best[key] = i
    return [correspondences[i] for i in sorted(best.values())]


def collect_correspondences(
    model: TrainedModel,
    test: GrayImage,
    detector: DetectorParams = DetectorParams(),
    min_log_score: float = -math.inf,
) -> list[Correspondence]:
    """Classify every detected test keypoint, keep confident ones.

    Each kept keypoint becomes a correspondence from its predicted class's
    model point to the keypoint location.
    """
    side = model.patch_side
    border = max(detector.border, side // 2)
    keypoints = detect_keypoints(
        test,
        max_count=detector.max_keypoints,
        min_score=detector.min_score,
        nms_radius=detector.nms_radius,
        border=border,
    )
    out = []
    for kp in keypoints:
        try:
            patch = extract_patch(test, (kp.x, kp.y), side)
        except PatchBorderError:
            continue
        class_id, score, _ = classify(model.table, model.ensemble, patch)
        if score >= min_log_score:
            out.append(
                Correspondence(
                    model_point=model.classes[class_id].model_point,
                    test_point=(float(kp.x), float(kp.y)),
                    log_score=score,
                )
            )
    return out
