"""End-to-end model building from a single model image.

Classes are the stable keypoints: the corners most often re-detected across
randomly warped views. Training then extracts each class's patch from a
fresh stream of warps and accumulates fern counts under its class id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierTable, FernCounts, accumulate, counts_new, finalize
from .detector import DetectorParams, detect_keypoints
from .ferns import FernEnsemble, build_ensemble
from .image import DEFAULT_PATCH_SIDE, GrayImage, Patch, PatchBorderError, extract_patch
from .warp import WarpRanges, apply_warp, map_points, map_points_inverse, sample_warp

VOTE_RADIUS_PX = 2.0


class InsufficientKeypointsError(RuntimeError):
    """Fewer model keypoints detected than classes requested."""

    def __init__(self, requested: int, available: int):
        super().__init__(
            f"requested {requested} classes but only {available} model keypoints detected"
        )
        self.requested = requested
        self.available = available


@dataclass(frozen=True)
class PatchClass:
    class_id: int
    model_point: tuple[float, float]
    stability: float


@dataclass(frozen=True)
class TrainingConfig:
    ranges: WarpRanges
    num_warps: int
    selection_seed: int
    train_seed: int
    ensemble_seed: int
    detector: DetectorParams
    n_r: float
    patch_side: int


@dataclass(eq=False)
class TrainedModel:
    classes: list[PatchClass]
    ensemble: FernEnsemble
    counts: FernCounts
    table: ClassifierTable
    # None for models read back from disk; the file keeps only header fields
    training_config: TrainingConfig | None
    # unwarped per-class patches; not serialized, rebuilt from the model image
    reference_patches: list[Patch] | None = field(default=None, repr=False)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def patch_side(self) -> int:
        return self.ensemble.patch_side


def _detect(image: GrayImage, detector: DetectorParams, patch_side: int):
    border = max(detector.border, patch_side // 2)
    return detect_keypoints(
        image,
        max_count=detector.max_keypoints,
        min_score=detector.min_score,
        nms_radius=detector.nms_radius,
        border=border,
    )


def select_stable_keypoints(
    model: GrayImage,
    ranges: WarpRanges,
    num_warps: int,
    h: int,
    detector: DetectorParams = DetectorParams(),
    seed: int = 0,
    patch_side: int = DEFAULT_PATCH_SIDE,
) -> list[PatchClass]:
    """Pick the h model keypoints most often re-detected across warps.

    Every warp's detections are mapped back to the model frame; a model
    keypoint counts as re-detected if any of them lands within
    VOTE_RADIUS_PX. Ranking is by vote count, then detector score, then
    (y, x).
    """
    base = _detect(model, detector, patch_side)
    if len(base) < h:
        raise InsufficientKeypointsError(requested=h, available=len(base))

    base_pts = np.array([(kp.x, kp.y) for kp in base], dtype=np.float64)
    votes = np.zeros(len(base), dtype=np.int64)
    shape = (model.height, model.width)

    rng = np.random.default_rng(seed)
    for _ in range(num_warps):
        params = sample_warp(ranges, rng)
        warped = apply_warp(model, params)
        detections = _detect(warped, detector, patch_side)
        if not detections:
            continue
        det_pts = np.array([(kp.x, kp.y) for kp in detections], dtype=np.float64)
        back = map_points_inverse(params, det_pts, shape)
        d2 = ((base_pts[:, None, :] - back[None, :, :]) ** 2).sum(axis=2)
        votes += d2.min(axis=1) <= VOTE_RADIUS_PX**2

    scores = np.array([kp.score for kp in base])
    ys = np.array([kp.y for kp in base])
    xs = np.array([kp.x for kp in base])
    order = np.lexsort((xs, ys, -scores, -votes))[:h]

    stability = votes / num_warps if num_warps > 0 else np.zeros(len(base))
    return [
        PatchClass(
            class_id=i,
            model_point=(float(base[j].x), float(base[j].y)),
            stability=float(stability[j]),
        )
        for i, j in enumerate(order)
    ]


def train_model(
    model: GrayImage,
    ranges: WarpRanges = WarpRanges(),
    num_warps: int = 1000,
    h: int = 100,
    m: int = 30,
    s: int = 11,
    n_r: float = 1.0,
    selection_seed: int = 1,
    train_seed: int = 2,
    ensemble_seed: int = 3,
    detector: DetectorParams = DetectorParams(),
    patch_side: int = DEFAULT_PATCH_SIDE,
) -> TrainedModel:
    """Select stable classes, then accumulate their patches over num_warps views.

    The selection and training warp streams are seeded independently.
    Classes that receive no training patch are kept (regularization keeps
    their scores finite); the training report flags them.
    """
    classes = select_stable_keypoints(
        model, ranges, num_warps, h, detector=detector, seed=selection_seed,
        patch_side=patch_side,
    )
    ensemble = build_ensemble(m, s, patch_side, ensemble_seed)
    counts = counts_new(m, s, h)

    model_pts = np.array([cls.model_point for cls in classes], dtype=np.float64)
    shape = (model.height, model.width)

    rng = np.random.default_rng(train_seed)
    for _ in range(num_warps):
        params = sample_warp(ranges, rng)
        warped = apply_warp(model, params)
        mapped = map_points(params, model_pts, shape)
        centers = np.rint(mapped).astype(np.int64)
        for cls, (cx, cy) in zip(classes, centers):
            try:
                patch = extract_patch(warped, (int(cx), int(cy)), patch_side)
            except PatchBorderError:
                continue
            accumulate(counts, ensemble, patch, cls.class_id)

    table = finalize(counts, n_r)
    references = [
        extract_patch(model, (int(cls.model_point[0]), int(cls.model_point[1])), patch_side)
        for cls in classes
    ]
    config = TrainingConfig(
        ranges=ranges,
        num_warps=num_warps,
        selection_seed=selection_seed,
        train_seed=train_seed,
        ensemble_seed=ensemble_seed,
        detector=detector,
        n_r=n_r,
        patch_side=patch_side,
    )
    return TrainedModel(
        classes=classes,
        ensemble=ensemble,
        counts=counts,
        table=table,
        training_config=config,
        reference_patches=references,
    )


def training_report(model: TrainedModel) -> dict:
    """Per-class sample counts, stability, and empty-bin fractions."""
    counts = model.counts
    per_class = []
    for cls in model.classes:
        i = cls.class_id
        per_class.append(
            {
                "class_id": i,
                "model_x": cls.model_point[0],
                "model_y": cls.model_point[1],
                "stability": cls.stability,
                "samples": int(counts.totals[i]),
                "empty_bin_fraction": float((counts.counts[:, :, i] == 0).mean()),
            }
        )
    return {
        "num_classes": model.num_classes,
        "num_ferns": model.ensemble.num_ferns,
        "tests_per_fern": model.ensemble.tests_per_fern,
        "patch_side": model.patch_side,
        "regularizer": model.table.n_r,
        "total_samples": int(counts.totals.sum()),
        "empty_bin_fraction": float((counts.counts == 0).mean()),
        "zero_sample_classes": [int(i) for i in np.nonzero(counts.totals == 0)[0]],
        "classes": per_class,
    }
