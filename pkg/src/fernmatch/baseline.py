"""Zero-normalized cross-correlation nearest-reference matcher.

The comparison baseline: every class keeps its unwarped reference patch and
a test patch is assigned to the class with the highest ZNCC against those
references. Constant patches have undefined correlation and score 0.
"""

from __future__ import annotations

import numpy as np

from .image import GrayImage, Patch, extract_patch
from .training import TrainedModel

_REF_CACHE_ATTR = "_zncc_reference_rows"


def attach_reference_patches(model: TrainedModel, model_image: GrayImage) -> None:
    """Re-extract per-class reference patches (needed after load_model)."""
    side = model.patch_side
    model.reference_patches = [
        extract_patch(model_image, (int(cls.model_point[0]), int(cls.model_point[1])), side)
        for cls in model.classes
    ]
    if hasattr(model, _REF_CACHE_ATTR):
        delattr(model, _REF_CACHE_ATTR)


def _reference_rows(model: TrainedModel) -> np.ndarray:
    """Zero-mean, unit-norm reference patches as rows; constant refs are 0."""
    cached = getattr(model, _REF_CACHE_ATTR, None)
    if cached is not None:
        return cached
    if model.reference_patches is None:
        raise ValueError(
            "model has no reference patches; call attach_reference_patches first"
        )
    rows = np.stack(
        [p.pixels.astype(np.float64).ravel() for p in model.reference_patches]
    )
    rows -= rows.mean(axis=1, keepdims=True)
    norms = np.sqrt((rows * rows).sum(axis=1, keepdims=True))
    nonzero = norms[:, 0] > 0
    rows[nonzero] /= norms[nonzero]
    rows[~nonzero] = 0.0
    setattr(model, _REF_CACHE_ATTR, rows)
    return rows


def ncc_baseline_classify(model: TrainedModel, patch: Patch) -> tuple[int, float]:
    """Class with the highest ZNCC reference match, ties to the lowest id."""
    rows = _reference_rows(model)
    z = patch.pixels.astype(np.float64).ravel()
    z -= z.mean()
    norm = np.sqrt(np.dot(z, z))
    if norm == 0.0:
        return 0, 0.0
    scores = rows @ (z / norm)
    best = int(np.argmax(scores))
    return best, float(scores[best])
