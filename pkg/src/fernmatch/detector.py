"""Shi-Tomasi corner detection with non-maximum suppression.

The response at a pixel is the minimum eigenvalue of the 3x3-window
structure tensor of central-difference gradients, computed on a sigma=1
smoothed copy of the image. Output order is deterministic: descending
score, ties broken by (y, x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import DEFAULT_PATCH_SIDE, GrayImage, smooth_array

GRADIENT_SIGMA = 1.0


@dataclass(frozen=True)
class Keypoint:
    x: int
    y: int
    score: float


@dataclass(frozen=True)
class DetectorParams:
    max_keypoints: int = 400
    min_score: float = 30.0
    nms_radius: int = 4
    border: int = DEFAULT_PATCH_SIDE // 2


def corner_response(image: GrayImage) -> np.ndarray:
    """Minimum-eigenvalue response map, same shape as the image."""
    smoothed = smooth_array(image.pixels, GRADIENT_SIGMA)
    gx = np.zeros_like(smoothed)
    gy = np.zeros_like(smoothed)
    gx[:, 1:-1] = (smoothed[:, 2:] - smoothed[:, :-2]) * 0.5
    gy[1:-1, :] = (smoothed[2:, :] - smoothed[:-2, :]) * 0.5

    # 3x3 window sums of the gradient products
    sxx = ndimage.uniform_filter(gx * gx, size=3, mode="nearest") * 9.0
    syy = ndimage.uniform_filter(gy * gy, size=3, mode="nearest") * 9.0
    sxy = ndimage.uniform_filter(gx * gy, size=3, mode="nearest") * 9.0

    half_trace = (sxx + syy) * 0.5
    half_diff = (sxx - syy) * 0.5
    return half_trace - np.sqrt(half_diff * half_diff + sxy * sxy)


def detect_keypoints(
    image: GrayImage,
    max_count: int = 400,
    min_score: float = 30.0,
    nms_radius: int = 4,
    border: int = DEFAULT_PATCH_SIDE // 2,
) -> list[Keypoint]:
    """Up to max_count corners, NMS-separated by Chebyshev radius nms_radius.

    Keypoints within `border` pixels of the image edge are discarded so a
    full patch can always be extracted around a returned point.
    """
    if image.width < 7 or image.height < 7:
        raise ValueError(f"image {image.width}x{image.height} too small (need 7x7)")
    if max_count < 1:
        raise ValueError("max_count must be positive")

    resp = corner_response(image)
    size = 2 * int(nms_radius) + 1
    local_max = resp >= ndimage.maximum_filter(resp, size=size, mode="nearest")

    mask = local_max & (resp > 0.0) & (resp >= min_score)
    if border > 0:
        interior = np.zeros_like(mask)
        if image.height > 2 * border and image.width > 2 * border:
            interior[border : image.height - border, border : image.width - border] = True
        mask &= interior

    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return []
    scores = resp[ys, xs]
    order = np.lexsort((xs, ys, -scores))
    xs, ys, scores = xs[order], ys[order], scores[order]

    # greedy suppression; after the local-max filter only ties can conflict
    kept: list[Keypoint] = []
    kx = np.empty(len(xs), dtype=np.int64)
    ky = np.empty(len(ys), dtype=np.int64)
    for x, y, s in zip(xs, ys, scores):
        n = len(kept)
        if n:
            cheb = np.maximum(np.abs(kx[:n] - x), np.abs(ky[:n] - y))
            if cheb.min() <= nms_radius:
                continue
        kx[n] = x
        ky[n] = y
        kept.append(Keypoint(int(x), int(y), float(s)))
        if len(kept) == max_count:
            break
    return kept
