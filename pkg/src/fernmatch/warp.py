"""Random affine view synthesis for training and held-out testing.

A warp is A = R(theta) * R(-phi) * diag(l1, l2) * R(phi) plus a translation,
anchored at the image center. Forward point mapping and backward pixel
sampling use the same transform, so mapped keypoint positions line up with
the warped image content exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage, bilinear_at


@dataclass(frozen=True)
class WarpParams:
    theta: float
    phi: float
    lambda1: float
    lambda2: float
    tx: float
    ty: float
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("scale factors must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def matrix(self) -> np.ndarray:
        """The 2x2 affine part."""
        return _rot(self.theta) @ _rot(-self.phi) @ np.diag(
            [self.lambda1, self.lambda2]
        ) @ _rot(self.phi)


#: Interval defaults are artifact configuration, not values from any source.
@dataclass(frozen=True)
class WarpRanges:
    theta: tuple[float, float] = (-math.pi, math.pi)
    phi: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    lambda1: tuple[float, float] = (0.6, 1.5)
    lambda2: tuple[float, float] = (0.6, 1.5)
    tx: tuple[float, float] = (-10.0, 10.0)
    ty: tuple[float, float] = (-10.0, 10.0)
    noise_sigma: tuple[float, float] = (0.0, 5.0)

    def __post_init__(self):
        for name in ("theta", "phi", "lambda1", "lambda2", "tx", "ty", "noise_sigma"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"empty interval for {name}: ({lo}, {hi})")
        if self.lambda1[0] <= 0 or self.lambda2[0] <= 0:
            raise ValueError("lambda intervals must be strictly positive")
        if self.noise_sigma[0] < 0:
            raise ValueError("noise_sigma interval must be non-negative")


IDENTITY_RANGES = WarpRanges(
    theta=(0.0, 0.0),
    phi=(0.0, 0.0),
    lambda1=(1.0, 1.0),
    lambda2=(1.0, 1.0),
    tx=(0.0, 0.0),
    ty=(0.0, 0.0),
    noise_sigma=(0.0, 0.0),
)


def _rot(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _uniform(rng: np.random.Generator, interval: tuple[float, float]) -> float:
    lo, hi = interval
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def sample_warp(ranges: WarpRanges, rng: np.random.Generator) -> WarpParams:
    """Draw each parameter independently and uniformly from its interval."""
    return WarpParams(
        theta=_uniform(rng, ranges.theta),
        phi=_uniform(rng, ranges.phi),
        lambda1=_uniform(rng, ranges.lambda1),
        lambda2=_uniform(rng, ranges.lambda2),
        tx=_uniform(rng, ranges.tx),
        ty=_uniform(rng, ranges.ty),
        noise_sigma=_uniform(rng, ranges.noise_sigma),
        seed=int(rng.integers(0, 2**63)),
    )


def _center(image_shape: tuple[int, int]) -> np.ndarray:
    h, w = image_shape
    return np.array([(w - 1) / 2.0, (h - 1) / 2.0])


def map_points(params: WarpParams, points: np.ndarray, image_shape: tuple[int, int]) -> np.ndarray:
    """Model-frame (x, y) rows -> warped-frame rows: A (p - c) + c + t."""
    c = _center(image_shape)
    t = np.array([params.tx, params.ty])
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return (pts - c) @ params.matrix().T + c + t


def map_points_inverse(params: WarpParams, points: np.ndarray, image_shape: tuple[int, int]) -> np.ndarray:
    """Warped-frame rows back to the model frame: A^-1 (p - c - t) + c."""
    c = _center(image_shape)
    t = np.array([params.tx, params.ty])
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inv = np.linalg.inv(params.matrix())
    return (pts - c - t) @ inv.T + c


def map_point(params: WarpParams, point: tuple[float, float], image_shape: tuple[int, int]) -> tuple[float, float]:
    out = map_points(params, np.asarray([point]), image_shape)[0]
    return float(out[0]), float(out[1])


def map_point_inverse(params: WarpParams, point: tuple[float, float], image_shape: tuple[int, int]) -> tuple[float, float]:
    out = map_points_inverse(params, np.asarray([point]), image_shape)[0]
    return float(out[0]), float(out[1])


def apply_warp(image: GrayImage, params: WarpParams) -> GrayImage:
    """Backward-map every output pixel through the inverse warp and sample.

    Output has the input's dimensions; pixels pulling from outside the
    source are 0. Additive Gaussian noise (std noise_sigma, driven by
    params.seed) is applied afterwards and the result clamped to [0, 255].
    """
    h, w = image.height, image.width
    c = _center((h, w))
    t = np.array([params.tx, params.ty])
    inv = np.linalg.inv(params.matrix())

    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - c[0] - t[0]
    dy = ys - c[1] - t[1]
    src_x = inv[0, 0] * dx + inv[0, 1] * dy + c[0]
    src_y = inv[1, 0] * dx + inv[1, 1] * dy + c[1]

    # guard band absorbs float error at the boundary (cos(pi/2) != 0 exactly)
    eps = 1e-9
    valid = (
        (src_x >= -eps) & (src_x <= w - 1 + eps)
        & (src_y >= -eps) & (src_y <= h - 1 + eps)
    )
    sx = np.clip(src_x, 0, w - 1)
    sy = np.clip(src_y, 0, h - 1)
    out = bilinear_at(image.pixels, sx, sy)
    out[~valid] = 0.0

    if params.noise_sigma > 0:
        noise_rng = np.random.default_rng(params.seed)
        out += noise_rng.normal(0.0, params.noise_sigma, size=out.shape)

    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))
