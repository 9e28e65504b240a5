"""Grayscale image container, binary PGM I/O, sampling, smoothing, patches.

Everything downstream works on 8-bit grayscale rasters. Images and patches
are treated as immutable once constructed; operations return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class PgmError(Exception):
    """Base for PGM codec failures."""


class PgmFormatError(PgmError):
    """Malformed magic number or header."""


class PgmUnsupportedError(PgmError):
    """Valid PGM but outside the supported subset (maxval > 255)."""


class PgmTruncatedError(PgmError, OSError):
    """Pixel payload shorter than the header promises."""


class PatchBorderError(ValueError):
    """Requested patch window crosses the image border."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster. `pixels` is a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError("GrayImage needs a 2-d uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("GrayImage must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class Patch:
    """Square window around a keypoint; odd side so the center is a pixel."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError("Patch needs a 2-d uint8 array")
        if p.shape[0] != p.shape[1]:
            raise ValueError("Patch must be square")
        if p.shape[0] < 1 or p.shape[0] % 2 == 0:
            raise ValueError("Patch side must be odd and positive")

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


DEFAULT_PATCH_SIDE = 33


def load_pgm(path) -> GrayImage:
    """Read a binary (P5) PGM file. Header comments (#...) are skipped."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P5":
        raise PgmFormatError(f"{path}: not a binary PGM (magic {data[:2]!r})")

    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmFormatError(f"{path}: unterminated header comment")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise PgmFormatError(f"{path}: bad header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmFormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval > 255:
        raise PgmUnsupportedError(f"{path}: maxval {maxval} > 255 unsupported")
    if maxval < 1:
        raise PgmFormatError(f"{path}: bad maxval {maxval}")

    pos += 1  # exactly one whitespace byte separates header from payload
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise PgmTruncatedError(
            f"{path}: expected {width * height} pixel bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return GrayImage(pixels)


def save_pgm(image: GrayImage, path) -> None:
    """Write binary PGM: 'P5\\n<w> <h>\\n255\\n' then raw row-major bytes."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(image.pixels.tobytes())


def bilinear_at(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized bilinear lookup. Coordinates must already be in range."""
    h, w = pixels.shape
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.clip(x0, 0, w - 2) if w > 1 else np.zeros_like(x0)
    y0 = np.clip(y0, 0, h - 2) if h > 1 else np.zeros_like(y0)
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    p = pixels.astype(np.float64)
    top = p[y0, x0] * (1.0 - fx) + p[y0, x1] * fx
    bot = p[y1, x0] * (1.0 - fx) + p[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def sample_bilinear(image: GrayImage, x: float, y: float) -> float:
    """Bilinear blend of the 4 neighbors; exact at integer coordinates."""
    if not (0.0 <= x <= image.width - 1) or not (0.0 <= y <= image.height - 1):
        raise ValueError(
            f"sample coordinate ({x}, {y}) outside image {image.width}x{image.height}"
        )
    return float(bilinear_at(image.pixels, np.asarray([x]), np.asarray([y]))[0])


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian, radius ceil(3*sigma)."""
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(image: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur with clamp-to-edge borders. sigma=0 copies."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return GrayImage(image.pixels.copy())
    smoothed = smooth_array(image.pixels.astype(np.float64), sigma)
    return GrayImage(np.clip(np.rint(smoothed), 0, 255).astype(np.uint8))


def smooth_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Float-valued separable Gaussian blur, clamp-to-edge."""
    if sigma == 0:
        return arr.astype(np.float64, copy=True)
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(arr.astype(np.float64), k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def extract_patch(image: GrayImage, center: tuple[int, int], side: int = DEFAULT_PATCH_SIDE) -> Patch:
    """Copy the side x side window centered at integer (x, y)."""
    if side < 1 or side % 2 == 0:
        raise ValueError(f"patch side must be odd and positive, got {side}")
    cx, cy = int(center[0]), int(center[1])
    r = side // 2
    if cx - r < 0 or cy - r < 0 or cx + r >= image.width or cy + r >= image.height:
        raise PatchBorderError(
            f"patch side {side} at ({cx}, {cy}) crosses the border of "
            f"{image.width}x{image.height} image"
        )
    return Patch(image.pixels[cy - r : cy + r + 1, cx - r : cx + r + 1].copy())
