"""Deterministic high-texture synthetic model images.

Random rotated rectangles and disks at varied sizes and intensities give a
dense supply of strong, well-separated corners for the detector, plus
distinctive local neighborhoods for the classifier. Same seed, same image,
on any platform.
"""

from __future__ import annotations

import numpy as np

from .image import GrayImage


def synthetic_texture(
    width: int = 512, height: int = 512, seed: int = 7, num_shapes: int = 400
) -> GrayImage:
    canvas = np.full((height, width), 128, dtype=np.float64)
    rng = np.random.default_rng(seed)
    scale = min(width, height)

    for _ in range(num_shapes):
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        intensity = rng.uniform(0, 255)
        if rng.random() < 0.5:
            _paint_rect(
                canvas,
                cx,
                cy,
                half_w=rng.uniform(0.008, 0.07) * scale,
                half_h=rng.uniform(0.008, 0.07) * scale,
                angle=rng.uniform(0, np.pi),
                value=intensity,
            )
        else:
            _paint_disk(canvas, cx, cy, radius=rng.uniform(0.006, 0.05) * scale, value=intensity)

    return GrayImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))


def _paint_rect(canvas, cx, cy, half_w, half_h, angle, value):
    h, w = canvas.shape
    reach = np.hypot(half_w, half_h)
    x0, x1 = int(max(0, cx - reach - 1)), int(min(w, cx + reach + 2))
    y0, y1 = int(max(0, cy - reach - 1)), int(min(h, cy + reach + 2))
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs - cx
    dy = ys - cy
    c, s = np.cos(angle), np.sin(angle)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    mask = (np.abs(u) <= half_w) & (np.abs(v) <= half_h)
    canvas[y0:y1, x0:x1][mask] = value


def _paint_disk(canvas, cx, cy, radius, value):
    h, w = canvas.shape
    x0, x1 = int(max(0, cx - radius - 1)), int(min(w, cx + radius + 2))
    y0, y1 = int(max(0, cy - radius - 1)), int(min(h, cy + radius + 2))
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    canvas[y0:y1, x0:x1][mask] = value
