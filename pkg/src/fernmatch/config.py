"""Flat key=value run configuration shared by the train and eval commands.

One `key = value` per line, `#` starts a comment, unknown keys are errors.
Relative paths resolve against the config file's directory. Sub-seeds for
the independent random streams (keypoint selection, training warps, fern
placement, held-out eval warps, RANSAC) are derived from the single
`seed` key.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .detector import DetectorParams
from .image import DEFAULT_PATCH_SIDE
from .warp import WarpRanges


class ConfigError(ValueError):
    """Unparseable or invalid run configuration."""


@dataclass(frozen=True)
class DerivedSeeds:
    selection: int
    training: int
    ensemble: int
    evaluation: int
    ransac: int


@dataclass
class RunConfig:
    model_image: str
    output_dir: str
    num_warps: int = 1000
    h: int = 100
    m: int = 30
    s: int = 11
    n_r: float = 1.0
    patch_side: int = DEFAULT_PATCH_SIDE
    ranges: WarpRanges = field(default_factory=WarpRanges)
    detector: DetectorParams = field(default_factory=DetectorParams)
    ransac_iterations: int = 1000
    ransac_tol_px: float = 3.0
    min_log_score: float = -math.inf
    seed: int = 7

    def derived_seeds(self) -> DerivedSeeds:
        state = np.random.SeedSequence(self.seed).generate_state(5, dtype=np.uint64)
        return DerivedSeeds(*(int(v) for v in state))

    def validate(self) -> None:
        if not os.path.isfile(self.model_image):
            raise ConfigError(f"model_image: no such file: {self.model_image}")
        if self.num_warps < 0:
            raise ConfigError("num_warps: must be >= 0")
        if self.h < 1:
            raise ConfigError("h: must be >= 1")
        if self.m < 1:
            raise ConfigError("m: must be >= 1")
        if not 1 <= self.s <= 16:
            raise ConfigError("s: must be in [1, 16]")
        if self.n_r <= 0:
            raise ConfigError("n_r: must be > 0")
        if self.patch_side < 3 or self.patch_side % 2 == 0:
            raise ConfigError("patch_side: must be odd and >= 3")
        if self.ransac_iterations < 1:
            raise ConfigError("ransac_iterations: must be >= 1")
        if self.ransac_tol_px <= 0:
            raise ConfigError("ransac_tol_px: must be > 0")
        if self.detector.max_keypoints < 1:
            raise ConfigError("detector_max_keypoints: must be >= 1")
        if self.detector.min_score < 0:
            raise ConfigError("detector_min_score: must be >= 0")
        if self.detector.nms_radius < 1:
            raise ConfigError("detector_nms_radius: must be >= 1")
        try:
            WarpRanges(**{f.name: getattr(self.ranges, f.name) for f in fields(WarpRanges)})
        except ValueError as exc:
            raise ConfigError(f"warp ranges: {exc}") from exc


_INT_KEYS = {
    "num_warps", "h", "m", "s", "patch_side", "seed",
    "ransac_iterations", "detector_max_keypoints", "detector_nms_radius",
}
_FLOAT_KEYS = {
    "n_r", "ransac_tol_px", "min_log_score", "detector_min_score",
    "theta_min", "theta_max", "phi_min", "phi_max",
    "lambda1_min", "lambda1_max", "lambda2_min", "lambda2_max",
    "tx_min", "tx_max", "ty_min", "ty_max", "noise_min", "noise_max",
}
_PATH_KEYS = {"model_image", "output_dir"}


def parse_config_text(text: str, base_dir: str = ".") -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {val!r}") from None
        elif key in _PATH_KEYS:
            values[key] = os.path.normpath(os.path.join(base_dir, val))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    if "model_image" not in values:
        raise ConfigError("model_image: required key missing")
    if "output_dir" not in values:
        raise ConfigError("output_dir: required key missing")

    defaults = WarpRanges()

    def interval(name: str, default: tuple[float, float]) -> tuple[float, float]:
        lo = values.pop(f"{name}_min", default[0])
        hi = values.pop(f"{name}_max", default[1])
        return (float(lo), float(hi))

    try:
        ranges = WarpRanges(
            theta=interval("theta", defaults.theta),
            phi=interval("phi", defaults.phi),
            lambda1=interval("lambda1", defaults.lambda1),
            lambda2=interval("lambda2", defaults.lambda2),
            tx=interval("tx", defaults.tx),
            ty=interval("ty", defaults.ty),
            noise_sigma=interval("noise", defaults.noise_sigma),
        )
    except ValueError as exc:
        raise ConfigError(f"warp ranges: {exc}") from exc

    det_defaults = DetectorParams()
    detector = DetectorParams(
        max_keypoints=int(values.pop("detector_max_keypoints", det_defaults.max_keypoints)),
        min_score=float(values.pop("detector_min_score", det_defaults.min_score)),
        nms_radius=int(values.pop("detector_nms_radius", det_defaults.nms_radius)),
        border=int(values.get("patch_side", DEFAULT_PATCH_SIDE)) // 2,
    )

    config = RunConfig(ranges=ranges, detector=detector, **values)  # type: ignore[arg-type]
    config.validate()
    return config


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)))
