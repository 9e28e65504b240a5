"""Binary pixel-pair features grouped into ferns.

A fern is an ordered list of S two-pixel comparisons inside a patch; its
value is the S-bit integer built from the comparison outcomes (first test
is the least significant bit). An ensemble holds M ferns generated from a
single seed; the generation order of the pairs fixes which feature lands
in which fern.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .image import Patch

MAX_TESTS_PER_FERN = 16


@dataclass(frozen=True)
class FernTestPair:
    """Two patch-relative (dx, dy) offsets to compare."""

    d1: tuple[int, int]
    d2: tuple[int, int]

    def __post_init__(self):
        if self.d1 == self.d2:
            raise ValueError("test pair offsets must differ")


@dataclass(frozen=True)
class Fern:
    tests: tuple[FernTestPair, ...]


@dataclass(frozen=True)
class FernEnsemble:
    ferns: tuple[Fern, ...]
    patch_side: int
    seed: int

    @property
    def num_ferns(self) -> int:
        return len(self.ferns)

    @property
    def tests_per_fern(self) -> int:
        return len(self.ferns[0].tests)

    @cached_property
    def _probe_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat patch indices for all d1 / d2 probes plus the bit weights."""
        c = self.patch_side // 2
        idx1 = []
        idx2 = []
        for fern in self.ferns:
            for pair in fern.tests:
                idx1.append((c + pair.d1[1]) * self.patch_side + (c + pair.d1[0]))
                idx2.append((c + pair.d2[1]) * self.patch_side + (c + pair.d2[0]))
        pow2 = 1 << np.arange(self.tests_per_fern, dtype=np.int64)
        return np.asarray(idx1, dtype=np.intp), np.asarray(idx2, dtype=np.intp), pow2


def build_ensemble(m: int, s: int, patch_side: int, seed: int) -> FernEnsemble:
    """Generate M*S test pairs from one seeded stream.

    The j-th generated pair goes to fern j // S at position j % S. Pairs
    whose two offsets coincide are redrawn.
    """
    if m < 1:
        raise ValueError("need at least one fern")
    if not 1 <= s <= MAX_TESTS_PER_FERN:
        raise ValueError(
            f"tests per fern must be in [1, {MAX_TESTS_PER_FERN}] "
            f"(2^s table entries per fern per class), got {s}"
        )
    if patch_side < 3:
        raise ValueError("patch_side must be at least 3")

    lo = -(patch_side // 2)
    hi = patch_side - 1 - patch_side // 2
    rng = np.random.default_rng(seed)
    ferns = []
    for _ in range(m):
        tests = []
        for _ in range(s):
            while True:
                dx1, dy1, dx2, dy2 = (int(v) for v in rng.integers(lo, hi + 1, size=4))
                if (dx1, dy1) != (dx2, dy2):
                    break
            tests.append(FernTestPair((dx1, dy1), (dx2, dy2)))
        ferns.append(Fern(tuple(tests)))
    return FernEnsemble(tuple(ferns), patch_side, seed)


def compute_feature(patch: Patch, pair: FernTestPair) -> int:
    """1 iff intensity at center+d1 is strictly below intensity at center+d2."""
    c = patch.side // 2
    i1 = patch.pixels[c + pair.d1[1], c + pair.d1[0]]
    i2 = patch.pixels[c + pair.d2[1], c + pair.d2[0]]
    return 1 if i1 < i2 else 0


def fern_value(patch: Patch, fern: Fern) -> int:
    """S-bit value; the fern's first test is the least significant bit."""
    value = 0
    for j, pair in enumerate(fern.tests):
        value |= compute_feature(patch, pair) << j
    return value


def fern_values(patch: Patch, ensemble: FernEnsemble) -> np.ndarray:
    """All M fern values at once; equals fern_value fern by fern."""
    if patch.side != ensemble.patch_side:
        raise ValueError(
            f"patch side {patch.side} does not match ensemble side {ensemble.patch_side}"
        )
    idx1, idx2, pow2 = ensemble._probe_arrays
    flat = patch.pixels.ravel()
    bits = flat[idx1] < flat[idx2]
    return bits.reshape(ensemble.num_ferns, ensemble.tests_per_fern) @ pow2
