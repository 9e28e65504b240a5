"""Count accumulation, regularized class-conditionals, log-space argmax.

Per fern k and class i the table stores log((N[k,v,i] + n_r) / (N[i] + K*n_r))
with K = 2^s bins. Scores are sums of logs: products of up to 50 factors as
small as 2^-11 would underflow long before the table's dynamic range does.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ferns import MAX_TESTS_PER_FERN, FernEnsemble, fern_values
from .image import Patch

MAX_TABLE_ENTRIES = 2**31


@dataclass(eq=False)
class FernCounts:
    """Raw training counts: counts[k, v, i] plus per-class totals."""

    counts: np.ndarray  # (m, 2**s, h) uint32
    totals: np.ndarray  # (h,) uint32

    @property
    def num_ferns(self) -> int:
        return self.counts.shape[0]

    @property
    def num_bins(self) -> int:
        return self.counts.shape[1]

    @property
    def num_classes(self) -> int:
        return self.counts.shape[2]


def counts_new(m: int, s: int, h: int) -> FernCounts:
    """All-zero count table for m ferns, 2^s bins, h classes."""
    if m < 1 or h < 1:
        raise ValueError("need at least one fern and one class")
    if not 1 <= s <= MAX_TESTS_PER_FERN:
        raise ValueError(f"tests per fern must be in [1, {MAX_TESTS_PER_FERN}]")
    entries = m * (1 << s) * h
    if entries > MAX_TABLE_ENTRIES:
        raise ValueError(f"count table of {entries} entries exceeds capacity")
    return FernCounts(
        counts=np.zeros((m, 1 << s, h), dtype=np.uint32),
        totals=np.zeros(h, dtype=np.uint32),
    )


def accumulate(counts: FernCounts, ensemble: FernEnsemble, patch: Patch, class_id: int) -> None:
    """Add one training patch for class_id. Single-writer only."""
    if not 0 <= class_id < counts.num_classes:
        raise IndexError(f"class_id {class_id} out of range [0, {counts.num_classes})")
    values = fern_values(patch, ensemble)
    counts.counts[np.arange(counts.num_ferns), values, class_id] += 1
    counts.totals[class_id] += 1


@dataclass(frozen=True, eq=False)
class ClassifierTable:
    """log p[k, v, i]; class axis is contiguous so classify reads runs of h."""

    log_probs: np.ndarray  # (m, 2**s, h) float64
    n_r: float

    @property
    def num_ferns(self) -> int:
        return self.log_probs.shape[0]

    @property
    def num_bins(self) -> int:
        return self.log_probs.shape[1]

    @property
    def num_classes(self) -> int:
        return self.log_probs.shape[2]

    @cached_property
    def _flat_rows(self) -> tuple[np.ndarray, np.ndarray]:
        flat = self.log_probs.reshape(-1, self.num_classes)
        offsets = np.arange(self.num_ferns, dtype=np.int64) * self.num_bins
        return flat, offsets


def probability_table(counts: FernCounts, n_r: float = 1.0) -> np.ndarray:
    """The regularized estimates (N[k,v,i] + n_r) / (N[i] + K*n_r) themselves."""
    if n_r <= 0:
        raise ValueError("regularizer must be positive")
    num = counts.counts.astype(np.float64) + n_r
    den = counts.totals.astype(np.float64) + counts.num_bins * n_r
    return num / den


def finalize(counts: FernCounts, n_r: float = 1.0) -> ClassifierTable:
    """Regularized estimate (N[k,v,i] + n_r) / (N[i] + K*n_r), in log space."""
    if n_r <= 0:
        raise ValueError("regularizer must be positive")
    k_bins = counts.num_bins
    num = counts.counts.astype(np.float64) + n_r
    den = counts.totals.astype(np.float64) + k_bins * n_r
    return ClassifierTable(log_probs=np.log(num) - np.log(den), n_r=float(n_r))


def _check_dims(table: ClassifierTable, ensemble: FernEnsemble) -> None:
    if (
        table.num_ferns != ensemble.num_ferns
        or table.num_bins != 1 << ensemble.tests_per_fern
    ):
        raise ValueError(
            f"table ({table.num_ferns} ferns, {table.num_bins} bins) does not match "
            f"ensemble ({ensemble.num_ferns} ferns, 2^{ensemble.tests_per_fern} bins)"
        )


def class_scores(table: ClassifierTable, ensemble: FernEnsemble, patch: Patch) -> np.ndarray:
    """Per-class sum of log-probabilities at the patch's fern values."""
    _check_dims(table, ensemble)
    values = fern_values(patch, ensemble)
    flat, offsets = table._flat_rows
    return flat[offsets + values].sum(axis=0)


def classify(
    table: ClassifierTable, ensemble: FernEnsemble, patch: Patch
) -> tuple[int, float, np.ndarray]:
    """Argmax class (ties to the lowest id), its log score, all log scores."""
    scores = class_scores(table, ensemble, patch)
    best = int(np.argmax(scores))
    return best, float(scores[best]), scores


def posterior(table: ClassifierTable, ensemble: FernEnsemble, patch: Patch) -> np.ndarray:
    """Softmax of the log scores; uniform class prior is implicit."""
    scores = class_scores(table, ensemble, patch)
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()
