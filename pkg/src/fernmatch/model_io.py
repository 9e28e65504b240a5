"""Bit-exact binary serialization of trained models ("FERN" v1).

Little-endian layout:

    magic "FERN" | version u16 | patch_side u32 | m u32 | s u32 | h u32
    | n_r f64 | ensemble_seed u64                          (38-byte header)
    h class records: model_x f64, model_y f64, stability f64
    m*s test pairs:  dx1 i16, dy1 i16, dx2 i16, dy2 i16
    counts u32 in (fern, bin, class) order, then totals u32 per class

Counts, not probabilities, are persisted: integer-exact across platforms,
and the table can be re-finalized with a different regularizer without
retraining. The stored ensemble seed is provenance only; the pairs are
authoritative on load.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .classifier import FernCounts, finalize
from .ferns import Fern, FernEnsemble, FernTestPair
from .training import PatchClass, TrainedModel

MAGIC = b"FERN"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIIdQ")


class ModelFormatError(ValueError):
    """File is not a readable FERN v1 model."""


def model_file_size(m: int, s: int, h: int) -> int:
    """Exact byte size of a model file with the given dimensions."""
    return _HEADER.size + h * 24 + m * s * 8 + (m * (1 << s) * h + h) * 4


def save_model(model: TrainedModel, path) -> None:
    """Write atomically (temp file + rename in the target directory)."""
    m = model.ensemble.num_ferns
    s = model.ensemble.tests_per_fern
    h = model.num_classes

    parts = [
        _HEADER.pack(
            MAGIC, VERSION, model.patch_side, m, s, h,
            model.table.n_r, model.ensemble.seed,
        )
    ]
    for cls in model.classes:
        parts.append(
            struct.pack("<ddd", cls.model_point[0], cls.model_point[1], cls.stability)
        )
    for fern in model.ensemble.ferns:
        for pair in fern.tests:
            parts.append(
                struct.pack("<hhhh", pair.d1[0], pair.d1[1], pair.d2[0], pair.d2[1])
            )
    parts.append(np.ascontiguousarray(model.counts.counts, dtype="<u4").tobytes())
    parts.append(np.ascontiguousarray(model.counts.totals, dtype="<u4").tobytes())

    blob = b"".join(parts)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".fern.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> TrainedModel:
    """Validate, reconstruct the ensemble from stored pairs, re-finalize."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise ModelFormatError(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, version, patch_side, m, s, h, n_r, seed = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    expected = model_file_size(m, s, h)
    if len(blob) != expected:
        raise ModelFormatError(
            f"{path}: expected {expected} bytes for m={m} s={s} h={h}, got {len(blob)}"
        )

    pos = _HEADER.size
    classes = []
    for i in range(h):
        x, y, stability = struct.unpack_from("<ddd", blob, pos)
        pos += 24
        classes.append(PatchClass(class_id=i, model_point=(x, y), stability=stability))

    ferns = []
    for _ in range(m):
        tests = []
        for _ in range(s):
            dx1, dy1, dx2, dy2 = struct.unpack_from("<hhhh", blob, pos)
            pos += 8
            tests.append(FernTestPair((dx1, dy1), (dx2, dy2)))
        ferns.append(Fern(tuple(tests)))
    ensemble = FernEnsemble(tuple(ferns), patch_side, seed)

    n_counts = m * (1 << s) * h
    counts = (
        np.frombuffer(blob, dtype="<u4", count=n_counts, offset=pos)
        .reshape(m, 1 << s, h)
        .astype(np.uint32)
    )
    pos += n_counts * 4
    totals = np.frombuffer(blob, dtype="<u4", count=h, offset=pos).astype(np.uint32)

    fern_counts = FernCounts(counts=counts, totals=totals)
    return TrainedModel(
        classes=classes,
        ensemble=ensemble,
        counts=fern_counts,
        table=finalize(fern_counts, n_r),
        # only the header fields survive serialization
        training_config=None,
        reference_patches=None,
    )
