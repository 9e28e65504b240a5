import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fernmatch import (
    ClassifierTable,
    Patch,
    accumulate,
    build_ensemble,
    classify,
    compute_feature,
    counts_new,
    finalize,
    posterior,
)
from fernmatch.classifier import FernCounts, probability_table


def random_patch(rng, side=5):
    return Patch(rng.integers(0, 256, (side, side), dtype=np.uint8))


def multinomial_counts(rng, m, s, h, max_total=30) -> FernCounts:
    """Random counts satisfying the per-fern row-sum invariant."""
    k = 1 << s
    counts = counts_new(m, s, h)
    totals = rng.integers(0, max_total + 1, size=h)
    for i in range(h):
        for fern in range(m):
            counts.counts[fern, :, i] = rng.multinomial(totals[i], np.full(k, 1.0 / k))
    counts.totals[:] = totals
    return counts


def rational_scores(counts: FernCounts, values, n_r=1) -> list[Fraction]:
    """The final product formula evaluated literally in exact arithmetic."""
    k = counts.num_bins
    out = []
    for i in range(counts.num_classes):
        p = Fraction(1)
        for fern, v in enumerate(values):
            p *= Fraction(int(counts.counts[fern, v, i]) + n_r,
                          int(counts.totals[i]) + k * n_r)
        out.append(p)
    return out


class TestCounts:
    def test_new_is_zero(self):
        counts = counts_new(1, 1, 1)
        assert counts.counts.shape == (1, 2, 1)
        assert counts.counts.sum() == 0 and counts.totals.sum() == 0

    def test_paper_scale_allocation(self):
        counts = counts_new(50, 11, 100)
        assert counts.counts.shape == (50, 2048, 100)

    def test_capacity_error(self):
        with pytest.raises(ValueError):
            counts_new(1000, 16, 100)

    def test_single_accumulate(self):
        rng = np.random.default_rng(0)
        ens = build_ensemble(4, 3, 5, seed=1)
        counts = counts_new(4, 3, 2)
        patch = random_patch(rng)
        accumulate(counts, ens, patch, 1)
        assert counts.totals.tolist() == [0, 1]
        assert counts.counts.sum() == 4  # one cell per fern
        accumulate(counts, ens, patch, 1)
        assert counts.counts.max() == 2

    def test_class_id_out_of_range(self):
        ens = build_ensemble(2, 2, 5, seed=1)
        counts = counts_new(2, 2, 3)
        with pytest.raises(IndexError):
            accumulate(counts, ens, random_patch(np.random.default_rng(0)), 3)

    def test_row_sum_invariant_after_many(self):
        rng = np.random.default_rng(5)
        ens = build_ensemble(3, 4, 7, seed=2)
        counts = counts_new(3, 4, 4)
        for _ in range(100):
            accumulate(counts, ens, random_patch(rng, 7), int(rng.integers(0, 4)))
        for fern in range(3):
            assert np.array_equal(counts.counts[fern].sum(axis=0), counts.totals)
        assert counts.totals.sum() == 100


class TestFinalize:
    def test_zero_counts_uniform(self):
        table = finalize(counts_new(2, 11, 3), n_r=1.0)
        assert np.allclose(table.log_probs, math.log(1.0 / 2048), atol=1e-12)

    def test_direct_regularization_formula(self):
        counts = counts_new(1, 1, 1)
        counts.counts[0, :, 0] = [3, 1]
        counts.totals[0] = 4
        table = finalize(counts, n_r=1.0)
        assert np.allclose(np.exp(table.log_probs[0, :, 0]), [4 / 6, 2 / 6])

    def test_nonpositive_regularizer_rejected(self):
        with pytest.raises(ValueError):
            finalize(counts_new(1, 1, 1), n_r=0.0)

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**32 - 1), n_r=st.floats(0.25, 4.0))
    def test_normalization_invariant(self, seed, n_r):
        rng = np.random.default_rng(seed)
        counts = multinomial_counts(rng, m=3, s=3, h=4)
        table = finalize(counts, n_r=n_r)
        sums = np.exp(table.log_probs).sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-9)
        assert np.all(np.isfinite(table.log_probs))


class TestClassify:
    def test_single_class_always_wins(self):
        ens = build_ensemble(2, 2, 5, seed=3)
        table = finalize(counts_new(2, 2, 1))
        cid, _, scores = classify(table, ens, random_patch(np.random.default_rng(1)))
        assert cid == 0 and scores.shape == (1,)

    def test_uniform_table_analytic_score(self):
        m, s, h = 4, 11, 5
        ens = build_ensemble(m, s, 33, seed=3)
        table = finalize(counts_new(m, s, h))
        patch = random_patch(np.random.default_rng(2), 33)
        cid, score, scores = classify(table, ens, patch)
        assert cid == 0  # tie broken to lowest class id
        assert np.allclose(scores, m * math.log(1.0 / 2**s), atol=1e-9)
        assert score == pytest.approx(m * math.log(1.0 / 2**s))

    def test_dimension_mismatch_rejected(self):
        ens = build_ensemble(2, 2, 5, seed=3)
        table = finalize(counts_new(3, 2, 4))
        with pytest.raises(ValueError):
            classify(table, ens, random_patch(np.random.default_rng(1)))

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_rational_oracle_small_dims(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 4))
        s = int(rng.integers(1, 4))
        h = int(rng.integers(1, 5))
        ens = build_ensemble(m, s, 5, seed=seed)
        counts = multinomial_counts(rng, m, s, h)
        table = finalize(counts, n_r=1.0)

        patch = random_patch(rng)
        values = [
            sum(compute_feature(patch, pair) << j for j, pair in enumerate(fern.tests))
            for fern in ens.ferns
        ]
        oracle = rational_scores(counts, values)
        cid, _, scores = classify(table, ens, patch)

        # exact rational ties may order either way in floats; the argmax
        # must still land on a maximal class
        assert oracle[cid] == max(oracle)
        for i in range(h):
            for j in range(h):
                log_ratio = math.log(float(oracle[i] / oracle[j]))
                assert scores[i] - scores[j] == pytest.approx(log_ratio, abs=1e-9)
                if oracle[i] > oracle[j]:
                    assert scores[i] > scores[j] - 1e-9

    def test_argmax_invariant_under_constant_shift(self):
        rng = np.random.default_rng(11)
        counts = multinomial_counts(rng, 3, 3, 4)
        table = finalize(counts)
        ens = build_ensemble(3, 3, 5, seed=12)
        patch = random_patch(rng)
        cid, _, scores = classify(table, ens, patch)
        shifted = ClassifierTable(log_probs=table.log_probs + 0.37, n_r=table.n_r)
        cid2, _, scores2 = classify(shifted, ens, patch)
        assert cid2 == cid
        assert np.allclose(scores2 - scores, 3 * 0.37, atol=1e-9)

    def test_no_zero_probability_for_unseen_values(self):
        counts = counts_new(2, 3, 2)
        counts.counts[0, 0, 0] = 50
        counts.counts[1, 0, 0] = 50
        counts.totals[0] = 50
        table = finalize(counts, n_r=1.0)
        assert np.all(np.isfinite(table.log_probs))
        assert np.all(table.log_probs < 0)


class TestPosterior:
    def test_uniform_table_uniform_posterior(self):
        ens = build_ensemble(2, 3, 5, seed=3)
        table = finalize(counts_new(2, 3, 4))
        post = posterior(table, ens, random_patch(np.random.default_rng(1)))
        assert np.allclose(post, 0.25, atol=1e-12)

    def test_known_score_ratio(self):
        # counts chosen so p(v=0 | c0) / p(v=0 | c1) = 3 exactly
        counts = counts_new(1, 1, 2)
        counts.counts[0, 0, :] = [5, 1]
        counts.counts[0, 1, :] = [1, 5]
        counts.totals[:] = [6, 6]
        table = finalize(counts, n_r=1.0)
        ens = build_ensemble(1, 1, 5, seed=0)
        patch = Patch(np.full((5, 5), 7, dtype=np.uint8))  # constant -> value 0
        post = posterior(table, ens, patch)
        assert post[0] / post[1] == pytest.approx(3.0, abs=1e-9)
        assert post.sum() == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_argmax_matches_classify(self, seed):
        rng = np.random.default_rng(seed)
        counts = multinomial_counts(rng, 2, 3, 4)
        table = finalize(counts)
        ens = build_ensemble(2, 3, 5, seed=seed)
        patch = random_patch(rng)
        cid, _, _ = classify(table, ens, patch)
        post = posterior(table, ens, patch)
        assert int(np.argmax(post)) == cid
        assert post.sum() == pytest.approx(1.0, abs=1e-9)
