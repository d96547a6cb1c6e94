import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import random_dataset
from wsamgsr.connectivity import WeightVector
from wsamgsr.data import DataError, ExpressionDataset
from wsamgsr.sam import (S0Rule, SamStatistics, compute_s0, pooled_sd, resolve_positive,
                         sam_statistic, samgs_score, weighted_sam_statistic)


def two_group(xd, xc, extra=()):
    """Dataset whose first gene has the given groups; positive class is 'd'."""
    rows = [list(xd) + list(xc)] + [list(r) for r in extra]
    labels = ("d",) * len(xd) + ("c",) * len(xc)
    return ExpressionDataset(tuple(f"g{i}" for i in range(len(rows))), np.array(rows, float),
                             labels)


class TestPooledSD:
    def test_zero_within_group_variance(self):
        assert pooled_sd(two_group([1, 1], [2, 2]), "g0") == 0.0

    def test_hand_value(self):
        assert pooled_sd(two_group([0, 2], [0, 2]), "g0") == pytest.approx(math.sqrt(2))

    def test_equal_spread_equals_group_sd(self):
        xd = [1.0, 4.0, 7.0]
        xc = [11.0, 14.0, 17.0]
        assert pooled_sd(two_group(xd, xc), "g0") == pytest.approx(np.std(xd, ddof=1))

    def test_small_class_rejected(self):
        with pytest.raises(DataError):
            pooled_sd(two_group([1], [2, 3]), "g0")


class TestS0:
    def test_median(self):
        assert compute_s0([1.0, 2.0, 3.0], "median") == 2.0

    def test_fixed(self):
        assert compute_s0([1.0, 2.0], S0Rule("fixed", 0.1)) == 0.1

    def test_percentile_against_sort_oracle(self):
        s = np.random.default_rng(0).gamma(2.0, size=100)
        assert compute_s0(s, "percentile:5") == pytest.approx(
            oracles.sort_percentile(s.tolist(), 5), abs=1e-12)

    def test_zero_sds_ignored(self):
        assert compute_s0([0.0, 0.0, 1.0, 3.0], "median") == 2.0

    def test_all_zero_needs_fixed(self):
        with pytest.raises(DataError):
            compute_s0([0.0, 0.0], "median")

    def test_parse_roundtrip(self):
        for text in ("median", "fixed:0.25", "percentile:5"):
            assert str(S0Rule.parse(text)) == text

    @pytest.mark.parametrize("text", ["mean", "fixed:-1", "percentile:120", "fixed"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            S0Rule.parse(text)


class TestSamStatistic:
    def test_identical_means_give_zero(self):
        st_ = sam_statistic(two_group([1, 3], [0, 4], extra=[[1, 2, 3, 4]]), positive="d")
        assert st_.value("g0") == 0.0

    def test_hand_value(self):
        # means 2 and 1, pooled SS = 0.5 + 0.5 over 6 - 2 df -> s = 0.5
        ds = two_group([1.5, 2.0, 2.5], [0.5, 1.0, 1.5])
        assert pooled_sd(ds, "g0") == pytest.approx(0.5, abs=1e-15)
        got = sam_statistic(ds, S0Rule("fixed", 0.5), positive="d").value("g0")
        assert got == pytest.approx(1.0, abs=1e-15)

    def test_label_swap_negates(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(rng, 20, 5, 7)
        a = sam_statistic(ds, positive="b").d
        b = sam_statistic(ds, positive="a").d
        np.testing.assert_array_equal(a, -b)

    def test_default_positive_is_last_class(self):
        ds = random_dataset(np.random.default_rng(0), 3, 3, 3)
        assert resolve_positive(ds) == "b"

    def test_needs_two_classes(self):
        ds = ExpressionDataset(("g",), np.zeros((1, 4)), ("a", "b", "c", "c"))
        with pytest.raises(DataError, match="two classes"):
            sam_statistic(ds)

    def test_unknown_positive(self):
        ds = random_dataset(np.random.default_rng(0), 3, 3, 3)
        with pytest.raises(DataError, match="zz"):
            sam_statistic(ds, positive="zz")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 6),
           st.sampled_from(["median", "percentile:20", "fixed:0.3"]))
    def test_matches_loop_oracle(self, seed, n_pos, n_neg, rule):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, 12, n_pos, n_neg, shift=rng.normal(size=12))
        r = S0Rule.parse(rule)
        got = sam_statistic(ds, r, positive="b")
        want = oracles.sam_d(ds.values.tolist(), [lab == "b" for lab in ds.labels], r.kind,
                             r.value)
        np.testing.assert_allclose(got.d, want, rtol=1e-10, atol=1e-12)
        assert got.s0 > 0
        assert np.all(got.s >= 0)


class TestWeighted:
    def _stats(self, d):
        n = len(d)
        return SamStatistics(tuple(f"g{i}" for i in range(n)), np.asarray(d, float),
                             np.ones(n), 1.0, "b")

    def test_unit_weights_identity(self):
        st_ = self._stats([0.3, -1.2, 2.0])
        w = WeightVector(st_.gene_ids, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(weighted_sam_statistic(st_, w).d, st_.d)

    def test_hand_value_flips_argmax(self):
        st_ = self._stats([0.5, 1.0])
        out = weighted_sam_statistic(st_, WeightVector(st_.gene_ids, [3.0, 1.0]))
        np.testing.assert_allclose(out.d, [1.5, 1.0])
        assert np.argmax(np.abs(st_.d)) == 1 and np.argmax(np.abs(out.d)) == 0
        assert out.weighted

    def test_zero_statistic_stays_zero(self):
        st_ = self._stats([0.0, 1.0])
        out = weighted_sam_statistic(st_, WeightVector(st_.gene_ids, [50.0, 1.0]))
        assert out.d[0] == 0.0


class TestSamgsScore:
    def _stats(self, d):
        return SamStatistics(("a", "b", "c"), np.asarray(d, float), np.ones(3), 1.0, "x")

    def test_single_gene(self):
        assert samgs_score(self._stats([2.0, 0, 0]), ["a"]).score == 4.0

    def test_two_genes(self):
        assert samgs_score(self._stats([3.0, 4.0, 0]), ["a", "b"]).score == 25.0

    def test_zero(self):
        assert samgs_score(self._stats([0.0, 0.0, 0.0]), ["a", "b", "c"]).score == 0.0
