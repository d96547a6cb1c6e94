import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from wsamgsr.data import DataError
from wsamgsr.metrics import (EvalReport, PosteriorMatrix, aupr, average_precision,
                             belief_confusion, error_rate, evaluate, generalized_brier,
                             rand_index, stability)

AB = ("A", "B")


def pm(rows, classes=AB):
    return PosteriorMatrix(np.array(rows, dtype=float), classes)


def onehot(truth, classes=AB):
    return pm([[1.0 if c == t else 0.0 for c in classes] for t in truth], classes)


class TestErrorRate:
    def test_all_correct(self):
        assert error_rate(onehot("ABBA"), list("ABBA")) == 0.0

    def test_all_wrong(self):
        assert error_rate(onehot("BAAB"), list("ABBA")) == 1.0

    def test_three_of_ten(self):
        truth = list("AAAAABBBBB")
        pred = list("BBAAABBBBA")
        assert error_rate(onehot(pred), truth) == pytest.approx(0.3)


class TestBrier:
    def test_perfect(self):
        assert generalized_brier(onehot("AB"), ["A", "B"]) == 0.0

    def test_uniform(self):
        assert generalized_brier(pm([[0.5, 0.5]] * 4), list("AABB")) == 0.25

    def test_totally_wrong(self):
        assert generalized_brier(onehot("BA"), ["A", "B"]) == 1.0


class TestBCM:
    def test_perfect(self):
        assert belief_confusion(onehot("AABB"), list("AABB")) == 1.0

    def test_uniform(self):
        assert belief_confusion(pm([[0.5, 0.5]] * 4), list("ABAB")) == 0.5

    def test_hand_value(self):
        posts = pm([[0.8, 0.2], [0.8, 0.2], [0.4, 0.6]])
        assert belief_confusion(posts, ["A", "A", "B"]) == pytest.approx(0.7)

    def test_absent_class_warns(self):
        posts = pm([[0.8, 0.2], [0.6, 0.4]])
        with pytest.warns(UserWarning, match="'B'"):
            assert belief_confusion(posts, ["A", "A"]) == pytest.approx(0.7)


class TestAUPR:
    def test_perfect_separation(self):
        assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_fixture_against_oracle(self):
        scores, truth = [1.0, 0.8, 0.6, 0.4], [1, 0, 1, 0]
        want = oracles.aupr_thresholds(scores, truth)
        assert want == pytest.approx((1.0 + 2 / 3) / 2)
        assert average_precision(scores, truth) == pytest.approx(want, abs=1e-12)

    def test_all_tied_gives_prevalence(self):
        assert average_precision([0.3] * 10, [1, 0, 0, 1, 0, 0, 0, 1, 0, 0]) == \
            pytest.approx(0.3)

    def test_no_positives(self):
        with pytest.raises(DataError):
            average_precision([0.1, 0.2], [0, 0])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=1, max_size=20))
    def test_threshold_oracle(self, pairs):
        scores = [s / 6 for s, _ in pairs]
        truth = [y for _, y in pairs]
        if not any(truth):
            return
        assert average_precision(scores, truth) == pytest.approx(
            oracles.aupr_thresholds(scores, truth), abs=1e-12)

    def test_binary_uses_first_column(self):
        posts = pm([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        assert aupr(posts, ["A", "B", "B"]) == pytest.approx(
            oracles.aupr_thresholds([0.9, 0.2, 0.6], [1, 0, 0]))
        assert aupr(posts, ["A", "B", "B"], positive="B") == pytest.approx(
            oracles.aupr_thresholds([0.1, 0.8, 0.4], [0, 1, 1]))

    def test_multiclass_macro(self):
        cls = ("x", "y", "z")
        posts = pm([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.2, 0.2, 0.6], [0.5, 0.3, 0.2]], cls)
        truth = ["x", "y", "z", "y"]
        want = np.mean([oracles.aupr_thresholds(posts.probs[:, j].tolist(),
                                                [t == c for t in truth])
                        for j, c in enumerate(cls)])
        assert aupr(posts, truth) == pytest.approx(want, abs=1e-12)


class TestRand:
    def test_identical(self):
        assert rand_index([["a", "b"], ["b", "a"], ["a", "b"]]) == 1.0

    def test_disjoint(self):
        assert rand_index([["a"], ["b"]]) == 0.0

    def test_hand_value(self):
        assert rand_index([{"a", "b"}, {"b", "c"}]) == 1 / 3

    def test_empty_conventions(self):
        assert rand_index([[], []]) == 1.0
        assert rand_index([[], ["a"]]) == 0.0

    def test_needs_two(self):
        with pytest.raises(DataError):
            rand_index([["a"]])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sets(st.sampled_from("abcdef")), min_size=2, max_size=6))
    def test_against_pairwise_oracle(self, lists):
        got = rand_index(lists)
        assert got == pytest.approx(oracles.jaccard_rand(lists), abs=1e-12)
        assert 0.0 <= got <= 1.0


class TestReports:
    def test_evaluate_roundtrip(self):
        posts = pm([[0.9, 0.1], [0.3, 0.7], [0.6, 0.4]])
        rep = evaluate(posts, ["A", "B", "B"])
        assert rep.n_samples == 3 and rep.error_rate == pytest.approx(1 / 3)
        assert EvalReport.from_dict(rep.to_dict()) == rep

    def test_stability(self):
        st_ = stability([["a", "b"], ["a", "b"]], [["P"], ["Q"]])
        assert (st_.rand_gene, st_.rand_pathway, st_.k) == (1.0, 0.0, 2)

    def test_posterior_validation(self):
        with pytest.raises(DataError):
            PosteriorMatrix(np.array([[1.2, -0.2]]), AB)
        with pytest.raises(DataError, match="'C'"):
            error_rate(pm([[1.0, 0.0]]), ["C"])
