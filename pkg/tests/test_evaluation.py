"""Evaluation-suite tests: metrics, NDCG against an exhaustive oracle,
Wilcoxon against full sign-assignment enumeration, Spearman, decision rules
against brute force, and the per-feature report."""

import itertools
import math
import random

import numpy as np
import pytest
import scipy.stats

from iggy import evaluation
from iggy.errors import InputError
from iggy.evaluation import (
    AnnotationMatrix,
    DecisionRule,
    RankedList,
    aggregate_annotations,
    classification_report,
    cross_validate,
    feature_report,
    model_correlation_matrix,
    ndcg_at_k,
    precision_at_k_curve,
    select_decision_rule,
    spearman,
    top_k_overlap,
    wilcoxon_signed_rank,
)

from conftest import synthetic_records


class TestClassificationReport:
    def test_perfect(self):
        rep = classification_report([1, 0, 1], [1, 0, 1])
        assert rep.accuracy == 1.0
        assert rep.precision == 1.0
        assert rep.recall == 1.0

    def test_all_negative_predictions_flagged(self):
        rep = classification_report([0, 0, 0], [1, 0, 1])
        assert rep.precision == 0.0
        assert rep.recall == 0.0
        assert rep.degenerate

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            classification_report([1], [1, 0])

    def test_hand_counts(self):
        rep = classification_report([1, 1, 0, 0], [1, 0, 1, 0])
        assert rep.accuracy == 0.5
        assert rep.precision == 0.5
        assert rep.recall == 0.5


class TestCrossValidate:
    def test_separable_task_perfect(self):
        records = synthetic_records(40, seed=1)
        for rec in records:  # make the text trivially predictive
            rec.text = ("funny " if rec.label else "plain ") + rec.text

        def trainer(train):
            def predictor(test):
                return [1 if rec.text.startswith("funny") else 0 for rec in test]
            return trainer_model(predictor)

        def trainer_model(p):
            return p

        report = cross_validate(records, 5, trainer, seed=2)
        assert report["accuracy"]["mean"] == 1.0
        assert report["accuracy"]["std"] == 0.0

    def test_balanced_folds_of_two(self):
        records = synthetic_records(4, seed=0)
        folds = evaluation.stratified_folds(records, 2, seed=0)
        for fold in folds:
            labels = sorted(records[i].label for i in fold)
            assert labels == [0, 1]

    def test_deterministic_assignment(self):
        records = synthetic_records(30, seed=3)
        a = evaluation.stratified_folds(records, 5, seed=9)
        b = evaluation.stratified_folds(records, 5, seed=9)
        assert a == b

    def test_missing_class_errors(self):
        records = synthetic_records(6, seed=0)
        for rec in records:
            rec.label = 1
        with pytest.raises(InputError):
            cross_validate(records, 2, lambda train: lambda test: [1] * len(test))


def ndcg_oracle(rel, k):
    """Exhaustive oracle: best DCG over every distinct arrangement."""
    n = len(rel)
    ones = sum(rel)
    def dcg(seq):
        return sum(v / math.log2(i + 2) for i, v in enumerate(seq[:k]))
    best = 0.0
    for positions in itertools.combinations(range(n), ones):
        seq = [1 if i in positions else 0 for i in range(n)]
        best = max(best, dcg(seq))
    return dcg(rel) / best if best > 0 else 0.0


class TestNdcg:
    def test_ideal_order(self):
        assert ndcg_at_k([1, 1, 0], 3) == 1.0

    def test_hand_value(self):
        expected = (1 / math.log2(3) + 1 / math.log2(4)) / (1 + 1 / math.log2(3))
        assert ndcg_at_k([0, 1, 1], 3) == pytest.approx(expected, abs=1e-12)
        assert ndcg_at_k([0, 1, 1], 3) == pytest.approx(0.6934, abs=1e-4)

    def test_all_zero_is_zero(self):
        assert ndcg_at_k([0, 0, 0], 2) == 0.0

    def test_bounds_and_perfect_iff_sorted(self, rng):
        for _ in range(200):
            n = rng.randint(1, 8)
            rel = [rng.randint(0, 1) for _ in range(n)]
            k = rng.randint(1, n)
            value = ndcg_at_k(rel, k)
            assert 0.0 <= value <= 1.0
        assert ndcg_at_k([1, 0, 1], 3) < 1.0

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(300):
            n = rng.randint(1, 8)
            rel = [rng.randint(0, 1) for _ in range(n)]
            k = rng.randint(1, n)
            assert ndcg_at_k(rel, k) == pytest.approx(ndcg_oracle(rel, k), abs=1e-12)

    def test_k_validation(self):
        with pytest.raises(InputError):
            ndcg_at_k([1], 0)


class TestPrecisionCurve:
    def test_all_relevant(self):
        curve = precision_at_k_curve([1] * 25, step=10)
        assert curve == [(10, 1.0), (20, 1.0), (25, 1.0)]

    def test_alternating(self):
        curve = precision_at_k_curve([1, 0] * 5, step=10)
        assert curve == [(10, 0.5)]

    def test_running_mean_integer_counts(self, rng):
        rel = [rng.randint(0, 1) for _ in range(57)]
        for k, p in precision_at_k_curve(rel, step=10):
            count = k * p
            assert abs(count - round(count)) < 1e-9
            assert 0 <= count <= k

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            precision_at_k_curve([], step=10)


class TestOverlap:
    def _ranked(self, ids):
        return RankedList(ids=list(ids), scores=list(range(len(ids), 0, -1)))

    def test_identical(self):
        a = self._ranked("abcde")
        assert top_k_overlap(a, a, 3) == 1.0

    def test_disjoint(self):
        a = self._ranked("abc")
        b = self._ranked("xyz")
        assert top_k_overlap(a, b, 3) == 0.0

    def test_matches_set_oracle(self, rng):
        ids = [f"t{i}" for i in range(300)]
        for _ in range(10):
            pa, pb = ids[:], ids[:]
            rng.shuffle(pa)
            rng.shuffle(pb)
            a, b = self._ranked(pa), self._ranked(pb)
            got = top_k_overlap(a, b, 50)
            assert got == len(set(pa[:50]) & set(pb[:50])) / 50

    def test_k_zero_rejected(self):
        a = self._ranked("ab")
        with pytest.raises(InputError):
            top_k_overlap(a, a, 0)

    def test_ranked_list_tie_order(self):
        ranked = RankedList.from_scores([("b", 1.0), ("a", 1.0), ("c", 2.0)])
        assert ranked.ids == ["c", "a", "b"]


class TestSpearman:
    def test_perfect(self):
        assert spearman([1, 2, 3], [1, 2, 3]).statistic == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]).statistic == pytest.approx(-1.0)

    def test_matches_scipy_statistic(self, rng):
        for _ in range(30):
            n = rng.randint(4, 25)
            x = [rng.random() for _ in range(n)]
            y = [rng.random() for _ in range(n)]
            ours = spearman(x, y).statistic
            ref = scipy.stats.spearmanr(x, y).statistic
            assert ours == pytest.approx(ref, abs=1e-12)

    def test_monotone_transform_invariant(self, rng):
        x = [rng.random() for _ in range(15)]
        y = [rng.random() for _ in range(15)]
        base = spearman(x, y).statistic
        assert spearman([math.exp(v) for v in x], y).statistic == pytest.approx(base)
        assert spearman(x, [v**3 for v in y]).statistic == pytest.approx(base)

    def test_constant_vector_flagged(self):
        result = spearman([1.0, 1.0, 1.0], [1, 2, 3])
        assert result.degenerate
        assert result.p_value == 1.0

    def test_exact_permutation_p_small_n(self):
        # n=4, perfect correlation: only 2 of 24 permutations tie |rho|=1
        result = spearman([1, 2, 3, 4], [1, 2, 3, 4])
        assert result.method == "permutation"
        assert result.p_value == pytest.approx(2 / 24)

    def test_t_approx_reasonable(self, rng):
        x = list(range(12))
        y = [v + rng.random() * 0.1 for v in x]
        result = spearman(x, y)
        assert result.method == "t-approx"
        assert result.p_value < 1e-6


def wilcoxon_enum_oracle(a, b):
    """Independent oracle: full enumeration over 2^n sign assignments."""
    diffs = [x - y for x, y in zip(a, b) if x != y]
    ranks = scipy.stats.rankdata([abs(d) for d in diffs])
    total = ranks.sum()
    t_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w = min(t_plus, total - t_plus)
    count = 0
    for signs in itertools.product((0, 1), repeat=len(diffs)):
        t = sum(r for r, s in zip(ranks, signs) if s)
        if t <= w + 1e-12 or t >= total - w - 1e-12:
            count += 1
    return w, count / 2 ** len(diffs)


class TestWilcoxon:
    def test_identical_samples_rejected(self):
        with pytest.raises(InputError, match="zero"):
            wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])

    def test_textbook_six_pairs(self):
        a = [1, 2, 3, 4, 5, 0]
        b = [0, 0, 0, 0, 0, 6]
        result = wilcoxon_signed_rank(a, b)
        w_ref, p_ref = wilcoxon_enum_oracle(a, b)
        assert result.statistic == w_ref == 6.0
        assert result.p_value == pytest.approx(p_ref, abs=1e-12)
        assert p_ref == pytest.approx(28 / 64)

    def test_exact_matches_enumeration(self, rng):
        for trial in range(60):
            n = rng.randint(2, 10)
            a = [rng.gauss(0.3, 1) for _ in range(n)]
            b = [rng.gauss(0, 1) for _ in range(n)]
            if all(x == y for x, y in zip(a, b)):
                continue
            result = wilcoxon_signed_rank(a, b)
            w_ref, p_ref = wilcoxon_enum_oracle(a, b)
            assert result.statistic == pytest.approx(w_ref)
            assert abs(result.p_value - p_ref) < 1e-9

    def test_exact_with_ties(self, rng):
        for trial in range(40):
            n = rng.randint(3, 10)
            a = [float(rng.randint(0, 4)) for _ in range(n)]
            b = [float(rng.randint(0, 4)) for _ in range(n)]
            if all(x == y for x, y in zip(a, b)):
                continue
            result = wilcoxon_signed_rank(a, b)
            w_ref, p_ref = wilcoxon_enum_oracle(a, b)
            assert result.statistic == pytest.approx(w_ref)
            assert abs(result.p_value - p_ref) < 1e-9

    def test_normal_approximation_sane(self, rng):
        a = [rng.gauss(0.8, 1) for _ in range(60)]
        b = [rng.gauss(0.0, 1) for _ in range(60)]
        result = wilcoxon_signed_rank(a, b)
        assert result.method == "normal"
        ref = scipy.stats.wilcoxon(a, b, correction=True, mode="approx")
        assert result.p_value == pytest.approx(ref.pvalue, rel=1e-6)

    def test_strong_signal_beats_weak(self, rng):
        base = [rng.gauss(0, 1) for _ in range(100)]
        strong = [v + 2.0 for v in base]
        weak = [v + rng.gauss(0.05, 0.5) for v in base]
        p_strong = wilcoxon_signed_rank(strong, base).p_value
        p_weak = wilcoxon_signed_rank(weak, base).p_value
        assert p_strong < p_weak


class TestFeatureReport:
    def test_identical_feature_flagged(self):
        X = np.ones((20, 2))
        X[:, 1] = np.arange(20)
        y = [0, 1] * 10
        rows = feature_report(X, y, names=["const", "varying"])
        by_name = dict(rows)
        assert by_name["const"].degenerate
        assert by_name["const"].p_value == 1.0

    def test_label_leak_detected(self):
        rng = np.random.default_rng(8)
        n = 200
        y = np.array([0, 1] * (n // 2))
        X = np.column_stack([
            y + rng.normal(0, 0.01, size=n),
            rng.normal(size=n),
        ])
        rows = feature_report(X, y.tolist(), names=["leak", "noise"])
        assert rows[0][0] == "leak"
        assert rows[0][1].p_value < 1e-6

    def test_sorted_by_p(self, rng):
        X = np.random.default_rng(3).normal(size=(30, 5))
        y = [0, 1] * 15
        rows = feature_report(X, y)
        ps = [r.p_value for _, r in rows]
        assert ps == sorted(ps)

    def test_unbalanced_rejected(self):
        X = np.ones((5, 1))
        with pytest.raises(InputError, match="unbalanced"):
            feature_report(X, [1, 1, 1, 1, 0])

    def test_off_by_one_allowed(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(5, 2))
        rows = feature_report(X, [1, 1, 1, 0, 0])
        assert len(rows) == 2


class TestAnnotations:
    def _matrix(self, scores_by_title):
        matrix = AnnotationMatrix()
        for tid, scores in scores_by_title.items():
            for w, s in enumerate(scores):
                matrix.add(tid, f"w{w}", s, s)
        return matrix

    def test_one_qualifying_rating(self):
        matrix = self._matrix({"t": [1, 2, 2, 2, 5]})
        labels, _ = aggregate_annotations(matrix, DecisionRule(k=1, m=3))
        assert labels["t"] == 1

    def test_two_qualify_but_three_needed(self):
        matrix = self._matrix({"t": [3, 3, 2, 2, 2]})
        labels, _ = aggregate_annotations(matrix, DecisionRule(k=3, m=3))
        assert labels["t"] == 0

    def test_majority_special_case(self):
        matrix = self._matrix({"yes": [3, 3, 3, 2, 2], "no": [3, 3, 2, 2, 2]})
        labels, _ = aggregate_annotations(matrix, DecisionRule(k=3, m=3))
        assert labels == {"yes": 1, "no": 0}

    def test_underrated_title_flagged(self):
        matrix = self._matrix({"t": [5, 5]})
        labels, flagged = aggregate_annotations(matrix, DecisionRule(k=3, m=3))
        assert labels["t"] == 0
        assert "t" in flagged

    def test_monotone_in_k_and_m(self, rng):
        for _ in range(50):
            matrix = self._matrix({
                f"t{i}": [rng.randint(1, 5) for _ in range(5)] for i in range(12)})
            for k, m in [(1, 3), (2, 3), (1, 4), (2, 4)]:
                base, _ = aggregate_annotations(matrix, DecisionRule(k=k, m=m))
                harder_k, _ = aggregate_annotations(matrix, DecisionRule(k=k + 1, m=m))
                harder_m, _ = aggregate_annotations(matrix, DecisionRule(k=k, m=m + 1))
                for tid in base:
                    assert harder_k[tid] <= base[tid]
                    assert harder_m[tid] <= base[tid]

    def test_score_validation(self):
        matrix = AnnotationMatrix()
        with pytest.raises(InputError, match="outside"):
            matrix.add("t", "w", 6, 3)


class TestSelectRule:
    def test_single_rule_grid(self, rng):
        matrix = AnnotationMatrix()
        for i in range(10):
            for w in range(3):
                matrix.add(f"t{i}", f"w{w}", rng.randint(1, 5), rng.randint(1, 5))
        gold = {f"t{i}": float(rng.randint(0, 1)) for i in range(10)}
        only = DecisionRule(k=1, m=3)
        best, table = select_decision_rule(matrix, gold, [only])
        assert best == only
        assert len(table) == 1

    def test_matches_brute_force(self, rng):
        grid = [DecisionRule(k=k, m=m) for k in (1, 2, 3) for m in (2, 3, 4, 5)]
        for trial in range(30):
            matrix = AnnotationMatrix()
            for i in range(40):
                for w in range(5):
                    matrix.add(f"t{i}", f"w{w}", rng.randint(1, 5), rng.randint(1, 5))
            gold = {f"t{i}": float(rng.randint(0, 1)) for i in range(40)}
            best, table = select_decision_rule(matrix, gold, grid, mode="gold")

            # independent brute force
            want_rule, want_score = None, -1.0
            for rule in grid:
                hits = 0
                for i in range(40):
                    scores = [matrix.ratings[f"t{i}"][w][2] for w in range(5)]
                    label = 1 if sum(1 for s in scores if s >= rule.m) >= rule.k else 0
                    hits += label == int(gold[f"t{i}"])
                score = hits / 40
                if score > want_score:
                    want_rule, want_score = rule, score
            assert best == want_rule
            assert dict((r, s) for r, s in table)[want_rule] == pytest.approx(want_score)

    def test_empty_grid(self):
        with pytest.raises(InputError):
            select_decision_rule(AnnotationMatrix(ratings={"t": [("w", 3, 3)]}),
                                 {"t": 1.0}, [])


class TestCorrelationMatrix:
    def test_self_and_negated(self):
        scores = {f"t{i}": float(i) for i in range(10)}
        negated = {k: -v for k, v in scores.items()}
        names, matrix = model_correlation_matrix(
            {"a": scores, "b": dict(scores), "c": negated})
        assert names == ["a", "b", "c"]
        assert matrix[0, 0] == 1.0
        assert matrix[0, 1] == pytest.approx(1.0)
        assert matrix[0, 2] == pytest.approx(-1.0)

    def test_symmetric(self, rng):
        tables = {
            name: {f"t{i}": rng.random() for i in range(20)}
            for name in ("m1", "m2", "m3")}
        _, matrix = model_correlation_matrix(tables)
        assert np.allclose(matrix, matrix.T, atol=1e-12)
        assert np.allclose(np.diag(matrix), 1.0)

    def test_id_mismatch_rejected(self):
        with pytest.raises(InputError):
            model_correlation_matrix({
                "a": {"t1": 1.0, "t2": 2.0},
                "b": {"t1": 1.0, "t3": 2.0}})
