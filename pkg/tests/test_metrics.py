import math
import random

import numpy as np
import pytest

from stanceline.metrics import (
    EvalReport,
    UndefinedMetricError,
    accuracy_score,
    auc,
    compute_report,
    confusion_matrix,
    roc_points,
    threshold_at_zero_fpr,
    trapezoid_area,
)


def brute_force_auc(scores):
    pos = [s for s, label in scores if label]
    neg = [s for s, label in scores if not label]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def random_scores(rng, n, with_ties=True):
    scores = []
    for _ in range(n):
        value = rng.random()
        if with_ties and rng.random() < 0.4:
            value = round(value, 1)
        scores.append((value, rng.random() < 0.5))
    return scores


def has_both_classes(scores):
    labels = {label for _, label in scores}
    return labels == {True, False}


class TestAuc:
    def test_perfect_separation(self):
        assert auc([(0.9, True), (0.8, True), (0.2, False), (0.1, False)]) == 1.0

    def test_all_scores_equal(self):
        assert auc([(0.7, True), (0.7, False), (0.7, True), (0.7, False)]) == 0.5

    def test_mixed_pairs(self):
        # pairs: .8>.6, .8>.2, .4<.6, .4>.2 -> 3 of 4
        assert auc([(0.8, True), (0.4, True), (0.6, False), (0.2, False)]) == 0.75

    def test_single_class_is_undefined(self):
        with pytest.raises(UndefinedMetricError):
            auc([(0.5, True), (0.6, True)])
        with pytest.raises(UndefinedMetricError):
            auc([(0.5, False)])

    def test_matches_brute_force(self):
        rng = random.Random(17)
        for _ in range(100):
            scores = random_scores(rng, rng.randint(2, 40))
            if not has_both_classes(scores):
                continue
            assert auc(scores) == pytest.approx(brute_force_auc(scores), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = random.Random(23)
        for _ in range(50):
            scores = random_scores(rng, rng.randint(2, 40))
            if not has_both_classes(scores):
                continue
            value = auc(scores)
            assert auc([(8.0 * s, label) for s, label in scores]) == value
            assert auc([(math.exp(s), label) for s, label in scores]) == value

    def test_flip_symmetry_without_ties(self):
        rng = random.Random(29)
        for _ in range(50):
            scores = random_scores(rng, rng.randint(2, 40), with_ties=False)
            if not has_both_classes(scores):
                continue
            flipped = [(s, not label) for s, label in scores]
            assert auc(flipped) == 1.0 - auc(scores)


class TestRocPoints:
    def test_perfect_separation_contains_ideal_point(self):
        points = roc_points([(0.9, True), (0.8, True), (0.2, False)])
        assert (0.0, 1.0) in {(f, t) for f, t, _ in points}

    def test_all_equal_scores_degenerate(self):
        points = roc_points([(0.5, True), (0.5, False)])
        assert [(f, t) for f, t, _ in points] == [(0.0, 0.0), (1.0, 1.0)]
        assert points[0][2] == math.inf

    def test_area_matches_pairwise_auc(self):
        scores = [(0.9, True), (0.7, False), (0.7, True), (0.5, False), (0.3, True), (0.1, False)]
        assert trapezoid_area(roc_points(scores)) == pytest.approx(auc(scores), abs=1e-9)

    def test_monotone_nondecreasing_in_both_coordinates(self):
        rng = random.Random(31)
        for _ in range(50):
            scores = random_scores(rng, rng.randint(2, 40))
            if not has_both_classes(scores):
                continue
            points = roc_points(scores)
            for (f1, t1, th1), (f2, t2, th2) in zip(points, points[1:]):
                assert f2 >= f1 and t2 >= t1
                assert th2 < th1


class TestThresholdAtZeroFpr:
    def test_enumerated_example(self):
        scores = [(0.2, True), (0.4, True), (0.9, True), (0.35, False), (0.1, False)]
        threshold, tpr = threshold_at_zero_fpr(scores)
        assert threshold == 0.4
        assert tpr == pytest.approx(2 / 3)

    def test_inseparable_positives_get_sentinel(self):
        scores = [(0.1, True), (0.2, True), (0.5, False)]
        threshold, tpr = threshold_at_zero_fpr(scores)
        assert threshold == math.inf
        assert tpr == 0.0

    def test_perfect_separation_keeps_all_positives(self):
        scores = [(0.9, True), (0.8, True), (0.2, False)]
        threshold, tpr = threshold_at_zero_fpr(scores)
        assert tpr == 1.0

    def test_no_negatives_is_an_error(self):
        with pytest.raises(UndefinedMetricError):
            threshold_at_zero_fpr([(0.5, True)])

    def test_empirical_fpr_always_zero(self):
        rng = random.Random(37)
        for _ in range(100):
            scores = random_scores(rng, rng.randint(2, 40))
            if not has_both_classes(scores):
                continue
            threshold, tpr = threshold_at_zero_fpr(scores)
            neg = [s for s, label in scores if not label]
            pos = [s for s, label in scores if label]
            assert sum(1 for s in neg if s >= threshold) == 0
            assert tpr == sum(1 for s in pos if s >= threshold) / len(pos)


class TestComputeReport:
    def test_perfect_predictions(self):
        classes = ("a", "b", "c", "d")
        y_true = ["a", "b", "c", "d"] * 3
        probs = np.zeros((12, 4))
        for i, label in enumerate(y_true):
            probs[i, classes.index(label)] = 1.0
        report = compute_report(probs, y_true, classes)
        assert report.accuracy == 1.0
        assert report.macro_accuracy == 1.0
        assert all(value == 1.0 for value in report.per_class_auc.values())

    def test_constant_predictor_on_balanced_binary(self):
        classes = ("neg", "pos")
        y_true = ["neg"] * 5 + ["pos"] * 5
        probs = np.tile([0.8, 0.2], (10, 1))
        report = compute_report(probs, y_true, classes)
        assert report.accuracy == 0.5
        assert report.per_class_auc["neg"] == 0.5  # tied scores

    def test_macro_accuracy_matches_confusion_oracle(self):
        classes = ("a", "b", "c")
        y_true = ["a", "a", "a", "a", "b", "b", "b", "c", "c", "c"]
        y_pred = ["a", "a", "b", "c", "b", "b", "a", "c", "c", "b"]
        probs = np.full((10, 3), 0.1)
        for i, label in enumerate(y_pred):
            probs[i, classes.index(label)] = 0.8
        report = compute_report(probs, y_true, classes)
        # oracle: brute-force one-vs-rest accuracies from the matrix
        matrix = confusion_matrix(y_true, y_pred, classes)
        n = matrix.sum()
        per_class = []
        for i in range(3):
            tp = matrix[i, i]
            fn = matrix[i].sum() - tp
            fp = matrix[:, i].sum() - tp
            tn = n - tp - fn - fp
            per_class.append((tp + tn) / n)
        assert report.macro_accuracy == pytest.approx(sum(per_class) / 3)
        assert report.confusion == matrix.tolist()

    def test_confusion_rows_sum_to_supports_and_trace_is_accuracy(self):
        rng = random.Random(41)
        classes = ("x", "y", "z")
        y_true = [rng.choice(classes) for _ in range(60)]
        probs = np.array([[rng.random() for _ in classes] for _ in range(60)])
        probs /= probs.sum(axis=1, keepdims=True)
        report = compute_report(probs, y_true, classes)
        matrix = np.array(report.confusion)
        assert matrix.sum() == report.n_test == 60
        for i, label in enumerate(classes):
            assert matrix[i].sum() == y_true.count(label)
        assert report.accuracy == pytest.approx(np.trace(matrix) / 60)

    def test_label_outside_classes_is_an_error(self):
        with pytest.raises(ValueError, match="outside"):
            compute_report(np.array([[1.0, 0.0]]), ["zebra"], ("a", "b"))

    def test_tiny_class_reports_insufficient_support(self):
        classes = ("a", "b")
        y_true = ["a"] * 9 + ["b"]  # one test example for b
        probs = np.tile([0.6, 0.4], (10, 1))
        report = compute_report(probs, y_true, classes)
        assert report.per_class_auc["b"] is None
        assert report.roc["b"] is None
        assert report.per_class_auc["a"] is not None
        data = report.to_dict()
        assert data["per_class_auc"]["b"] == "insufficient-support"
        assert EvalReport.from_dict(data).per_class_auc["b"] is None


def test_accuracy_score_basic():
    assert accuracy_score(["a", "b"], ["a", "a"]) == 0.5
    with pytest.raises(ValueError):
        accuracy_score([], [])
