"""Metrics, ROC/AUC and rank-sum tests against independent oracles."""

from itertools import combinations

import numpy as np
import pytest
from scipy import stats as scipy_stats

from mcdc.conditions import by_code
from mcdc.data import CdgdWindow
from mcdc.evaluation import (
    _exact_two_sided,
    _midranks,
    _normal_two_sided,
    compare,
    confusion,
    evaluate_model,
    metrics,
    roc_auc,
    wilcoxon_rank_sum,
)


def mann_whitney_auc(positive, scores):
    """Pairwise U-statistic oracle: ties count half."""
    pos_scores = scores[positive]
    neg_scores = scores[~positive]
    u = 0.0
    for p in pos_scores:
        for n in neg_scores:
            if p > n:
                u += 1.0
            elif p == n:
                u += 0.5
    return u / (len(pos_scores) * len(neg_scores))


def enumeration_p_value(a, b):
    """Independent exhaustive oracle for the two-sided rank-sum p."""
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(pooled.size)
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = np.mean(np.arange(i, j + 1) + 1.0)
        i = j + 1
    n1 = len(a)
    mu = n1 * (pooled.size + 1) / 2.0
    observed = abs(ranks[:n1].sum() - mu)
    extreme = total = 0
    for subset in combinations(range(pooled.size), n1):
        total += 1
        if abs(ranks[list(subset)].sum() - mu) >= observed - 1e-9:
            extreme += 1
    return extreme / total


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        labels = [0, 1, 2, 3, 4, 5, 6, 3, 3]
        cm = confusion(labels, labels)
        assert np.array_equal(cm, np.diag(np.bincount(labels, minlength=7)))

    def test_single_off_diagonal_count(self):
        cm = confusion([2], [5])
        assert cm[2, 5] == 1
        assert cm.sum() == 1

    def test_row_sums_are_true_counts(self):
        rng = np.random.default_rng(0)
        true = rng.integers(0, 7, size=200)
        pred = rng.integers(0, 7, size=200)
        cm = confusion(true, pred)
        assert np.array_equal(cm.sum(axis=1), np.bincount(true, minlength=7))
        assert np.array_equal(cm.sum(axis=0), np.bincount(pred, minlength=7))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([0, 1], [0])


class TestMetrics:
    def test_binary_hand_values(self):
        # TP=3, TN=5, FP=1, FN=1 for class 1
        cm = np.array([[5, 1], [1, 3]])
        report = metrics(cm)
        assert report.accuracy == pytest.approx(0.8)
        assert report.precision[1] == pytest.approx(0.75)
        assert report.recall[1] == pytest.approx(0.75)
        assert report.f1[1] == pytest.approx(0.75)

    def test_diagonal_matrix_is_perfect(self):
        report = metrics(np.diag([3, 1, 4, 1, 5, 9, 2]))
        assert report.accuracy == 1.0
        assert report.macro_precision == 1.0
        assert report.macro_recall == 1.0
        assert report.macro_f1 == 1.0

    def test_absent_class_zero_convention(self):
        cm = np.zeros((3, 3), dtype=int)
        cm[0, 0] = 5
        cm[1, 1] = 5
        report = metrics(cm)
        assert report.precision[2] == 0.0
        assert report.recall[2] == 0.0
        assert report.f1[2] == 0.0

    def test_recall_is_row_normalized_diagonal(self):
        rng = np.random.default_rng(1)
        cm = rng.integers(0, 20, size=(7, 7))
        cm += np.eye(7, dtype=int)  # keep every row populated
        report = metrics(cm)
        for c in range(7):
            assert report.recall[c] == pytest.approx(cm[c, c] / cm[c].sum())
        assert report.macro_f1 <= 1.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            metrics(np.zeros((7, 7), dtype=int))


class TestRocAuc:
    def _probs(self, scores):
        scores = np.asarray(scores, dtype=float)
        return np.stack([1.0 - scores, scores], axis=1)

    def test_perfect_separation(self):
        result = roc_auc([0, 0, 1, 1], self._probs([0.1, 0.2, 0.8, 0.9]))
        assert result["per_class_auc"][1] == pytest.approx(1.0)

    def test_identical_scores_are_chance(self):
        result = roc_auc([0, 1, 0, 1], self._probs([0.5, 0.5, 0.5, 0.5]))
        assert result["per_class_auc"][1] == pytest.approx(0.5)

    def test_trapezoid_equals_mann_whitney(self):
        rng = np.random.default_rng(2)
        for trial in range(100):
            n = int(rng.integers(4, 30))
            scores = rng.integers(0, 10, size=n) / 10.0 if trial % 2 else rng.uniform(size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            result = roc_auc(labels, self._probs(scores))
            oracle = mann_whitney_auc(labels == 1, scores)
            assert result["per_class_auc"][1] == pytest.approx(oracle, abs=1e-9)

    def test_absent_class_excluded_from_macro(self):
        probs = np.full((4, 3), 1.0 / 3.0)
        result = roc_auc([0, 0, 1, 1], probs)
        assert result["per_class_auc"][2] is None
        defined = [a for a in result["per_class_auc"] if a is not None]
        assert result["macro_auc"] == pytest.approx(np.mean(defined))

    def test_micro_pools_all_decisions(self):
        rng = np.random.default_rng(3)
        raw = rng.uniform(size=(20, 3))
        probs = raw / raw.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 3, size=20)
        result = roc_auc(labels, probs)
        onehot = np.zeros_like(probs, dtype=bool)
        onehot[np.arange(20), labels] = True
        oracle = mann_whitney_auc(onehot.ravel(), probs.ravel())
        assert result["micro_auc"] == pytest.approx(oracle, abs=1e-9)

    def test_permuting_samples_changes_nothing(self):
        rng = np.random.default_rng(4)
        raw = rng.uniform(size=(30, 4))
        probs = raw / raw.sum(axis=1, keepdims=True)
        labels = rng.integers(0, 4, size=30)
        perm = rng.permutation(30)
        a = roc_auc(labels, probs)
        b = roc_auc(labels[perm], probs[perm])
        assert a["per_class_auc"] == b["per_class_auc"]
        assert a["micro_auc"] == b["micro_auc"]


class TestWilcoxon:
    def test_frozen_example(self):
        assert wilcoxon_rank_sum([1, 2], [3, 4]) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_identical_samples(self):
        assert wilcoxon_rank_sum([5, 5], [5, 5]) == 1.0

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            wilcoxon_rank_sum([], [1.0])

    def test_exact_branch_vs_scipy_without_ties(self):
        rng = np.random.default_rng(5)
        for n1 in range(1, 9):
            for n2 in range(1, 9):
                values = rng.permutation(100)[: n1 + n2].astype(float)
                a, b = values[:n1], values[n1:]
                ours = wilcoxon_rank_sum(a, b)
                ref = scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue
                assert ours == pytest.approx(ref, abs=1e-12), (n1, n2)

    def test_exact_branch_vs_enumeration_with_ties(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n1 = int(rng.integers(1, 7))
            n2 = int(rng.integers(1, 7))
            a = rng.integers(0, 4, size=n1).astype(float)
            b = rng.integers(0, 4, size=n2).astype(float)
            assert wilcoxon_rank_sum(a, b) == pytest.approx(enumeration_p_value(a, b), abs=1e-12)

    def test_exact_vs_normal_agreement_at_ten_ten(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = rng.normal(size=10)
            b = rng.normal(loc=rng.uniform(0, 1.5), size=10)
            ranks = _midranks(np.concatenate([a, b]))
            w = float(ranks[:10].sum())
            exact = _exact_two_sided(ranks, 10, w)
            approx = _normal_two_sided(ranks, 10, w)
            assert abs(exact - approx) < 0.02

    def test_large_samples_use_normal_branch(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=30)
        b = rng.normal(loc=2.0, size=30)
        p = wilcoxon_rank_sum(a, b)
        assert 0.0 <= p < 0.01

    def test_order_invariance(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=6)
        b = rng.normal(size=5)
        assert wilcoxon_rank_sum(a, b) == wilcoxon_rank_sum(list(reversed(a)), list(reversed(b)))


class _CentroidModel:
    """Nearest-centroid stand-in with a predict_proba surface."""

    def __init__(self, train_windows):
        feats = np.array([w.values.mean(axis=1) for w in train_windows])
        labels = np.array([w.label.code for w in train_windows])
        self.centroids = np.array(
            [feats[labels == c].mean(axis=0) if np.any(labels == c) else np.full(5, 1e9) for c in range(7)]
        )

    def predict_proba(self, values):
        d = ((values.mean(axis=1)[None, :] - self.centroids) ** 2).sum(axis=1)
        inv = 1.0 / (d + 1e-9)
        return inv / inv.sum()


def _centroid_fitter(train_windows, val_windows, seed):
    return _CentroidModel(train_windows)


def _comparison_windows(seed=10, per_class=12):
    rng = np.random.default_rng(seed)
    windows = []
    for c in range(7):
        for i in range(per_class):
            values = c * 2.0 + rng.normal(scale=0.8, size=(5, 6))
            windows.append(CdgdWindow(f"t{c}-{i}", i, values, by_code(c)))
    return windows


class TestCompare:
    def test_single_model_single_repetition(self):
        windows = _comparison_windows()
        result = compare({"centroid": _centroid_fitter}, windows, "sample", 1, base_seed=11, k=2)
        (row,) = result.models
        assert row.mean_accuracy == row.accuracies[0]
        assert row.max_mean_error == 0.0
        assert result.p_values == {}

    def test_identical_models_p_one(self):
        windows = _comparison_windows()
        result = compare(
            {"a": _centroid_fitter, "b": _centroid_fitter}, windows, "sample", 4, base_seed=12, k=2
        )
        assert result.p_values["a|b"] == 1.0

    def test_mean_accuracy_definitional(self):
        windows = _comparison_windows()
        result = compare({"centroid": _centroid_fitter}, windows, "sample", 5, base_seed=13, k=2)
        (row,) = result.models
        assert row.mean_accuracy == pytest.approx(np.mean(row.accuracies))
        assert row.max_mean_error == pytest.approx(
            max(abs(a - row.mean_accuracy) for a in row.accuracies)
        )


class TestEvaluateModel:
    def test_report_shape(self):
        windows = _comparison_windows(seed=14, per_class=6)
        model = _CentroidModel(windows)
        report = evaluate_model(model, windows)
        assert report.n_samples == len(windows)
        assert len(report.precision) == 7
        assert len(report.per_class_auc) == 7
        assert 0.0 <= report.accuracy <= 1.0
        assert np.array(report.confusion).sum() == len(windows)
