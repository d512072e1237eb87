import itertools
import warnings

import numpy as np
import pytest

from adaptrix.dataset import PointCloud
from adaptrix.errors import ArgumentError
from adaptrix.evaluate import (
    _design,
    _nll_and_grad,
    accuracy,
    adjusted_rand_index,
    classify,
    cluster_embedding,
    contingency,
    f1_macro,
    holdout_splits,
    homogeneity_completeness_v,
    kfold_cv,
    kmeans,
    lloyd,
    logistic_fit,
    stratified_folds,
)
from oracles import ari_by_pairs, hcv_by_entropies, set_partitions


class TestKmeans:
    def test_square_corners(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        labels, centers, inertia = kmeans(X, 4, seed=0)
        assert inertia == 0.0
        assert len(set(labels)) == 4

    def test_two_blobs(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0, 0.1, (50, 2)), rng.normal(5, 0.1, (50, 2))])
        labels, _, _ = kmeans(X, 2, seed=1)
        assert adjusted_rand_index(np.repeat([0, 1], 50), labels) == 1.0

    def test_lloyd_monotone(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((300, 3))
        for s in range(5):
            start = X[np.random.default_rng(s).choice(300, 6, replace=False)]
            *_, history = lloyd(X, start)
            assert np.all(np.diff(history) <= 1e-9)

    def test_restarts_never_hurt(self):
        X = np.random.default_rng(2).standard_normal((200, 2))
        one = kmeans(X, 5, seed=3, n_init=1)[2]
        many = kmeans(X, 5, seed=3, n_init=10)[2]
        assert many <= one

    def test_deterministic(self):
        X = np.random.default_rng(4).standard_normal((100, 2))
        a = kmeans(X, 3, seed=9)
        b = kmeans(X, 3, seed=9)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[2] == b[2]

    def test_empty_cluster_reseeded(self):
        X = np.array([[0.0], [0.1], [10.0]])
        labels, centers, inertia, _ = lloyd(X, np.array([[0.05], [100.0], [200.0]]))
        assert len(set(labels)) == 3 and inertia == 0.0

    def test_too_many_clusters(self):
        with pytest.raises(ArgumentError):
            kmeans(np.zeros((3, 2)), 4)


class TestPartitionMetrics:
    def test_identical(self):
        t = [0, 0, 1, 2, 2]
        assert adjusted_rand_index(t, t) == 1.0
        assert homogeneity_completeness_v(t, t) == (1.0, 1.0, 1.0)

    def test_reference_ari(self):
        assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-15)
        assert ari_by_pairs([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-15)

    def test_reference_hcv(self):
        h, c, v = homogeneity_completeness_v([0, 0, 1, 1], [0, 0, 0, 1])
        assert (h, c, v) == pytest.approx(hcv_by_entropies([0, 0, 1, 1], [0, 0, 0, 1]), abs=1e-14)
        assert h == pytest.approx(0.3113, abs=1e-4)
        assert c == pytest.approx(0.3836, abs=1e-4)
        assert v == pytest.approx(0.3437, abs=1e-4)

    def test_singletons(self):
        h, c, _ = homogeneity_completeness_v([0, 0, 1, 1, 2], [0, 1, 2, 3, 4])
        assert h == pytest.approx(1.0) and c < 1

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_enumeration(self, n):
        parts = list(set_partitions(n, 3))
        for t, p in itertools.product(parts, parts):
            assert adjusted_rand_index(t, p) == pytest.approx(ari_by_pairs(t, p), abs=1e-12)
            assert homogeneity_completeness_v(t, p) == pytest.approx(hcv_by_entropies(t, p),
                                                                     abs=1e-12)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(5)
        t = rng.integers(0, 3, 30)
        p = rng.integers(0, 4, 30)
        relabel = np.array([7, 2, 9, 4])[p]
        swap = np.array([2, 0, 1])[t]
        ref_ari = adjusted_rand_index(t, p)
        ref_hcv = homogeneity_completeness_v(t, p)
        for tt, pp in [(t, relabel), (swap, p), (swap, relabel)]:
            assert adjusted_rand_index(tt, pp) == pytest.approx(ref_ari, abs=1e-14)
            assert homogeneity_completeness_v(tt, pp) == pytest.approx(ref_hcv, abs=1e-14)

    def test_ari_centred_on_random_labels(self):
        rng = np.random.default_rng(6)
        scores = [adjusted_rand_index(rng.integers(0, 3, 200), rng.integers(0, 3, 200))
                  for _ in range(1000)]
        assert abs(np.mean(scores)) <= 0.02

    def test_contingency_total(self):
        C = contingency([0, 1, 1, 2], [5, 5, 6, 6])
        assert C.sum() == 4 and C.shape == (3, 2)

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            adjusted_rand_index([0, 1], [0, 1, 1])
        with pytest.raises(ArgumentError):
            homogeneity_completeness_v([0, 1], [0])

    def test_cluster_embedding(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal(c, 0.1, (20, 2)) for c in (0, 5, 10)])
        assert cluster_embedding(X, np.repeat([0, 1, 2], 20)).ari == 1.0


class TestClassification:
    def test_threshold_in_gap(self):
        X = np.r_[np.linspace(-3, -1, 20), np.linspace(1, 3, 20)][:, None]
        y = np.r_[np.zeros(20), np.ones(20)].astype(int)
        with pytest.warns(RuntimeWarning, match="separable"):
            model = logistic_fit(X, y, max_iter=200)
        grid = np.linspace(-3, 3, 601)[:, None]
        pred = classify(model, grid)
        boundary = grid[np.flatnonzero(np.diff(pred))[0], 0]
        assert -1 < boundary < 1
        np.testing.assert_array_equal(classify(model, X), y)

    def test_duplicated_features(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(80)
        y = (x + rng.normal(0, 1.0, 80) > 0).astype(int)
        single = logistic_fit(x[:, None], y)
        double = logistic_fit(np.column_stack([x, x]), y)
        np.testing.assert_array_equal(classify(single, x[:, None]),
                                      classify(double, np.column_stack([x, x])))

    def test_converged_gradient(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((150, 2))
        y = rng.integers(0, 3, 150)
        model = logistic_fit(X, y, tol=1e-6)
        assert model.converged
        Z = _design(X)
        Y = np.eye(3)[np.searchsorted(model.classes, y)]
        _, grad = _nll_and_grad(model.weights, Z, Y)
        assert np.max(np.abs(grad)) < 1e-6

    def test_feature_mismatch(self):
        model = logistic_fit(np.random.default_rng(0).standard_normal((20, 2)), np.arange(20) % 2)
        with pytest.raises(ArgumentError):
            classify(model, np.zeros((3, 3)))

    def test_accuracy_and_f1(self):
        t = np.array([1, 1, 0, 0])
        p = np.array([1, 0, 0, 0])
        assert accuracy(t, p) == 0.75
        # per-class F1: 0.8 for class 0, 2/3 for class 1
        assert f1_macro(t, p) == pytest.approx((0.8 + 2 / 3) / 2, abs=1e-15)
        assert accuracy(t, t) == 1.0 and f1_macro(t, t) == 1.0

    def test_metrics_relabel_invariant(self):
        rng = np.random.default_rng(10)
        t = rng.integers(0, 3, 40)
        p = rng.integers(0, 3, 40)
        m = np.array([2, 0, 1])
        assert accuracy(m[t], m[p]) == accuracy(t, p)
        assert f1_macro(m[t], m[p]) == pytest.approx(f1_macro(t, p), abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            accuracy([0, 1], [0])
        with pytest.raises(ArgumentError):
            f1_macro([0, 1], [0])


class TestResampling:
    def test_folds_partition(self):
        labels = np.random.default_rng(11).integers(0, 3, 100)
        folds = stratified_folds(labels, 3, seed=2)
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(100))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        for c in range(3):
            per_fold = [np.sum(labels[f] == c) for f in folds]
            assert max(per_fold) - min(per_fold) <= 1

    def test_small_class_falls_back(self):
        labels = np.array([0, 0, 0, 0, 1])
        with pytest.warns(RuntimeWarning, match="unstratified"):
            folds = stratified_folds(labels, 2)
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(5))

    def test_bad_fold_count(self):
        with pytest.raises(ArgumentError):
            stratified_folds([0, 1, 0], 1)

    def test_holdout(self):
        labels = np.repeat([0, 1], 50)
        splits = holdout_splits(labels, 0.2, 3, seed=1)
        assert len(splits) == 3
        for train, test in splits:
            assert len(test) == 20 and len(np.intersect1d(train, test)) == 0
            assert len(train) + len(test) == 100

    def test_leave_one_out(self):
        rng = np.random.default_rng(12)
        cloud = PointCloud(rng.standard_normal((8, 2)), np.array([0, 1] * 4))

        def identity(train, X_test, seed):
            return train.coords, X_test

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out = kfold_cv(cloud, 8, identity)
        assert len(out["folds"]) == 8
        assert all(f["n_test"] == 1 for f in out["folds"])
        assert 0.0 <= out["mean_accuracy"] <= 1.0

    def test_needs_labels(self):
        with pytest.raises(ArgumentError):
            kfold_cv(PointCloud(np.zeros((6, 2)) + np.arange(6)[:, None]), 2, None)
