import numpy as np
import pytest

from takeover import baselines, sampling
from takeover.errors import DimensionMismatch, SingleClassData


def blobs(rng, n_per_class=30, dims=4, k=3, spread=0.4):
    centers = rng.normal(scale=3.0, size=(k, dims))
    X = np.vstack([centers[c] + spread * rng.normal(size=(n_per_class, dims))
                   for c in range(k)])
    y = np.repeat(np.arange(k), n_per_class)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


def test_logistic_separable_accuracy(rng):
    X, y = blobs(rng)
    model = baselines.fit_logistic(X, y, l2=1e-4)
    pred, probs = baselines.predict_logistic(model, X)
    assert (pred == y).mean() >= 0.98
    np.testing.assert_allclose(probs.sum(axis=1), np.ones(len(y)), rtol=1e-9)


def test_logistic_loss_decreases_monotonically_without_l1(rng):
    # proximal gradient with backtracking never increases the objective
    X, y = blobs(rng, n_per_class=20)
    Y = np.zeros((len(y), 3))
    Y[np.arange(len(y)), y] = 1.0
    model = baselines.fit_logistic(X, y, l2=0.01, max_iter=50)
    # recompute the objective along a fresh fit's path is internal; instead
    # check the fitted loss is below the zero-weight starting loss
    W0 = np.zeros((X.shape[1], 3))
    b0 = np.zeros(3)
    start_loss = baselines._softmax_loss_grad(W0, b0, X, Y, 0.01)[0]
    end_loss = baselines._softmax_loss_grad(model.weights, model.bias, X, Y, 0.01)[0]
    assert end_loss < start_loss


def test_logistic_gradient_matches_central_difference(rng):
    X, y = blobs(rng, n_per_class=10, dims=3)
    Y = np.zeros((len(y), 3))
    Y[np.arange(len(y)), y] = 1.0
    W = rng.normal(size=(3, 3)) * 0.5
    b = rng.normal(size=3) * 0.5
    l2 = 0.1
    _, gW, gb = baselines._softmax_loss_grad(W, b, X, Y, l2)
    h = 1e-6
    for (i, j) in [(0, 0), (1, 2), (2, 1)]:
        old = W[i, j]
        W[i, j] = old + h
        up = baselines._softmax_loss_grad(W, b, X, Y, l2)[0]
        W[i, j] = old - h
        dn = baselines._softmax_loss_grad(W, b, X, Y, l2)[0]
        W[i, j] = old
        assert abs(gW[i, j] - (up - dn) / (2 * h)) < 1e-5
    old = b[1]
    b[1] = old + h
    up = baselines._softmax_loss_grad(W, b, X, Y, l2)[0]
    b[1] = old - h
    dn = baselines._softmax_loss_grad(W, b, X, Y, l2)[0]
    b[1] = old
    assert abs(gb[1] - (up - dn) / (2 * h)) < 1e-5


def test_l1_drives_noise_features_to_zero(rng):
    # class depends on column 0 only; columns 1..5 are pure noise
    n = 120
    signal = rng.normal(size=n)
    X = np.column_stack([signal, rng.normal(size=(n, 5)) * 0.5])
    y = (signal > 0).astype(int)
    strong = baselines.fit_logistic(X, y, l1=0.05)
    kept = baselines.nonzero_features(strong)
    assert 0 in kept
    assert len(kept) <= 3
    none = baselines.fit_logistic(X, y, l1=0.0)
    assert len(baselines.nonzero_features(none)) == 6


def test_soft_threshold():
    W = np.array([[0.5, -0.3], [0.1, -0.05]])
    out = baselines._soft_threshold(W, 0.2)
    np.testing.assert_allclose(out, [[0.3, -0.1], [0.0, 0.0]])


def test_logistic_single_class_raises():
    with pytest.raises(SingleClassData):
        baselines.fit_logistic(np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_logistic_deterministic(rng):
    X, y = blobs(rng)
    a = baselines.fit_logistic(X, y, l2=1e-3)
    b = baselines.fit_logistic(X, y, l2=1e-3)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_predict_logistic_rejects_wrong_width(rng):
    X, y = blobs(rng, dims=4)
    model = baselines.fit_logistic(X, y)
    with pytest.raises(DimensionMismatch):
        baselines.predict_logistic(model, np.zeros((2, 5)))


def test_forest_separable_accuracy(rng):
    X, y = blobs(rng)
    forest = baselines.fit_random_forest(X, y, n_trees=30, seed=1)
    pred, probs = baselines.predict_forest(forest, X)
    assert (pred == y).mean() >= 0.98
    np.testing.assert_allclose(probs.sum(axis=1), np.ones(len(y)), rtol=1e-9)


def test_forest_generalizes_on_holdout(rng):
    X, y = blobs(rng, n_per_class=60, spread=0.6)
    cut = int(0.7 * len(y))
    forest = baselines.fit_random_forest(X[:cut], y[:cut], n_trees=50, seed=2)
    pred, _ = baselines.predict_forest(forest, X[cut:])
    assert (pred == y[cut:]).mean() >= 0.9


def test_forest_deterministic(rng):
    X, y = blobs(rng, n_per_class=15)
    a = baselines.fit_random_forest(X, y, n_trees=10, seed=3)
    b = baselines.fit_random_forest(X, y, n_trees=10, seed=3)
    _, pa = baselines.predict_forest(a, X)
    _, pb = baselines.predict_forest(b, X)
    np.testing.assert_array_equal(pa, pb)
    np.testing.assert_array_equal(a.importances, b.importances)


def test_forest_importances_normalized_and_informative(rng):
    n = 200
    signal = rng.normal(size=n)
    X = np.column_stack([signal, rng.normal(size=(n, 4)) * 0.3])
    y = (signal > 0).astype(int)
    forest = baselines.fit_random_forest(X, y, n_trees=40, seed=4)
    assert abs(forest.importances.sum() - 1.0) < 1e-9
    assert forest.importances[0] == forest.importances.max()
    assert forest.importances[0] > 0.5


def test_forest_single_class_raises():
    with pytest.raises(SingleClassData):
        baselines.fit_random_forest(np.zeros((5, 2)), np.ones(5, dtype=int))


def test_gini_reference():
    assert baselines._gini(np.array([5, 0])) == 0.0
    assert abs(baselines._gini(np.array([5, 5])) - 0.5) < 1e-12
    assert abs(baselines._gini(np.array([1, 1, 1])) - 2 / 3) < 1e-12
    assert baselines._gini(np.array([0, 0])) == 0.0


def test_best_split_finds_planted_boundary():
    X = np.array([[0.1], [0.2], [0.3], [0.4], [5.1], [5.2], [5.3], [5.4]])
    y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    best = baselines._best_split(X, y, [0], 2, 2)
    assert best is not None
    decrease, feature, thr = best
    assert feature == 0
    assert 0.4 < thr < 5.1
    assert abs(decrease - 0.5) < 1e-12  # perfect split of a 50/50 node


def selection_dataset(rng, n=90, n_groups=6):
    # columns 0 and 1 carry the signal, 2..7 are noise
    X = rng.normal(size=(n, 8))
    y = ((X[:, 0] + X[:, 1]) > 0).astype(int)
    groups = tuple(f"s{i % n_groups}" for i in range(n))
    return sampling.LabeledDataset(
        X, y, groups, tuple(f"e{i}" for i in range(n)), ("a", "b"),
        tuple(f"f{j}" for j in range(8)))


def test_select_features_keeps_signal_columns(rng):
    ds = selection_dataset(rng)
    report = baselines.select_features(ds, l1_grid=(0.001, 0.01, 0.05),
                                       seed=0, folds=3, cv_max_iter=300)
    assert 0 in report.selected and 1 in report.selected
    assert set(report.selected) <= set(report.lasso_set)
    assert len(report.rf_top) == len(report.lasso_set)
    assert report.best_l1 in (0.001, 0.01, 0.05)
    assert set(report.cv_accuracy) == {0.001, 0.01, 0.05}


def test_select_features_falls_back_to_lasso_set(rng, monkeypatch):
    ds = selection_dataset(rng)
    # force a disjoint forest ranking to exercise the fallback
    real_fit = baselines.fit_random_forest

    def skewed(X, y, **kw):
        forest = real_fit(X, y, **kw)
        forest.importances = np.linspace(1.0, 2.0, X.shape[1])  # favors last cols
        return forest

    monkeypatch.setattr(baselines, "fit_random_forest", skewed)
    report = baselines.select_features(ds, l1_grid=(0.2,), seed=0, folds=3,
                                       cv_max_iter=200)
    if not (set(report.lasso_set) & set(report.rf_top)):
        assert report.selected == report.lasso_set
