"""Reference learners: penalized softmax regression and a random forest.

Both consume the same finalized matrices and split plans as the network,
so their scores are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingleClassData
from .nn import softmax
from .sampling import LabeledDataset, grouped_kfold, rows_for_ids

L1_GRID = tuple(np.logspace(-4, 1, 10))


@dataclass
class LinearModel:
    """Softmax regression parameters; weights has shape (features, classes)."""

    weights: np.ndarray
    bias: np.ndarray
    class_count: int
    l1: float
    l2: float
    n_iter: int
    converged: bool


def _softmax_loss_grad(W, b, X, Y, l2):
    n = X.shape[0]
    probs = softmax(X @ W + b)
    eps = np.finfo(float).tiny
    loss = float(-np.mean(np.log((probs * Y).sum(axis=1) + eps)))
    loss += 0.5 * l2 * float((W * W).sum())
    delta = (probs - Y) / n
    return loss, X.T @ delta + l2 * W, delta.sum(axis=0)


def _soft_threshold(W, thr):
    return np.sign(W) * np.maximum(np.abs(W) - thr, 0.0)


def fit_logistic(X, y, l1: float = 0.0, l2: float = 0.0, seed: int = 0,
                 max_iter: int = 5000, tol: float = 1e-6) -> LinearModel:
    """Fit multinomial logistic regression by proximal gradient descent.

    The smooth part (cross-entropy + L2) takes gradient steps with a
    backtracking line search; the L1 term enters through soft
    thresholding of the weights. Biases are never penalized. Iteration
    stops when the proximal-gradient-mapping norm drops below tol.

    Raises:
        SingleClassData: fewer than 2 distinct labels.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be (rows, features) aligned with y")
    classes = int(y.max()) + 1 if y.size else 0
    if np.unique(y).size < 2:
        raise SingleClassData("need at least 2 distinct classes")
    n, d = X.shape
    Y = np.zeros((n, classes))
    Y[np.arange(n), y] = 1.0
    # Zero init keeps the fit deterministic; seed is accepted for interface
    # symmetry with the other learners.
    del seed
    W = np.zeros((d, classes))
    b = np.zeros(classes)
    step = 1.0
    loss, gW, gb = _softmax_loss_grad(W, b, X, Y, l2)
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iter + 1):
        while True:
            W_new = _soft_threshold(W - step * gW, step * l1)
            b_new = b - step * gb
            dW, db = W_new - W, b_new - b
            quad = loss + float((gW * dW).sum()) + float((gb * db).sum()) \
                + (float((dW * dW).sum()) + float((db * db).sum())) / (2 * step)
            loss_new, gW_new, gb_new = _softmax_loss_grad(W_new, b_new, X, Y, l2)
            if loss_new <= quad + 1e-12:
                break
            step *= 0.5
            if step < 1e-12:
                break
        move = np.sqrt(((W_new - W) ** 2).sum() + ((b_new - b) ** 2).sum())
        W, b, loss, gW, gb = W_new, b_new, loss_new, gW_new, gb_new
        if move / step <= tol:
            converged = True
            break
        step = min(step * 1.25, 1e6)
    return LinearModel(W, b, classes, l1, l2, n_iter, converged)


def predict_logistic(model: LinearModel, X):
    """Hard labels and class probabilities for a matrix of rows."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatch(
            f"got {X.shape[1]} features, model expects {model.weights.shape[0]}")
    probs = softmax(X @ model.weights + model.bias)
    return probs.argmax(axis=1), probs


def nonzero_features(model: LinearModel, tol: float = 1e-8) -> list[int]:
    """Column indices carrying a non-negligible weight in any class."""
    return [int(j) for j in np.nonzero(np.abs(model.weights).max(axis=1) > tol)[0]]


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    probs: np.ndarray | None = None


@dataclass
class Forest:
    trees: list[_Node]
    importances: np.ndarray
    class_count: int
    n_features: int


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _best_split(X, y, features, n_classes, min_leaf):
    n = y.size
    parent_counts = np.bincount(y, minlength=n_classes)
    parent_gini = _gini(parent_counts)
    best = None  # (decrease, feature, threshold)
    for f in features:
        values = X[:, f]
        order = np.argsort(values, kind="mergesort")
        sv = values[order]
        one_hot = np.zeros((n, n_classes))
        one_hot[np.arange(n), y[order]] = 1.0
        left = one_hot.cumsum(axis=0)
        splits = np.arange(min_leaf, n - min_leaf + 1)
        if splits.size == 0:
            continue
        splits = splits[sv[splits - 1] < sv[splits]]
        if splits.size == 0:
            continue
        lc = left[splits - 1]
        rc = parent_counts - lc
        nl = splits.astype(float)
        nr = n - nl
        gl = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
        decrease = parent_gini - (nl / n) * gl - (nr / n) * gr
        k = int(np.argmax(decrease))
        if decrease[k] > 1e-12 and (best is None or decrease[k] > best[0]):
            thr = 0.5 * (sv[splits[k] - 1] + sv[splits[k]])
            best = (float(decrease[k]), int(f), thr)
    return best


def _build(X, y, rng, depth, max_depth, min_leaf, n_classes, importances, n_total):
    counts = np.bincount(y, minlength=n_classes)
    node = _Node()
    if depth >= max_depth or y.size < 2 * min_leaf or _gini(counts) == 0.0:
        node.probs = counts / counts.sum()
        return node
    d = X.shape[1]
    m = max(1, int(round(np.sqrt(d))))
    features = np.sort(rng.choice(d, size=min(m, d), replace=False))
    best = _best_split(X, y, features, n_classes, min_leaf)
    if best is None:
        node.probs = counts / counts.sum()
        return node
    decrease, f, thr = best
    importances[f] += (y.size / n_total) * decrease
    mask = X[:, f] <= thr
    node.feature, node.threshold = f, thr
    node.left = _build(X[mask], y[mask], rng, depth + 1, max_depth, min_leaf,
                       n_classes, importances, n_total)
    node.right = _build(X[~mask], y[~mask], rng, depth + 1, max_depth, min_leaf,
                        n_classes, importances, n_total)
    return node


def fit_random_forest(X, y, n_trees: int = 100, max_depth: int = 12,
                      min_leaf: int = 2, seed: int = 0) -> Forest:
    """Bootstrap forest of Gini-split trees over sqrt(d) feature draws.

    Trees are grown from independent per-tree seed streams and merged in
    tree order, so the fit is deterministic for a given seed. Importances
    are Gini decreases weighted by node size, normalized to sum to 1.

    Raises:
        SingleClassData: fewer than 2 distinct labels.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.unique(y).size < 2:
        raise SingleClassData("need at least 2 distinct classes")
    n, d = X.shape
    n_classes = int(y.max()) + 1
    importances = np.zeros(d)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n)
        trees.append(_build(X[rows], y[rows], rng, 0, max_depth, min_leaf,
                            n_classes, importances, n))
    total = importances.sum()
    if total > 0:
        importances = importances / total
    return Forest(trees, importances, n_classes, d)


def _tree_probs(node: _Node, X: np.ndarray, out: np.ndarray, rows: np.ndarray):
    if node.probs is not None:
        out[rows] = node.probs
        return
    mask = X[rows, node.feature] <= node.threshold
    _tree_probs(node.left, X, out, rows[mask])
    _tree_probs(node.right, X, out, rows[~mask])


def predict_forest(forest: Forest, X):
    """Hard labels and mean leaf distributions over all trees."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != forest.n_features:
        raise DimensionMismatch(
            f"got {X.shape[1]} features, forest expects {forest.n_features}")
    probs = np.zeros((X.shape[0], forest.class_count))
    buf = np.zeros_like(probs)
    rows = np.arange(X.shape[0])
    for tree in forest.trees:
        _tree_probs(tree, X, buf, rows)
        probs += buf
    probs /= len(forest.trees)
    return probs.argmax(axis=1), probs


@dataclass
class SelectionReport:
    lasso_set: list[int]
    rf_top: list[int]
    selected: list[int]
    best_l1: float
    cv_accuracy: dict[float, float]


def select_features(dataset: LabeledDataset, l1_grid=L1_GRID, seed: int = 0,
                    folds: int = 5, cv_max_iter: int = 1000) -> SelectionReport:
    """Intersect LASSO-surviving features with the forest's top importances.

    The L1 strength is chosen by grouped k-fold cross-validated accuracy
    (ties prefer the stronger penalty). The forest contributes its top-k
    features where k matches the LASSO set size. An empty intersection
    falls back to the LASSO set.
    """
    folds = min(folds, len(set(dataset.groups)))
    plans = grouped_kfold(dataset, folds=folds, seed=seed)
    cv_accuracy: dict[float, float] = {}
    for l1 in l1_grid:
        scores = []
        for plan in plans:
            tr = rows_for_ids(dataset, plan.train_ids)
            te = rows_for_ids(dataset, plan.test_ids)
            if np.unique(dataset.y[tr]).size < 2:
                continue
            model = fit_logistic(dataset.X[tr], dataset.y[tr], l1=l1,
                                 max_iter=cv_max_iter)
            pred, _ = predict_logistic(model, dataset.X[te])
            scores.append(float(np.mean(pred == dataset.y[te])))
        cv_accuracy[float(l1)] = float(np.mean(scores)) if scores else 0.0
    best_l1 = max(cv_accuracy, key=lambda l: (cv_accuracy[l], l))
    lasso = fit_logistic(dataset.X, dataset.y, l1=best_l1)
    lasso_set = nonzero_features(lasso)
    k = len(lasso_set)
    forest = fit_random_forest(dataset.X, dataset.y, seed=seed)
    # Ties rank by lower column index: sort by (-importance, index).
    ranked = sorted(range(dataset.X.shape[1]),
                    key=lambda j: (-forest.importances[j], j))
    rf_top = sorted(ranked[:k])
    selected = sorted(set(lasso_set) & set(rf_top))
    if not selected:
        selected = list(lasso_set)
    return SelectionReport(lasso_set, rf_top, selected, best_l1, cv_accuracy)
