"""Random forest with explicit vote matrices, out-of-bag machinery and
impurity-based feature weights.

Tree induction is delegated to sklearn decision trees; bootstrap sampling,
vote aggregation, out-of-bag bookkeeping and weight normalization are
implemented here so their semantics are pinned down by this module, not by
sklearn defaults. A vote matrix row holds, per class, the fraction of trees
voting for that class, where each tree votes with the class proportions of
the leaf the example falls into. Rows therefore sum to one.
"""

import math
import pickle
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .seeding import derive_seed


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters for forest training.

    ``features_per_split`` of ``None`` means ceil(sqrt(d)) for the trained
    dimension d, computed at fit time.
    """

    tree_count: int = 200
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be at least 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be at least 1 when set")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be at least 1 when set")


@dataclass
class Forest:
    trees: list = field(repr=False)
    bootstrap: list = field(repr=False)  # per tree, in-bag row indices
    class_count: int
    dimension: int
    n_train: int
    config: ForestConfig
    single_class: bool = False  # degenerate constant-vote forest

    def __len__(self) -> int:
        return len(self.trees)


def fit(X: np.ndarray, y: np.ndarray, config: ForestConfig, class_count: int | None = None) -> Forest:
    """Train a bootstrap forest of sklearn trees.

    Each tree sees n rows drawn with replacement; the drawn indices are
    recorded for out-of-bag queries. Single-class training sets are legal
    and produce constant trees. ``class_count`` widens the vote matrix when
    some classes are absent from ``y``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("training set must be a non-empty 2-d matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must match the number of training rows")
    if y.min() < 1:
        raise ValueError("labels must be positive integers")
    K = int(class_count) if class_count is not None else int(y.max())
    if K < int(y.max()):
        raise ValueError("class_count smaller than the largest label")
    n, d = X.shape
    mfeat = config.features_per_split
    if mfeat is None:
        mfeat = math.ceil(math.sqrt(d))
    mfeat = min(mfeat, d)

    rng = np.random.default_rng(config.seed)
    trees = []
    bootstrap = []
    for _ in range(config.tree_count):
        idx = rng.integers(0, n, size=n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        tree = DecisionTreeClassifier(
            criterion="gini",
            max_depth=config.max_depth,
            min_samples_leaf=config.min_leaf,
            max_features=mfeat,
            random_state=tree_seed,
        )
        tree.fit(X[idx], y[idx])
        trees.append(tree)
        bootstrap.append(idx)
    return Forest(trees=trees, bootstrap=bootstrap, class_count=K,
                  dimension=d, n_train=n, config=config,
                  single_class=bool(np.unique(y).size == 1))


def _check_query(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.dimension:
        raise ValueError(f"query matrix must have {forest.dimension} columns")
    return X


def _tree_proba(tree, X: np.ndarray, class_count: int) -> np.ndarray:
    """Leaf class fractions of one tree, widened to all dataset classes."""
    proba = tree.predict_proba(X)
    cols = tree.classes_.astype(np.intp) - 1
    out = np.zeros((X.shape[0], class_count))
    out[:, cols] = proba
    return out


def votes(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Vote matrix on X: mean over trees of leaf class fractions."""
    X = _check_query(forest, X)
    acc = np.zeros((X.shape[0], forest.class_count))
    for tree in forest.trees:
        acc += _tree_proba(tree, X, forest.class_count)
    return acc / len(forest.trees)


def predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Majority-vote labels; ties break toward the smaller class index."""
    return np.argmax(votes(forest, X), axis=1).astype(np.int64) + 1


def oob_votes(forest: Forest, X_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-bag vote matrix over the training rows.

    Returns ``(V, covered)`` where row i of V averages the votes of trees
    whose bootstrap sample missed row i. ``covered`` flags rows left out by
    at least one tree; vote rows of uncovered rows are all zero and must be
    ignored. X_train must be the matrix the forest was fitted on.
    """
    X_train = _check_query(forest, X_train)
    n = X_train.shape[0]
    if n != forest.n_train:
        raise ValueError("X_train does not match the fitted training set size")
    acc = np.zeros((n, forest.class_count))
    counts = np.zeros(n)
    for tree, idx in zip(forest.trees, forest.bootstrap):
        out_rows = np.flatnonzero(np.bincount(idx, minlength=n) == 0)
        if out_rows.size == 0:
            continue
        acc[out_rows] += _tree_proba(tree, X_train[out_rows], forest.class_count)
        counts[out_rows] += 1
    covered = counts > 0
    acc[covered] /= counts[covered, None]
    return acc, covered


def oob_error(forest: Forest, X_train: np.ndarray, y_train: np.ndarray) -> float:
    """Misclassification rate of out-of-bag predictions on covered rows."""
    y_train = np.asarray(y_train, dtype=np.int64)
    V, covered = oob_votes(forest, X_train)
    if not covered.any():
        raise ValueError("no training row is out-of-bag; cannot estimate error")
    preds = np.argmax(V[covered], axis=1) + 1
    return float(np.mean(preds != y_train[covered]))


def feature_weights(forest: Forest) -> np.ndarray:
    """Mean decrease of Gini impurity per feature, normalized to sum to one.

    Per tree the raw (unnormalized) impurity decreases are summed per
    feature; those are averaged over trees and normalized once at the end.
    A forest of pure-leaf stumps with no splits yields the uniform vector.
    """
    total = np.zeros(forest.dimension)
    for tree in forest.trees:
        total += tree.tree_.compute_feature_importances(normalize=False)
    total /= len(forest.trees)
    s = total.sum()
    if s <= 0:
        return np.full(forest.dimension, 1.0 / forest.dimension)
    return total / s


def save_forest(forest: Forest, path) -> None:
    with open(path, "wb") as fh:
        pickle.dump({"format": 1, "forest": forest}, fh)


def load_forest(path) -> Forest:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload.get("format") != 1:
        raise ValueError("unsupported forest file format")
    return payload["forest"]


def subsample_seed(base_seed: int, *context) -> int:
    """Convenience wrapper so callers derive forest seeds one way."""
    return derive_seed(base_seed, *context)
