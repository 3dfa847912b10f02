"""Random forest building blocks: votes, out-of-bag error, feature weights.

Fits a forest on separable synthetic data and shows that the out-of-bag
error tracks a held-out estimate, and that impurity-based feature weights
concentrate on the informative columns.
"""

import numpy as np

from ssfs.dataset import generate_synthetic
from ssfs.forest import ForestConfig, feature_weights, fit, oob_votes, predict, votes

# --- Data: 20 features, only the first few matter ---
ds = generate_synthetic(n=1200, d=20, informative=4, class_count=2,
                        margin=0.3, seed=7)
informative = ds.metadata["informative"]
print("informative columns:", informative)

train, hold = np.arange(800), np.arange(800, 1200)
X, y = ds.features[train], ds.labels[train]

model = fit(X, y, ForestConfig(tree_count=200, seed=7), class_count=2)

# --- Vote matrix rows are probability vectors ---
V = votes(model, X[:3])
print("vote rows for three training examples:\n", np.round(V, 3))

# --- Out-of-bag error vs a true holdout ---
oobV, covered = oob_votes(model, X)
oob_pred = np.argmax(oobV[covered], axis=1) + 1
oob_err = float(np.mean(oob_pred != y[covered]))
hold_err = float(np.mean(predict(model, ds.features[hold]) != ds.labels[hold]))
print(f"oob error {oob_err:.4f} vs holdout error {hold_err:.4f} "
      f"(coverage {covered.mean():.3f})")

# --- Impurity-based weights find the informative columns ---
w = feature_weights(model)
order = np.argsort(w)[::-1]
print("top-5 features by weight:", order[:5].tolist())
print(f"mean weight informative {w[informative].mean():.4f} vs "
      f"others {np.delete(w, informative).mean():.4f}")
