"""Self-learning: pseudo-label unlabeled rows above an adaptive threshold.

Shows the round-by-round trace: each round picks per-class vote thresholds
that trade conditional error against coverage, pseudo-labels the confident
rows for good, and refits the forest.
"""

from ssfs.dataset import generate_synthetic, split
from ssfs.forest import ForestConfig
from ssfs.selflearn import sla

# --- A mostly unlabeled dataset ---
base = generate_synthetic(n=1000, d=8, informative=3, class_count=2,
                          margin=0.4, seed=11)
ds = split(base, (0.1, 0.8, 0.1), seed=11)
print(f"labeled {ds.labeled_indices.size}, unlabeled {ds.unlabeled_indices.size}, "
      f"test {ds.test_indices.size}")

augmented, model = sla(ds, ForestConfig(tree_count=150, seed=11), max_rounds=10)

print(f"{'round':>5} {'thresholds':>14} {'selected':>9} {'coverage':>9} {'error':>7}")
for r in augmented.trace:
    theta = "[" + " ".join(f"{t:.2f}" for t in r.thresholds.values) + "]"
    print(f"{r.round_no:>5} {theta:>14} {r.selected:>9} "
          f"{r.cumulative_coverage:>9.3f} {r.error_estimate:>7.3f}")

# --- Pseudo-label quality against the hidden truth ---
print(f"pseudo-labeled {len(augmented.pseudo)} of "
      f"{ds.unlabeled_indices.size} unlabeled rows in {augmented.rounds} rounds")
print(f"coverage {augmented.coverage:.3f}, "
      f"accuracy vs hidden truth {augmented.pseudo_label_accuracy():.4f}")

# --- The augmented training set feeds later stages ---
X, y, rows = augmented.training_arrays()
print(f"augmented training set: {X.shape[0]} rows "
      f"({ds.labeled_indices.size} labeled + {len(augmented.pseudo)} pseudo)")
