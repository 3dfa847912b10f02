"""Which fitness criterion picks the best subset when pseudo-labels lie?

Scores a pool of random subsets under the out-of-bag error, the plain
bound, and the noise-corrected bound, after corrupting a fifth of the
pseudo-labels. The ground-truth column reports what an oracle sweep of the
whole pool would have achieved.

The correction factor models the corruption of the shared training labels,
so it is one number per dataset, estimated from the labeled partition. The
demo also shows the per-candidate study mode: re-estimating the factor
from each candidate forest measures how well that candidate agrees with
the labeled rows, and dividing the bound by an agreement score rewards
disagreement, visibly degrading the pick.
"""

import numpy as np

from ssfs.dataset import generate_synthetic, split
from ssfs.forest import ForestConfig
from ssfs.pipeline import CRITERIA, ExperimentConfig, criterion_comparison

RATIOS = (0.12, 0.73, 0.15)
SEEDS = (1, 2, 3)

shared_rows, per_subset_rows = [], []
for seed in SEEDS:
    base = generate_synthetic(n=600, d=25, informative=4, class_count=2,
                              margin=0.3, seed=seed)
    ds = split(base, RATIOS, seed=seed)
    cfg = ExperimentConfig(dataset={}, ratios=RATIOS, seed=seed,
                           forest=ForestConfig(tree_count=60))
    shared = criterion_comparison(ds, cfg, pool_size=20, pseudo_noise=0.2)
    per_subset = criterion_comparison(ds, cfg, pool_size=20, pseudo_noise=0.2,
                                      gamma_per_subset=True)
    shared_rows.append(shared)
    per_subset_rows.append(per_subset)
    accs = " ".join(f"{c}={shared.picks[c].acc_u:.4f}" for c in CRITERIA)
    print(f"seed {seed}: {accs} gt={shared.gt_acc_u:.4f} "
          f"(per-candidate factor: cbil={per_subset.picks['cbil'].acc_u:.4f})")

print("\npools of 20 subsets, 20% pseudo-label corruption, means over seeds")
for crit in CRITERIA:
    mean = np.mean([r.picks[crit].acc_u for r in shared_rows])
    print(f"{crit:>5}: {mean:.4f}")
print(f"   gt: {np.mean([r.gt_acc_u for r in shared_rows]):.4f}")
ps = np.mean([r.picks["cbil"].acc_u for r in per_subset_rows])
print(f"cbil with a per-candidate factor instead: {ps:.4f}")
print("\nwith the shared factor the corrected bound keeps the plain bound's "
      "ranking;\nthe per-candidate factor divides by an agreement score and "
      "drags the pick down")
