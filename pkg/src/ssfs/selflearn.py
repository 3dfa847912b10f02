"""Self-learning: iteratively pseudo-label unlabeled rows whose vote
confidence clears a per-class threshold, retraining the forest each round.

The threshold for class c minimizes the sum of the conditional error among
selected rows predicted c and the fraction of such rows left unselected.
Pseudo-labels are permanent once assigned.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import forest as rf
from .dataset import PartitionedDataset
from .seeding import derive_seed


@dataclass(frozen=True)
class ThresholdVector:
    """One confidence threshold per class, each within [1/K, 1]."""

    values: tuple[float, ...]

    def __post_init__(self):
        K = len(self.values)
        if K == 0:
            raise ValueError("threshold vector must be non-empty")
        lo = 1.0 / K - 1e-9
        vals = tuple(float(v) for v in self.values)
        if any(not lo <= v <= 1.0 + 1e-9 for v in vals):
            raise ValueError("thresholds must lie in [1/K, 1]")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class RoundRecord:
    round_no: int
    thresholds: ThresholdVector
    selected: int
    cumulative_coverage: float
    error_estimate: float


@dataclass
class AugmentedSet:
    """A dataset plus permanent pseudo-labels assigned to unlabeled rows."""

    base: PartitionedDataset
    pseudo: dict[int, int]            # row index -> pseudo-label
    confidence: dict[int, float]      # row index -> vote confidence at assignment
    assigned_round: dict[int, int]
    rounds: int
    trace: list[RoundRecord] = field(default_factory=list)

    @property
    def coverage(self) -> float:
        u = self.base.unlabeled_indices.size
        return len(self.pseudo) / u if u else 1.0

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Labeled rows (visible labels) plus pseudo-labeled rows, in stable order."""
        labeled = self.base.labeled_indices
        pseudo_rows = np.asarray(sorted(self.pseudo), dtype=np.intp)
        rows = np.concatenate([labeled, pseudo_rows])
        y = np.concatenate([
            self.base.labels[labeled],
            np.asarray([self.pseudo[i] for i in pseudo_rows], dtype=np.int64),
        ])
        return self.base.features[rows], y, rows

    def pseudo_label_accuracy(self) -> float:
        """Agreement of pseudo-labels with hidden truth; evaluation only."""
        if not self.pseudo:
            return float("nan")
        rows = sorted(self.pseudo)
        hits = [self.pseudo[i] == int(self.base.true_labels[i]) for i in rows]
        return float(np.mean(hits))


def conditional_error(V: np.ndarray, thresholds: ThresholdVector) -> tuple[float, float]:
    """Error and coverage of thresholded vote predictions.

    A row is selected when its winning vote clears the threshold of its
    predicted class. Error is the mean of (1 - winning vote) over selected
    rows, the standard plug-in estimate; coverage is the selected fraction.
    No selected rows reports error 1 and coverage 0.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != len(thresholds):
        raise ValueError("vote matrix width must match the threshold count")
    theta = thresholds.as_array()
    winners = np.argmax(V, axis=1)
    conf = V[np.arange(V.shape[0]), winners]
    selected = conf >= theta[winners] - 1e-12
    if not selected.any():
        return 1.0, 0.0
    return float(np.mean(1.0 - conf[selected])), float(np.mean(selected))


def find_threshold(V: np.ndarray) -> ThresholdVector:
    """Pick per-class thresholds minimizing error plus rejection.

    For each class the candidate grid is the distinct winning votes among
    rows predicted as that class, together with 1/K. The objective for a
    candidate theta is the conditional error of the selected rows plus one
    minus the within-class coverage. Ties prefer the smallest threshold;
    classes never predicted get threshold one.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("need a non-empty vote matrix")
    K = V.shape[1]
    winners = np.argmax(V, axis=1)
    conf = V[np.arange(V.shape[0]), winners]
    out = []
    for c in range(K):
        cls_conf = np.sort(conf[winners == c])
        m = cls_conf.size
        if m == 0:
            out.append(1.0)
            continue
        grid = np.unique(np.concatenate([[1.0 / K], cls_conf]))
        # first selected position for each candidate; suffix statistics
        start = np.searchsorted(cls_conf, grid - 1e-12, side="left")
        kept = m - start
        suffix_sum = np.concatenate([np.cumsum(cls_conf[::-1])[::-1], [0.0]])
        with np.errstate(invalid="ignore", divide="ignore"):
            err = np.where(kept > 0, 1.0 - suffix_sum[start] / np.maximum(kept, 1), 1.0)
        objective = err + 1.0 - kept / m
        best = int(np.argmin(objective))  # argmin takes the first, so ties pick the lower theta
        out.append(float(grid[best]))
    return ThresholdVector(tuple(out))


def sla(
    ds: PartitionedDataset,
    config: rf.ForestConfig,
    max_rounds: int = 10,
) -> tuple[AugmentedSet, "rf.Forest"]:
    """Self-learning: grow the labeled set with confident pseudo-labels.

    Each round fits a forest on labeled plus already pseudo-labeled rows,
    scores the remaining unlabeled rows, tunes thresholds on those votes
    and pseudo-labels every row whose confidence clears them. Stops when a
    round selects nothing, every row is labeled, or ``max_rounds`` is hit.
    Returns the augmentation record and a forest fitted on the final
    augmented set.
    """
    if max_rounds < 0:
        raise ValueError("max_rounds must be non-negative")
    aug = AugmentedSet(base=ds, pseudo={}, confidence={}, assigned_round={}, rounds=0)
    unlabeled = [int(i) for i in ds.unlabeled_indices]

    model = None
    stale = True  # no forest yet

    for round_no in range(max_rounds):
        X, y, _ = aug.training_arrays()
        model = rf.fit(X, y, _round_config(config, round_no), class_count=ds.class_count)
        stale = False
        remaining = [i for i in unlabeled if i not in aug.pseudo]
        if not remaining:
            break
        V = rf.votes(model, ds.features[remaining])
        theta = find_threshold(V)
        winners = np.argmax(V, axis=1)
        conf = V[np.arange(V.shape[0]), winners]
        picked = conf >= theta.as_array()[winners] - 1e-12
        if not picked.any():
            break
        err, _ = conditional_error(V, theta)
        for pos in np.flatnonzero(picked):
            row = remaining[pos]
            aug.pseudo[row] = int(winners[pos]) + 1
            aug.confidence[row] = float(conf[pos])
            aug.assigned_round[row] = round_no
        aug.rounds = round_no + 1
        aug.trace.append(RoundRecord(
            round_no=round_no,
            thresholds=theta,
            selected=int(picked.sum()),
            cumulative_coverage=aug.coverage,
            error_estimate=err,
        ))
        stale = True  # new pseudo-labels not yet reflected in the forest

    if stale or model is None:
        X, y, _ = aug.training_arrays()
        model = rf.fit(X, y, _round_config(config, max_rounds), class_count=ds.class_count)
    return aug, model


def _round_config(config: rf.ForestConfig, round_no: int) -> rf.ForestConfig:
    """Per-round forest seed derived from the base config seed."""
    return replace(config, seed=derive_seed(config.seed, "sla-round", round_no))
