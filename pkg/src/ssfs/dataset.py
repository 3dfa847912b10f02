"""Datasets with labeled/unlabeled/test partitions, plus loaders and synthesis.

Labels are integers 1..K; 0 marks a hidden label on unlabeled rows. Feature
indices are zero-based throughout. All arrays are frozen after construction;
every operation returns a new dataset instead of mutating in place.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

LABELED = 0
UNLABELED = 1
TEST = 2

_PARTITION_NAMES = {LABELED: "labeled", UNLABELED: "unlabeled", TEST: "test"}


class DataError(ValueError):
    """Raised for malformed input files or inconsistent dataset arguments."""


@dataclass(frozen=True)
class FeatureSubset:
    """Immutable, sorted, duplicate-free set of zero-based feature indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) == 0:
            raise DataError("feature subset must be non-empty")
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise DataError("feature indices must be non-negative")
        ordered = tuple(sorted(set(idx)))
        if len(ordered) != len(idx):
            raise DataError("feature subset contains duplicate indices")
        object.__setattr__(self, "indices", ordered)

    @classmethod
    def from_iterable(cls, indices) -> "FeatureSubset":
        return cls(tuple(sorted({int(i) for i in indices})))

    def validate_for(self, dimension: int) -> None:
        if self.indices[-1] >= dimension:
            raise DataError(
                f"feature index {self.indices[-1]} out of range for "
                f"dimension {dimension}"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item) -> bool:
        return int(item) in set(self.indices)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PartitionedDataset:
    """Feature matrix plus visible labels, hidden truth and a partition map.

    features : (n, d) float64 matrix, finite.
    labels : (n,) visible labels. 1..K on labeled and test rows, 0 on
        unlabeled rows whose label is hidden.
    true_labels : (n,) ground-truth labels used only for evaluation.
    partition : (n,) values in {LABELED, UNLABELED, TEST}.
    class_count : number of classes K.
    metadata : free-form provenance dict (generator parameters, label
        mapping, source file, ...).
    """

    features: np.ndarray
    labels: np.ndarray
    true_labels: np.ndarray
    partition: np.ndarray
    class_count: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        n = X.shape[0]
        y = np.asarray(self.labels, dtype=np.int64)
        t = np.asarray(self.true_labels, dtype=np.int64)
        part = np.asarray(self.partition, dtype=np.int8)
        for name, arr in (("labels", y), ("true_labels", t), ("partition", part)):
            if arr.shape != (n,):
                raise DataError(f"{name} must have shape ({n},)")
        if not np.isin(part, (LABELED, UNLABELED, TEST)).all():
            raise DataError("partition contains unknown partition codes")
        K = int(self.class_count)
        if K < 1:
            raise DataError("class_count must be at least 1")
        if y.min(initial=0) < 0 or y.max(initial=0) > K:
            raise DataError("labels must lie in 0..class_count")
        if t.min(initial=1) < 1 or t.max(initial=1) > K:
            raise DataError("true_labels must lie in 1..class_count")
        visible = part != UNLABELED
        if np.any(y[visible] == 0):
            raise DataError("labeled and test rows must carry a visible label")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "true_labels", _frozen(t))
        object.__setattr__(self, "partition", _frozen(part))
        object.__setattr__(self, "class_count", K)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.partition == LABELED)

    @property
    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.partition == UNLABELED)

    @property
    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(self.partition == TEST)

    def partition_sizes(self) -> dict[str, int]:
        return {
            name: int(np.count_nonzero(self.partition == code))
            for code, name in _PARTITION_NAMES.items()
        }


def _map_labels(raw_labels: list) -> tuple[np.ndarray, dict]:
    """Map raw label values to 1..K in first-appearance order."""
    mapping: dict = {}
    for val in raw_labels:
        if val not in mapping:
            mapping[val] = len(mapping) + 1
    y = np.asarray([mapping[v] for v in raw_labels], dtype=np.int64)
    return y, {str(k): v for k, v in mapping.items()}


def load_csv(path, label_column, *, delimiter: str = ",", header: bool = True) -> PartitionedDataset:
    """Load a fully labeled dataset from a delimited text file.

    Parameters
    ----------
    path : file path.
    label_column : column name when ``header`` is true, else zero-based
        column position.
    delimiter : field separator.
    header : whether the first row names the columns.

    All rows land in the labeled partition. Raw label values are mapped to
    1..K in sorted order; the mapping is recorded in ``metadata``.
    Non-numeric or non-finite feature cells raise :class:`DataError` with
    the offending row and column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        if label_column not in names:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = names.index(label_column)
        data_rows = rows[1:]
        first_line = 2
    else:
        label_idx = int(label_column)
        data_rows = rows
        first_line = 1
        names = None
    if not data_rows:
        raise DataError(f"{path}: no data rows")

    width = len(data_rows[0])
    if not 0 <= label_idx < width:
        raise DataError(f"{path}: label column {label_idx} out of range")
    raw_labels = []
    values = np.empty((len(data_rows), width - 1), dtype=np.float64)
    for r, row in enumerate(data_rows):
        line_no = first_line + r
        if len(row) != width:
            raise DataError(f"{path}: line {line_no}: expected {width} fields, got {len(row)}")
        raw_labels.append(row[label_idx].strip())
        col = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {line_no}, column {c}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: line {line_no}, column {c}: non-finite value")
            values[r, col] = v
            col += 1

    y, mapping = _map_labels(raw_labels)
    meta = {"source": str(path), "format": "csv", "label_mapping": mapping}
    if names is not None:
        meta["feature_names"] = [nm for i, nm in enumerate(names) if i != label_idx]
    return PartitionedDataset(
        features=values,
        labels=y,
        true_labels=y,
        partition=np.zeros(len(y), dtype=np.int8) + LABELED,
        class_count=int(y.max()),
        metadata=meta,
    )


def load_libsvm(path) -> PartitionedDataset:
    """Load a fully labeled dataset in sparse libsvm format.

    Each line is ``<label> <index>:<value> ...`` with one-based, strictly
    ascending indices. The dimension is the largest index seen in the file;
    absent entries are zero. A line with only a label yields an all-zero row.
    """
    raw_labels: list[float] = []
    entries: list[list[tuple[int, float]]] = []
    max_index = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise DataError(f"{path}: line {line_no}: bad label {tokens[0]!r}") from None
            pairs = []
            prev = 0
            for tok in tokens[1:]:
                if ":" not in tok:
                    raise DataError(f"{path}: line {line_no}: malformed entry {tok!r}")
                idx_str, _, val_str = tok.partition(":")
                try:
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise DataError(f"{path}: line {line_no}: malformed entry {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}: line {line_no}: index {idx} not positive")
                if idx <= prev:
                    raise DataError(f"{path}: line {line_no}: indices not strictly ascending")
                if not math.isfinite(val):
                    raise DataError(f"{path}: line {line_no}: non-finite value")
                pairs.append((idx, val))
                prev = idx
            max_index = max(max_index, prev)
            raw_labels.append(label)
            entries.append(pairs)
    if not entries:
        raise DataError(f"{path}: no data rows")

    X = np.zeros((len(entries), max_index), dtype=np.float64)
    for r, pairs in enumerate(entries):
        for idx, val in pairs:
            X[r, idx - 1] = val
    # positive integer labels are kept verbatim (the common libsvm layout);
    # anything else (-1/+1, 0/1, floats) is remapped to 1..K in sorted order
    if all(v == int(v) and v >= 1 for v in raw_labels):
        y = np.asarray([int(v) for v in raw_labels], dtype=np.int64)
        mapping = {str(int(v)): int(v) for v in sorted(set(raw_labels))}
    else:
        distinct = sorted(set(raw_labels))
        remap = {v: i + 1 for i, v in enumerate(distinct)}
        y = np.asarray([remap[v] for v in raw_labels], dtype=np.int64)
        mapping = {str(k): v for k, v in remap.items()}
    return PartitionedDataset(
        features=X,
        labels=y,
        true_labels=y,
        partition=np.zeros(len(y), dtype=np.int8) + LABELED,
        class_count=int(y.max()),
        metadata={"source": str(path), "format": "libsvm", "label_mapping": mapping},
    )


def _largest_remainder(total: int, fractions: np.ndarray) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``fractions``."""
    exact = fractions * total
    counts = np.floor(exact).astype(int)
    short = total - counts.sum()
    # hand the leftover units to the largest fractional remainders
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def split(ds: PartitionedDataset, ratios, seed: int) -> PartitionedDataset:
    """Stratified split into labeled/unlabeled/test partitions.

    ``ratios`` gives the (labeled, unlabeled, test) fractions and must sum
    to one. The split is stratified per class on the ground-truth labels,
    uses largest-remainder rounding within each class, and guarantees at
    least one labeled example per class. Unlabeled rows get their visible
    label cleared. Deterministic for a fixed seed.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,):
        raise DataError("ratios must be a triple (labeled, unlabeled, test)")
    if np.any(ratios < 0):
        raise DataError("ratios must be non-negative")
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise DataError("ratios must sum to one")
    if ratios[0] <= 0:
        raise DataError("labeled ratio must be positive")

    rng = np.random.default_rng(seed)
    part = np.empty(ds.n, dtype=np.int8)
    positive = np.flatnonzero(ratios > 0)
    for cls in range(1, ds.class_count + 1):
        rows = np.flatnonzero(ds.true_labels == cls)
        if rows.size < positive.size:
            raise DataError(
                f"class {cls} has {rows.size} rows, fewer than the "
                f"{positive.size} requested partitions"
            )
        rows = rng.permutation(rows)
        counts = _largest_remainder(rows.size, ratios)
        if counts[LABELED] == 0:
            # steal one row from the largest other bucket
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[LABELED] += 1
        bounds = np.cumsum(counts)
        part[rows[: bounds[0]]] = LABELED
        part[rows[bounds[0]:bounds[1]]] = UNLABELED
        part[rows[bounds[1]:]] = TEST

    labels = ds.true_labels.copy()
    labels[part == UNLABELED] = 0
    meta = dict(ds.metadata)
    meta["split"] = {"ratios": ratios.tolist(), "seed": int(seed)}
    return replace(ds, labels=labels, partition=part, metadata=meta)


def project(ds: PartitionedDataset, subset: FeatureSubset) -> PartitionedDataset:
    """Restrict the dataset to the given feature subset.

    Column order follows the sorted subset. The metadata records which
    original columns survived so repeated projections stay traceable.
    """
    subset.validate_for(ds.d)
    cols = subset.as_array()
    meta = dict(ds.metadata)
    prior = meta.get("source_columns")
    if prior is None:
        meta["source_columns"] = [int(c) for c in cols]
    else:
        meta["source_columns"] = [int(prior[c]) for c in cols]
    return replace(ds, features=ds.features[:, cols], metadata=meta)


def evaluate_rule(metadata: dict, features: np.ndarray) -> np.ndarray:
    """Re-apply a synthetic dataset's noise-free labeling rule to features."""
    info = np.asarray(metadata["informative"], dtype=np.intp)
    weights = np.asarray(metadata["weights"], dtype=np.float64)
    thresholds = np.asarray(metadata["thresholds"], dtype=np.float64)
    score = features[:, info] @ weights
    return 1 + np.searchsorted(thresholds, score).astype(np.int64)


def generate_synthetic(
    n: int,
    d: int,
    informative: int,
    class_count: int = 2,
    noise: float = 0.0,
    seed: int = 0,
    margin: float = 0.0,
) -> PartitionedDataset:
    """Generate a dataset whose labels depend on a known informative subset.

    Features are uniform on [-1, 1]. A random signed weight vector over
    ``informative`` randomly placed columns defines a score; empirical
    quantiles of the score cut it into ``class_count`` bins that become the
    labels. With ``noise`` > 0 each label is flipped to a uniformly chosen
    other class with that probability. ``margin`` > 0 redraws rows whose
    score falls within ``margin`` score standard deviations of a bin edge,
    which makes the rule easier to recover. The generating rule (columns,
    weights, thresholds) lands in ``metadata`` so it can be re-evaluated.
    """
    if not 1 <= informative <= d:
        raise DataError("informative must lie in 1..d")
    if class_count < 2:
        raise DataError("class_count must be at least 2")
    if not 0.0 <= noise < 0.5:
        raise DataError("noise must lie in [0, 0.5)")
    if n < class_count:
        raise DataError("need at least one row per class")

    rng = np.random.default_rng(seed)
    info = np.sort(rng.permutation(d)[:informative])
    weights = rng.uniform(0.5, 1.5, size=informative) * rng.choice((-1.0, 1.0), size=informative)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    score = X[:, info] @ weights
    qs = np.arange(1, class_count) / class_count
    thresholds = np.quantile(score, qs)

    if margin > 0:
        band = margin * float(np.std(score))
        for _ in range(100):
            gap = np.min(np.abs(score[:, None] - thresholds[None, :]), axis=1)
            bad = np.flatnonzero(gap < band)
            if bad.size == 0:
                break
            X[np.ix_(bad, info)] = rng.uniform(-1.0, 1.0, size=(bad.size, informative))
            score[bad] = X[np.ix_(bad, info)] @ weights

    y = 1 + np.searchsorted(thresholds, score).astype(np.int64)
    if noise > 0:
        flip = rng.random(n) < noise
        shift = rng.integers(1, class_count, size=n)
        y = np.where(flip, 1 + (y - 1 + shift) % class_count, y)

    meta = {
        "generator": "linear_threshold",
        "informative": [int(i) for i in info],
        "weights": [float(w) for w in weights],
        "thresholds": [float(t) for t in thresholds],
        "noise": float(noise),
        "margin": float(margin),
        "seed": int(seed),
    }
    return PartitionedDataset(
        features=X,
        labels=y,
        true_labels=y,
        partition=np.zeros(n, dtype=np.int8) + LABELED,
        class_count=class_count,
        metadata=meta,
    )


def corrupt_labels(y: np.ndarray, p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Resample labels through a column-stochastic confusion matrix.

    ``p[i, j]`` is the probability that true class j+1 is observed as
    class i+1. Classes are processed in ascending order so the result is
    deterministic for a fixed generator state.
    """
    p = np.asarray(p, dtype=np.float64)
    K = p.shape[0]
    out = np.array(y, dtype=np.int64)
    for cls in range(1, K + 1):
        rows = np.flatnonzero(y == cls)
        if rows.size:
            out[rows] = 1 + rng.choice(K, size=rows.size, p=p[:, cls - 1])
    return out


def inject_label_noise(ds: PartitionedDataset, p: np.ndarray, seed: int) -> PartitionedDataset:
    """Corrupt the visible labels of the labeled partition through ``p``.

    ``p`` must be a column-stochastic class_count x class_count matrix.
    Ground-truth labels are untouched, so evaluation against the clean
    labels stays possible. The identity matrix leaves labels unchanged.
    """
    p = np.asarray(p, dtype=np.float64)
    K = ds.class_count
    if p.shape != (K, K):
        raise DataError(f"noise matrix must be {K}x{K}")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=0) - 1.0) > 1e-9):
        raise DataError("noise matrix columns must be probability vectors")
    rng = np.random.default_rng(seed)
    rows = ds.labeled_indices
    labels = ds.labels.copy()
    labels[rows] = corrupt_labels(ds.labels[rows], p, rng)
    meta = dict(ds.metadata)
    meta["label_noise"] = {"matrix": p.tolist(), "seed": int(seed)}
    return replace(ds, labels=labels, metadata=meta)


def symmetric_noise_matrix(class_count: int, flip_probability: float) -> np.ndarray:
    """Column-stochastic matrix flipping a label to a uniform other class
    with the given probability."""
    if class_count < 2:
        raise DataError("need at least two classes")
    if not 0.0 <= flip_probability < 1.0:
        raise DataError("flip_probability must lie in [0, 1)")
    off = flip_probability / (class_count - 1)
    p = np.full((class_count, class_count), off)
    np.fill_diagonal(p, 1.0 - flip_probability)
    return p


def dataset_hash(ds: PartitionedDataset) -> str:
    """Short content hash of the source data (features and true labels).

    Partition and visible labels are deliberately excluded so different
    splits of the same data share a hash.
    """
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.true_labels).tobytes())
    h.update(str(ds.class_count).encode())
    return h.hexdigest()[:16]


def write_csv(ds: PartitionedDataset, path, *, label_name: str = "label") -> None:
    """Write features plus the visible labels as a headed CSV file.

    A companion ``<path>.meta.json`` stores the metadata so synthetic
    datasets keep their generating rule across a round trip.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(ds.d)] + [label_name])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(ds.metadata, fh, indent=2, sort_keys=True)
