"""End-to-end selection pipeline, experiment protocols and statistics.

The main entry points are ``sewil_select`` (self-learning augmentation,
noise-factor estimation from out-of-bag confusion, bound-driven genetic
search), ``evaluate_selection`` (retrain on a subset and score against
hidden truth), ``criterion_comparison`` (score a fixed pool of random
subsets under all criteria), and ``run_experiment`` (seeded multi-trial
harness with reports).
"""

import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import bounds
from . import dataset as ds_mod
from . import forest as rf
from . import genetic
from . import selflearn
from .dataset import FeatureSubset, PartitionedDataset
from .seeding import derive_seed

CRITERIA = ("oob", "cb", "cbil")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible experiment needs.

    ``dataset`` describes the source (kind "csv", "libsvm" or "synthetic"
    plus per-kind parameters). The master ``seed`` drives every random
    choice; per-trial and per-component seeds are derived from it, so the
    seeds inside ``forest``/``ga`` are overridden within experiments.
    """

    dataset: dict = field(default_factory=dict)
    ratios: tuple[float, float, float] = (0.09, 0.81, 0.10)
    trials: int = 20
    forest: rf.ForestConfig = field(default_factory=rf.ForestConfig)
    ga: genetic.GaConfig = field(default_factory=genetic.GaConfig)
    criterion: str = "cbil"
    sla_rounds: int = 10
    smoothing: float = 1.0
    time_limit: float | None = None
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.sla_rounds < 0:
            raise ValueError("sla_rounds must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive when set")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ratios"] = list(self.ratios)
        out["ga"]["length_mutation"] = list(self.ga.length_mutation)
        out["version"] = 1
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("version", 1)
        if version != 1:
            raise ValueError(f"unsupported config version {version}")
        if "forest" in data:
            data["forest"] = rf.ForestConfig(**data["forest"])
        if "ga" in data:
            ga = dict(data["ga"])
            if "length_mutation" in ga:
                ga["length_mutation"] = tuple(ga["length_mutation"])
            data["ga"] = genetic.GaConfig(**ga)
        if "ratios" in data:
            data["ratios"] = tuple(data["ratios"])
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_source(source: dict) -> PartitionedDataset:
    """Materialize the dataset described by a config ``dataset`` entry."""
    kind = source.get("kind")
    if kind == "csv":
        return ds_mod.load_csv(
            source["path"], source["label_column"],
            delimiter=source.get("delimiter", ","),
            header=source.get("header", True))
    if kind == "libsvm":
        return ds_mod.load_libsvm(source["path"])
    if kind == "synthetic":
        return ds_mod.generate_synthetic(
            n=source["n"], d=source["d"], informative=source["informative"],
            class_count=source.get("class_count", 2),
            noise=source.get("noise", 0.0),
            seed=source.get("seed", 0),
            margin=source.get("margin", 0.0))
    raise ValueError(f"unknown dataset kind: {kind!r}")


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.size == 0:
        raise ValueError("prediction and truth must be equal-length and non-empty")
    return float(np.mean(predicted == truth))


def _augment(ds: PartitionedDataset, cfg: ExperimentConfig):
    """Run self-learning and lay the augmented rows out for evaluation."""
    fcfg = replace(cfg.forest, seed=derive_seed(cfg.seed, "sla"))
    aug, model = selflearn.sla(ds, fcfg, max_rounds=cfg.sla_rounds)
    X, y, rows = aug.training_arrays()
    labeled_rows = np.arange(ds.labeled_indices.size)
    return aug, model, X, y, labeled_rows


def estimate_noise_factor(ds: PartitionedDataset, cfg: ExperimentConfig):
    """Noise factor from the labeled set's out-of-bag confusion.

    Fits a forest on the labeled partition alone and treats its out-of-bag
    predictions as the reference labels: the smoothed confusion between
    them and the visible labels yields the correction factor. Falls back
    to 1 (no correction) when no row is out-of-bag.
    """
    rows = ds.labeled_indices
    X, y = ds.features[rows], ds.labels[rows]
    fcfg = replace(cfg.forest, seed=derive_seed(cfg.seed, "noise-forest"))
    model = rf.fit(X, y, fcfg, class_count=ds.class_count)
    V, covered = rf.oob_votes(model, X)
    if not covered.any():
        return 1.0, None
    predicted = np.argmax(V[covered], axis=1) + 1
    matrix = bounds.estimate_mislabeling(
        y[covered], predicted, ds.class_count, smoothing=cfg.smoothing)
    return bounds.gamma(matrix), matrix


def sewil_select(ds: PartitionedDataset, cfg: ExperimentConfig) -> tuple[FeatureSubset, dict]:
    """Semi-supervised wrapper selection on one partitioned dataset.

    Pseudo-labels the unlabeled rows by self-learning, estimates the
    label-noise factor on the labeled set, then runs the genetic search
    with the corrected bound as fitness over the augmented rows. Returns
    the selected subset and a report fragment (noise factor, criterion
    value of the selection, coverage, trace).
    """
    t0 = time.perf_counter()
    aug, _, X, y, labeled_rows = _augment(ds, cfg)
    gamma_value, _ = estimate_noise_factor(ds, cfg)
    ctx = genetic.EvalContext(
        features=X, labels=y, class_count=ds.class_count,
        forest_config=cfg.forest, criterion=cfg.criterion,
        gamma=gamma_value, labeled_rows=labeled_rows, smoothing=cfg.smoothing)
    ga_cfg = replace(cfg.ga, seed=derive_seed(cfg.seed, "ga"))
    result = genetic.run(ctx, ga_cfg)
    final = genetic.evaluate(
        genetic.Candidate(subset=result.subset.indices), ctx,
        derive_seed(cfg.seed, "final-eval"))
    fragment = {
        "gamma": float(gamma_value),
        "criterion": cfg.criterion,
        "criterion_value": final.fitness,
        "sla_coverage": aug.coverage,
        "sla_rounds": aug.rounds,
        "removed_count": len(result.removed),
        "subset_size": len(result.subset),
        "trace": [asdict(r) for r in result.trace],
        "wall_time": time.perf_counter() - t0,
    }
    return result.subset, fragment


def evaluate_selection(
    ds: PartitionedDataset,
    subset,
    fcfg: rf.ForestConfig,
    sla_rounds: int = 10,
) -> tuple[float, float]:
    """Retrain self-learning on the subset and score against hidden truth.

    Returns (ACC-U, ACC-T): accuracy of the final forest on the unlabeled
    partition versus the hidden true labels, and on the test partition.
    Either is NaN when its partition is empty.
    """
    if not isinstance(subset, FeatureSubset):
        subset = FeatureSubset.from_iterable(subset)
    proj = ds_mod.project(ds, subset)
    _, model = selflearn.sla(proj, fcfg, max_rounds=sla_rounds)
    u, t = proj.unlabeled_indices, proj.test_indices
    acc_u = float("nan")
    acc_t = float("nan")
    if u.size:
        acc_u = accuracy(rf.predict(model, proj.features[u]), proj.true_labels[u])
    if t.size:
        acc_t = accuracy(rf.predict(model, proj.features[t]), proj.true_labels[t])
    return acc_u, acc_t


@dataclass(frozen=True)
class CriterionPick:
    criterion: str
    index: int
    subset: tuple[int, ...]
    fitness: float
    acc_u: float


@dataclass
class ComparisonResult:
    pool: list[tuple[int, ...]]
    picks: dict[str, CriterionPick]
    gt_index: int | None
    gt_acc_u: float | None
    acc_u_all: list[float] | None

    def to_dict(self) -> dict:
        return {
            "pool": [list(s) for s in self.pool],
            "picks": {k: asdict(v) | {"subset": list(v.subset)} for k, v in self.picks.items()},
            "gt_index": self.gt_index,
            "gt_acc_u": self.gt_acc_u,
            "acc_u_all": self.acc_u_all,
        }


def _score_pool_subset(X, y, labeled_rows, class_count, fcfg, smoothing, fixed_gamma, subset, seed):
    """All three criterion values for one subset from a single forest fit.

    Sharing the forest across criteria keeps the comparison fair: the
    criteria then differ only in how they score the same model.
    """
    cols = np.asarray(subset, dtype=np.intp)
    Xp = X[:, cols]
    model = rf.fit(Xp, y, replace(fcfg, seed=seed), class_count=class_count)
    oob = rf.oob_error(model, Xp, y)
    # votes stand in for the class posterior on the training rows
    moments = bounds.margin_moments(rf.votes(model, Xp))
    cb = bounds.cbound(moments).value
    if fixed_gamma is not None:
        g = fixed_gamma
    else:
        oobV, covered = rf.oob_votes(model, Xp)
        keep = labeled_rows[covered[labeled_rows]]
        if keep.size == 0:
            g = 1.0
        else:
            predicted = np.argmax(oobV[keep], axis=1) + 1
            g = bounds.gamma(bounds.estimate_mislabeling(
                y[keep], predicted, class_count, smoothing=smoothing))
    cbil = bounds.cbound_il(moments, g).value
    return {"oob": oob, "cb": cb, "cbil": cbil}


def criterion_comparison(
    ds: PartitionedDataset,
    cfg: ExperimentConfig,
    pool_size: int = 40,
    fixed_gamma: float | None = None,
    skip_gt: bool = False,
    pseudo_noise: float = 0.0,
    gamma_per_subset: bool = False,
) -> ComparisonResult:
    """Score a pool of random same-size subsets under every criterion.

    Samples ``pool_size`` subsets of size isqrt(d), augments the dataset by
    self-learning once, scores each subset under OOB error, the plain
    bound and the noise-corrected bound (each criterion picks its
    minimizer), and evaluates subsets end-to-end to report the accuracy of
    each pick plus the ground-truth best of the pool.

    The correction factor describes the label corruption of the shared
    augmented set, so by default it is estimated once per dataset from the
    labeled partition's out-of-bag confusion and applied to every subset,
    exactly as the selection pipeline does. ``fixed_gamma`` overrides the
    estimate with a constant. ``gamma_per_subset`` instead re-estimates
    the factor from each candidate forest's own out-of-bag confusion on
    the labeled rows; that quantity tracks how well the candidate models
    the labeled rows rather than how corrupted the shared labels are, and
    dividing by it can reward poorly agreeing subsets, so the mode exists
    for study rather than selection. ``pseudo_noise`` flips that fraction
    of the pseudo-labels after augmentation to study criterion robustness.
    ``skip_gt`` evaluates only the picked subsets end-to-end, skipping the
    expensive full sweep.
    """
    d = ds.d
    size = max(1, math.isqrt(d))
    rng = np.random.default_rng(derive_seed(cfg.seed, "criterion-pool"))
    pool = [tuple(sorted(int(f) for f in rng.permutation(d)[:size]))
            for _ in range(pool_size)]

    if fixed_gamma is not None:
        shared_gamma = fixed_gamma
    elif gamma_per_subset:
        shared_gamma = None
    else:
        shared_gamma, _ = estimate_noise_factor(ds, cfg)

    _, _, X, y, labeled_rows = _augment(ds, cfg)
    if pseudo_noise > 0 and y.shape[0] > labeled_rows.size:
        noise = ds_mod.symmetric_noise_matrix(ds.class_count, pseudo_noise)
        noise_rng = np.random.default_rng(derive_seed(cfg.seed, "pseudo-noise"))
        y = y.copy()
        pseudo_rows = np.arange(labeled_rows.size, y.shape[0])
        y[pseudo_rows] = ds_mod.corrupt_labels(y[pseudo_rows], noise, noise_rng)

    scores = {crit: [] for crit in CRITERIA}
    for i, subset in enumerate(pool):
        vals = _score_pool_subset(
            X, y, labeled_rows, ds.class_count, cfg.forest, cfg.smoothing,
            shared_gamma, subset, derive_seed(cfg.seed, "criterion-eval", i))
        for crit in CRITERIA:
            scores[crit].append(vals[crit])

    def end_to_end(i: int) -> float:
        fcfg = replace(cfg.forest, seed=derive_seed(cfg.seed, "gt-eval", i))
        return evaluate_selection(ds, FeatureSubset(pool[i]), fcfg, cfg.sla_rounds)[0]

    acc_cache: dict[int, float] = {}
    picks = {}
    for crit in CRITERIA:
        idx = int(np.argmin(scores[crit]))
        if idx not in acc_cache:
            acc_cache[idx] = end_to_end(idx)
        picks[crit] = CriterionPick(
            criterion=crit, index=idx, subset=pool[idx],
            fitness=float(scores[crit][idx]), acc_u=acc_cache[idx])

    if skip_gt:
        return ComparisonResult(pool=pool, picks=picks, gt_index=None,
                                gt_acc_u=None, acc_u_all=None)
    acc_all = [acc_cache[i] if i in acc_cache else end_to_end(i)
               for i in range(pool_size)]
    gt_index = int(np.argmax(acc_all))
    return ComparisonResult(pool=pool, picks=picks, gt_index=gt_index,
                            gt_acc_u=float(acc_all[gt_index]), acc_u_all=acc_all)


def _u_statistic(x, y) -> float:
    u = 0.0
    for xi in x:
        for yj in y:
            if xi > yj:
                u += 1.0
            elif xi == yj:
                u += 0.5
    return u


def mann_whitney_u(x, y) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    U counts pairs where x exceeds y, ties contributing one half, so
    U_x + U_y = |x| * |y| always. The p-value is exact (enumeration of all
    label assignments of the pooled sample) when both samples have fewer
    than 8 values, otherwise a normal approximation with tie correction
    and 0.5 continuity correction. Degenerate spread yields p = 1.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if not x or not y:
        raise ValueError("both samples must be non-empty")
    nx, ny = len(x), len(y)
    U = _u_statistic(x, y)
    mu = nx * ny / 2.0

    if max(nx, ny) < 8:
        pooled = x + y
        observed = abs(U - mu)
        hits = 0
        total = 0
        for combo in itertools.combinations(range(nx + ny), nx):
            chosen = set(combo)
            xs = [pooled[i] for i in combo]
            ys = [pooled[i] for i in range(nx + ny) if i not in chosen]
            if abs(_u_statistic(xs, ys) - mu) >= observed - 1e-12:
                hits += 1
            total += 1
        return U, hits / total

    n = nx + ny
    _, counts = np.unique(np.asarray(x + y), return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    sigma_sq = nx * ny / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        return U, 1.0
    dev = max(abs(U - mu) - 0.5, 0.0)  # continuity correction toward the mean
    z = dev / math.sqrt(sigma_sq)
    return U, min(1.0, math.erfc(z / math.sqrt(2.0)))


@dataclass
class TrialRecord:
    trial: int
    seed: int
    status: str  # "ok" or "na" (time limit breached)
    subset: list | None = None
    size: int | None = None
    acc_u: float | None = None
    acc_t: float | None = None
    criterion_value: float | None = None
    gamma: float | None = None
    sla_coverage: float | None = None
    removed_count: int | None = None
    wall_time: float | None = None
    trace: list | None = None


_AGGREGATE_METRICS = ("acc_u", "acc_t", "size", "criterion_value", "gamma", "sla_coverage")


@dataclass
class SelectionReport:
    """Per-trial records plus aggregates over the completed trials."""

    config: dict
    records: list[TrialRecord]
    significance: dict | None = None

    def completed(self) -> list[TrialRecord]:
        return [r for r in self.records if r.status == "ok"]

    def aggregate(self) -> dict:
        done = self.completed()
        metrics = {}
        for name in _AGGREGATE_METRICS:
            vals = [getattr(r, name) for r in done if getattr(r, name) is not None]
            vals = [v for v in vals if not (isinstance(v, float) and math.isnan(v))]
            if vals:
                arr = np.asarray(vals, dtype=np.float64)
                std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
                metrics[name] = {"mean": float(np.mean(arr)), "std": std, "count": int(arr.size)}
            else:
                metrics[name] = {"mean": None, "std": None, "count": 0}
        return {
            "completed": len(done),
            "timed_out": len(self.records) - len(done),
            "metrics": metrics,
        }

    def to_dict(self, include_timing: bool = False) -> dict:
        trials = []
        for r in self.records:
            row = asdict(r)
            if not include_timing:
                row.pop("wall_time")
            trials.append(row)
        # workers is an execution knob with no effect on results; leaving it
        # out keeps reports byte-identical across worker counts
        config = {k: v for k, v in self.config.items() if k != "workers"}
        return {
            "version": 1,
            "config": config,
            "trials": trials,
            "aggregate": self.aggregate(),
            "significance": self.significance,
        }

    def to_json(self, include_timing: bool = False) -> str:
        """Deterministic JSON: wall times are excluded unless asked for, so
        identical seeds yield byte-identical output."""
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2) + "\n"

    def write_csv(self, path) -> None:
        import csv as _csv
        columns = ["trial", "seed", "status", "size", "acc_u", "acc_t",
                   "criterion_value", "gamma", "sla_coverage", "removed_count",
                   "wall_time", "subset"]
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(columns)
            for r in self.records:
                row = []
                for col in columns:
                    v = getattr(r, col)
                    if v is None:
                        row.append("NA")
                    elif col == "subset":
                        row.append(" ".join(str(i) for i in v))
                    else:
                        row.append(v)
                writer.writerow(row)


def _run_trial(ds0: PartitionedDataset, cfg: ExperimentConfig, trial: int) -> TrialRecord:
    seed_t = derive_seed(cfg.seed, "trial", trial)
    t0 = time.perf_counter()
    ds = ds_mod.split(ds0, cfg.ratios, seed=derive_seed(seed_t, "split"))
    tcfg = replace(cfg, seed=seed_t)
    subset, fragment = sewil_select(ds, tcfg)
    eval_cfg = replace(cfg.forest, seed=derive_seed(seed_t, "eval"))
    acc_u, acc_t = evaluate_selection(ds, subset, eval_cfg, cfg.sla_rounds)
    wall = time.perf_counter() - t0
    return TrialRecord(
        trial=trial, seed=seed_t, status="ok",
        subset=[int(i) for i in subset], size=len(subset),
        acc_u=acc_u, acc_t=acc_t,
        criterion_value=fragment["criterion_value"], gamma=fragment["gamma"],
        sla_coverage=fragment["sla_coverage"], removed_count=fragment["removed_count"],
        wall_time=wall, trace=fragment["trace"])


def run_experiment(
    cfg: ExperimentConfig,
    baseline: list | None = None,
    baseline_name: str | None = None,
) -> SelectionReport:
    """Seeded multi-trial harness.

    Each trial re-splits the source dataset with a trial-derived seed,
    runs selection and evaluates it. Trials exceeding the time limit are
    marked NA and excluded from aggregates. Trials are independent, so a
    thread pool of ``cfg.workers`` changes nothing but wall time. When a
    ``baseline`` sample of per-trial accuracies is given, the report gains
    a two-sided rank-test significance block against it.
    """
    ds0 = load_source(cfg.dataset)

    def one(trial: int) -> TrialRecord:
        record = _run_trial(ds0, cfg, trial)
        if cfg.time_limit is not None and record.wall_time > cfg.time_limit:
            return TrialRecord(trial=record.trial, seed=record.seed, status="na",
                               wall_time=record.wall_time)
        return record

    if cfg.workers == 1:
        records = [one(t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(one, range(cfg.trials)))

    report = SelectionReport(config=cfg.to_dict(), records=records)
    if baseline is not None:
        sample = [r.acc_u for r in report.completed()
                  if r.acc_u is not None and not math.isnan(r.acc_u)]
        if sample and len(baseline) > 0:
            stat, p = mann_whitney_u(sample, list(baseline))
            report.significance = {
                "metric": "acc_u",
                "baseline": baseline_name or "baseline",
                "u_statistic": stat,
                "p_value": p,
                "significant_at_0.01": bool(p < 0.01),
            }
    return report


def compare_search(cfg: ExperimentConfig) -> dict:
    """Run the experiment under both search schemes on the same trial seeds.

    Returns the two reports plus a rank-test comparison of per-trial
    accuracies and sizes.
    """
    reports = {}
    for scheme in ("fsga", "cga"):
        scheme_cfg = replace(cfg, ga=replace(cfg.ga, scheme=scheme))
        reports[scheme] = run_experiment(scheme_cfg)
    out = {"reports": reports}
    acc = {s: [r.acc_u for r in reports[s].completed() if r.acc_u is not None]
           for s in reports}
    if all(acc.values()):
        stat, p = mann_whitney_u(acc["fsga"], acc["cga"])
        out["significance"] = {
            "metric": "acc_u", "u_statistic": stat, "p_value": p,
            "significant_at_0.01": bool(p < 0.01),
        }
    return out


def write_subset_file(path, subset, dataset_hash: str) -> None:
    """Subset file: a hash header naming the source data, then one
    zero-based feature index per line."""
    with open(path, "w") as fh:
        fh.write(f"# dataset {dataset_hash}\n")
        for i in subset:
            fh.write(f"{int(i)}\n")


def read_subset_file(path) -> tuple[FeatureSubset, str | None]:
    source_hash = None
    indices = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "dataset":
                    source_hash = parts[1]
                continue
            try:
                indices.append(int(line))
            except ValueError:
                raise ds_mod.DataError(f"{path}: line {line_no}: not an index: {line!r}") from None
    if not indices:
        raise ds_mod.DataError(f"{path}: no feature indices")
    return FeatureSubset.from_iterable(indices), source_hash
