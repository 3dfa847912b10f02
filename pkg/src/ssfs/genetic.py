"""Genetic search over feature subsets.

Two schemes share the loop: a classic GA (single-point crossover on binary
membership vectors, best final candidate returned) and a feature-weight
aware GA (weight-sorted crossover, an irrelevance filter that permanently
removes features losing to their own permuted shadow copies, and a final
combination by cross-candidate vote). Fitness is a risk bound, lower is
better, evaluated by fitting a forest on the training rows projected to
the candidate subset.
"""

import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds
from . import forest as rf
from .dataset import FeatureSubset
from .seeding import derive_seed


@dataclass(frozen=True)
class Candidate:
    """A subset (sorted tuple of feature indices) with evaluation results.

    ``fitness`` is the bound value (lower is better) and ``weights`` maps
    each member feature to its forest weight; both are None until the
    candidate has been evaluated.
    """

    subset: tuple[int, ...]
    fitness: float | None = None
    weights: dict | None = None

    def __post_init__(self):
        sub = tuple(sorted(set(int(f) for f in self.subset)))
        if not sub:
            raise ValueError("candidate subset must be non-empty")
        object.__setattr__(self, "subset", sub)
        if self.weights is not None and set(self.weights) != set(sub):
            raise ValueError("weights must be defined exactly on the subset")


@dataclass(frozen=True)
class GaConfig:
    generations: int = 20
    population: int = 40
    parents: int = 8
    mutation_rate: float = 0.05
    length_mutation: tuple[float, float, float] = (0.2, 0.6, 0.2)
    theta_out: float | None = None  # None means 0.5/d, resolved at run time
    shadow_epsilon: float = 0.0
    final_vote_fraction: float = 0.5
    scheme: str = "fsga"
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if self.population < 1:
            raise ValueError("population must be at least 1")
        if not 1 <= self.parents <= self.population:
            raise ValueError("parents must lie in 1..population")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        lm = self.length_mutation
        if len(lm) != 3 or any(p < 0 for p in lm) or abs(sum(lm) - 1.0) > 1e-9:
            raise ValueError("length_mutation must be a distribution over {-1, 0, +1}")
        if self.theta_out is not None and self.theta_out < 0:
            raise ValueError("theta_out must be non-negative")
        if not 0.0 <= self.final_vote_fraction <= 1.0:
            raise ValueError("final_vote_fraction must lie in [0, 1]")
        if self.scheme not in ("cga", "fsga"):
            raise ValueError("scheme must be 'cga' or 'fsga'")


@dataclass(frozen=True)
class RemovalRecord:
    feature: int
    generation: int
    average_weight: float
    weight: float
    shadow_weight: float


@dataclass
class RemovedSet:
    """Features declared irrelevant, with the evidence recorded at removal."""

    records: dict[int, RemovalRecord] = field(default_factory=dict)

    def __contains__(self, feature) -> bool:
        return int(feature) in self.records

    def __len__(self) -> int:
        return len(self.records)

    def indices(self) -> frozenset:
        return frozenset(self.records)


@dataclass
class EvalContext:
    """Everything a fitness evaluation needs.

    ``features``/``labels`` are the training rows (typically the augmented
    set) in the full feature space. ``gamma`` fixes the label-noise
    correction; ``None`` re-estimates it per subset from out-of-bag
    predictions on ``labeled_rows`` (positions within ``features`` whose
    labels came from the original labeled set).
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    forest_config: rf.ForestConfig
    criterion: str = "cbil"
    gamma: float | None = 1.0
    labeled_rows: np.ndarray | None = None
    smoothing: float = 1.0

    def __post_init__(self):
        if self.criterion not in ("oob", "cb", "cbil"):
            raise ValueError("criterion must be one of 'oob', 'cb', 'cbil'")
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features and labels are inconsistent")

    @property
    def dimension(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    removed_count: int
    distinct_features: int


@dataclass
class GaResult:
    subset: FeatureSubset
    best: Candidate
    population: list
    removed: RemovedSet
    trace: list


def init_population(dimension: int, config: GaConfig) -> list[Candidate]:
    """Random subsets without replacement inside each subset.

    The weight-guided scheme starts small, at min(isqrt(d), d) features,
    and grows what proves useful. The classical scheme mirrors the usual
    binary-chromosome initialization where each feature is carried with
    probability one half, so its subsets start at d // 2 features.
    Deterministic for a fixed config seed.
    """
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    if config.scheme == "cga":
        size = max(1, dimension // 2)
    else:
        size = max(1, min(math.isqrt(dimension), dimension))
    rng = np.random.default_rng(derive_seed(config.seed, "init"))
    pop = []
    for _ in range(config.population):
        picks = rng.permutation(dimension)[:size]
        pop.append(Candidate(subset=tuple(int(f) for f in picks)))
    return pop


def _estimate_gamma(ctx: EvalContext, model: rf.Forest, X: np.ndarray) -> float:
    """Per-subset noise factor from out-of-bag predictions on labeled rows."""
    V, covered = rf.oob_votes(model, X)
    rows = np.arange(X.shape[0]) if ctx.labeled_rows is None else np.asarray(ctx.labeled_rows)
    keep = rows[covered[rows]]
    if keep.size == 0:
        return 1.0
    predicted = np.argmax(V[keep], axis=1) + 1
    observed = ctx.labels[keep]
    matrix = bounds.estimate_mislabeling(
        observed, predicted, ctx.class_count, smoothing=ctx.smoothing)
    return bounds.gamma(matrix)


def evaluate(candidate: Candidate, ctx: EvalContext, seed: int) -> Candidate:
    """Fit a forest on the subset's columns and score the candidate.

    The criterion value becomes the fitness; forest feature weights become
    the candidate weights. Deterministic given (subset, ctx, seed).
    """
    cols = np.asarray(candidate.subset, dtype=np.intp)
    if cols[-1] >= ctx.dimension:
        raise ValueError("candidate subset exceeds the context dimension")
    X = ctx.features[:, cols]
    cfg = replace(ctx.forest_config, seed=seed)
    model = rf.fit(X, ctx.labels, cfg, class_count=ctx.class_count)
    w = rf.feature_weights(model)
    weights = {int(f): float(v) for f, v in zip(candidate.subset, w)}

    if ctx.criterion == "oob":
        fitness = rf.oob_error(model, X, ctx.labels)
    else:
        # votes stand in for the class posterior on the training rows
        V = rf.votes(model, X)
        moments = bounds.margin_moments(V)
        if ctx.criterion == "cb":
            fitness = bounds.cbound(moments).value
        else:
            g = ctx.gamma if ctx.gamma is not None else _estimate_gamma(ctx, model, X)
            fitness = bounds.cbound_il(moments, g).value
    return replace(candidate, fitness=float(fitness), weights=weights)


def _parent_key(c: Candidate):
    fit = c.fitness if c.fitness is not None else float("inf")
    return (fit, len(c.subset), c.subset)


def select_parents(pop: list[Candidate], count: int) -> list[Candidate]:
    """The ``count`` lowest-fitness candidates; ties prefer smaller, then
    lexicographically earlier subsets so selection is deterministic."""
    if count > len(pop):
        raise ValueError("cannot select more parents than candidates")
    return sorted(pop, key=_parent_key)[:count]


def single_point_child(a: tuple, b: tuple, cut: int, dimension: int) -> tuple[int, ...]:
    """Membership-vector crossover: b's genes before the cut, a's after.

    Cut 0 reproduces a, cut d reproduces b.
    """
    child = {f for f in b if f < cut} | {f for f in a if f >= cut}
    return tuple(sorted(child))


def crossover_uniform(a: tuple, b: tuple, dimension: int, rng, cut: int | None = None) -> tuple[int, ...]:
    """Single-point crossover at a uniform random cut in {0..d}.

    A cut that produces an empty child is resampled by scanning the
    remaining cut positions in random order; a non-empty child always
    exists because the parents are non-empty.
    """
    if cut is None:
        cut = int(rng.integers(0, dimension + 1))
    child = single_point_child(a, b, cut, dimension)
    if child:
        return child
    for k in rng.permutation(dimension + 1):
        child = single_point_child(a, b, int(k), dimension)
        if child:
            return child
    raise ValueError("both parents empty")  # unreachable for valid candidates


def _by_weight(c: Candidate) -> list[int]:
    if c.weights is None:
        raise ValueError("crossover_weighted needs evaluated parents")
    return [f for f, _ in sorted(c.weights.items(), key=lambda kv: (-kv[1], kv[0]))]


def crossover_weighted(
    a: Candidate,
    b: Candidate,
    child_len: int,
    removed: RemovedSet,
    dimension: int,
    rng,
    cut: int | None = None,
) -> tuple[int, ...]:
    """Weight-sorted crossover.

    A cut k is drawn uniformly from {0..child_len}; the child takes a's
    top-k features by descending weight, then fills from b's
    descending-weight list skipping duplicates. If both lists exhaust
    first, the remaining slots are drawn uniformly from non-removed
    features outside the child.
    """
    if child_len < 1:
        raise ValueError("child_len must be at least 1")
    removed_idx = removed.indices()
    if child_len > dimension - len(removed_idx):
        raise ValueError("child_len exceeds available non-removed features")
    if cut is None:
        cut = int(rng.integers(0, child_len + 1))
    child: list[int] = []
    for f in _by_weight(a)[:cut]:
        if f not in removed_idx:
            child.append(f)
    for f in _by_weight(b):
        if len(child) >= child_len:
            break
        if f not in child and f not in removed_idx:
            child.append(f)
    if len(child) < child_len:
        outside = np.array(sorted(set(range(dimension)) - set(child) - removed_idx))
        picks = rng.choice(outside.size, size=child_len - len(child), replace=False)
        child.extend(int(outside[i]) for i in picks)
    return tuple(sorted(child[:child_len]))


def mutate(s: tuple, dimension: int, removed: RemovedSet, config: GaConfig, rng) -> tuple[int, ...]:
    """Per-feature swap mutation followed by a random length change.

    Each member is replaced with probability ``mutation_rate`` by a uniform
    non-member, non-removed feature. The length then shifts by -1/0/+1 per
    ``length_mutation``; drops never empty the subset and adds become
    no-ops when no legal feature remains.
    """
    if not s:
        raise ValueError("cannot mutate an empty subset")
    removed_idx = removed.indices()
    current = set(int(f) for f in s)
    for f in sorted(current):
        if rng.random() < config.mutation_rate:
            pool = sorted(set(range(dimension)) - current - removed_idx)
            if pool:
                current.remove(f)
                current.add(pool[int(rng.integers(0, len(pool)))])
    delta = int(rng.choice((-1, 0, 1), p=config.length_mutation))
    if delta == -1 and len(current) > 1:
        members = sorted(current)
        current.remove(members[int(rng.integers(0, len(members)))])
    elif delta == 1:
        pool = sorted(set(range(dimension)) - current - removed_idx)
        if pool:
            current.add(pool[int(rng.integers(0, len(pool)))])
    return tuple(sorted(current))


def relevance_filter(
    pop: list[Candidate],
    removed: RemovedSet,
    best_parent: Candidate,
    ctx: EvalContext,
    config: GaConfig,
    generation: int = 0,
) -> RemovedSet:
    """Shadow test for features whose population-average weight is low.

    The average weight of feature t is the sum of its weights over the
    candidates containing it, normalized by the same sum over all
    features. Features at or below ``theta_out`` (and carried by someone;
    an uncarried feature cannot be judged) are suspicious. A forest is
    fitted on the best parent's features plus the suspicious ones plus a
    randomly permuted copy of each suspicious column; any suspicious
    feature whose weight fails to beat its own shadow copy by more than
    ``shadow_epsilon`` is removed permanently.
    """
    d = ctx.dimension
    num = np.zeros(d)
    for c in pop:
        if c.weights is None:
            raise ValueError("relevance_filter needs an evaluated population")
        for f, w in c.weights.items():
            num[f] += w
    den = num.sum()
    if den <= 0:
        return removed
    avg = num / den
    theta = config.theta_out if config.theta_out is not None else 0.5 / d
    live = num > 0
    for f in removed.indices():
        live[f] = False
    suspicious = [int(f) for f in np.flatnonzero(live & (avg <= theta))]
    if not suspicious:
        return removed

    base = sorted(set(best_parent.subset) | set(suspicious))
    X = ctx.features
    perm_rng = np.random.default_rng(derive_seed(config.seed, "shadow-perm", generation))
    shadow = np.empty((X.shape[0], len(suspicious)))
    for j, f in enumerate(suspicious):
        shadow[:, j] = X[perm_rng.permutation(X.shape[0]), f]
    stacked = np.concatenate([X[:, base], shadow], axis=1)
    cfg = replace(ctx.forest_config, seed=derive_seed(config.seed, "shadow-fit", generation))
    model = rf.fit(stacked, ctx.labels, cfg, class_count=ctx.class_count)
    w = rf.feature_weights(model)
    pos = {f: i for i, f in enumerate(base)}

    updated = RemovedSet(dict(removed.records))
    for j, f in enumerate(suspicious):
        real, fake = float(w[pos[f]]), float(w[len(base) + j])
        if real <= fake + config.shadow_epsilon:
            updated.records[f] = RemovalRecord(
                feature=f, generation=generation, average_weight=float(avg[f]),
                weight=real, shadow_weight=fake)
    return updated


def _strip_removed(pop: list[Candidate], removed: RemovedSet, dimension: int) -> list[Candidate]:
    """Purge removed features from every candidate.

    A shrunk candidate keeps its fitness (the filter does not re-score) and
    renormalizes its weights. A fully emptied candidate restarts from the
    lowest-index live feature with no fitness, forcing re-evaluation.
    """
    removed_idx = removed.indices()
    out = []
    fallback = None
    for c in pop:
        kept = tuple(f for f in c.subset if f not in removed_idx)
        if kept == c.subset:
            out.append(c)
            continue
        if kept:
            w = None
            if c.weights is not None:
                total = sum(c.weights[f] for f in kept)
                w = {f: (c.weights[f] / total if total > 0 else 1.0 / len(kept)) for f in kept}
            out.append(Candidate(subset=kept, fitness=c.fitness, weights=w))
        else:
            if fallback is None:
                live = [f for f in range(dimension) if f not in removed_idx]
                if not live:
                    raise ValueError("every feature has been removed")
                fallback = live[0]
            out.append(Candidate(subset=(fallback,)))
    return out


def _evaluate_all(pop: list[Candidate], ctx: EvalContext, config: GaConfig, generation: int) -> list[Candidate]:
    # parents keep their cached fitness; only unevaluated candidates cost a fit
    return [
        c if c.fitness is not None else evaluate(c, ctx, derive_seed(config.seed, "eval", generation, i))
        for i, c in enumerate(pop)
    ]


def _record(generation: int, pop: list[Candidate], removed: RemovedSet) -> GenerationRecord:
    fits = [c.fitness for c in pop if c.fitness is not None] or [float("nan")]
    distinct = len({f for c in pop for f in c.subset})
    return GenerationRecord(
        generation=generation,
        best_fitness=float(min(fits)),
        mean_fitness=float(np.mean(fits)),
        removed_count=len(removed),
        distinct_features=distinct,
    )


def combine_final(pop: list[Candidate], config: GaConfig) -> tuple[int, ...]:
    """Vote features across the final population.

    A feature is kept when it appears in at least ``final_vote_fraction``
    of the candidates; an empty result falls back to the best candidate.
    """
    if not pop:
        raise ValueError("population must be non-empty")
    counts = Counter(f for c in pop for f in c.subset)
    need = config.final_vote_fraction * len(pop)
    kept = tuple(sorted(f for f, n in counts.items() if n + 1e-9 >= need))
    if kept:
        return kept
    return min(pop, key=_parent_key).subset


def _pick_parents(rng, count: int) -> tuple[int, int]:
    i = int(rng.integers(0, count))
    if count == 1:
        return i, i
    j = int(rng.integers(0, count - 1))
    if j >= i:
        j += 1
    return i, j


def run(ctx: EvalContext, config: GaConfig) -> GaResult:
    """Full genetic search.

    Each generation: evaluate unevaluated candidates, apply the relevance
    filter (weight-aware scheme only), keep the best ``parents`` unchanged
    and refill the population with mutated crossover children. After the
    last generation the population is evaluated once more; the classic
    scheme returns the best candidate's subset, the weight-aware scheme
    the cross-candidate vote. The trace has one record per generation plus
    a final one.
    """
    d = ctx.dimension
    pop = init_population(d, config)
    removed = RemovedSet()
    trace: list[GenerationRecord] = []

    for g in range(config.generations):
        pop = _evaluate_all(pop, ctx, config, g)
        if config.scheme == "fsga":
            best = min(pop, key=_parent_key)
            removed = relevance_filter(pop, removed, best, ctx, config, g)
            pop = _strip_removed(pop, removed, d)
        trace.append(_record(g, pop, removed))
        parents = select_parents(pop, config.parents)
        rng = np.random.default_rng(derive_seed(config.seed, "breed", g))
        children: list[Candidate] = []
        while len(parents) + len(children) < config.population:
            i, j = _pick_parents(rng, len(parents))
            a, b = parents[i], parents[j]
            if config.scheme == "fsga":
                child_len = len(a.subset) if int(rng.integers(0, 2)) == 0 else len(b.subset)
                child_len = min(child_len, d - len(removed))
                s = crossover_weighted(a, b, child_len, removed, d, rng)
            else:
                s = crossover_uniform(a.subset, b.subset, d, rng)
            children.append(Candidate(subset=mutate(s, d, removed, config, rng)))
        pop = parents + children

    pop = _evaluate_all(pop, ctx, config, config.generations)
    trace.append(_record(config.generations, pop, removed))
    best = min(pop, key=_parent_key)
    if config.scheme == "fsga":
        subset = FeatureSubset(combine_final(pop, config))
    else:
        subset = FeatureSubset(best.subset)
    return GaResult(subset=subset, best=best, population=pop, removed=removed, trace=trace)
