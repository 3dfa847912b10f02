import math

import numpy as np
import pytest

from ssfs.dataset import generate_synthetic
from ssfs.forest import ForestConfig
from ssfs.genetic import (
    Candidate,
    EvalContext,
    GaConfig,
    RemovalRecord,
    RemovedSet,
    combine_final,
    crossover_uniform,
    crossover_weighted,
    evaluate,
    init_population,
    mutate,
    relevance_filter,
    run,
    select_parents,
    single_point_child,
)


def _ctx(ds, trees=30, seed=0, **kwargs):
    return EvalContext(
        features=ds.features,
        labels=ds.true_labels,
        class_count=ds.class_count,
        forest_config=ForestConfig(tree_count=trees, seed=seed),
        **kwargs,
    )


def _removed(*features):
    return RemovedSet({
        int(f): RemovalRecord(feature=int(f), generation=0, average_weight=0.0,
                              weight=0.0, shadow_weight=0.0)
        for f in features
    })


class TestCandidate:
    def test_sorts_and_dedupes(self):
        assert Candidate(subset=(4, 1, 4, 2)).subset == (1, 2, 4)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Candidate(subset=())

    def test_weights_must_cover_subset(self):
        with pytest.raises(ValueError):
            Candidate(subset=(1, 2), weights={1: 1.0})


class TestGaConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            GaConfig(parents=10, population=5)
        with pytest.raises(ValueError):
            GaConfig(scheme="anneal")
        with pytest.raises(ValueError):
            GaConfig(length_mutation=(0.5, 0.5, 0.5))
        with pytest.raises(ValueError):
            GaConfig(generations=0)
        with pytest.raises(ValueError):
            GaConfig(mutation_rate=1.5)


class TestInitPopulation:
    def test_sqrt_size_large(self):
        pop = init_population(500, GaConfig(population=10, parents=2, seed=1))
        assert all(len(c.subset) == 22 for c in pop)

    def test_sqrt_size_small(self):
        pop = init_population(4, GaConfig(population=6, parents=2, seed=1))
        assert all(len(c.subset) == 2 for c in pop)

    def test_single_feature_dimension(self):
        pop = init_population(1, GaConfig(population=4, parents=2, seed=1))
        assert all(c.subset == (0,) for c in pop)

    def test_population_count_and_range(self):
        cfg = GaConfig(population=15, parents=3, seed=2)
        pop = init_population(30, cfg)
        assert len(pop) == 15
        for c in pop:
            assert all(0 <= f < 30 for f in c.subset)
            assert len(set(c.subset)) == len(c.subset)

    def test_deterministic(self):
        cfg = GaConfig(population=8, parents=2, seed=3)
        a = [c.subset for c in init_population(50, cfg)]
        b = [c.subset for c in init_population(50, cfg)]
        assert a == b

    def test_classical_scheme_starts_at_half_dimension(self):
        # The classical scheme mirrors uniform binary chromosomes, whose
        # expected carried count is d / 2; the weight-guided scheme starts
        # small and grows instead.
        pop = init_population(200, GaConfig(population=6, parents=2,
                                            scheme="cga", seed=1))
        assert all(len(c.subset) == 100 for c in pop)

    def test_classical_scheme_single_feature(self):
        pop = init_population(1, GaConfig(population=3, parents=1,
                                          scheme="cga", seed=1))
        assert all(c.subset == (0,) for c in pop)


class TestEvaluate:
    def test_perfect_votes_zero_fitness(self):
        # one clean splitting feature with a wide gap between the classes:
        # every bootstrap split lands in the gap, training votes are one-hot
        # and the bound hits its floor
        X = np.concatenate([np.linspace(-1, -0.3, 30), np.linspace(0.3, 1, 30)])
        X = np.hstack([X.reshape(-1, 1), np.zeros((60, 1))])
        y = np.where(X[:, 0] > 0, 2, 1).astype(np.int64)
        ctx = EvalContext(features=X, labels=y, class_count=2,
                          forest_config=ForestConfig(tree_count=30), gamma=1.0)
        out = evaluate(Candidate(subset=(0,)), ctx, seed=0)
        assert out.fitness == pytest.approx(0.0, abs=1e-12)

    def test_informative_beats_noise(self):
        wins = 0
        for seed in range(1, 6):
            ds = generate_synthetic(n=300, d=30, informative=4, seed=seed, margin=0.2)
            informative = tuple(ds.metadata["informative"])
            noise = tuple(sorted(set(range(30)) - set(informative)))[:4]
            ctx = _ctx(ds, seed=seed, gamma=1.0)
            good = evaluate(Candidate(subset=informative), ctx, seed=seed)
            bad = evaluate(Candidate(subset=noise), ctx, seed=seed)
            wins += good.fitness < bad.fitness
        assert wins >= 3  # median winner across the seeds

    def test_deterministic(self):
        ds = generate_synthetic(n=100, d=10, informative=3, seed=4)
        ctx = _ctx(ds, seed=4, gamma=1.0)
        a = evaluate(Candidate(subset=(0, 2, 5)), ctx, seed=9)
        b = evaluate(Candidate(subset=(0, 2, 5)), ctx, seed=9)
        assert a.fitness == b.fitness
        assert a.weights == b.weights

    def test_weights_cover_subset_and_normalize(self):
        ds = generate_synthetic(n=100, d=10, informative=3, seed=5)
        ctx = _ctx(ds, seed=5, gamma=1.0)
        out = evaluate(Candidate(subset=(1, 3, 7)), ctx, seed=0)
        assert set(out.weights) == {1, 3, 7}
        assert sum(out.weights.values()) == pytest.approx(1.0)

    def test_gamma_scales_corrected_bound(self):
        ds = generate_synthetic(n=150, d=8, informative=3, seed=6, noise=0.2)
        plain = evaluate(Candidate(subset=(0, 1, 2, 3)),
                         _ctx(ds, seed=6, criterion="cb"), seed=3)
        corrected = evaluate(Candidate(subset=(0, 1, 2, 3)),
                             _ctx(ds, seed=6, criterion="cbil", gamma=2.0), seed=3)
        # same forest seed, so the same moments feed both bound forms
        assert 1 - corrected.fitness == pytest.approx((1 - plain.fitness) / 2.0)

    def test_oob_criterion(self):
        ds = generate_synthetic(n=150, d=8, informative=3, seed=7, noise=0.1)
        out = evaluate(Candidate(subset=(0, 1, 2)), _ctx(ds, seed=7, criterion="oob"), seed=2)
        assert 0.0 <= out.fitness <= 1.0

    def test_subset_out_of_range(self):
        ds = generate_synthetic(n=50, d=5, informative=2, seed=8)
        with pytest.raises(ValueError):
            evaluate(Candidate(subset=(4, 7)), _ctx(ds, seed=8), seed=0)


class TestSelectParents:
    def test_lowest_fitness_win(self):
        pop = [
            Candidate(subset=(1,), fitness=0.3),
            Candidate(subset=(2,), fitness=0.1),
            Candidate(subset=(3,), fitness=0.2),
        ]
        picked = select_parents(pop, 2)
        assert [c.fitness for c in picked] == [0.1, 0.2]

    def test_ties_prefer_smaller_subsets(self):
        pop = [
            Candidate(subset=(1, 2, 3), fitness=0.5),
            Candidate(subset=(4,), fitness=0.5),
            Candidate(subset=(5, 6), fitness=0.5),
        ]
        picked = select_parents(pop, 2)
        assert [c.subset for c in picked] == [(4,), (5, 6)]

    def test_whole_population(self):
        pop = [Candidate(subset=(i,), fitness=float(i)) for i in range(4)]
        assert len(select_parents(pop, 4)) == 4

    def test_too_many_requested(self):
        with pytest.raises(ValueError):
            select_parents([Candidate(subset=(0,), fitness=0.1)], 2)


class TestCrossoverUniform:
    def test_membership_vector_trace(self):
        # parent1 genes (0,0,1,0,1,1,0,1), parent2 genes (1,1,1,0,0,1,0,0);
        # cutting after the first gene keeps parent2's first gene and
        # parent1's remainder: (1,0,1,0,1,1,0,1)
        parent1 = (2, 4, 5, 7)
        parent2 = (0, 1, 2, 5)
        child = single_point_child(parent1, parent2, cut=1, dimension=8)
        assert child == (0, 2, 4, 5, 7)

    def test_cut_zero_reproduces_first(self):
        assert single_point_child((1, 3), (0, 2), cut=0, dimension=4) == (1, 3)

    def test_cut_d_reproduces_second(self):
        assert single_point_child((1, 3), (0, 2), cut=4, dimension=4) == (0, 2)

    def test_empty_cut_resampled(self):
        rng = np.random.default_rng(0)
        child = crossover_uniform((0,), (5,), dimension=6, rng=rng, cut=3)
        assert child in ((0,), (5,))

    def test_random_children_valid(self):
        rng = np.random.default_rng(1)
        a, b = (0, 2, 4), (1, 2, 5)
        for _ in range(100):
            child = crossover_uniform(a, b, dimension=6, rng=rng)
            assert child
            assert set(child) <= set(a) | set(b)
            assert child == tuple(sorted(set(child)))


class TestCrossoverWeighted:
    def _parents(self):
        a = Candidate(subset=(1, 3, 7), weights={3: 0.5, 1: 0.3, 7: 0.2})
        b = Candidate(subset=(2, 3, 5), weights={2: 0.5, 3: 0.3, 5: 0.2})
        return a, b

    def test_spec_trace(self):
        # a by weight [3, 1, 7]; b by weight [2, 3, 5]; cut 2 takes {3, 1}
        # then fills with 2 (3 is a duplicate)
        a, b = self._parents()
        child = crossover_weighted(a, b, child_len=3, removed=_removed(),
                                   dimension=10, rng=np.random.default_rng(0), cut=2)
        assert child == (1, 2, 3)

    def test_cut_zero_takes_second_parent_top(self):
        a, b = self._parents()
        child = crossover_weighted(a, b, child_len=2, removed=_removed(),
                                   dimension=10, rng=np.random.default_rng(0), cut=0)
        assert child == (2, 3)  # b's two heaviest

    def test_identical_parents_any_cut(self):
        a, _ = self._parents()
        for cut in range(3):
            child = crossover_weighted(a, a, child_len=2, removed=_removed(),
                                       dimension=10, rng=np.random.default_rng(0), cut=cut)
            assert child == (1, 3)  # a's two heaviest

    def test_exhausted_parents_fill_from_outside(self):
        a = Candidate(subset=(0,), weights={0: 1.0})
        b = Candidate(subset=(1,), weights={1: 1.0})
        child = crossover_weighted(a, b, child_len=4, removed=_removed(),
                                   dimension=6, rng=np.random.default_rng(2))
        assert len(child) == 4
        assert len(set(child)) == 4

    def test_removed_features_excluded(self):
        a, b = self._parents()
        removed = _removed(3)
        for trial in range(20):
            child = crossover_weighted(a, b, child_len=3, removed=removed,
                                       dimension=10, rng=np.random.default_rng(trial))
            assert 3 not in child
            assert len(child) == 3

    def test_child_len_too_large(self):
        a, b = self._parents()
        with pytest.raises(ValueError):
            crossover_weighted(a, b, child_len=9, removed=_removed(0, 5),
                               dimension=10, rng=np.random.default_rng(0))

    def test_unevaluated_parent_rejected(self):
        with pytest.raises(ValueError):
            crossover_weighted(Candidate(subset=(0,)), Candidate(subset=(1,)),
                               child_len=1, removed=_removed(), dimension=4,
                               rng=np.random.default_rng(0))


class TestMutate:
    def test_identity_when_disabled(self):
        cfg = GaConfig(mutation_rate=0.0, length_mutation=(0.0, 1.0, 0.0))
        rng = np.random.default_rng(0)
        assert mutate((2, 5, 8), 10, _removed(), cfg, rng) == (2, 5, 8)

    def test_singleton_never_emptied(self):
        cfg = GaConfig(mutation_rate=0.0, length_mutation=(1.0, 0.0, 0.0))
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert len(mutate((4,), 10, _removed(), cfg, rng)) == 1

    def test_swap_rate_monte_carlo(self):
        cfg = GaConfig(mutation_rate=0.05, length_mutation=(0.0, 1.0, 0.0))
        rng = np.random.default_rng(2)
        swaps = 0
        trials = 10_000
        for _ in range(trials):
            out = mutate((7,), 50, _removed(), cfg, rng)
            swaps += out != (7,)
        assert abs(swaps / trials - 0.05) <= 0.01

    def test_never_includes_removed(self):
        cfg = GaConfig(mutation_rate=0.5, length_mutation=(0.2, 0.6, 0.2))
        removed = _removed(0, 1, 2)
        rng = np.random.default_rng(3)
        for _ in range(200):
            out = mutate((3, 4), 8, removed, cfg, rng)
            assert out
            assert not set(out) & {0, 1, 2}

    def test_growth_no_op_when_saturated(self):
        cfg = GaConfig(mutation_rate=0.0, length_mutation=(0.0, 0.0, 1.0))
        rng = np.random.default_rng(4)
        # every feature already used or removed: growth has nowhere to go
        assert mutate((2, 3), 4, _removed(0, 1), cfg, rng) == (2, 3)

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            mutate((), 4, _removed(), GaConfig(), np.random.default_rng(0))


class TestRelevanceFilter:
    def test_uncarried_feature_not_judged(self):
        pop = [
            Candidate(subset=(0, 1), fitness=0.2, weights={0: 0.6, 1: 0.4}),
            Candidate(subset=(0,), fitness=0.3, weights={0: 1.0}),
        ]
        ds = generate_synthetic(n=60, d=3, informative=1, seed=9)
        # high threshold would catch feature 2 if it were judged at all
        out = relevance_filter(pop, _removed(), pop[0], _ctx(ds, seed=9),
                               GaConfig(theta_out=0.9, population=4, parents=2))
        assert 2 not in out

    def test_no_suspicious_no_op(self):
        pop = [Candidate(subset=(0, 1), fitness=0.2, weights={0: 0.5, 1: 0.5})]
        ds = generate_synthetic(n=60, d=2, informative=1, seed=10)
        out = relevance_filter(pop, _removed(), pop[0], _ctx(ds, seed=10),
                               GaConfig(theta_out=0.0, population=4, parents=2))
        assert len(out) == 0

    def test_noise_removed_informative_kept(self):
        removed_hits, kept_hits = 0, 0
        for seed in range(1, 6):
            ds = generate_synthetic(n=300, d=25, informative=3, class_count=2,
                                    seed=seed, margin=0.3)
            informative = ds.metadata["informative"]
            noise_feature = max(set(range(25)) - set(informative))
            ctx = _ctx(ds, seed=seed, gamma=1.0)
            cfg = GaConfig(generations=5, population=12, parents=4, scheme="fsga", seed=seed)
            res = run(ctx, cfg)
            removed_hits += noise_feature in res.removed
            kept_hits += not any(f in res.removed for f in informative)
        assert removed_hits >= 4
        assert kept_hits >= 4

    def test_unevaluated_population_rejected(self):
        ds = generate_synthetic(n=50, d=4, informative=2, seed=11)
        pop = [Candidate(subset=(0, 1))]
        with pytest.raises(ValueError):
            relevance_filter(pop, _removed(), pop[0], _ctx(ds, seed=11), GaConfig())


class TestCombineFinal:
    def test_unanimous_population(self):
        pop = [Candidate(subset=(1, 4), fitness=0.1)] * 3
        assert combine_final(pop, GaConfig(final_vote_fraction=0.5)) == (1, 4)

    def test_zero_fraction_gives_union(self):
        pop = [
            Candidate(subset=(0,), fitness=0.1),
            Candidate(subset=(3,), fitness=0.2),
            Candidate(subset=(5,), fitness=0.3),
        ]
        assert combine_final(pop, GaConfig(final_vote_fraction=0.0)) == (0, 3, 5)

    def test_half_fraction_threshold(self):
        pop = [
            Candidate(subset=(0, 1), fitness=0.1),
            Candidate(subset=(0, 1), fitness=0.2),
            Candidate(subset=(0, 2), fitness=0.3),
            Candidate(subset=(0, 3), fitness=0.4),
        ]
        # feature 1 sits in exactly 2 of 4 candidates: kept at fraction 0.5
        assert combine_final(pop, GaConfig(final_vote_fraction=0.5)) == (0, 1)

    def test_empty_result_falls_back_to_best(self):
        pop = [
            Candidate(subset=(0,), fitness=0.3),
            Candidate(subset=(1,), fitness=0.1),
            Candidate(subset=(2,), fitness=0.2),
        ]
        assert combine_final(pop, GaConfig(final_vote_fraction=1.0)) == (1,)


class TestRun:
    def test_degenerate_loop_returns_initial_candidate(self):
        ds = generate_synthetic(n=80, d=9, informative=2, seed=12)
        cfg = GaConfig(generations=1, population=1, parents=1, mutation_rate=0.0,
                       length_mutation=(0.0, 1.0, 0.0), scheme="cga", seed=12)
        initial = init_population(9, cfg)[0].subset
        res = run(_ctx(ds, seed=12, gamma=1.0), cfg)
        assert res.subset.indices == initial

    def test_elitism_monotone_best_fitness(self):
        for scheme in ("cga", "fsga"):
            ds = generate_synthetic(n=200, d=16, informative=3, seed=13, noise=0.1)
            cfg = GaConfig(generations=6, population=10, parents=3, scheme=scheme, seed=13)
            res = run(_ctx(ds, seed=13, gamma=1.0), cfg)
            best = [r.best_fitness for r in res.trace]
            assert len(best) == 7  # one per generation plus the final state
            assert all(a >= b - 1e-12 for a, b in zip(best, best[1:]))

    def test_population_size_restored(self):
        ds = generate_synthetic(n=150, d=12, informative=3, seed=14)
        cfg = GaConfig(generations=3, population=9, parents=2, scheme="fsga", seed=14)
        res = run(_ctx(ds, seed=14, gamma=1.0), cfg)
        assert len(res.population) == 9

    def test_removed_disjoint_from_population(self):
        ds = generate_synthetic(n=250, d=20, informative=3, seed=15, margin=0.2)
        cfg = GaConfig(generations=5, population=10, parents=3, scheme="fsga", seed=15)
        res = run(_ctx(ds, seed=15, gamma=1.0), cfg)
        gone = res.removed.indices()
        for c in res.population:
            assert not set(c.subset) & gone
        assert not set(res.subset.indices) & gone

    def test_deterministic(self):
        ds = generate_synthetic(n=150, d=12, informative=3, seed=16)
        cfg = GaConfig(generations=3, population=8, parents=3, scheme="fsga", seed=16)
        a = run(_ctx(ds, seed=16, gamma=1.0), cfg)
        b = run(_ctx(ds, seed=16, gamma=1.0), cfg)
        assert a.subset.indices == b.subset.indices
        assert [c.subset for c in a.population] == [c.subset for c in b.population]
        assert [r.best_fitness for r in a.trace] == [r.best_fitness for r in b.trace]

    def test_scheme_output_conventions(self):
        ds = generate_synthetic(n=150, d=12, informative=3, seed=17)
        ctx = _ctx(ds, seed=17, gamma=1.0)
        cga = run(ctx, GaConfig(generations=3, population=8, parents=3, scheme="cga", seed=17))
        assert cga.subset.indices == cga.best.subset
        cfg = GaConfig(generations=3, population=8, parents=3, scheme="fsga", seed=17)
        fsga = run(ctx, cfg)
        assert fsga.subset.indices == combine_final(fsga.population, cfg)

    def test_trace_removed_counts_non_decreasing(self):
        ds = generate_synthetic(n=250, d=20, informative=3, seed=18, margin=0.2)
        cfg = GaConfig(generations=5, population=10, parents=3, scheme="fsga", seed=18)
        res = run(_ctx(ds, seed=18, gamma=1.0), cfg)
        counts = [r.removed_count for r in res.trace]
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] == len(res.removed)

    def test_recovers_informative_features_high_dimension(self):
        # 100 features, 10 informative: the weight-guided search should
        # return a compact subset dominated by the informative ones. A low
        # final vote fraction keeps every feature that more than one final
        # candidate carries; surviving noise is almost always carried by a
        # single candidate.
        from ssfs.dataset import split

        informative_hits, sizes = [], []
        for seed in (1, 2, 3, 4, 5):
            base = generate_synthetic(n=800, d=100, informative=10,
                                      class_count=2, margin=0.25, seed=seed)
            ds = split(base, (0.2, 0.7, 0.1), seed=seed)
            informative = set(base.metadata["informative"])
            rows = np.concatenate([ds.labeled_indices, ds.unlabeled_indices])
            ctx = EvalContext(features=ds.features[rows],
                              labels=ds.true_labels[rows], class_count=2,
                              forest_config=ForestConfig(tree_count=80),
                              criterion="cbil", gamma=1.0)
            cfg = GaConfig(generations=10, population=20, parents=4,
                           mutation_rate=0.10, length_mutation=(0.1, 0.4, 0.5),
                           final_vote_fraction=0.1, scheme="fsga", seed=seed)
            got = set(run(ctx, cfg).subset.indices)
            informative_hits.append(len(got & informative))
            sizes.append(len(got))
        assert np.median(informative_hits) >= 7
        assert all(s <= 30 for s in sizes)
