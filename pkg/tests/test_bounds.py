import numpy as np
import pytest

from ssfs.bounds import (
    BoundValue,
    MarginMoments,
    MislabelingMatrix,
    beta,
    cbound,
    cbound_beta,
    cbound_il,
    estimate_mislabeling,
    gamma,
    margin,
    margin_moments,
    margins,
)


def _random_instance(rng, n_max=6, k_max=4, aligned=False):
    """Small discrete instance: exact posterior rows, vote rows, noise matrix.

    aligned=True biases votes toward the posterior and the noise matrix
    toward the identity so positive-mean-margin cases are frequent.
    """
    K = int(rng.integers(2, k_max + 1))
    n = int(rng.integers(1, n_max + 1))
    P = rng.dirichlet(np.ones(K) * rng.uniform(0.3, 3.0), size=n)
    if aligned:
        V = P + rng.uniform(0, 0.2, size=(n, K))
        V /= V.sum(axis=1, keepdims=True)
    else:
        V = rng.dirichlet(np.ones(K) * rng.uniform(0.3, 3.0), size=n)
    p = rng.dirichlet(np.ones(K) * rng.uniform(0.3, 3.0), size=K).T
    if aligned:
        eps = rng.uniform(0.0, 0.5)
        p = (1 - eps) * np.eye(K) + eps * p
    return P, V, p


class TestMargin:
    def test_two_class_hand_values(self):
        v = np.array([0.7, 0.3])
        assert margin(v, 1) == pytest.approx(0.4)
        assert margin(v, 2) == pytest.approx(-0.4)

    def test_uniform_vote_zero_margin(self):
        v = np.full(4, 0.25)
        for y in range(1, 5):
            assert margin(v, y) == pytest.approx(0.0)

    def test_three_class_hand_value(self):
        assert margin(np.array([0.5, 0.3, 0.2]), 1) == pytest.approx(0.2)

    def test_invalid_class(self):
        with pytest.raises(ValueError):
            margin(np.array([0.5, 0.5]), 3)
        with pytest.raises(ValueError):
            margin(np.array([0.5, 0.5]), 0)

    def test_margins_matrix_matches_scalar(self):
        rng = np.random.default_rng(0)
        V = rng.dirichlet(np.ones(3), size=20)
        M = margins(V)
        for i in range(20):
            for y in range(1, 4):
                assert M[i, y - 1] == pytest.approx(margin(V[i], y))

    def test_range(self):
        rng = np.random.default_rng(1)
        V = rng.dirichlet(np.ones(5), size=50)
        M = margins(V)
        assert (M >= -1 - 1e-12).all() and (M <= 1 + 1e-12).all()


class TestMarginMoments:
    def test_single_row_hand_value(self):
        V = np.array([[0.7, 0.3]])
        m = margin_moments(V, V)
        # margins (0.4, -0.4) weighted 0.7/0.3
        assert m.mu1 == pytest.approx(0.16)
        assert m.mu2 == pytest.approx(0.16)
        assert m.sample_count == 1

    def test_one_hot_perfect_confidence(self):
        y = np.array([1, 2, 1, 3])
        W = np.eye(3)[y - 1]
        m = margin_moments(W, W)
        assert m.mu1 == pytest.approx(1.0)
        assert m.mu2 == pytest.approx(1.0)

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            K = int(rng.integers(2, 4))
            n = int(rng.integers(1, 6))
            P, V, _ = _random_instance(rng, n_max=n, k_max=K)
            n, K = V.shape
            mu1 = mu2 = 0.0
            for i in range(n):
                for c in range(1, K + 1):
                    mval = margin(V[i], c)
                    mu1 += P[i, c - 1] * mval / n
                    mu2 += P[i, c - 1] * mval * mval / n
            m = margin_moments(V, P)
            assert m.mu1 == pytest.approx(mu1, abs=1e-12)
            assert m.mu2 == pytest.approx(mu2, abs=1e-12)

    def test_default_weights_are_votes(self):
        rng = np.random.default_rng(3)
        V = rng.dirichlet(np.ones(3), size=10)
        a = margin_moments(V)
        b = margin_moments(V, V)
        assert a.mu1 == pytest.approx(b.mu1)
        assert a.mu2 == pytest.approx(b.mu2)

    def test_shape_mismatch(self):
        V = np.full((3, 2), 0.5)
        with pytest.raises(ValueError):
            margin_moments(V, np.full((2, 2), 0.5))

    def test_non_stochastic_weights(self):
        V = np.full((2, 2), 0.5)
        with pytest.raises(ValueError):
            margin_moments(V, np.array([[0.9, 0.9], [0.5, 0.5]]))

    def test_moment_invariants(self):
        with pytest.raises(ValueError):
            MarginMoments(mu1=0.5, mu2=0.2, sample_count=1)  # mu2 < mu1^2
        with pytest.raises(ValueError):
            MarginMoments(mu1=1.5, mu2=1.0, sample_count=1)
        with pytest.raises(ValueError):
            MarginMoments(mu1=0.0, mu2=1.2, sample_count=1)


class TestCbound:
    def test_hand_value(self):
        m = MarginMoments(mu1=0.16, mu2=0.16, sample_count=1)
        out = cbound(m)
        assert out.value == pytest.approx(0.84)
        assert not out.vacuous

    def test_perfect_classifier(self):
        out = cbound(MarginMoments(mu1=1.0, mu2=1.0, sample_count=1))
        assert out.value == pytest.approx(0.0)
        assert not out.vacuous

    def test_nonpositive_mu1_is_vacuous(self):
        out = cbound(MarginMoments(mu1=-0.1, mu2=0.5, sample_count=1))
        assert out == BoundValue(value=1.0, vacuous=True)
        out = cbound(MarginMoments(mu1=0.0, mu2=0.5, sample_count=1))
        assert out.vacuous

    def test_range_clamped(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            mu1 = rng.uniform(-1, 1)
            mu2 = rng.uniform(mu1 * mu1, 1)
            out = cbound(MarginMoments(mu1=mu1, mu2=float(mu2), sample_count=1))
            assert 0.0 <= out.value <= 1.0


class TestCorrectedBounds:
    def test_gamma_one_reduces_to_plain(self):
        m = MarginMoments(mu1=0.3, mu2=0.4, sample_count=5)
        assert cbound_il(m, 1.0).value == pytest.approx(cbound(m).value)
        assert cbound_beta(m, 1.0).value == pytest.approx(cbound(m).value)

    def test_hand_values(self):
        m = MarginMoments(mu1=0.16, mu2=0.16, sample_count=1)
        assert cbound_il(m, 1.7).value == pytest.approx(1 - 0.16 / 1.7)
        assert cbound_beta(m, 1.1).value == pytest.approx(1 - 0.16 / 1.1)

    def test_monotone_in_divisor(self):
        m = MarginMoments(mu1=0.4, mu2=0.3, sample_count=2)
        values = [cbound_il(m, g).value for g in (1.0, 1.3, 1.8, 4.0, 50.0)]
        assert values == sorted(values)
        assert values[-1] <= 1.0

    def test_smaller_divisor_is_tighter(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            _, _, p = _random_instance(rng)
            mu1 = rng.uniform(0.01, 0.9)
            mu2 = rng.uniform(mu1 * mu1, 1)
            m = MarginMoments(mu1=mu1, mu2=float(mu2), sample_count=1)
            assert cbound_beta(m, beta(p)).value <= cbound_il(m, gamma(p)).value + 1e-12

    def test_nonpositive_divisor_rejected(self):
        m = MarginMoments(mu1=0.2, mu2=0.2, sample_count=1)
        with pytest.raises(ValueError):
            cbound_il(m, 0.0)
        with pytest.raises(ValueError):
            cbound_beta(m, -1.0)

    def test_vacuous_propagates(self):
        m = MarginMoments(mu1=-0.2, mu2=0.5, sample_count=1)
        assert cbound_il(m, 1.5).vacuous
        assert cbound_beta(m, 1.5).vacuous


class TestMislabelingMatrix:
    def test_beta_gamma_hand_values(self):
        p = np.array([[0.9, 0.2], [0.1, 0.8]])
        assert beta(p) == pytest.approx(1.1)
        assert gamma(p) == pytest.approx(1.7)

    def test_identity_values(self):
        # no mislabeling: max row sum is 1; column maxima are all 1 so their
        # sum is the class count
        eye = np.eye(4)
        assert beta(eye) == pytest.approx(1.0)
        assert gamma(eye) == pytest.approx(4.0)

    def test_uniform_matrix_beta_one(self):
        p = np.full((3, 3), 1 / 3)
        assert beta(p) == pytest.approx(1.0)
        assert gamma(p) == pytest.approx(1.0)

    def test_gamma_at_least_beta_random_matrices(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            K = int(rng.integers(2, 11))
            p = rng.dirichlet(np.ones(K) * rng.uniform(0.2, 4.0), size=K).T
            b, g = beta(p), gamma(p)
            assert b <= g + 1e-12
            assert g <= K + 1e-12
            assert g >= p.max() - 1e-12
            # row sums total K so the max row sum is at least 1; each column
            # max is at least 1/K so the column-max sum is at least 1
            assert b >= 1.0 - 1e-12
            assert g >= 1.0 - 1e-12

    def test_column_sums_validated(self):
        with pytest.raises(ValueError):
            MislabelingMatrix(p=np.array([[0.9, 0.3], [0.2, 0.7]]))

    def test_wrapper_type_accepted(self):
        m = MislabelingMatrix(p=np.array([[0.9, 0.2], [0.1, 0.8]]))
        assert beta(m) == pytest.approx(1.1)
        assert gamma(m) == pytest.approx(1.7)


class TestEstimateMislabeling:
    def test_counting_oracle_no_smoothing(self):
        true = np.array([1, 1, 2, 2])
        pred = np.array([1, 2, 2, 2])
        m = estimate_mislabeling(true, pred, class_count=2, smoothing=0.0)
        np.testing.assert_allclose(m.p, [[0.5, 0.0], [0.5, 1.0]])

    def test_perfect_predictions_identity(self):
        y = np.array([1, 2, 3, 1, 2, 3])
        m = estimate_mislabeling(y, y, class_count=3, smoothing=0.0)
        np.testing.assert_allclose(m.p, np.eye(3))

    def test_absent_class_column_uniform(self):
        true = np.array([1, 1, 1])
        pred = np.array([1, 1, 2])
        m = estimate_mislabeling(true, pred, class_count=2, smoothing=0.0)
        np.testing.assert_allclose(m.p[:, 1], [0.5, 0.5])

    def test_smoothing_formula(self):
        true = np.array([1, 1, 2, 2])
        pred = np.array([1, 2, 2, 2])
        m = estimate_mislabeling(true, pred, class_count=2, smoothing=1.0)
        # column 1: counts (1,1) -> (2/4, 2/4); column 2: (0,2) -> (1/4, 3/4)
        np.testing.assert_allclose(m.p, [[0.5, 0.25], [0.5, 0.75]])

    def test_mask_restricts_rows(self):
        true = np.array([1, 1, 2, 2])
        pred = np.array([1, 2, 2, 1])
        mask = np.array([True, True, True, False])
        m = estimate_mislabeling(true, pred, class_count=2, smoothing=0.0, mask=mask)
        np.testing.assert_allclose(m.p, [[0.5, 0.0], [0.5, 1.0]])

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            estimate_mislabeling(np.array([], dtype=int), np.array([], dtype=int), class_count=2)

    def test_columns_stochastic_with_smoothing(self):
        rng = np.random.default_rng(7)
        true = rng.integers(1, 4, size=100)
        pred = rng.integers(1, 4, size=100)
        m = estimate_mislabeling(true, pred, class_count=3)
        np.testing.assert_allclose(m.p.sum(axis=0), np.ones(3), atol=1e-12)


class TestBoundValidity:
    """Exhaustive enumeration on small discrete instances with exact posteriors."""

    def test_plain_bound_dominates_vote_risk(self):
        rng = np.random.default_rng(8)
        checked = 0
        for _ in range(800):
            P, V, _ = _random_instance(rng, aligned=bool(rng.integers(0, 2)))
            n = P.shape[0]
            m = margin_moments(V, P)
            out = cbound(m)
            if out.vacuous:
                continue
            checked += 1
            pred = np.argmax(V, axis=1)
            risk = 1.0 - float(np.mean(P[np.arange(n), pred]))
            assert risk <= out.value + 1e-12
        assert checked >= 300

    def test_corrected_bounds_dominate_bayes_risk(self):
        # corrected bounds hold for the optimal rule argmax P(Y|x); the noisy
        # moments use the corrupted posterior sum_j p(i,j) P(Y=j|x)
        rng = np.random.default_rng(9)
        checked = 0
        for _ in range(800):
            P, V, p = _random_instance(rng, aligned=bool(rng.integers(0, 2)))
            corrupted = P @ p.T
            m = margin_moments(V, corrupted)
            bound_b = cbound_beta(m, beta(p))
            if bound_b.vacuous:
                continue
            checked += 1
            bayes_risk = 1.0 - float(np.mean(P.max(axis=1)))
            bound_g = cbound_il(m, gamma(p))
            assert bayes_risk <= bound_b.value + 1e-12
            assert bound_b.value <= bound_g.value + 1e-12
        assert checked >= 200

    def test_noisy_risk_lower_bound(self):
        # risk measured against corrupted labels is at least (1-b) + b * true risk
        rng = np.random.default_rng(10)
        for _ in range(500):
            P, _, p = _random_instance(rng)
            corrupted = P @ p.T
            b = beta(p)
            true_risk = 1.0 - float(np.mean(P.max(axis=1)))
            noisy_risk = 1.0 - float(np.mean(corrupted.max(axis=1)))
            assert noisy_risk >= (1 - b) + b * true_risk - 1e-12
