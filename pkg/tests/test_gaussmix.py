import math

import numpy as np
import pytest

from oabandit.gaussmix import (
    GaussianComponent,
    ParameterBelief,
    from_natural,
    mixture_log_pdf,
    mixture_mean,
    moment_match,
    normalized_belief,
    pairwise_merge_costs,
    runnalls_reduce,
    to_natural,
)

from oracles import sample_mixture


def random_spd(rng, d, scale=1.0):
    a = rng.normal(size=(d, d))
    return scale * (a @ a.T + d * np.eye(d))


def random_belief(rng, d, m, option=None):
    w = rng.dirichlet(np.ones(m))
    comps = tuple(
        GaussianComponent(rng.normal(size=d), random_spd(rng, d, 0.5), float(np.log(wi)))
        for wi in w
    )
    return ParameterBelief(components=comps, option=option)


class TestGaussianComponent:
    def test_rejects_asymmetric_cov(self):
        cov = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(2), cov)

    def test_rejects_indefinite_cov(self):
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_nonfinite_weight(self):
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(1), np.eye(1), log_weight=-np.inf)

    def test_log_pdf_standard_normal(self):
        g = GaussianComponent(np.zeros(1), np.eye(1))
        assert g.log_pdf(np.zeros(1)) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)

    def test_with_log_weight_shares_arrays(self):
        g = GaussianComponent(np.zeros(2), np.eye(2), 0.0)
        h = g.with_log_weight(-1.0)
        assert h.mean is g.mean and h.cov is g.cov
        assert h.log_weight == -1.0


class TestNaturalConversion:
    def test_standard_normal(self):
        nat = to_natural(GaussianComponent(np.zeros(2), np.eye(2)))
        np.testing.assert_allclose(nat.quad_term, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(nat.lin_term, 0.0, atol=1e-14)
        assert nat.const_term == pytest.approx(-math.log(2 * math.pi), abs=1e-14)

    def test_scalar_case(self):
        nat = to_natural(GaussianComponent(np.array([3.0]), np.array([[4.0]])))
        assert nat.quad_term[0, 0] == pytest.approx(0.25, abs=1e-14)
        assert nat.lin_term[0] == pytest.approx(0.75, abs=1e-14)
        assert nat.const_term == pytest.approx(-9 / 8 - 0.5 * math.log(8 * math.pi), abs=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(2)
        g = GaussianComponent(rng.normal(size=6), random_spd(rng, 6))
        back = from_natural(to_natural(g))
        np.testing.assert_allclose(back.mean, g.mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(back.cov, g.cov, rtol=1e-8, atol=1e-10)

    def test_density_agreement(self):
        rng = np.random.default_rng(3)
        g = GaussianComponent(rng.normal(size=4), random_spd(rng, 4))
        nat = to_natural(g)
        for _ in range(20):
            pt = rng.normal(size=4, scale=2.0)
            assert nat.log_density(pt) == pytest.approx(g.log_pdf(pt), rel=1e-8, abs=1e-8)


class TestMomentMatch:
    def test_two_identical_components(self):
        g = GaussianComponent(np.array([1.0, -1.0]), np.diag([2.0, 3.0]), math.log(0.5))
        merged = moment_match([g, g])
        np.testing.assert_allclose(merged.mean, g.mean, atol=1e-14)
        np.testing.assert_allclose(merged.cov, g.cov, atol=1e-14)
        assert merged.weight == pytest.approx(1.0, abs=1e-14)

    def test_closed_form_1d(self):
        a = GaussianComponent(np.array([0.0]), np.eye(1), math.log(0.5))
        b = GaussianComponent(np.array([2.0]), np.eye(1), math.log(0.5))
        merged = moment_match([a, b])
        assert merged.mean[0] == pytest.approx(1.0, abs=1e-14)
        assert merged.cov[0, 0] == pytest.approx(2.0, abs=1e-14)

    def test_matches_sample_moments(self):
        """Moments of the match equal mixture sample moments within 3 SEs."""
        rng = np.random.default_rng(7)
        w = np.array([0.2, 0.5, 0.3])
        means = [rng.normal(size=3) for _ in range(3)]
        covs = [random_spd(rng, 3, 0.5) for _ in range(3)]
        comps = [
            GaussianComponent(m, c, float(np.log(wi)))
            for wi, m, c in zip(w, means, covs)
        ]
        merged = moment_match(comps)
        n = 1_000_000
        draws = sample_mixture(w, means, covs, n, np.random.default_rng(8))
        se_mean = draws.std(axis=0, ddof=1) / np.sqrt(n)
        np.testing.assert_array_less(np.abs(draws.mean(axis=0) - merged.mean), 3 * se_mean)
        sample_cov = np.cov(draws.T)
        # variance of a covariance entry ~ (S_ii S_jj + S_ij^2) / n
        se_cov = np.sqrt(
            (np.outer(np.diag(sample_cov), np.diag(sample_cov)) + sample_cov**2) / n
        )
        np.testing.assert_array_less(np.abs(sample_cov - merged.cov), 3 * se_cov + 1e-12)

    def test_preserves_first_two_moments_exactly(self):
        rng = np.random.default_rng(9)
        comps = [
            GaussianComponent(rng.normal(size=2), random_spd(rng, 2), float(np.log(w)))
            for w in (0.25, 0.25, 0.5)
        ]
        merged = moment_match(comps)
        mean = sum(c.weight * c.mean for c in comps)
        second = sum(c.weight * (c.cov + np.outer(c.mean, c.mean)) for c in comps)
        np.testing.assert_allclose(merged.mean, mean, atol=1e-10)
        np.testing.assert_allclose(merged.cov + np.outer(mean, mean), second, atol=1e-10)

    def test_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            moment_match([])


class TestRunnallsReduce:
    def test_below_threshold_unchanged(self):
        rng = np.random.default_rng(4)
        belief = random_belief(rng, 2, 3)
        assert runnalls_reduce(belief, 10) is belief

    def test_identical_pair_zero_cost(self):
        g = GaussianComponent(np.array([1.0]), np.array([[2.0]]), math.log(0.5))
        belief = ParameterBelief((g, g.with_log_weight(math.log(0.5))))
        costs, _, _ = pairwise_merge_costs(
            belief.weights,
            np.stack([c.mean for c in belief.components]),
            np.stack([c.cov for c in belief.components]),
        )
        assert costs[0, 1] == pytest.approx(0.0, abs=1e-12)
        reduced = runnalls_reduce(belief, 1)
        assert reduced.num_components == 1
        np.testing.assert_allclose(reduced.components[0].mean, g.mean, atol=1e-14)
        np.testing.assert_allclose(reduced.components[0].cov, g.cov, atol=1e-14)
        assert reduced.weights[0] == pytest.approx(1.0, abs=1e-12)

    def test_merges_cheapest_pair(self):
        """Two near-identical components merge before a distant third."""
        comps = (
            GaussianComponent(np.array([0.0]), np.eye(1), math.log(0.45)),
            GaussianComponent(np.array([0.1]), np.eye(1), math.log(0.45)),
            GaussianComponent(np.array([10.0]), np.eye(1), math.log(0.10)),
        )
        belief = ParameterBelief(comps)
        costs, _, _ = pairwise_merge_costs(
            belief.weights,
            np.stack([c.mean for c in comps]),
            np.stack([c.cov for c in comps]),
        )
        pairs = {(0, 1): costs[0, 1], (0, 2): costs[0, 2], (1, 2): costs[1, 2]}
        assert min(pairs, key=pairs.get) == (0, 1)
        reduced = runnalls_reduce(belief, 2)
        assert reduced.num_components == 2
        # merged (0, 1) keeps mean near 0.05; the outlier survives at 10
        means = sorted(float(c.mean[0]) for c in reduced.components)
        assert means[0] == pytest.approx(0.05, abs=1e-12)
        assert means[1] == pytest.approx(10.0, abs=1e-12)

    def test_costs_nonnegative(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            belief = random_belief(rng, 3, 5)
            costs, _, _ = pairwise_merge_costs(
                belief.weights,
                np.stack([c.mean for c in belief.components]),
                np.stack([c.cov for c in belief.components]),
            )
            finite = costs[np.isfinite(costs)]
            assert np.all(finite >= -1e-10)

    def test_weight_preserved_and_count_reduced(self):
        rng = np.random.default_rng(13)
        belief = random_belief(rng, 2, 8)
        reduced = runnalls_reduce(belief, 3)
        assert reduced.num_components == 3
        assert reduced.weights.sum() == pytest.approx(1.0, abs=1e-9)


class TestMixtureOps:
    def test_log_pdf_standard_normal(self):
        belief = ParameterBelief((GaussianComponent(np.zeros(1), np.eye(1)),))
        assert mixture_log_pdf(belief, np.zeros(1)) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-14
        )

    def test_mean_symmetry(self):
        comps = (
            GaussianComponent(np.array([-1.0]), np.eye(1), math.log(0.5)),
            GaussianComponent(np.array([1.0]), np.eye(1), math.log(0.5)),
        )
        assert mixture_mean(ParameterBelief(comps))[0] == pytest.approx(0.0, abs=1e-15)

    def test_pdf_integrates_to_one(self):
        rng = np.random.default_rng(21)
        belief = random_belief(rng, 1, 2)
        lo = min(float(c.mean[0]) - 10 * np.sqrt(c.cov[0, 0]) for c in belief.components)
        hi = max(float(c.mean[0]) + 10 * np.sqrt(c.cov[0, 0]) for c in belief.components)
        grid = np.linspace(lo, hi, 4001)
        pdf = np.exp([mixture_log_pdf(belief, np.array([g])) for g in grid])
        assert np.trapezoid(pdf, grid) == pytest.approx(1.0, abs=1e-3)

    def test_dimension_mismatch(self):
        belief = ParameterBelief((GaussianComponent(np.zeros(2), np.eye(2)),))
        with pytest.raises(ValueError):
            mixture_log_pdf(belief, np.zeros(3))


class TestParameterBelief:
    def test_weights_must_normalize(self):
        g = GaussianComponent(np.zeros(1), np.eye(1), math.log(0.5))
        with pytest.raises(ValueError):
            ParameterBelief((g,))

    def test_normalized_belief_drops_dead_components(self):
        comps = [
            GaussianComponent(np.zeros(1), np.eye(1), 0.0),
            GaussianComponent(np.ones(1), np.eye(1), math.log(1e-15)),
        ]
        belief = normalized_belief(comps)
        assert belief.num_components == 1
        assert belief.weights[0] == pytest.approx(1.0, abs=1e-15)

    def test_json_round_trip(self):
        rng = np.random.default_rng(30)
        belief = random_belief(rng, 3, 2, option=4)
        back = ParameterBelief.from_json(belief.to_json())
        assert back.option == 4
        for a, b in zip(back.components, belief.components):
            np.testing.assert_array_equal(a.mean, b.mean)
            np.testing.assert_array_equal(a.cov, b.cov)
            assert a.log_weight == b.log_weight
