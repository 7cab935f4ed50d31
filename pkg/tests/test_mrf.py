import itertools
import math

import numpy as np
import pytest

from specmorph.errors import CapacityError, DimensionMismatchError, InvalidInputError
from specmorph.mrf import (
    MrfModel,
    benchmark_csv,
    energy,
    exact_posterior,
    fuse,
    inference_benchmark,
    local_score,
    unary_from_probabilities,
)


def enumerate_posterior(probs, beta):
    """Independent oracle: explicit product-form enumeration."""
    probs = np.asarray(probs, dtype=float)
    r = len(probs)
    table = {}
    for z in itertools.product((0, 1), repeat=r):
        weight = 1.0
        for zr, p in zip(z, probs):
            weight *= p if zr else (1.0 - p)
        disagreements = sum(
            1 for i in range(r) for j in range(i + 1, r) if z[i] != z[j])
        table[z] = weight * math.exp(-beta * disagreements)
    total = sum(table.values())
    return {z: w / total for z, w in table.items()}


def oracle_local_score(probs, beta):
    post = enumerate_posterior(probs, beta)
    return sum((sum(z) / len(z)) * p for z, p in post.items())


class TestUnaries:
    def test_half_probability(self):
        u = unary_from_probabilities([0.5])
        assert u[0, 0] == pytest.approx(math.log(2))
        assert u[0, 1] == pytest.approx(math.log(2))

    def test_clamped_extreme(self):
        u = unary_from_probabilities([1.0])
        assert u[0, 1] == pytest.approx(0.0, abs=1e-11)
        assert u[0, 0] == pytest.approx(-math.log(1e-12), rel=1e-6)
        assert np.all(np.isfinite(u))

    def test_exp_minus_one(self):
        u = unary_from_probabilities([math.exp(-1.0)])
        assert u[0, 1] == pytest.approx(1.0, abs=1e-12)


class TestEnergy:
    def test_agreeing_labels_have_no_pairwise_term(self):
        u = unary_from_probabilities([0.3, 0.6, 0.8])
        m = MrfModel(3, beta=2.5)
        e = energy(np.array([1, 1, 1]), u, m)
        assert e == pytest.approx(float(u[:, 1].sum()))

    def test_single_dissenter_pays_three_pairs(self):
        u = unary_from_probabilities([0.5] * 4)
        m = MrfModel(4, beta=2.0)
        e = energy(np.array([1, 0, 0, 0]), u, m)
        assert e - 4 * math.log(2) == pytest.approx(3 * 2.0)

    def test_beta_zero_is_unary_sum(self):
        u = unary_from_probabilities([0.2, 0.9])
        e = energy(np.array([1, 0]), u, MrfModel(2, beta=0.0))
        assert e == pytest.approx(float(u[0, 1] + u[1, 0]))

    def test_edge_set_is_all_pairs(self):
        m = MrfModel(4, beta=1.0)
        assert m.edges == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

    def test_length_mismatch(self):
        u = unary_from_probabilities([0.5, 0.5])
        with pytest.raises(DimensionMismatchError):
            energy(np.array([1, 0, 1]), u, MrfModel(2, beta=1.0))


class TestExactPosterior:
    def test_beta_zero_factorizes(self):
        probs = np.array([0.9, 0.1, 0.5, 0.5])
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 0.0))
        oracle = enumerate_posterior(probs, 0.0)
        for z, p in oracle.items():
            idx = sum(b << r for r, b in enumerate(z))
            assert post.probabilities[idx] == pytest.approx(p, abs=1e-12)

    def test_single_region_recovers_probability(self):
        post = exact_posterior(unary_from_probabilities([0.73]), MrfModel(1, 0.9))
        assert post.probabilities[1] == pytest.approx(0.73, abs=1e-12)

    def test_two_region_worked_example(self):
        post = exact_posterior(unary_from_probabilities([0.9, 0.6]), MrfModel(2, 0.9))
        z = 0.54 + 0.36 * math.exp(-0.9) + 0.06 * math.exp(-0.9) + 0.04
        assert post.probabilities[0b11] == pytest.approx(0.54 / z, abs=1e-12)
        assert local_score(post) == pytest.approx(0.6253797 / 0.7507594, abs=1e-4)

    @pytest.mark.parametrize("beta", [0.0, 0.9, 5.0, 50.0])
    def test_normalization(self, beta, rng):
        probs = rng.uniform(0.01, 0.99, 6)
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(6, beta))
        assert abs(post.probabilities.sum() - 1.0) <= 1e-12

    def test_matches_enumeration_oracle(self, rng):
        probs = rng.uniform(0.05, 0.95, 5)
        beta = 0.7
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(5, beta))
        oracle = enumerate_posterior(probs, beta)
        for z, p in oracle.items():
            idx = sum(b << r for r, b in enumerate(z))
            assert post.probabilities[idx] == pytest.approx(p, abs=1e-12)

    def test_consensus_at_large_beta(self):
        probs = [0.9, 0.6, 0.7, 0.2]
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 50.0))
        mass = post.probabilities[0] + post.probabilities[0b1111]
        assert mass > 1.0 - 1e-6

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            exact_posterior(np.zeros((25, 2)), MrfModel(25, 0.9))

    def test_stability_at_clamp_and_high_beta(self):
        probs = [1e-15, 1 - 1e-15, 0.5, 0.5]
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 100.0))
        assert np.all(np.isfinite(post.probabilities))
        assert post.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


class TestLocalScore:
    def test_independence_mean(self):
        probs = [0.9, 0.1, 0.5, 0.5]
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 0.0))
        assert local_score(post) == pytest.approx(0.5, abs=1e-12)

    def test_equals_mean_of_marginals(self, rng):
        probs = rng.uniform(0.05, 0.95, 4)
        post = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 0.9))
        assert abs(local_score(post) - post.marginals().mean()) <= 1e-12

    def test_all_equal_probability_identity_at_beta_zero(self):
        for q in (0.2, 0.5, 0.8):
            post = exact_posterior(unary_from_probabilities([q] * 4), MrfModel(4, 0.0))
            assert local_score(post) == pytest.approx(q, abs=1e-12)

    def test_half_probability_fixed_point_any_beta(self):
        # global flip symmetry pins the expected fraction at 1/2
        for beta in (0.0, 0.9, 5.0):
            post = exact_posterior(unary_from_probabilities([0.5] * 4), MrfModel(4, beta))
            assert local_score(post) == pytest.approx(0.5, abs=1e-12)

    def test_coupling_contracts_toward_consensus(self):
        # the oracle shows nonzero coupling pulls the common marginal
        # past q toward the nearer consensus state
        assert oracle_local_score([0.2] * 4, 0.9) < 0.2
        assert oracle_local_score([0.8] * 4, 0.9) > 0.8

    def test_monotone_consensus_pull(self):
        probs = [0.9, 0.9, 0.9, 0.2]
        scores = [
            local_score(exact_posterior(unary_from_probabilities(probs), MrfModel(4, b)))
            for b in (0.0, 0.3, 0.9, 3.0, 10.0)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))

    def test_permutation_equivariance(self, rng):
        probs = rng.uniform(0.1, 0.9, 4)
        perm = [2, 0, 3, 1]
        post_a = exact_posterior(unary_from_probabilities(probs), MrfModel(4, 0.9))
        post_b = exact_posterior(unary_from_probabilities(probs[perm]), MrfModel(4, 0.9))
        assert np.allclose(post_a.marginals()[perm], post_b.marginals(), atol=1e-12)
        assert local_score(post_a) == pytest.approx(local_score(post_b), abs=1e-12)


class TestFuse:
    def test_lambda_one_is_global(self):
        assert fuse(0.31, 0.99, 1.0) == 0.31

    def test_lambda_zero_is_local(self):
        assert fuse(0.31, 0.99, 0.0) == 0.99

    def test_default_weight_mix(self):
        assert fuse(0.5, 1.0, 0.6) == pytest.approx(0.7, abs=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            fuse(1.2, 0.5, 0.5)
        with pytest.raises(InvalidInputError):
            fuse(0.5, 0.5, 1.5)


class TestBenchmark:
    def test_rows_and_csv_format(self):
        rows = inference_benchmark([2, 3, 4], repetitions=3)
        text = benchmark_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "R,mean_ns,std_ns,repetitions"
        assert len(lines) == 4
        assert lines[1].startswith("2,")

    def test_small_r_is_fast(self):
        row = inference_benchmark([4])[0]
        assert row.mean_ns < 1e6  # < 1 ms

    def test_timing_grows_with_r(self):
        rows = inference_benchmark(range(10, 17))
        means = [r.mean_ns for r in rows]
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            inference_benchmark([30])
