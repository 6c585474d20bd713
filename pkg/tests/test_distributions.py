import math

import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from utils.distributions import (
    Distribution,
    EmpiricalType,
    Rates,
    binary_kl,
    decompose_identity_check,
    gjs,
    gjs_matrix,
    kl,
    mixture,
    renyi,
    stack
)
from utils.errors import DimensionError, DomainError


def random_distribution(rng, size=3):
    return Distribution(rng.dirichlet(np.ones(size)))


class TestDistribution:
    def test_bernoulli_puts_success_on_symbol_one(self):
        assert Distribution.bernoulli(0.3).probs.tolist() == pytest.approx([0.7, 0.3])

    def test_parse_shorthand_and_list(self):
        assert Distribution.parse("bern:0.25") == Distribution.bernoulli(0.25)
        assert Distribution.parse([0.5, 0.5]) == Distribution([0.5, 0.5])

    @pytest.mark.parametrize("spec", ["gauss:0.1", "bern:", "bern:abc", "bern:1.5"])
    def test_parse_rejects_bad_shorthand(self, spec):
        with pytest.raises(DomainError):
            Distribution.parse(spec)

    def test_near_normalized_input_is_renormalized(self):
        d = Distribution([0.5, 0.5 + 5e-10])
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("probs", [[0.5, 0.4], [1.2, -0.2], [1.0], [np.nan, 1.0]])
    def test_invalid_probabilities(self, probs):
        with pytest.raises(DomainError):
            Distribution(probs)

    def test_two_dimensional_input(self):
        with pytest.raises(DimensionError):
            Distribution([[0.5, 0.5]])

    def test_probs_are_read_only(self):
        d = Distribution([0.2, 0.8])
        with pytest.raises(ValueError):
            d.probs[0] = 0.5

    def test_smoothing_gives_full_support(self):
        d = Distribution([1.0, 0.0, 0.0])
        assert not d.has_full_support()
        smoothed = d.smoothed(1e-3)
        assert smoothed.has_full_support()
        assert smoothed.probs[0] == pytest.approx(1.0 - 2e-3 / 3)

    def test_equality_and_hash(self):
        assert Distribution.bernoulli(0.1) == Distribution.bernoulli(0.1)
        assert len({Distribution.bernoulli(0.1), Distribution.bernoulli(0.1), Distribution.bernoulli(0.2)}) == 2


class TestEmpiricalType:
    def test_counts_from_symbols(self):
        t = EmpiricalType.from_symbols([0, 1, 1, 2], 3)
        assert t.counts.tolist() == [1, 2, 1]
        assert t.length == 4
        assert t.as_distribution().probs.tolist() == pytest.approx([0.25, 0.5, 0.25])

    def test_push_and_extend(self):
        t = EmpiricalType(2)
        t.push(1)
        t.extend([0, 0, 1])
        assert t.counts.tolist() == [2, 2]
        assert t.length == 4

    def test_symbol_outside_alphabet(self):
        t = EmpiricalType(2)
        with pytest.raises(DimensionError):
            t.push(2)
        with pytest.raises(DimensionError):
            t.extend([0, -1])

    def test_empty_type_has_no_distribution(self):
        with pytest.raises(DomainError):
            EmpiricalType(2).as_distribution()

    def test_copy_is_independent(self):
        t = EmpiricalType(2, [1, 1])
        c = t.copy()
        c.push(0)
        assert t.counts.tolist() == [1, 1]
        assert c != t


class TestRates:
    def test_ceil_uses_exact_decimal(self):
        rates = Rates(0.1, 0.3)
        assert rates.xi(10) == 1
        assert rates.chi(10) == 3

    def test_lengths_over_an_array(self):
        rates = Rates(0.5, 1.5)
        n = np.arange(1, 5)
        assert rates.xi(n).tolist() == [1, 1, 2, 2]
        assert rates.chi(n).tolist() == [2, 3, 5, 6]

    @pytest.mark.parametrize("alpha", [0.0, -1.0, math.inf, "1"])
    def test_invalid_rate(self, alpha):
        with pytest.raises(DomainError):
            Rates(alpha, 1.0)


class TestDivergences:
    def test_kl_binary(self):
        assert kl(Distribution.bernoulli(0.2), Distribution.bernoulli(0.8)) == pytest.approx(0.6 * math.log(4))
        assert binary_kl(0.2, 0.8) == pytest.approx(0.6 * math.log(4))

    def test_kl_infinite_without_absolute_continuity(self):
        assert kl(Distribution([0.5, 0.5]), Distribution([1.0, 0.0])) == math.inf
        assert kl(Distribution([1.0, 0.0]), Distribution([0.5, 0.5])) == pytest.approx(math.log(2))

    def test_kl_alphabet_mismatch(self):
        with pytest.raises(DimensionError):
            kl(Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5]))

    def test_binary_kl_domain(self):
        with pytest.raises(DomainError):
            binary_kl(0.0, 0.5)

    def test_renyi_order_one_is_kl(self, rng):
        p, q = random_distribution(rng), random_distribution(rng)
        assert renyi(p, q, 1.0) == pytest.approx(kl(p, q))

    def test_renyi_half_is_bhattacharyya(self, rng):
        p, q = random_distribution(rng), random_distribution(rng)
        expected = -2 * math.log(np.sum(np.sqrt(p.probs * q.probs)))
        assert renyi(p, q, 0.5) == pytest.approx(expected)

    def test_renyi_skew_symmetry(self, rng):
        alpha, beta = 0.7, 1.8
        p, q = random_distribution(rng, 4), random_distribution(rng, 4)
        lhs = beta * renyi(p, q, alpha / (alpha + beta))
        rhs = alpha * renyi(q, p, beta / (alpha + beta))
        assert lhs == pytest.approx(rhs)

    def test_renyi_rejects_nonpositive_order(self):
        with pytest.raises(DomainError):
            renyi(Distribution([0.5, 0.5]), Distribution([0.5, 0.5]), 0.0)

    def test_renyi_above_one_without_support(self):
        assert renyi(Distribution([0.5, 0.5]), Distribution([1.0, 0.0]), 2.0) == math.inf

    def test_gjs_with_unit_rates_is_twice_jensen_shannon(self, rng):
        p, q = random_distribution(rng), random_distribution(rng)
        assert gjs(p, q, Rates(1.0, 1.0)) == pytest.approx(2 * jensenshannon(p.probs, q.probs) ** 2)

    def test_gjs_zero_iff_equal(self):
        p = Distribution.bernoulli(0.3)
        rates = Rates(2.0, 0.5)
        assert gjs(p, p, rates) == 0.0
        assert gjs(p, Distribution.bernoulli(0.31), rates) > 0.0

    def test_mixture(self):
        r = mixture(Distribution([1.0, 0.0]), Distribution([0.0, 1.0]), Rates(3.0, 1.0))
        assert r.probs.tolist() == pytest.approx([0.75, 0.25])

    def test_decomposition_identity(self, rng):
        rates = Rates(1.3, 0.6)
        omega, psi, p = (random_distribution(rng, 4) for _ in range(3))
        lhs, rhs = decompose_identity_check(omega, psi, p, rates)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_decomposition_needs_full_support(self):
        p = Distribution([1.0, 0.0])
        with pytest.raises(DomainError):
            decompose_identity_check(Distribution([0.5, 0.5]), Distribution([0.5, 0.5]), p, Rates(1.0, 1.0))


class TestGjsMatrix:
    def test_matches_scalar_gjs(self, rng):
        rates = Rates(1.0, 2.0)
        left = [random_distribution(rng) for _ in range(3)]
        right = [random_distribution(rng) for _ in range(2)]
        matrix = gjs_matrix(stack(left), stack(right), rates.alpha, rates.beta)
        assert matrix.shape == (3, 2)
        for i, p in enumerate(left):
            for j, q in enumerate(right):
                assert matrix[i, j] == pytest.approx(gjs(p, q, rates))

    def test_equal_rows_are_exactly_zero(self):
        row = np.array([0.1, 0.2, 0.7])
        matrix = gjs_matrix(row[None], np.stack([row, row[::-1]]), 0.3, 0.7)
        assert matrix[0, 0] == 0.0
        assert matrix[0, 1] > 0.0

    def test_leading_axes_broadcast(self, rng):
        left = rng.dirichlet(np.ones(2), size=(5, 3))
        right = rng.dirichlet(np.ones(2), size=(5, 2))
        batched = gjs_matrix(left, right, 1.0, 1.0)
        assert batched.shape == (5, 3, 2)
        assert np.allclose(batched[4], gjs_matrix(left[4], right[4], 1.0, 1.0))

    def test_stack_checks_alphabets(self):
        with pytest.raises(DimensionError):
            stack([Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5])])
        with pytest.raises(DimensionError):
            stack([])
