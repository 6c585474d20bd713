import numpy as np
import pytest

from exponents.oracle import GridOracle
from utils.distributions import Distribution, Rates, gjs_matrix, renyi
from utils.errors import DomainError

UNIT = Rates(1.0, 1.0)
LEFT = np.array([[0.8, 0.2], [0.3, 0.7]])
RIGHT = np.array([[0.4, 0.6]])


def pair_weights(*pairs, m1=2, m2=1):
    w = np.zeros((1, m1, m2))
    for i, j in pairs:
        w[0, i, j] = 1.0
    return w


def test_feasible_data():
    result = GridOracle(LEFT, RIGHT, UNIT).solve(pair_weights((0, 0)), np.array([1.0]))
    assert result.mode == "data"
    assert result.value == 0.0


def test_collapse_matches_renyi():
    result = GridOracle(LEFT, RIGHT, UNIT).solve(pair_weights((0, 0)), np.array([0.0]))
    assert result.mode == "collapse"
    assert result.value == pytest.approx(renyi(Distribution(LEFT[0]), Distribution(RIGHT[0]), 0.5), abs=1e-6)
    assert np.allclose(result.omega[0], result.psi[0])


def test_product_scan_respects_constraint():
    bound = 0.02
    result = GridOracle(LEFT, RIGHT, UNIT).solve(pair_weights((0, 0)), np.array([bound]))
    assert result.mode == "product_scan"
    reached = gjs_matrix(result.omega, result.psi, 1.0, 1.0)[0, 0]
    assert reached <= bound + 1e-12
    collapsed = renyi(Distribution(LEFT[0]), Distribution(RIGHT[0]), 0.5)
    assert 0.0 < result.value < collapsed


def test_looser_bound_is_cheaper():
    oracle = GridOracle(LEFT, RIGHT, UNIT)
    tight = oracle.solve(pair_weights((0, 0)), np.array([0.01])).value
    loose = oracle.solve(pair_weights((0, 0)), np.array([0.05])).value
    assert loose < tight


def test_envelope_for_many_factors():
    left = np.array([[0.9, 0.1], [0.7, 0.3], [0.4, 0.6]])
    right = np.array([[0.2, 0.8], [0.5, 0.5]])
    oracle = GridOracle(left, right, UNIT, points=101)
    result = oracle.solve(pair_weights((0, 0), (1, 1), m1=3, m2=2), np.array([0.01]))
    assert result.mode == "envelope"
    assert result.omega is None
    assert 0.0 < result.value < np.inf


def test_binary_only():
    with pytest.raises(DomainError):
        GridOracle(np.full((1, 3), 1 / 3), np.full((1, 3), 1 / 3), UNIT)
