"""Scoring functions over database snapshots and the threshold schedules f(n), g(n)."""
import math
from typing import Dict, List, Sequence

import numpy as np

from utils.distributions import Distribution, EmpiricalType, Rates, gjs, gjs_matrix
from utils.errors import DimensionError, DomainError
from utils.matchings import MatchingSet, ProblemDims, pair_table


class DatabaseSnapshot:
    """
    Empirical types of both databases at nominal time n.

    Args:
        left_types (list[EmpiricalType]): M1 types, each of length ceil(alpha*n).
        right_types (list[EmpiricalType]): M2 types, each of length ceil(beta*n).
        n (int): Nominal time index.
        rates (Rates, optional): When given, the lengths are checked against it.
    """

    def __init__(
        self,
        left_types: Sequence[EmpiricalType],
        right_types: Sequence[EmpiricalType],
        n: int,
        rates: Rates = None
    ) -> None:
        if not left_types or not right_types:
            raise DimensionError("A snapshot needs at least one sequence per database")
        sizes = {t.alphabet_size for t in list(left_types) + list(right_types)}
        if len(sizes) != 1:
            raise DimensionError(f"Sequences use different alphabets: {sorted(sizes)}")
        if rates is not None:
            xi, chi = rates.xi(n), rates.chi(n)
            if any(t.length != xi for t in left_types) or any(t.length != chi for t in right_types):
                raise DimensionError(f"Snapshot at n={n} needs left length {xi} and right length {chi}")
        self.left_types = list(left_types)
        self.right_types = list(right_types)
        self.n = n

    @classmethod
    def from_counts(cls, left_counts: np.ndarray, right_counts: np.ndarray, n: int, rates: Rates = None):
        """Build from [M1, X] and [M2, X] integer count arrays."""
        size = left_counts.shape[-1]
        return cls(
            [EmpiricalType(size, row) for row in left_counts],
            [EmpiricalType(size, row) for row in right_counts],
            n,
            rates
        )

    @property
    def alphabet_size(self) -> int:
        return self.left_types[0].alphabet_size

    @property
    def dims(self) -> ProblemDims:
        return ProblemDims(len(self.left_types), len(self.right_types))

    def left_distributions(self) -> List[Distribution]:
        return [t.as_distribution() for t in self.left_types]

    def right_distributions(self) -> List[Distribution]:
        return [t.as_distribution() for t in self.right_types]

    def pair_gjs(self, rates: Rates) -> np.ndarray:
        """[M1, M2] GJS between every left and right empirical type."""
        left = np.stack([t.counts for t in self.left_types])
        right = np.stack([t.counts for t in self.right_types])
        return pair_gjs_from_counts(left, right, rates)


def pair_gjs_from_counts(left_counts: np.ndarray, right_counts: np.ndarray, rates: Rates) -> np.ndarray:
    """
    Pairwise GJS from integer counts; leading axes broadcast (e.g. over time steps).

    Args:
        left_counts (ndarray): [..., M1, X] counts.
        right_counts (ndarray): [..., M2, X] counts.
        rates (Rates): Sampling rates.

    Returns:
        ndarray: [..., M1, M2].
    """
    left = left_counts / left_counts.sum(axis=-1, keepdims=True)
    right = right_counts / right_counts.sum(axis=-1, keepdims=True)
    return gjs_matrix(left, right, rates.alpha, rates.beta)


def hypothesis_scores(pair_values: np.ndarray, table: np.ndarray) -> np.ndarray:
    """
    Sum pairwise values over every hypothesis.

    Args:
        pair_values (ndarray): [..., M1, M2] per-pair GJS.
        table (ndarray): [T, k] flat pair indices from utils.matchings.pair_table.

    Returns:
        ndarray: [..., T] scores, summed in a fixed order.
    """
    flat = pair_values.reshape(pair_values.shape[:-2] + (-1,))
    return flat[..., table].sum(axis=-1)


def _check_pairs(m: MatchingSet, m1: int, m2: int) -> None:
    for i, j in m.pairs:
        if i >= m1 or j >= m2:
            raise DimensionError(f"Pair ({i + 1},{j + 1}) outside databases of sizes ({m1}, {m2})")


def g_combined(
    dists_left: Sequence[Distribution],
    dists_right: Sequence[Distribution],
    m: MatchingSet,
    rates: Rates
) -> float:
    """G_t(P, Q) = sum of GJS(P_i, Q_j) over the pairs of m."""
    _check_pairs(m, len(dists_left), len(dists_right))
    return float(sum(gjs(dists_left[i], dists_right[j], rates) for i, j in m.pairs))


def score(snapshot: DatabaseSnapshot, m: MatchingSet, rates: Rates) -> float:
    """S_t: g_combined evaluated at the snapshot's empirical distributions."""
    _check_pairs(m, len(snapshot.left_types), len(snapshot.right_types))
    return g_combined(snapshot.left_distributions(), snapshot.right_distributions(), m, rates)


def scores_by_k(snapshot: DatabaseSnapshot, rates: Rates, ks: Sequence[int] = None) -> Dict[int, np.ndarray]:
    """Scores of every hypothesis for each requested k, canonical order within k."""
    dims = snapshot.dims
    pair_values = snapshot.pair_gjs(rates)
    ks = range(1, dims.m2 + 1) if ks is None else ks
    return {k: hypothesis_scores(pair_values, pair_table(dims, k)) for k in ks}


def f_threshold(n, k: int, alphabet_size: int, rates: Rates):
    """
    f(n) = ((k+1)|X| log(n*alpha+2) + k|X| log(n*beta+2)) / n

    Accepts an int or an integer array for n.
    """
    n_arr = np.asarray(n, dtype=np.float64)
    value = (
        (k + 1) * alphabet_size * np.log(n_arr * rates.alpha + 2)
        + k * alphabet_size * np.log(n_arr * rates.beta + 2)
    ) / n_arr
    return float(value) if np.ndim(value) == 0 else value


def g_poly(n1: int, n2: int, n3: int, alphabet_size: int, rates: Rates) -> float:
    """g(n1, n2, n3) = (n2|X| log(n1*alpha+2) + n3|X| log(n1*beta+2)) / n1"""
    if n1 < 1:
        raise DomainError(f"g needs n1 >= 1, got {n1}")
    return (
        n2 * alphabet_size * math.log(n1 * rates.alpha + 2)
        + n3 * alphabet_size * math.log(n1 * rates.beta + 2)
    ) / n1
