"""
Hypothesis space: every injective pairing of K left indices with K right indices.

Indices are 0-based here and 1-based in every JSON/CLI rendering.
"""
import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from utils.errors import DimensionError, DomainError

Pair = Tuple[int, int]


@dataclass(frozen=True)
class ProblemDims:
    """Database sizes with m1 >= m2 >= 1."""

    m1: int
    m2: int

    def __post_init__(self) -> None:
        if not (isinstance(self.m1, int) and isinstance(self.m2, int)):
            raise DomainError(f"Database sizes must be integers, got ({self.m1!r}, {self.m2!r})")
        if not self.m1 >= self.m2 >= 1:
            raise DomainError(f"Need m1 >= m2 >= 1, got m1={self.m1}, m2={self.m2}")

    def to_json(self) -> dict:
        return {"m1": self.m1, "m2": self.m2}


class MatchingSet:
    """
    A partial injective pairing between database indices, stored sorted.

    Args:
        pairs (Iterable[tuple[int, int]]): 0-based (i, j) pairs.
    """

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[Pair]) -> None:
        pairs = tuple(sorted((int(i), int(j)) for i, j in pairs))
        if not pairs:
            raise DomainError("A matching set needs at least one pair")
        lefts = [i for i, _ in pairs]
        rights = [j for _, j in pairs]
        if min(lefts) < 0 or min(rights) < 0:
            raise DimensionError(f"Negative index in matching {pairs}")
        if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
            raise DomainError(f"Matching is not injective: {pairs}")
        self.pairs = pairs

    @classmethod
    def from_json(cls, value: Sequence[Sequence[int]]) -> "MatchingSet":
        """Parse the 1-based [[i, j], ...] rendering."""
        return cls((int(i) - 1, int(j) - 1) for i, j in value)

    @property
    def k(self) -> int:
        return len(self.pairs)

    def matched_left(self) -> frozenset:
        return frozenset(i for i, _ in self.pairs)

    def matched_right(self) -> frozenset:
        return frozenset(j for _, j in self.pairs)

    def fits(self, dims: ProblemDims) -> bool:
        return all(i < dims.m1 and j < dims.m2 for i, j in self.pairs) and self.k <= dims.m2

    def to_json(self) -> list:
        return [[i + 1, j + 1] for i, j in self.pairs]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatchingSet):
            return NotImplemented
        return self.pairs == other.pairs

    def __lt__(self, other: "MatchingSet") -> bool:
        return self.pairs < other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        return "{" + ", ".join(f"({i + 1},{j + 1})" for i, j in self.pairs) + "}"


@dataclass(frozen=True, order=True)
class HypothesisIndex:
    """
    H_l^K as (k, l) with l 0-based in canonical order, or the reject hypothesis H_r.

    Use HypothesisIndex.reject() for H_r; it is stored as k = 0, l = -1.
    """

    k: int
    l: int

    @classmethod
    def reject(cls) -> "HypothesisIndex":
        return cls(0, -1)

    @property
    def is_reject(self) -> bool:
        return self.k == 0

    def to_json(self):
        return "reject" if self.is_reject else {"k": self.k, "l": self.l + 1}

    @classmethod
    def from_json(cls, value) -> "HypothesisIndex":
        if value == "reject":
            return cls.reject()
        return cls(int(value["k"]), int(value["l"]) - 1)

    def __str__(self) -> str:
        return "H_r" if self.is_reject else f"H({self.k},{self.l + 1})"


REJECT = HypothesisIndex.reject()


def _check_k(dims: ProblemDims, k: int) -> None:
    if not 1 <= k <= dims.m2:
        raise DomainError(f"Match count k={k} outside [1, {dims.m2}]")


def count_hypotheses(dims: ProblemDims, k: int) -> int:
    """T_K = C(m1, k) * C(m2, k) * k!"""
    _check_k(dims, k)
    return math.comb(dims.m1, k) * math.comb(dims.m2, k) * math.factorial(k)


def total_hypotheses(dims: ProblemDims) -> int:
    return sum(count_hypotheses(dims, k) for k in range(1, dims.m2 + 1))


def ensure_enumerable(dims: ProblemDims, limit: int, k: int = None) -> int:
    """Raise DimensionError when the hypothesis count exceeds limit; returns the count."""
    total = count_hypotheses(dims, k) if k is not None else total_hypotheses(dims)
    if total > limit:
        raise DimensionError(f"{total} hypotheses for m1={dims.m1}, m2={dims.m2} exceed the limit {limit}")
    return total


@lru_cache(maxsize=64)
def _canonical(m1: int, m2: int, k: int) -> Tuple[MatchingSet, ...]:
    sets = [
        MatchingSet(zip(lefts, rights))
        for lefts in combinations(range(m1), k)
        for rights in permutations(range(m2), k)
    ]
    return tuple(sorted(sets))


def enumerate_matchings(dims: ProblemDims, k: int) -> List[MatchingSet]:
    """All T_K matching sets of size k, in canonical (lexicographic) order."""
    _check_k(dims, k)
    return list(_canonical(dims.m1, dims.m2, k))


def enumerate_all(dims: ProblemDims) -> List[Tuple[int, int, MatchingSet]]:
    """(k, l, matching) over k = 1..m2, l 0-based."""
    return [
        (k, l, m)
        for k in range(1, dims.m2 + 1)
        for l, m in enumerate(_canonical(dims.m1, dims.m2, k))
    ]


def matching_at(dims: ProblemDims, index: HypothesisIndex) -> MatchingSet:
    if index.is_reject:
        raise DomainError("The reject hypothesis has no matching set")
    table = _canonical(dims.m1, dims.m2, index.k) if 1 <= index.k <= dims.m2 else ()
    if not 0 <= index.l < len(table):
        raise DimensionError(f"Hypothesis {index} outside the hypothesis space of {dims}")
    return table[index.l]


def index_of(dims: ProblemDims, matching: MatchingSet) -> HypothesisIndex:
    """Binary search in the canonical order."""
    if not matching.fits(dims):
        raise DimensionError(f"Matching {matching} does not fit {dims}")
    table = _canonical(dims.m1, dims.m2, matching.k)
    l = bisect_left(table, matching)
    if l == len(table) or table[l] != matching:
        raise DimensionError(f"Matching {matching} not found among k={matching.k} hypotheses")
    return HypothesisIndex(matching.k, l)


def set_difference(a: MatchingSet, b: MatchingSet) -> List[Pair]:
    """Pairs of a that are not in b."""
    other = set(b.pairs)
    return [pair for pair in a.pairs if pair not in other]


def is_submatching(a: MatchingSet, b: MatchingSet) -> bool:
    return set(a.pairs) <= set(b.pairs)


@lru_cache(maxsize=64)
def _pair_table(m1: int, m2: int, k: int) -> np.ndarray:
    table = np.array(
        [[i * m2 + j for i, j in m.pairs] for m in _canonical(m1, m2, k)],
        dtype=np.int64
    )
    table.setflags(write=False)
    return table


def pair_table(dims: ProblemDims, k: int) -> np.ndarray:
    """[T_K, k] flat pair indices i*m2 + j, row order = canonical order."""
    _check_k(dims, k)
    return _pair_table(dims.m1, dims.m2, k)
