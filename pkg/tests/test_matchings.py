import numpy as np
import pytest

from utils.errors import DimensionError, DomainError
from utils.matchings import (
    REJECT,
    HypothesisIndex,
    MatchingSet,
    ProblemDims,
    count_hypotheses,
    ensure_enumerable,
    enumerate_all,
    enumerate_matchings,
    index_of,
    is_submatching,
    matching_at,
    pair_table,
    set_difference,
    total_hypotheses
)


@pytest.mark.parametrize(
    "m1, m2, k, expected",
    [(3, 2, 1, 6), (4, 2, 2, 12), (3, 2, 2, 6), (4, 3, 3, 24), (5, 1, 1, 5)]
)
def test_count_hypotheses(m1, m2, k, expected):
    dims = ProblemDims(m1, m2)
    assert count_hypotheses(dims, k) == expected
    assert len(enumerate_matchings(dims, k)) == expected


@pytest.mark.parametrize("m1, m2, expected", [(3, 2, 12), (4, 3, 72), (2, 1, 2)])
def test_total_hypotheses(m1, m2, expected):
    dims = ProblemDims(m1, m2)
    assert total_hypotheses(dims) == expected
    assert len(enumerate_all(dims)) == expected


@pytest.mark.parametrize("m1, m2", [(2, 3), (0, 0), (2.0, 1)])
def test_invalid_dims(m1, m2):
    with pytest.raises(DomainError):
        ProblemDims(m1, m2)


def test_k_out_of_range():
    with pytest.raises(DomainError):
        count_hypotheses(ProblemDims(3, 2), 3)
    with pytest.raises(DomainError):
        enumerate_matchings(ProblemDims(3, 2), 0)


def test_canonical_order_is_lexicographic():
    dims = ProblemDims(2, 2)
    assert [m.pairs for m in enumerate_matchings(dims, 1)] == [((0, 0),), ((0, 1),), ((1, 0),), ((1, 1),)]
    assert [m.pairs for m in enumerate_matchings(dims, 2)] == [((0, 0), (1, 1)), ((0, 1), (1, 0))]


def test_enumerate_all_groups_by_k():
    entries = enumerate_all(ProblemDims(3, 2))
    assert [k for k, _, _ in entries] == [1] * 6 + [2] * 6
    assert [l for k, l, _ in entries if k == 2] == list(range(6))


def test_index_of_inverts_matching_at():
    dims = ProblemDims(4, 3)
    for k, l, m in enumerate_all(dims):
        index = HypothesisIndex(k, l)
        assert matching_at(dims, index) == m
        assert index_of(dims, m) == index


def test_matching_at_rejects_invalid_index():
    dims = ProblemDims(3, 2)
    with pytest.raises(DomainError):
        matching_at(dims, REJECT)
    with pytest.raises(DimensionError):
        matching_at(dims, HypothesisIndex(1, 6))
    with pytest.raises(DimensionError):
        matching_at(dims, HypothesisIndex(3, 0))


def test_index_of_rejects_foreign_matching():
    with pytest.raises(DimensionError):
        index_of(ProblemDims(3, 2), MatchingSet([(0, 2)]))


class TestMatchingSet:
    def test_pairs_are_sorted(self):
        m = MatchingSet([(2, 0), (0, 1)])
        assert m.pairs == ((0, 1), (2, 0))
        assert m.k == 2
        assert m.matched_left() == frozenset({0, 2})
        assert m.matched_right() == frozenset({0, 1})

    def test_json_is_one_based(self):
        m = MatchingSet.from_json([[1, 2], [2, 1]])
        assert m.pairs == ((0, 1), (1, 0))
        assert m.to_json() == [[1, 2], [2, 1]]
        assert repr(m) == "{(1,2), (2,1)}"

    def test_empty_set(self):
        with pytest.raises(DomainError):
            MatchingSet([])

    @pytest.mark.parametrize("pairs", [[(0, 0), (0, 1)], [(0, 1), (1, 1)]])
    def test_not_injective(self, pairs):
        with pytest.raises(DomainError):
            MatchingSet(pairs)

    def test_negative_index(self):
        with pytest.raises(DimensionError):
            MatchingSet([(-1, 0)])

    def test_fits(self):
        dims = ProblemDims(3, 2)
        assert MatchingSet([(2, 1)]).fits(dims)
        assert not MatchingSet([(3, 0)]).fits(dims)

    def test_difference_and_containment(self):
        small = MatchingSet([(0, 0)])
        large = MatchingSet([(0, 0), (1, 1)])
        assert set_difference(large, small) == [(1, 1)]
        assert set_difference(small, large) == []
        assert is_submatching(small, large)
        assert not is_submatching(large, small)


class TestHypothesisIndex:
    def test_reject(self):
        assert REJECT.is_reject
        assert REJECT.to_json() == "reject"
        assert HypothesisIndex.from_json("reject") == REJECT
        assert str(REJECT) == "H_r"

    def test_json_and_str(self):
        h = HypothesisIndex.from_json({"k": 2, "l": 3})
        assert h == HypothesisIndex(2, 2)
        assert h.to_json() == {"k": 2, "l": 3}
        assert str(h) == "H(2,3)"

    def test_ordering(self):
        assert REJECT < HypothesisIndex(1, 0) < HypothesisIndex(1, 1) < HypothesisIndex(2, 0)


def test_pair_table_uses_flat_indices():
    dims = ProblemDims(3, 2)
    table = pair_table(dims, 2)
    assert table.shape == (6, 2)
    for row, m in zip(table, enumerate_matchings(dims, 2)):
        assert row.tolist() == [i * dims.m2 + j for i, j in m.pairs]
    assert not table.flags.writeable


def test_ensure_enumerable():
    assert ensure_enumerable(ProblemDims(3, 2), 12) == 12
    assert ensure_enumerable(ProblemDims(3, 2), 6, k=1) == 6
    with pytest.raises(DimensionError):
        ensure_enumerable(ProblemDims(10, 10), 10 ** 6)
