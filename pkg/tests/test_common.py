import numpy as np

from procedures.common import HypothesisLayout, KnownKVerdict, UnknownKVerdict, layout_for, time_blocks
from utils.matchings import REJECT, HypothesisIndex, ProblemDims, enumerate_all


def test_layout_concatenates_match_counts():
    dims = ProblemDims(3, 2)
    layout = HypothesisLayout(dims)
    assert layout.ks == (1, 2)
    assert layout.offsets.tolist() == [0, 6, 12]
    assert layout.total == 12
    assert [(k, l) for k, l, _ in layout.matchings()] == [(k, l) for k, l, _ in enumerate_all(dims)]


def test_layout_index_round_trip():
    layout = HypothesisLayout(ProblemDims(4, 3))
    for flat in range(layout.total):
        assert layout.flat_index(layout.hypothesis(flat)) == flat
    assert layout.hypothesis(12) == HypothesisIndex(2, 0)


def test_layout_scores_and_split(rng):
    dims = ProblemDims(3, 2)
    layout = HypothesisLayout(dims)
    pair_values = rng.uniform(size=(5, 3, 2))
    scores = layout.scores(pair_values)
    assert scores.shape == (5, 12)
    groups = layout.split(scores)
    assert groups[1].shape == (5, 6)
    for flat, (k, l, m) in enumerate(layout.matchings()):
        expected = sum(pair_values[2, i, j] for i, j in m.pairs)
        assert np.isclose(scores[2, flat], expected)
        assert groups[k][2, l] == scores[2, flat]


def test_layout_subset_of_match_counts():
    layout = HypothesisLayout(ProblemDims(3, 2), (2,))
    assert layout.total == 6
    assert layout.hypothesis(0) == HypothesisIndex(2, 0)


def test_layout_for_is_cached():
    assert layout_for(ProblemDims(3, 2)) is layout_for(ProblemDims(3, 2))


def test_time_blocks_cover_range_in_order():
    blocks = list(time_blocks(99, 150))
    assert blocks == [(99, 131), (131, 151)]


def test_time_blocks_double_up_to_cap():
    blocks = list(time_blocks(1, 100000))
    sizes = [stop - start for start, stop in blocks]
    assert sizes[:4] == [32, 64, 128, 256]
    assert max(sizes) == 4096
    assert blocks[-1][1] == 100001
    assert all(a[1] == b[0] for a, b in zip(blocks, blocks[1:]))


def test_verdict_records():
    known = KnownKVerdict(HypothesisIndex(1, 0), 12, np.array([0.1, 0.4]), 0.5, "seq_known")
    assert known.to_dict() == {"test": "seq_known", "k": 1, "l": 1, "tau": 12, "threshold": 0.5}
    assert known.to_dict(include_scores=True)["scores"] == [0.1, 0.4]

    unknown = UnknownKVerdict(REJECT, 7, "A", {1: np.array([0.3])}, {"lambda1": 0.1}, "seq_unknown")
    record = unknown.to_dict(include_scores=True)
    assert record["k"] is None and record["l"] == "reject"
    assert record["fired_event"] == "A"
    assert record["scores"] == {"1": [0.3]}
