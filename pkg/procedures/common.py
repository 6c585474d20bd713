from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Protocol, Tuple

import numpy as np

from utils.matchings import HypothesisIndex, MatchingSet, ProblemDims, enumerate_matchings, pair_table
from utils.scoring import hypothesis_scores

DEFAULT_MAX_STEPS_FACTOR = 10 ** 6
INITIAL_BLOCK = 32
MAX_BLOCK = 4096


class SnapshotSource(Protocol):
    """A growing pair of databases that can report cumulative counts for a range of time indices."""

    alphabet_size: int

    def counts_block(self, n_start: int, n_stop: int) -> Tuple[np.ndarray, np.ndarray]:
        """Cumulative counts at n = n_start..n_stop-1 as ([steps, M1, X], [steps, M2, X])."""
        ...


@dataclass
class KnownKVerdict:
    """
    Outcome of a known-K test.

    Attributes:
        decided (HypothesisIndex): Decided hypothesis; reject only for the reject-capable fixed-length test.
        stopping_time (int): tau for the sequential test, N for the fixed-length tests.
        final_scores (ndarray): The T_K scores at the stopping time.
        threshold_at_stop (float | None): f(tau) for the sequential test, lambda for the reject-capable
            test, None for the minimal-scoring fixed-length test.
        trace (list | None): (n, min score, f(n)) per inspected step when recorded.
    """

    decided: HypothesisIndex
    stopping_time: int
    final_scores: np.ndarray
    threshold_at_stop: Optional[float]
    test: str
    trace: Optional[List[Tuple[int, float, float]]] = None

    def to_dict(self, include_scores: bool = False) -> dict:
        record = {
            "test": self.test,
            "k": self.decided.k if not self.decided.is_reject else None,
            "l": "reject" if self.decided.is_reject else self.decided.l + 1,
            "tau": self.stopping_time,
            "threshold": self.threshold_at_stop,
        }
        if include_scores:
            record["scores"] = [float(s) for s in self.final_scores]
        return record


@dataclass
class UnknownKVerdict:
    """
    Outcome of an unknown-K test.

    Attributes:
        decided (HypothesisIndex): H_l^K or reject.
        stopping_time (int): tau (sequential) or N (fixed-length).
        fired_event (str): "A", "B(k,l)" with 1-based l, or "none" when a fixed-length test saw no unique B.
        score_summary (dict[int, ndarray]): Scores per match count at the stopping time.
        thresholds (dict): Thresholds used, by name.
    """

    decided: HypothesisIndex
    stopping_time: int
    fired_event: str
    score_summary: Dict[int, np.ndarray]
    thresholds: Dict[str, float]
    test: str
    trace: Optional[List[Tuple[int, float]]] = field(default=None)

    def to_dict(self, include_scores: bool = False) -> dict:
        record = {
            "test": self.test,
            "k": self.decided.k if not self.decided.is_reject else None,
            "l": "reject" if self.decided.is_reject else self.decided.l + 1,
            "tau": self.stopping_time,
            "fired_event": self.fired_event,
            "thresholds": dict(self.thresholds),
        }
        if include_scores:
            record["scores"] = {str(k): [float(s) for s in v] for k, v in self.score_summary.items()}
        return record


class HypothesisLayout:
    """
    All hypotheses of every match count, concatenated: k = 1 block first, canonical order within k.

    Args:
        dims (ProblemDims): Database sizes.
        ks (tuple[int], optional): Match counts to include, defaults to 1..m2.
    """

    def __init__(self, dims: ProblemDims, ks: Tuple[int, ...] = None) -> None:
        self.dims = dims
        self.ks = tuple(range(1, dims.m2 + 1)) if ks is None else tuple(ks)
        self.tables = [pair_table(dims, k) for k in self.ks]
        sizes = [len(t) for t in self.tables]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.total = int(self.offsets[-1])

    def scores(self, pair_values: np.ndarray) -> np.ndarray:
        """[..., total] scores from [..., M1, M2] pairwise GJS."""
        return np.concatenate([hypothesis_scores(pair_values, table) for table in self.tables], axis=-1)

    def split(self, flat: np.ndarray) -> Dict[int, np.ndarray]:
        return {k: flat[..., self.offsets[g]:self.offsets[g + 1]] for g, k in enumerate(self.ks)}

    def hypothesis(self, flat_index: int) -> HypothesisIndex:
        group = int(np.searchsorted(self.offsets, flat_index, side="right") - 1)
        return HypothesisIndex(self.ks[group], int(flat_index - self.offsets[group]))

    def flat_index(self, index: HypothesisIndex) -> int:
        return int(self.offsets[self.ks.index(index.k)] + index.l)

    def matchings(self) -> List[Tuple[int, int, MatchingSet]]:
        return [(k, l, m) for k in self.ks for l, m in enumerate(enumerate_matchings(self.dims, k))]


@lru_cache(maxsize=32)
def layout_for(dims: ProblemDims) -> HypothesisLayout:
    return HypothesisLayout(dims)


def time_blocks(n_start: int, max_steps: int):
    """Yield (n_start, n_stop) ranges of doubling length until max_steps (inclusive) is covered."""
    block = INITIAL_BLOCK
    n = n_start
    while n <= max_steps:
        stop = min(n + block, max_steps + 1)
        yield n, stop
        n = stop
        block = min(block * 2, MAX_BLOCK)
