"""
Growing databases drawn from a SourceModel.

Each sequence owns a counter-based Philox generator spawned from the trial's
SeedSequence and consumes exactly one uniform per symbol, so the symbols do not
depend on how the time axis is split into blocks. Only cumulative counts are
kept; raw symbols are discarded once counted.
"""
import json
from typing import List, Sequence, Tuple, Union

import numpy as np

from simulation.model import SourceModel
from utils.distributions import Rates
from utils.errors import DimensionError, DomainError
from utils.scoring import DatabaseSnapshot

SeedLike = Union[int, np.random.SeedSequence]


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """
    Seed of one trial, a pure function of (master_seed, trial_index).

    The horizon is not part of the key: trial t sees the same realization at every N.
    """
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))


class _CountingStream:
    """Shared block bookkeeping: cumulative counts per sequence at lengths ceil(rate * n)."""

    def __init__(self, alphabet_size: int, m1: int, m2: int, rates: Rates) -> None:
        self.alphabet_size = alphabet_size
        self.rates = rates
        self.m1, self.m2 = m1, m2
        self._counts = [np.zeros(alphabet_size, dtype=np.int64) for _ in range(m1 + m2)]
        self._lengths = [0] * (m1 + m2)
        self._n = 0

    def _symbols(self, sequence: int, count: int) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, sequence: int, lengths: np.ndarray) -> np.ndarray:
        """[steps, X] cumulative counts of one sequence at the given (non-decreasing) lengths."""
        start = self._lengths[sequence]
        fresh = self._symbols(sequence, int(lengths[-1]) - start)
        running = np.zeros((fresh.size + 1, self.alphabet_size), dtype=np.int64)
        if fresh.size:
            running[1:] = np.cumsum(np.eye(self.alphabet_size, dtype=np.int64)[fresh], axis=0)
        block = self._counts[sequence] + running[lengths - start]
        self._counts[sequence] = block[-1].copy()
        self._lengths[sequence] = int(lengths[-1])
        return block

    def counts_block(self, n_start: int, n_stop: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Cumulative counts at n = n_start..n_stop-1.

        Blocks must move forward in time: n_start may not precede the last n served.

        Returns:
            tuple[ndarray, ndarray]: [steps, M1, X] and [steps, M2, X] integer counts.
        """
        if n_start < self._n:
            raise DomainError(f"Stream already advanced to n={self._n}, cannot serve n={n_start}")
        if n_stop <= n_start:
            raise DomainError(f"Empty block [{n_start}, {n_stop})")
        ns = np.arange(n_start, n_stop, dtype=np.int64)
        left_lengths, right_lengths = self.rates.xi(ns), self.rates.chi(ns)
        left = np.stack([self._advance(i, left_lengths) for i in range(self.m1)], axis=1)
        right = np.stack([self._advance(self.m1 + j, right_lengths) for j in range(self.m2)], axis=1)
        self._n = n_stop - 1
        return left, right

    def snapshot(self, n: int) -> DatabaseSnapshot:
        """Empirical types at time n."""
        left, right = self.counts_block(n, n + 1)
        return DatabaseSnapshot.from_counts(left[0], right[0], n, self.rates)


class DatabaseStream(_CountingStream):
    """
    Databases growing from a SourceModel: after step n every left sequence holds
    ceil(alpha*n) symbols and every right sequence ceil(beta*n).

    Args:
        model (SourceModel): Generating distributions and rates.
        seed (int | SeedSequence): Trial seed.
        max_n (int, optional): Largest time index this stream may serve.
    """

    def __init__(self, model: SourceModel, seed: SeedLike, max_n: int = None) -> None:
        super().__init__(model.alphabet_size, model.dims.m1, model.dims.m2, model.rates)
        if max_n is not None and max_n < 1:
            raise DomainError(f"max_n must be at least 1, got {max_n}")
        sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        # children keyed explicitly so reusing one SeedSequence object gives the same streams
        children = [
            np.random.SeedSequence(entropy=sequence.entropy, spawn_key=tuple(sequence.spawn_key) + (s,))
            for s in range(model.dims.m1 + model.dims.m2)
        ]
        self._generators = [np.random.Generator(np.random.Philox(child)) for child in children]
        self._cdfs = [np.cumsum(d.probs) for d in model.left + model.right]
        self.max_n = max_n

    def _symbols(self, sequence: int, count: int) -> np.ndarray:
        if count <= 0:
            return np.zeros(0, dtype=np.int64)
        uniforms = self._generators[sequence].random(count)
        symbols = np.searchsorted(self._cdfs[sequence], uniforms, side="right")
        return np.minimum(symbols, self.alphabet_size - 1)

    def counts_block(self, n_start: int, n_stop: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.max_n is not None and n_stop - 1 > self.max_n:
            raise DomainError(f"Stream is limited to n <= {self.max_n}, asked for {n_stop - 1}")
        return super().counts_block(n_start, n_stop)


class ReplayStream(_CountingStream):
    """
    Databases replayed from fixed symbol sequences, for reproducing a recorded trial.

    Args:
        left (Sequence[Sequence[int]]): M1 symbol sequences.
        right (Sequence[Sequence[int]]): M2 symbol sequences.
        alphabet_size (int): |X|.
        rates (Rates): Sampling rates used to read the sequences.
    """

    def __init__(
        self,
        left: Sequence[Sequence[int]],
        right: Sequence[Sequence[int]],
        alphabet_size: int,
        rates: Rates
    ) -> None:
        super().__init__(alphabet_size, len(left), len(right), rates)
        self._sequences: List[np.ndarray] = [np.asarray(s, dtype=np.int64) for s in list(left) + list(right)]
        for s in self._sequences:
            if s.size and (s.min() < 0 or s.max() >= alphabet_size):
                raise DimensionError(f"Replay symbols outside alphabet of size {alphabet_size}")

    @classmethod
    def from_file(cls, path: str) -> "ReplayStream":
        """Load {"alphabet_size": X, "rates": {...}, "left": [[...]], "right": [[...]]} from JSON."""
        with open(path, "r") as f:
            payload = json.load(f)
        rates = payload.get("rates", {"alpha": 1.0, "beta": 1.0})
        return cls(payload["left"], payload["right"], int(payload["alphabet_size"]), Rates(rates["alpha"], rates["beta"]))

    def _symbols(self, sequence: int, count: int) -> np.ndarray:
        start = self._lengths[sequence]
        stored = self._sequences[sequence]
        if start + count > stored.size:
            raise DomainError(f"Replay sequence {sequence + 1} holds {stored.size} symbols, needed {start + count}")
        return stored[start:start + count]


def generate_trial(model: SourceModel, seed: SeedLike, max_n: int) -> DatabaseStream:
    """Deterministic stream for (model, seed), serving n up to max_n."""
    return DatabaseStream(model, seed, max_n)
