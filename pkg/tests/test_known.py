import math

import numpy as np
import pytest

from procedures.known import run_fixed_length_known, run_sequential_known, run_reject_fixed_length
from simulation.model import bernoulli_model
from simulation.stream import DatabaseStream, ReplayStream
from utils.distributions import Rates
from utils.errors import DomainError, TruncatedRunError
from utils.matchings import REJECT, HypothesisIndex, MatchingSet, ProblemDims, enumerate_matchings, index_of
from utils.scoring import DatabaseSnapshot, f_threshold

UNIT = Rates(1.0, 1.0)
DIMS = ProblemDims(2, 1)


@pytest.fixture
def matched_snapshot():
    return DatabaseSnapshot.from_counts(np.array([[80, 20], [20, 80]]), np.array([[80, 20]]), 100, UNIT)


class TestSequentialKnown:
    def test_decides_truth_on_an_easy_model(self, known_binary):
        stream = DatabaseStream(known_binary, seed=3)
        verdict = run_sequential_known(stream, known_binary.dims, 1, known_binary.rates, horizon_n=200)
        assert verdict.decided == known_binary.truth
        assert verdict.stopping_time >= 199
        assert verdict.final_scores.shape == (2,)
        assert verdict.threshold_at_stop == pytest.approx(f_threshold(verdict.stopping_time, 1, 2, UNIT))
        assert verdict.final_scores.min() <= verdict.threshold_at_stop

    def test_same_seed_same_verdict(self, known_binary):
        runs = [
            run_sequential_known(DatabaseStream(known_binary, seed=11), known_binary.dims, 1, known_binary.rates, 20)
            for _ in range(2)
        ]
        assert runs[0].decided == runs[1].decided
        assert runs[0].stopping_time == runs[1].stopping_time
        assert np.array_equal(runs[0].final_scores, runs[1].final_scores)

    def test_trace_ends_at_stopping_time(self, known_binary):
        verdict = run_sequential_known(
            DatabaseStream(known_binary, seed=5), known_binary.dims, 1, known_binary.rates, 30, record_trace=True
        )
        steps = [n for n, _, _ in verdict.trace]
        assert steps[0] == 29
        assert steps[-1] == verdict.stopping_time
        assert all(score > threshold for _, score, threshold in verdict.trace[:-1])

    def test_truncation(self):
        model = bernoulli_model([0.01, 0.02], [0.99])
        stream = DatabaseStream(model, seed=0)
        with pytest.raises(TruncatedRunError) as info:
            run_sequential_known(stream, model.dims, 1, model.rates, horizon_n=100, max_steps=150, record_trace=True)
        assert info.value.max_steps == 150
        assert len(info.value.trace) == 150 - 99 + 1

    def test_replayed_sequences(self):
        # identical sequences: the matched pair scores exactly zero at every step
        left = [[0, 1] * 20, [1] * 40]
        right = [[0, 1] * 20]
        stream = ReplayStream(left, right, 2, UNIT)
        verdict = run_sequential_known(stream, DIMS, 1, UNIT, horizon_n=4)
        assert verdict.stopping_time == 3
        assert verdict.decided == HypothesisIndex(1, 0)
        assert verdict.final_scores[0] == 0.0

    @pytest.mark.parametrize("horizon_n, k", [(1, 1), (10, 0)])
    def test_invalid_arguments(self, known_binary, horizon_n, k):
        with pytest.raises(DomainError):
            run_sequential_known(DatabaseStream(known_binary, seed=0), DIMS, k, UNIT, horizon_n)


class TestFixedLengthKnown:
    def test_minimal_scoring(self, matched_snapshot):
        verdict = run_fixed_length_known(matched_snapshot, DIMS, 1, UNIT)
        assert verdict.decided == HypothesisIndex(1, 0)
        assert verdict.threshold_at_stop is None
        assert verdict.stopping_time == 100
        assert verdict.test == "fl_known"

    def test_ties_go_to_lowest_index(self):
        snapshot = DatabaseSnapshot.from_counts(np.array([[5, 5], [5, 5]]), np.array([[2, 8]]), 10, UNIT)
        assert run_fixed_length_known(snapshot, DIMS, 1, UNIT).decided == HypothesisIndex(1, 0)


class TestRejectCapableFixedLength:
    def test_decides_when_runner_up_is_far(self, matched_snapshot):
        verdict = run_reject_fixed_length(matched_snapshot, DIMS, 1, UNIT, lam=0.1)
        assert verdict.decided == HypothesisIndex(1, 0)
        assert verdict.threshold_at_stop == 0.1

    @pytest.mark.parametrize("lam", [1.0, math.inf])
    def test_rejects_when_runner_up_is_close(self, matched_snapshot, lam):
        assert run_reject_fixed_length(matched_snapshot, DIMS, 1, UNIT, lam=lam).decided == REJECT

    def test_agrees_with_minimal_scoring_or_rejects(self, rng):
        dims = ProblemDims(3, 2)
        for _ in range(20):
            left = rng.integers(1, 10, size=(3, 3))
            left[:, 0] = 30 - left[:, 1:].sum(axis=1)
            right = rng.integers(1, 10, size=(2, 3))
            right[:, 0] = 30 - right[:, 1:].sum(axis=1)
            snapshot = DatabaseSnapshot.from_counts(left, right, 30, UNIT)
            minimal = run_fixed_length_known(snapshot, dims, 2, UNIT).decided
            for lam in (0.0, 0.05, 0.2):
                decided = run_reject_fixed_length(snapshot, dims, 2, UNIT, lam).decided
                assert decided in (minimal, REJECT)

    def test_needs_two_hypotheses(self):
        snapshot = DatabaseSnapshot.from_counts(np.array([[5, 5]]), np.array([[5, 5]]), 10, UNIT)
        with pytest.raises(DomainError):
            run_reject_fixed_length(snapshot, ProblemDims(1, 1), 1, UNIT, 0.1)

    def test_negative_lambda(self, matched_snapshot):
        with pytest.raises(DomainError):
            run_reject_fixed_length(matched_snapshot, DIMS, 1, UNIT, -1.0)

    def test_zero_lambda_matches_minimal_scoring(self, rng):
        dims = ProblemDims(3, 2)
        for _ in range(30):
            left = rng.integers(0, 31, size=(3, 1))
            right = rng.integers(0, 31, size=(2, 1))
            snapshot = DatabaseSnapshot.from_counts(np.hstack([left, 30 - left]), np.hstack([right, 30 - right]), 30, UNIT)
            minimal = run_fixed_length_known(snapshot, dims, 2, UNIT)
            runner_up = np.sort(minimal.final_scores)[1]
            expected = minimal.decided if runner_up > 0 else REJECT
            assert run_reject_fixed_length(snapshot, dims, 2, UNIT, 0.0).decided == expected


def relabeled(dims, matching, order):
    """Matching after left sequence order[i] is renamed i."""
    position = {old: new for new, old in enumerate(order)}
    return index_of(dims, MatchingSet((position[i], j) for i, j in matching))


def test_relabeling_left_sequences_permutes_scores(rng):
    dims, order = ProblemDims(3, 2), [2, 0, 1]
    probs = np.array([0.2, 0.5, 0.8])
    left = (rng.random((3, 4000)) < probs[:, None]).astype(int)
    right = (rng.random((2, 4000)) < probs[[0, 2], None]).astype(int)
    original = run_sequential_known(ReplayStream(left, right, 2, UNIT), dims, 2, UNIT, horizon_n=60)
    permuted = run_sequential_known(ReplayStream(left[order], right, 2, UNIT), dims, 2, UNIT, horizon_n=60)
    assert permuted.stopping_time == original.stopping_time
    for l, matching in enumerate(enumerate_matchings(dims, 2)):
        moved = relabeled(dims, matching, order)
        assert permuted.final_scores[moved.l] == pytest.approx(original.final_scores[l], rel=1e-12, abs=1e-15)
    if np.sum(original.final_scores == original.final_scores.min()) == 1:
        assert permuted.decided == relabeled(dims, enumerate_matchings(dims, 2)[original.decided.l], order)
