"""
Known-K tests: the sequential minimal-scoring test with threshold f(n), the
fixed-length minimal-scoring test, and the fixed-length test that rejects when
the second-smallest score is not above lambda.
"""
import logging

import numpy as np

from procedures.common import DEFAULT_MAX_STEPS_FACTOR, KnownKVerdict, SnapshotSource, time_blocks
from utils.distributions import Rates
from utils.errors import DomainError, TruncatedRunError
from utils.matchings import REJECT, HypothesisIndex, ProblemDims, count_hypotheses, pair_table
from utils.scoring import DatabaseSnapshot, f_threshold, hypothesis_scores, pair_gjs_from_counts, scores_by_k

logger = logging.getLogger(__name__)


def run_sequential_known(
    stream: SnapshotSource,
    dims: ProblemDims,
    k: int,
    rates: Rates,
    horizon_n: int,
    max_steps: int = None,
    alphabet_size: int = None,
    record_trace: bool = False
) -> KnownKVerdict:
    """
    Stop at the first n >= N-1 where some score is <= f(n), then decide the argmin.

    Args:
        stream (SnapshotSource): Growing databases.
        dims (ProblemDims): Database sizes.
        k (int): Known number of matches, k >= 1.
        rates (Rates): Sampling rates.
        horizon_n (int): N >= 2.
        max_steps (int, optional): Safety valve on n, defaults to 10**6 * N.
        alphabet_size (int, optional): |X| used by f(n), defaults to the stream's alphabet.
        record_trace (bool): Keep (n, min score, f(n)) for every inspected step.

    Returns:
        KnownKVerdict: Decision at tau.

    Raises:
        TruncatedRunError: When max_steps is reached without stopping.
    """
    if horizon_n < 2:
        raise DomainError(f"Horizon N must be at least 2, got {horizon_n}")
    if k < 1:
        raise DomainError(f"The known-K test needs k >= 1, got {k}")
    max_steps = DEFAULT_MAX_STEPS_FACTOR * horizon_n if max_steps is None else max_steps
    alphabet_size = stream.alphabet_size if alphabet_size is None else alphabet_size
    table = pair_table(dims, k)
    trace = [] if record_trace else None

    for n_start, n_stop in time_blocks(horizon_n - 1, max_steps):
        left, right = stream.counts_block(n_start, n_stop)
        scores = hypothesis_scores(pair_gjs_from_counts(left, right, rates), table)
        ns = np.arange(n_start, n_stop)
        thresholds = f_threshold(ns, k, alphabet_size, rates)
        minima = scores.min(axis=-1)
        hits = np.flatnonzero(minima <= thresholds)
        last = hits[0] if hits.size else len(ns) - 1
        if record_trace:
            trace.extend(zip(ns[:last + 1].tolist(), minima[:last + 1].tolist(), thresholds[:last + 1].tolist()))
        if hits.size:
            final = scores[last]
            return KnownKVerdict(
                decided=HypothesisIndex(k, int(np.argmin(final))),
                stopping_time=int(ns[last]),
                final_scores=final,
                threshold_at_stop=float(thresholds[last]),
                test="seq_known",
                trace=trace
            )

    logger.warning(f"Known-K sequential run truncated at max_steps={max_steps}")
    raise TruncatedRunError(max_steps, max_steps, trace)


def run_fixed_length_known(snapshot: DatabaseSnapshot, dims: ProblemDims, k: int, rates: Rates) -> KnownKVerdict:
    """Minimal scoring rule at n = N; ties go to the lowest hypothesis index."""
    scores = scores_by_k(snapshot, rates, [k])[k]
    return KnownKVerdict(
        decided=HypothesisIndex(k, int(np.argmin(scores))),
        stopping_time=snapshot.n,
        final_scores=scores,
        threshold_at_stop=None,
        test="fl_known"
    )


def run_reject_fixed_length(
    snapshot: DatabaseSnapshot,
    dims: ProblemDims,
    k: int,
    rates: Rates,
    lam: float
) -> KnownKVerdict:
    """
    Decide the argmin only when the second-smallest score exceeds lam, otherwise reject.

    Args:
        snapshot (DatabaseSnapshot): Databases at n = N.
        dims (ProblemDims): Database sizes.
        k (int): Known number of matches.
        rates (Rates): Sampling rates.
        lam (float): Rejection threshold, lam >= 0 (may be inf).
    """
    if count_hypotheses(dims, k) < 2:
        raise DomainError("The reject-capable fixed-length test needs at least two hypotheses")
    if not lam >= 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    scores = scores_by_k(snapshot, rates, [k])[k]
    order = np.argsort(scores, kind="stable")
    second = scores[order[1]]
    decided = HypothesisIndex(k, int(order[0])) if second > lam else REJECT
    return KnownKVerdict(
        decided=decided,
        stopping_time=snapshot.n,
        final_scores=scores,
        threshold_at_stop=float(lam),
        test="fl_reject"
    )
