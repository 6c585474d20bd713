"""
Unknown-K tests built from the events

    A^n       every hypothesis of every match count scores above lambda1
    B1(h,t)   S_t^h <= lambda2
    B2(h,t)   min over other hypotheses with the same h of S > lambda3 (+inf when T_h = 1)
    B(h,t)    B1 and B2

The sequential test stops at the first n >= N-1 where A^n holds or exactly one
B(h,t) holds, deciding that hypothesis or rejecting. The one-step fixed-length
test applies the unique-B rule once at n = N with its own (lambda1', lambda2')
as the B1 and B2 thresholds.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from procedures.common import (
    DEFAULT_MAX_STEPS_FACTOR,
    HypothesisLayout,
    SnapshotSource,
    UnknownKVerdict,
    layout_for,
    time_blocks
)
from utils.distributions import Rates
from utils.errors import DomainError, TruncatedRunError
from utils.matchings import REJECT, ProblemDims
from utils.scoring import DatabaseSnapshot, pair_gjs_from_counts

logger = logging.getLogger(__name__)


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class Thresholds:
    """(lambda1, lambda2, lambda3) with lambda2 <= min(lambda1, lambda3)."""

    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3"):
            _positive(name, getattr(self, name))
        if self.lambda2 > min(self.lambda1, self.lambda3):
            raise DomainError(
                f"Need lambda2 <= min(lambda1, lambda3), got {self.lambda2} > min({self.lambda1}, {self.lambda3})"
            )

    @classmethod
    def with_defaults(cls, lambda3: float, lambda1: float = None, lambda2: float = None) -> "Thresholds":
        """Missing values default to lambda1 = lambda3 and lambda2 = 0.1 * lambda3."""
        lambda1 = lambda3 if lambda1 is None else lambda1
        lambda2 = 0.1 * lambda3 if lambda2 is None else lambda2
        return cls(lambda1, lambda2, lambda3)

    def one_step(self) -> "OneStepThresholds":
        """The B1/B2 thresholds of this configuration as the one-step test's (lambda1', lambda2')."""
        return OneStepThresholds(self.lambda2, self.lambda3)

    def to_json(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2, "lambda3": self.lambda3}


@dataclass(frozen=True)
class OneStepThresholds:
    """(lambda1', lambda2') of the one-step fixed-length test: the B1 and B2 thresholds."""

    lambda1: float
    lambda2: float

    def __post_init__(self) -> None:
        _positive("lambda1", self.lambda1)
        _positive("lambda2", self.lambda2)

    def to_json(self) -> dict:
        return {"lambda1_prime": self.lambda1, "lambda2_prime": self.lambda2}


def b_events(scores: np.ndarray, layout: HypothesisLayout, b1_threshold: float, b2_threshold: float):
    """
    B1 and B2 for every hypothesis.

    Args:
        scores (ndarray): [..., total] scores in layout order.
        layout (HypothesisLayout): Hypothesis layout.
        b1_threshold (float): S <= b1_threshold.
        b2_threshold (float): min over same-k competitors > b2_threshold.

    Returns:
        tuple[ndarray, ndarray]: Boolean B1 and B2, both [..., total].
    """
    b1 = scores <= b1_threshold
    b2 = np.empty_like(b1)
    for group in range(len(layout.ks)):
        lo, hi = layout.offsets[group], layout.offsets[group + 1]
        block = scores[..., lo:hi]
        if hi - lo == 1:
            b2[..., lo:hi] = True
            continue
        first = np.argmin(block, axis=-1)
        smallest = np.take_along_axis(block, first[..., None], axis=-1)
        second = np.partition(block, 1, axis=-1)[..., 1:2]
        positions = np.arange(hi - lo)
        others_min = np.where(positions == first[..., None], second, smallest)
        b2[..., lo:hi] = others_min > b2_threshold
    return b1, b2


def _unique_b(scores: np.ndarray, layout: HypothesisLayout, b1_threshold: float, b2_threshold: float):
    b1, b2 = b_events(scores, layout, b1_threshold, b2_threshold)
    b = b1 & b2
    unique = b.sum(axis=-1) == 1
    witness = np.argmax(b, axis=-1)
    return unique, witness


def event_A(snapshot: DatabaseSnapshot, hypotheses: HypothesisLayout, rates: Rates, thresholds: Thresholds) -> bool:
    """True iff every hypothesis in the layout scores strictly above lambda1."""
    scores = hypotheses.scores(snapshot.pair_gjs(rates))
    return bool(np.all(scores > thresholds.lambda1))


def event_B_components(
    snapshot: DatabaseSnapshot,
    h: int,
    t: int,
    rates: Rates,
    thresholds: Thresholds
) -> Tuple[bool, bool]:
    """
    (B1, B2) for hypothesis (h, t), t 0-based in canonical order.

    B(h,t) is their conjunction.
    """
    layout = HypothesisLayout(snapshot.dims, (h,))
    scores = layout.scores(snapshot.pair_gjs(rates))
    if not 0 <= t < layout.total:
        raise DomainError(f"Hypothesis index {t + 1} outside [1, {layout.total}] for h={h}")
    b1 = bool(scores[t] <= thresholds.lambda2)
    others = np.delete(scores, t)
    b2 = bool((others.min() if others.size else math.inf) > thresholds.lambda3)
    return b1, b2


def run_sequential_unknown(
    stream: SnapshotSource,
    dims: ProblemDims,
    rates: Rates,
    thresholds: Thresholds,
    horizon_n: int,
    max_steps: int = None,
    record_trace: bool = False
) -> UnknownKVerdict:
    """
    Stop at the first n >= N-1 where A^n or B^n holds.

    Args:
        stream (SnapshotSource): Growing databases.
        dims (ProblemDims): Database sizes.
        rates (Rates): Sampling rates.
        thresholds (Thresholds): (lambda1, lambda2, lambda3).
        horizon_n (int): N >= 2.
        max_steps (int, optional): Safety valve on n, defaults to 10**6 * N.
        record_trace (bool): Keep (n, min score over all hypotheses) per inspected step.

    Returns:
        UnknownKVerdict: H_l^K when the unique B(K,l) fired, reject when A fired.

    Raises:
        TruncatedRunError: When max_steps is reached without stopping.
    """
    if horizon_n < 2:
        raise DomainError(f"Horizon N must be at least 2, got {horizon_n}")
    max_steps = DEFAULT_MAX_STEPS_FACTOR * horizon_n if max_steps is None else max_steps
    layout = layout_for(dims)
    trace = [] if record_trace else None

    for n_start, n_stop in time_blocks(horizon_n - 1, max_steps):
        left, right = stream.counts_block(n_start, n_stop)
        scores = layout.scores(pair_gjs_from_counts(left, right, rates))
        event_a = np.all(scores > thresholds.lambda1, axis=-1)
        unique, witness = _unique_b(scores, layout, thresholds.lambda2, thresholds.lambda3)
        hits = np.flatnonzero(event_a | unique)
        last = hits[0] if hits.size else len(scores) - 1
        if record_trace:
            ns = range(n_start, n_start + last + 1)
            trace.extend(zip(ns, scores[:last + 1].min(axis=-1).tolist()))
        if hits.size:
            tau = n_start + int(last)
            if unique[last]:
                decided = layout.hypothesis(int(witness[last]))
                fired = f"B({decided.k},{decided.l + 1})"
            else:
                decided, fired = REJECT, "A"
            return UnknownKVerdict(
                decided=decided,
                stopping_time=tau,
                fired_event=fired,
                score_summary=layout.split(scores[last]),
                thresholds=thresholds.to_json(),
                test="seq_unknown",
                trace=trace
            )

    logger.warning(f"Unknown-K sequential run truncated at max_steps={max_steps}")
    raise TruncatedRunError(max_steps, max_steps, trace)


def run_fixed_length_unknown(
    snapshot: DatabaseSnapshot,
    dims: ProblemDims,
    rates: Rates,
    thresholds: Union[OneStepThresholds, Thresholds]
) -> UnknownKVerdict:
    """
    One-step fixed-length test: H_l^K iff B(K,l) is the only B event at n = N, reject otherwise.

    A Thresholds argument is mapped through Thresholds.one_step().
    """
    if isinstance(thresholds, Thresholds):
        thresholds = thresholds.one_step()
    layout = layout_for(dims)
    scores = layout.scores(snapshot.pair_gjs(rates))
    unique, witness = _unique_b(scores, layout, thresholds.lambda1, thresholds.lambda2)
    if unique:
        decided = layout.hypothesis(int(witness))
        fired = f"B({decided.k},{decided.l + 1})"
    else:
        decided, fired = REJECT, "none"
    return UnknownKVerdict(
        decided=decided,
        stopping_time=snapshot.n,
        fired_event=fired,
        score_summary=layout.split(scores),
        thresholds=thresholds.to_json(),
        test="fl_unknown"
    )
