"""
Exponent functions and model quantities.

Every λ-parameterized exponent is a minimum, over a family of candidate hypotheses,
of the constrained kernel: minimize sum alpha D(Ω_i||P_i) + sum beta D(Ψ_j||Q_j)
subject to score constraints. Candidates are solved together in batches by
exponents.solver, or by exponents.oracle when ``oracle=True``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from torch.utils.data import DataLoader, Dataset

from exponents.oracle import GridOracle
from exponents.solver import ConstrainedKernel, SolverSettings, collapse_solution
from utils.distributions import renyi
from utils.errors import DomainError, ModelError
from utils.matchings import (
    HypothesisIndex,
    MatchingSet,
    enumerate_all,
    enumerate_matchings,
    set_difference
)

if TYPE_CHECKING:
    from simulation.model import SourceModel

logger = logging.getLogger(__name__)

EXPONENT_KINDS = ("E_s", "E_f", "E_r", "F", "G", "G0", "Lambda", "Kappa", "extend_by_one")
LAMBDA_KINDS = ("E_r", "F", "G")


@dataclass(frozen=True)
class ScoreConstraint:
    """
    G_t(Ω, Ψ) - G_s(Ω, Ψ) <= bound, or G_t(Ω, Ψ) <= bound when ``subtract`` is None.

    Args:
        matching (MatchingSet): Pairs of M_t.
        bound (float): Non-negative bound.
        subtract (MatchingSet, optional): Pairs of M_s for a relative constraint.
    """

    matching: MatchingSet
    bound: float = 0.0
    subtract: Optional[MatchingSet] = None

    def __post_init__(self) -> None:
        if not self.bound >= 0:
            raise DomainError(f"Constraint bound must be non-negative, got {self.bound}")

    def weights(self, m1: int, m2: int) -> np.ndarray:
        w = np.zeros((m1, m2))
        for i, j in self.matching.pairs:
            w[i, j] += 1.0
        if self.subtract is not None:
            for i, j in self.subtract.pairs:
                w[i, j] -= 1.0
        return w


@dataclass(frozen=True)
class ExponentRequest:
    """
    One exponent or quantity to evaluate.

    Args:
        model (SourceModel): Data distributions, truth and rates.
        which (str): One of EXPONENT_KINDS.
        lam (float, optional): λ for E_r, F and G.
        truth (HypothesisIndex, optional): Defaults to the model's truth.
    """

    model: SourceModel
    which: str
    lam: Optional[float] = None
    truth: Optional[HypothesisIndex] = None

    def __post_init__(self) -> None:
        if self.which not in EXPONENT_KINDS:
            raise DomainError(f"Unsupported exponent: {self.which}")
        if self.which in LAMBDA_KINDS and self.lam is None:
            raise DomainError(f"{self.which} needs a lambda")


@dataclass
class ExponentResult:
    """
    Value of an exponent together with how it was obtained.

    ``value`` is math.inf for an empty minimum; ``note`` then says why.
    ``witness`` holds the minimizing (Ω, Ψ) as nested lists and the 1-based
    hypotheses of the minimizing candidate.
    """

    which: str
    value: float
    method: str
    est_error: float = 0.0
    witness: Optional[dict] = None
    smoothed: bool = False
    lam: Optional[float] = None
    note: Optional[str] = None
    candidates: int = 0

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def to_dict(self) -> dict:
        record = {
            "which": self.which,
            "value": "+inf" if self.is_infinite else self.value,
            "method": self.method,
            "est_error": "+inf" if math.isinf(self.est_error) else self.est_error,
            "witness": self.witness,
            "smoothed": self.smoothed,
        }
        if self.lam is not None:
            record["lambda"] = self.lam
        if self.note:
            record["note"] = self.note
        return record


def _empty(which: str, note: str, lam: float = None) -> ExponentResult:
    return ExponentResult(which, math.inf, "closed_form", lam=lam, note=note)


def _require_member(model: SourceModel, truth: HypothesisIndex = None) -> Tuple[HypothesisIndex, MatchingSet]:
    truth = model.truth if truth is None else truth
    if truth.is_reject:
        raise ModelError("This exponent needs a model with a matching truth, got H_r")
    if truth != model.truth:
        raise ModelError(f"Requested truth {truth} differs from the model's truth {model.truth}")
    return truth, model.truth_matching()


def _require_null(model: SourceModel) -> None:
    if not model.is_null:
        raise ModelError(f"This exponent needs a model under H_r, got truth {model.truth}")


def _prepared(model: SourceModel, settings: SolverSettings) -> Tuple[SourceModel, bool]:
    if model.has_full_support():
        return model, False
    logger.warning(f"Smoothing zero-probability symbols with eps={settings.smoothing:g}")
    return model.smoothed(settings.smoothing), True


def _witness(omega: np.ndarray, psi: np.ndarray, hypotheses: Sequence[Tuple[int, int, MatchingSet]]) -> dict:
    return {
        "omega": None if omega is None else np.asarray(omega).tolist(),
        "psi": None if psi is None else np.asarray(psi).tolist(),
        "hypotheses": [{"k": k, "l": l + 1, "pairs": m.to_json()} for k, l, m in hypotheses],
    }


def _minimize(
    which: str,
    model: SourceModel,
    candidates: List[Tuple[list, List[ScoreConstraint]]],
    settings: SolverSettings = None,
    oracle: bool = False,
    lam: float = None,
    incumbents: List[Optional[Tuple[float, np.ndarray, np.ndarray]]] = None
) -> ExponentResult:
    """
    Minimum over candidates of the constrained kernel.

    Args:
        candidates (list): (hypotheses, constraints) per candidate; hypotheses are
            (k, l, matching) triples reported in the witness.
        incumbents (list, optional): Known feasible (value, Ω, Ψ) per candidate, kept
            when it beats the solver.
    """
    settings = SolverSettings.from_dict() if settings is None else settings
    if not candidates:
        return _empty(which, "empty candidate set", lam)
    prepared, smoothed = _prepared(model, settings)
    left, right = prepared.left_array(), prepared.right_array()
    m1, m2 = prepared.dims.m1, prepared.dims.m2
    count = max(len(constraints) for _, constraints in candidates)

    weights = np.zeros((len(candidates), count, m1, m2))
    bounds = np.zeros((len(candidates), count))
    for b, (_, constraints) in enumerate(candidates):
        for c, constraint in enumerate(constraints):
            weights[b, c] = constraint.weights(m1, m2)
            bounds[b, c] = constraint.bound

    if oracle:
        grid = GridOracle(left, right, prepared.rates)
        results = []
        for b in range(len(candidates)):
            result = grid.solve(weights[b], bounds[b])
            results.append((result.value, result.omega, result.psi, 0.0, "grid_oracle"))
    else:
        kernel = ConstrainedKernel(left, right, prepared.rates, settings)
        feasible_now = np.all(kernel.data_constraints(weights) <= bounds + 1e-12, axis=1)
        if feasible_now.any():
            # the minimum is already zero at the data
            b = int(np.argmax(feasible_now))
            return ExponentResult(
                which, 0.0, "closed_form",
                witness=_witness(left, right, candidates[b][0]),
                smoothed=smoothed, lam=lam, candidates=len(candidates)
            )
        solution = kernel.solve(weights, bounds)
        results = [
            (solution.values[b], solution.omega[b], solution.psi[b], solution.est_error[b], solution.methods[b])
            for b in range(len(candidates))
        ]

    if incumbents is not None:
        for b, incumbent in enumerate(incumbents):
            if incumbent is not None and incumbent[0] < results[b][0]:
                results[b] = (incumbent[0], incumbent[1], incumbent[2], 0.0, "closed_form")

    best = min(range(len(results)), key=lambda b: (results[b][0], b))
    value, omega, psi, error, method = results[best]
    return ExponentResult(
        which,
        max(float(value), 0.0),
        method,
        est_error=float(error),
        witness=_witness(omega, psi, candidates[best][0]),
        smoothed=smoothed,
        lam=lam,
        candidates=len(candidates)
    )


def exponent_constrained(
    model: SourceModel,
    constraints: Sequence[ScoreConstraint],
    settings: SolverSettings = None,
    oracle: bool = False
) -> ExponentResult:
    """Minimum of the kernel objective under one list of score constraints."""
    if not constraints:
        raise DomainError("exponent_constrained needs at least one constraint")
    return _minimize("constrained", model, [([], list(constraints))], settings, oracle)


def exponent_E_s(model: SourceModel, truth: HypothesisIndex = None) -> ExponentResult:
    """
    Sequential mismatch exponent

        min over t != l of sum over (i,j) in M_t minus M_l of alpha D_{beta/(alpha+beta)}(Q_j || P_i)
    """
    truth, matching = _require_member(model, truth)
    alpha, beta = model.rates.alpha, model.rates.beta
    order = beta / (alpha + beta)
    best, best_value = None, math.inf
    for t, other in enumerate(enumerate_matchings(model.dims, truth.k)):
        if t == truth.l:
            continue
        value = sum(alpha * renyi(model.right[j], model.left[i], order) for i, j in set_difference(other, matching))
        if value < best_value:
            best, best_value = (truth.k, t, other), value
    if best is None:
        return _empty("E_s", "no competing hypothesis")
    return ExponentResult("E_s", best_value, "closed_form", witness=_witness(None, None, [best]), candidates=1)


def exponent_E_f(
    model: SourceModel,
    truth: HypothesisIndex = None,
    settings: SolverSettings = None,
    oracle: bool = False
) -> ExponentResult:
    """
    Fixed-length mismatch exponent: min over t != l of the kernel under G_t <= G_l.

    The collapse of M_t minus M_l is always feasible, so its closed-form cost seeds every
    candidate and E_f <= E_s holds by construction.
    """
    truth, matching = _require_member(model, truth)
    settings = SolverSettings.from_dict() if settings is None else settings
    others = [(t, m) for t, m in enumerate(enumerate_matchings(model.dims, truth.k)) if t != truth.l]
    if not others:
        return _empty("E_f", "no competing hypothesis")
    prepared, _ = _prepared(model, settings)
    left, right = prepared.left_array(), prepared.right_array()
    candidates, incumbents = [], []
    for t, other in others:
        candidates.append(([(truth.k, t, other)], [ScoreConstraint(other, 0.0, subtract=matching)]))
        incumbents.append(collapse_solution(left, right, prepared.rates, set_difference(other, matching)))
    return _minimize("E_f", model, candidates, settings, oracle, incumbents=incumbents)


def exponent_E_r(
    model: SourceModel,
    lam: float,
    settings: SolverSettings = None,
    oracle: bool = False
) -> ExponentResult:
    """False-alarm exponent: min over every (h, t) of the kernel under G_t^h <= λ."""
    _require_null(model)
    candidates = [([(k, l, m)], [ScoreConstraint(m, lam)]) for k, l, m in enumerate_all(model.dims)]
    return _minimize("E_r", model, candidates, settings, oracle, lam=lam)


def exponent_F(
    model: SourceModel,
    lam: float,
    truth: HypothesisIndex = None,
    settings: SolverSettings = None,
    oracle: bool = False
) -> ExponentResult:
    """Min over pairs t1 != t2 of K-matchings of the kernel under G_t1 <= λ and G_t2 <= λ."""
    truth, _ = _require_member(model, truth)
    matchings = enumerate_matchings(model.dims, truth.k)
    # both constraints share one bound, so unordered pairs cover every ordered one
    candidates = [
        ([(truth.k, t1, matchings[t1]), (truth.k, t2, matchings[t2])],
         [ScoreConstraint(matchings[t1], lam), ScoreConstraint(matchings[t2], lam)])
        for t1, t2 in combinations(range(len(matchings)), 2)
    ]
    if not candidates:
        return _empty("F", "fewer than two hypotheses", lam)
    return _minimize("F", model, candidates, settings, oracle, lam=lam)


def exponent_G(
    model: SourceModel,
    lam: float,
    truth: HypothesisIndex = None,
    settings: SolverSettings = None,
    oracle: bool = False
) -> ExponentResult:
    """Overestimation exponent: min over (h, t) with h > K of the kernel under G_t^h <= λ."""
    truth, _ = _require_member(model, truth)
    candidates = [([(k, l, m)], [ScoreConstraint(m, lam)]) for k, l, m in enumerate_all(model.dims) if k > truth.k]
    if not candidates:
        return _empty("G", "no hypothesis with more matches", lam)
    return _minimize("G", model, candidates, settings, oracle, lam=lam)


def _g0(model: SourceModel) -> Tuple[float, Tuple[int, int]]:
    pairs = model.pair_gjs()
    i, j = np.unravel_index(int(np.argmin(pairs)), pairs.shape)
    return float(pairs[i, j]), (int(i), int(j))


def quantity_G0(model: SourceModel) -> float:
    """min over (i, j) of GJS(P_i, Q_j)."""
    _require_null(model)
    return _g0(model)[0]


def _min_score(model: SourceModel, k: int, skip: int = None) -> Tuple[float, Optional[Tuple[int, int, MatchingSet]]]:
    pairs = model.pair_gjs()
    best, best_value = None, math.inf
    for l, m in enumerate(enumerate_matchings(model.dims, k)):
        if l == skip:
            continue
        value = float(sum(pairs[i, j] for i, j in m.pairs))
        if value < best_value:
            best, best_value = (k, l, m), value
    return best_value, best


def quantity_Lambda(model: SourceModel, truth: HypothesisIndex = None) -> float:
    """min over t != l of the sum of GJS(P_i, Q_j) over M_t minus M_l; +inf when T_K = 1."""
    truth, _ = _require_member(model, truth)
    return _min_score(model, truth.k, skip=truth.l)[0]


def quantity_kappa(model: SourceModel, truth: HypothesisIndex = None) -> float:
    """min over (K+1)-matchings of the sum of GJS over pairs outside M_l; +inf when K = M2."""
    truth, _ = _require_member(model, truth)
    if truth.k >= model.dims.m2:
        return math.inf
    return _min_score(model, truth.k + 1)[0]


def _extend_by_one(model: SourceModel, matching: MatchingSet) -> Tuple[float, Optional[Tuple[int, int]]]:
    pairs = model.pair_gjs()
    free_left = [i for i in range(model.dims.m1) if i not in matching.matched_left()]
    free_right = [j for j in range(model.dims.m2) if j not in matching.matched_right()]
    if not free_left or not free_right:
        return math.inf, None
    block = pairs[np.ix_(free_left, free_right)]
    a, b = np.unravel_index(int(np.argmin(block)), block.shape)
    return float(block[a, b]), (free_left[a], free_right[b])


def quantity_extend_by_one(model: SourceModel, truth: HypothesisIndex = None) -> float:
    """min GJS(P_i, Q_j) over i outside C_l and j outside D_l; an upper bound on kappa."""
    _, matching = _require_member(model, truth)
    return _extend_by_one(model, matching)[0]


def _quantity_result(which: str, model: SourceModel) -> ExponentResult:
    if which == "G0":
        _require_null(model)
        value, (i, j) = _g0(model)
        witness = {"pairs": [[i + 1, j + 1]]}
    elif which == "Lambda":
        truth, _ = _require_member(model)
        value, best = _min_score(model, truth.k, skip=truth.l)
        witness = None if best is None else _witness(None, None, [best])
    elif which == "Kappa":
        truth, _ = _require_member(model)
        value, best = _min_score(model, truth.k + 1) if truth.k < model.dims.m2 else (math.inf, None)
        witness = None if best is None else _witness(None, None, [best])
    else:
        _, matching = _require_member(model)
        value, pair = _extend_by_one(model, matching)
        witness = None if pair is None else {"pairs": [[pair[0] + 1, pair[1] + 1]]}
    note = "empty minimum" if math.isinf(value) else None
    return ExponentResult(which, value, "closed_form", witness=witness, note=note)


def evaluate(request: ExponentRequest, settings: SolverSettings = None, oracle: bool = False) -> ExponentResult:
    """Dispatch one request on its ``which`` tag."""
    model, which, lam = request.model, request.which, request.lam
    if which == "E_s":
        return exponent_E_s(model, request.truth)
    if which == "E_f":
        return exponent_E_f(model, request.truth, settings, oracle)
    if which == "E_r":
        return exponent_E_r(model, lam, settings, oracle)
    if which == "F":
        return exponent_F(model, lam, request.truth, settings, oracle)
    if which == "G":
        return exponent_G(model, lam, request.truth, settings, oracle)
    return _quantity_result(which, model)


class RequestDataset(Dataset):
    def __init__(self, requests: Sequence[ExponentRequest], settings: SolverSettings = None) -> None:
        self.requests = list(requests)
        self.settings = settings

    def __len__(self) -> int:
        return len(self.requests)

    def __getitem__(self, index: int) -> ExponentResult:
        return evaluate(self.requests[index], self.settings)


def _identity(batch):
    return batch


def evaluate_many(
    requests: Sequence[ExponentRequest],
    settings: SolverSettings = None,
    workers: int = 0
) -> List[ExponentResult]:
    """Evaluate independent requests, optionally in worker processes; results keep request order."""
    loader = DataLoader(RequestDataset(requests, settings), batch_size=1, num_workers=workers, collate_fn=_identity)
    return [result for batch in loader for result in batch]


def applicable_requests(model: SourceModel, lam: float = None) -> List[ExponentRequest]:
    """Every exponent and quantity defined for the model's truth class; λ-exponents need ``lam``."""
    if model.is_null:
        kinds = ["G0"] + (["E_r"] if lam is not None else [])
    else:
        kinds = ["E_s", "E_f", "Lambda", "Kappa", "extend_by_one"] + (["F", "G"] if lam is not None else [])
    return [ExponentRequest(model, which, lam if which in LAMBDA_KINDS else None) for which in kinds]


def zero_thresholds(model: SourceModel) -> Dict[str, float]:
    """Thresholds beyond which E_r, F and G vanish: G0 under H_r, Lambda and kappa otherwise."""
    if model.is_null:
        return {"E_r": quantity_G0(model)}
    return {"F": quantity_Lambda(model), "G": quantity_kappa(model)}
