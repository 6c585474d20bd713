"""
Reference checklist: hypothesis counts, the worked Bernoulli examples for
Lambda, kappa and the extend-by-one bound, the f(n) schedule, the variational
form of the Rényi divergence, the zero thresholds of E_r, F and G, E_f <= E_s
and the pairwise form of G0.
"""
import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
from scipy.special import rel_entr

from config import get_config
from exponents.functions import (
    ExponentRequest,
    evaluate,
    exponent_E_f,
    exponent_E_r,
    exponent_E_s,
    exponent_F,
    exponent_G,
    quantity_extend_by_one,
    quantity_G0,
    quantity_kappa,
    quantity_Lambda
)
from exponents.solver import SolverSettings
from procedures.common import HypothesisLayout
from simulation.model import SourceModel
from utils.distributions import Distribution, Rates, gjs_matrix, renyi
from utils.matchings import ProblemDims, count_hypotheses, enumerate_all
from utils.scoring import f_threshold

ZERO_TOLERANCE = 1e-9
POSITIVE_FLOOR = 1e-6
VARIATIONAL_PAIRS = 50


@dataclass
class Check:
    name: str
    expected: str
    computed: str
    passed: bool


def reference_models() -> Dict[str, SourceModel]:
    """The built-in models the checklist runs on, keyed by preset name."""
    names = ("close_distractors", "overestimate", "known_binary", "unknown_null")
    return {name: SourceModel.from_dict(get_config(name)["model"]) for name in names}


def _close(name: str, expected: float, computed: float, tolerance: float) -> Check:
    return Check(name, f"{expected:.6g} ± {tolerance:g}", f"{computed:.6g}", abs(computed - expected) <= tolerance)


def _count_checks(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    cases = [
        ("T_1(3,2)", count_hypotheses(ProblemDims(3, 2), 1), 6),
        ("T_2(4,2)", count_hypotheses(ProblemDims(4, 2), 2), 12),
        ("T(3,2)", len(enumerate_all(ProblemDims(3, 2))), 12),
        ("T(4,3)", len(enumerate_all(ProblemDims(4, 3))), 72),
    ]
    return [Check(f"hypothesis count {name}", str(expected), str(value), value == expected) for name, value, expected in cases]


def _lambda_check(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    result = evaluate(ExponentRequest(models["close_distractors"], "Lambda"))
    pairs = result.witness["hypotheses"][0]["pairs"] if result.witness else None
    return [
        _close("Lambda of close distractors", 0.002, result.value, 5e-4),
        Check("Lambda minimizer", "[[1, 2], [2, 1]]", str(pairs), pairs == [[1, 2], [2, 1]]),
    ]


def _kappa_checks(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    model = models["overestimate"]
    result = evaluate(ExponentRequest(model, "Kappa"))
    pairs = result.witness["hypotheses"][0]["pairs"] if result.witness else None
    extend = quantity_extend_by_one(model)
    return [
        _close("kappa of overestimate", 0.0438, result.value, 1e-3),
        Check("kappa minimizer", "[[1, 1], [2, 3], [3, 2]]", str(pairs), pairs == [[1, 1], [2, 3], [3, 2]]),
        _close("extend-by-one bound", 0.0806, extend, 1e-3),
        Check("kappa < extend-by-one", "strict", f"{result.value:.6g} < {extend:.6g}", result.value < extend),
    ]


def _threshold_check(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    value = f_threshold(1, 1, 2, Rates(1.0, 1.0))
    return [_close("f(1), k=1, |X|=2", 6 * math.log(3), value, 1e-12)]


def _variational_check(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 1.0, 2001)
    v = np.stack([1 - grid, grid], axis=1)
    worst = 0.0
    for _ in range(VARIATIONAL_PAIRS):
        p, q = rng.uniform(0.05, 0.95, size=2)
        p_row, q_row = np.array([1 - p, p]), np.array([1 - q, q])
        for a in (0.5, 1.0, 2.0):
            objective = a * rel_entr(v, p_row).sum(axis=1) + rel_entr(v, q_row).sum(axis=1)
            exact = renyi(Distribution(p_row), Distribution(q_row), a / (1 + a))
            worst = max(worst, abs(objective.min() - exact))
    return [Check(f"variational Rényi form, {VARIATIONAL_PAIRS} pairs", "max gap <= 1e-4", f"{worst:.2e}", worst <= 1e-4)]


def _zero_threshold_checks(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    null, overestimate = models["unknown_null"], models["overestimate"]
    g0, kappa = quantity_G0(null), quantity_kappa(overestimate)
    checks = []
    for scale in (1.0, 1.1):
        e_r = exponent_E_r(null, scale * g0, settings).value
        g = exponent_G(overestimate, scale * kappa, settings=settings).value
        checks.append(Check(f"E_r at {scale} G0", "0", f"{e_r:.3g}", e_r <= ZERO_TOLERANCE))
        checks.append(Check(f"G at {scale} kappa", "0", f"{g:.3g}", g <= ZERO_TOLERANCE))
    e_r = exponent_E_r(null, 0.9 * g0, settings).value
    g = exponent_G(overestimate, 0.9 * kappa, settings=settings).value
    checks.append(Check("E_r at 0.9 G0", f"> {POSITIVE_FLOOR:g}", f"{e_r:.3g}", e_r > POSITIVE_FLOOR))
    checks.append(Check("G at 0.9 kappa", f"> {POSITIVE_FLOOR:g}", f"{g:.3g}", g > POSITIVE_FLOOR))
    return checks


def _f_exponent_zero_checks(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    model = models["close_distractors"]
    lam = quantity_Lambda(model)
    checks = []
    for scale in (1.0, 1.1):
        f = exponent_F(model, scale * lam, settings=settings).value
        checks.append(Check(f"F at {scale} Lambda", "0", f"{f:.3g}", f <= ZERO_TOLERANCE))
    f = exponent_F(model, 0.9 * lam, settings=settings).value
    checks.append(Check("F at 0.9 Lambda", f"> {POSITIVE_FLOOR:g}", f"{f:.3g}", f > POSITIVE_FLOOR))
    return checks


def _sequential_gain_check(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    model = models["known_binary"]
    e_s = exponent_E_s(model).value
    e_f = exponent_E_f(model, settings=settings).value
    return [
        _close("E_s of known binary", -2 * math.log(0.8), e_s, 1e-9),
        Check("E_f <= E_s", "holds", f"{e_f:.6g} <= {e_s:.6g}", e_f <= e_s + 1e-9),
    ]


def _pairwise_g0_check(models: Dict[str, SourceModel], settings: SolverSettings) -> List[Check]:
    rng = np.random.default_rng(1)
    worst = 0.0
    for m1, m2 in ((2, 1), (3, 2), (4, 3)):
        layout = HypothesisLayout(ProblemDims(m1, m2))
        for _ in range(5):
            left = rng.dirichlet(np.ones(2), size=m1)
            right = rng.dirichlet(np.ones(2), size=m2)
            pairs = gjs_matrix(left, right, 1.0, 1.0)
            worst = max(worst, abs(layout.scores(pairs).min() - pairs.min()))
    return [Check("min over hypotheses = min over pairs", "gap <= 1e-12", f"{worst:.2e}", worst <= 1e-12)]


CHECKS: List[Callable[[Dict[str, SourceModel], SolverSettings], List[Check]]] = [
    _count_checks,
    _lambda_check,
    _kappa_checks,
    _threshold_check,
    _variational_check,
    _zero_threshold_checks,
    _f_exponent_zero_checks,
    _sequential_gain_check,
    _pairwise_g0_check,
]


def run_checks(models: Dict[str, SourceModel] = None, settings: SolverSettings = None) -> List[Check]:
    """
    Run the reference checklist.

    Args:
        models (dict, optional): Overrides for entries of reference_models().
        settings (SolverSettings, optional): Solver settings for the constrained exponents.
    """
    merged = reference_models()
    merged.update(models or {})
    checks = []
    for check in CHECKS:
        checks.extend(check(merged, settings))
    return checks
