"""Error-exponent guarantees of each test, assembled from the exponent functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional

from exponents.functions import (
    ExponentResult,
    exponent_E_f,
    exponent_E_r,
    exponent_E_s,
    exponent_F,
    exponent_G,
    quantity_G0,
    quantity_kappa,
    quantity_Lambda
)
from exponents.solver import SolverSettings
from procedures.unknown import OneStepThresholds, Thresholds

if TYPE_CHECKING:
    from simulation.model import SourceModel


@dataclass
class ExponentBounds:
    """
    Lower bounds on the decay rates of each error probability of one test.

    Attributes:
        test (str): Test tag.
        false_alarm (float | None): Under H_r only.
        mismatch (float | None): Under H_l^K only.
        false_reject (float | None): Under H_l^K, for tests that can reject.
        conditions (dict[str, bool]): Threshold conditions under which the bounds hold.
        details (dict[str, ExponentResult]): Exponent evaluations the bounds were built from.
    """

    test: str
    false_alarm: Optional[float] = None
    mismatch: Optional[float] = None
    false_reject: Optional[float] = None
    conditions: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, ExponentResult] = field(default_factory=dict)
    extra: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def render(value):
            return "+inf" if value is not None and math.isinf(value) else value

        return {
            "test": self.test,
            "false_alarm": render(self.false_alarm),
            "mismatch": render(self.mismatch),
            "false_reject": render(self.false_reject),
            "conditions": dict(self.conditions),
            "extra": {k: render(v) for k, v in self.extra.items()},
            "details": {k: v.to_dict() for k, v in self.details.items()},
        }


def known_bounds(model: SourceModel, settings: SolverSettings = None) -> ExponentBounds:
    """E_s for the sequential test, E_f for the fixed-length test and their gap."""
    e_s = exponent_E_s(model)
    e_f = exponent_E_f(model, settings=settings)
    gain = e_s.value - e_f.value if not e_s.is_infinite else math.inf
    return ExponentBounds(
        "known",
        mismatch=e_s.value,
        details={"E_s": e_s, "E_f": e_f},
        extra={"E_f": e_f.value, "sequentiality_gain": gain}
    )


def sequential_unknown_bounds(
    model: SourceModel,
    thresholds: Thresholds,
    settings: SolverSettings = None
) -> ExponentBounds:
    """
    Under H_r: false alarm >= E_r(lambda1), with the stopping condition lambda1 < G0.
    Under H_l^K: mismatch >= min{G(lambda2), lambda3} and false reject >= lambda1, with
    lambda2 > 0, lambda3 < Lambda and lambda2 < kappa.
    """
    if model.is_null:
        e_r = exponent_E_r(model, thresholds.lambda1, settings)
        return ExponentBounds(
            "seq_unknown",
            false_alarm=e_r.value,
            conditions={"lambda1 < G0": thresholds.lambda1 < quantity_G0(model)},
            details={"E_r": e_r}
        )
    g = exponent_G(model, thresholds.lambda2, settings=settings)
    return ExponentBounds(
        "seq_unknown",
        mismatch=min(g.value, thresholds.lambda3),
        false_reject=thresholds.lambda1,
        conditions={
            "lambda2 > 0": thresholds.lambda2 > 0,
            "lambda3 < Lambda": thresholds.lambda3 < quantity_Lambda(model),
            "lambda2 < kappa": thresholds.lambda2 < quantity_kappa(model),
        },
        details={"G": g}
    )


def one_step_bounds(
    model: SourceModel,
    thresholds: OneStepThresholds,
    settings: SolverSettings = None
) -> ExponentBounds:
    """
    One-step fixed-length test with (lambda1', lambda2'):
    false alarm E_r(lambda1'), mismatch min{G(lambda1'), lambda2'},
    false reject min{lambda1', lambda2', G(lambda1'), F(lambda2')}.
    """
    first, second = thresholds.lambda1, thresholds.lambda2
    if model.is_null:
        e_r = exponent_E_r(model, first, settings)
        return ExponentBounds("fl_unknown", false_alarm=e_r.value, details={"E_r": e_r})
    g = exponent_G(model, first, settings=settings)
    f = exponent_F(model, second, settings=settings)
    return ExponentBounds(
        "fl_unknown",
        mismatch=min(g.value, second),
        false_reject=min(first, second, g.value, f.value),
        details={"G": g, "F": f}
    )


def two_step_bounds(
    model: SourceModel,
    lambda1: float,
    lambda2: float,
    settings: SolverSettings = None
) -> ExponentBounds:
    """
    Estimate-then-identify fixed-length test: false alarm E_r(lambda1'),
    mismatch min{lambda1', lambda2', G(lambda1')}, false reject min{lambda1', G(lambda1'), F(lambda2')}.
    """
    if model.is_null:
        e_r = exponent_E_r(model, lambda1, settings)
        return ExponentBounds("fl_two_step", false_alarm=e_r.value, details={"E_r": e_r})
    g = exponent_G(model, lambda1, settings=settings)
    f = exponent_F(model, lambda2, settings=settings)
    return ExponentBounds(
        "fl_two_step",
        mismatch=min(lambda1, lambda2, g.value),
        false_reject=min(lambda1, g.value, f.value),
        details={"G": g, "F": f}
    )


def bayesian_exponent(bounds: ExponentBounds) -> float:
    """Slowest decaying error among those the bounds cover."""
    values = [v for v in (bounds.false_alarm, bounds.mismatch, bounds.false_reject) if v is not None]
    return min(values) if values else math.inf
