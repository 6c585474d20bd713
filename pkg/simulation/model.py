"""Generating distributions of both databases together with the hypothesis they realize."""
from typing import Optional, Sequence

import numpy as np

from utils.distributions import Distribution, Rates, gjs_matrix, stack
from utils.errors import DimensionError, ModelError
from utils.matchings import REJECT, HypothesisIndex, MatchingSet, ProblemDims, index_of, matching_at


class SourceModel:
    """
    P^{M1}, Q^{M2}, the true hypothesis and the sampling rates.

    Membership is checked on construction: under H_l^K, P_i == Q_j exactly for the
    pairs of the matching and P_i != Q_j for every other pair; under H_r every pair
    differs. Distributions inside one database must be pairwise distinct.

    Args:
        left (Sequence[Distribution]): P_1..P_M1.
        right (Sequence[Distribution]): Q_1..Q_M2.
        truth (HypothesisIndex): H_l^K or REJECT.
        rates (Rates): Sampling rates.
    """

    def __init__(
        self,
        left: Sequence[Distribution],
        right: Sequence[Distribution],
        truth: HypothesisIndex,
        rates: Rates
    ) -> None:
        self.left = [Distribution.parse(d) for d in left]
        self.right = [Distribution.parse(d) for d in right]
        if not self.left or not self.right:
            raise DimensionError("Both databases need at least one distribution")
        self.dims = ProblemDims(len(self.left), len(self.right))
        self.truth = truth
        self.rates = rates
        self.alphabet_size = self.left[0].alphabet_size
        # raises DimensionError on mixed alphabets
        stack(self.left + self.right)
        self._validate()

    def _validate(self) -> None:
        for name, dists in (("left", self.left), ("right", self.right)):
            if len(set(dists)) != len(dists):
                raise ModelError(f"Distributions of the {name} database must be pairwise distinct")
        matched = set(self.truth_matching().pairs) if not self.truth.is_reject else set()
        for i, p in enumerate(self.left):
            for j, q in enumerate(self.right):
                equal = p == q
                if (i, j) in matched and not equal:
                    raise ModelError(f"Truth {self.truth} pairs ({i + 1},{j + 1}) but P_{i + 1} != Q_{j + 1}")
                if (i, j) not in matched and equal:
                    raise ModelError(f"P_{i + 1} == Q_{j + 1} but ({i + 1},{j + 1}) is not matched under {self.truth}")

    @classmethod
    def from_dict(cls, spec: dict) -> "SourceModel":
        """Parse {"left": [...], "right": [...], "truth": "reject" | {"k", "l"} | {"pairs"}, "rates": {"alpha", "beta"}}."""
        try:
            rates = spec.get("rates", {"alpha": 1.0, "beta": 1.0})
            truth = spec["truth"]
            if isinstance(truth, dict) and "pairs" in truth:
                dims = ProblemDims(len(spec["left"]), len(spec["right"]))
                truth = index_of(dims, MatchingSet.from_json(truth["pairs"])).to_json()
            return cls(
                spec["left"],
                spec["right"],
                HypothesisIndex.from_json(truth),
                Rates(float(rates["alpha"]), float(rates["beta"]))
            )
        except KeyError as e:
            raise ModelError(f"Model specification is missing the field {e}") from e

    def to_dict(self) -> dict:
        return {
            "left": [d.to_json() for d in self.left],
            "right": [d.to_json() for d in self.right],
            "truth": self.truth.to_json(),
            "rates": self.rates.to_json(),
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, SourceModel):
            return NotImplemented
        return (
            self.left == other.left
            and self.right == other.right
            and self.truth == other.truth
            and self.rates == other.rates
        )

    @property
    def is_null(self) -> bool:
        return self.truth.is_reject

    def truth_matching(self) -> Optional[MatchingSet]:
        if self.truth.is_reject:
            return None
        if self.truth.k > self.dims.m2:
            raise ModelError(f"Truth {self.truth} has more matches than the right database holds")
        return matching_at(self.dims, self.truth)

    def left_array(self) -> np.ndarray:
        return stack(self.left)

    def right_array(self) -> np.ndarray:
        return stack(self.right)

    def pair_gjs(self) -> np.ndarray:
        """[M1, M2] GJS(P_i, Q_j) at the model's rates."""
        return gjs_matrix(self.left_array(), self.right_array(), self.rates.alpha, self.rates.beta)

    def has_full_support(self) -> bool:
        return all(d.has_full_support() for d in self.left + self.right)

    def smoothed(self, eps: float) -> "SourceModel":
        """Every distribution mixed with eps uniform mass; membership is preserved."""
        return SourceModel(
            [d.smoothed(eps) for d in self.left],
            [d.smoothed(eps) for d in self.right],
            self.truth,
            self.rates
        )

    def with_rates(self, rates: Rates) -> "SourceModel":
        return SourceModel(self.left, self.right, self.truth, rates)

    def __repr__(self) -> str:
        return f"SourceModel(dims=({self.dims.m1},{self.dims.m2}), truth={self.truth}, rates={self.rates.to_json()})"


def bernoulli_model(
    left: Sequence[float],
    right: Sequence[float],
    truth: HypothesisIndex = REJECT,
    rates: Rates = None
) -> SourceModel:
    """Shorthand for binary models written as lists of success probabilities."""
    rates = Rates(1.0, 1.0) if rates is None else rates
    return SourceModel(
        [Distribution.bernoulli(p) for p in left],
        [Distribution.bernoulli(q) for q in right],
        truth,
        rates
    )
