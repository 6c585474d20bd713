"""
Finite-alphabet distributions, empirical types and the divergence functionals
shared by the tests, the exponent solvers and the simulator.

All logarithms are natural. KL terms follow 0·log(0/q) = 0 and return +inf
when p has mass where q has none; results are never NaN.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from utils.errors import DimensionError, DomainError

NORMALIZE_TOLERANCE = 1e-9
SUM_TOLERANCE = 1e-12


class Distribution:
    """
    Immutable probability vector on the alphabet {0, ..., alphabet_size-1}.

    Args:
        probs (Iterable[float]): Non-negative weights. A sum within 1e-9 of one is
            renormalized, anything further off is rejected.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs: Iterable[float]) -> None:
        values = np.array(probs if isinstance(probs, np.ndarray) else list(probs), dtype=np.float64)
        if values.ndim != 1:
            raise DimensionError(f"Distribution expects a flat vector, got shape {values.shape}")
        if values.size < 2:
            raise DomainError(f"Alphabet size must be at least 2, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError(f"Probabilities must be finite and non-negative, got {values.tolist()}")
        total = values.sum()
        if abs(total - 1.0) > NORMALIZE_TOLERANCE:
            raise DomainError(f"Probabilities sum to {total!r}, expected 1 within {NORMALIZE_TOLERANCE}")
        if abs(total - 1.0) > SUM_TOLERANCE:
            values = values / total
        values.setflags(write=False)
        self._probs = values

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        """Bern(p) as [1-p, p]: symbol 1 is the success."""
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"Bernoulli parameter must be in [0, 1], got {p}")
        return cls([1.0 - p, p])

    @classmethod
    def parse(cls, spec: Union[str, Sequence[float], "Distribution"]) -> "Distribution":
        """Build from a config entry: a JSON list of probabilities or the "bern:<p>" shorthand."""
        if isinstance(spec, Distribution):
            return spec
        if isinstance(spec, str):
            kind, _, value = spec.partition(":")
            if kind.strip().lower() != "bern" or not value:
                raise DomainError(f"Unsupported distribution shorthand: {spec!r}")
            try:
                return cls.bernoulli(float(value))
            except ValueError as e:
                if isinstance(e, DomainError):
                    raise
                raise DomainError(f"Bad Bernoulli parameter in {spec!r}") from e
        return cls(spec)

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def alphabet_size(self) -> int:
        return int(self._probs.size)

    def has_full_support(self) -> bool:
        return bool(np.all(self._probs > 0))

    def smoothed(self, eps: float) -> "Distribution":
        """Mix in eps of uniform mass so every symbol has positive probability."""
        uniform = np.full(self.alphabet_size, 1.0 / self.alphabet_size)
        return Distribution((1.0 - eps) * self._probs + eps * uniform)

    def to_json(self) -> list:
        return [float(x) for x in self._probs]

    def __len__(self) -> int:
        return self.alphabet_size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.alphabet_size == other.alphabet_size and np.array_equal(self._probs, other._probs)

    def __hash__(self) -> int:
        return hash(self._probs.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self._probs, precision=6, separator=', ')})"


class EmpiricalType:
    """
    Integer symbol counts of a growing sequence.

    Single writer: push/extend mutate in place, everything else only reads.

    Args:
        alphabet_size (int): Number of symbols.
        counts (Iterable[int], optional): Initial counts, defaults to all zero.
    """

    def __init__(self, alphabet_size: int, counts: Iterable[int] = None) -> None:
        if alphabet_size < 2:
            raise DomainError(f"Alphabet size must be at least 2, got {alphabet_size}")
        if counts is None:
            self.counts = np.zeros(alphabet_size, dtype=np.int64)
        else:
            self.counts = np.array(list(counts), dtype=np.int64)
            if self.counts.shape != (alphabet_size,):
                raise DimensionError(f"Expected {alphabet_size} counts, got shape {self.counts.shape}")
            if np.any(self.counts < 0):
                raise DomainError(f"Counts must be non-negative, got {self.counts.tolist()}")
        self.length = int(self.counts.sum())

    @classmethod
    def from_symbols(cls, symbols: Sequence[int], alphabet_size: int) -> "EmpiricalType":
        empirical = cls(alphabet_size)
        empirical.extend(symbols)
        return empirical

    @property
    def alphabet_size(self) -> int:
        return int(self.counts.size)

    def push(self, symbol: int) -> None:
        if not 0 <= symbol < self.counts.size:
            raise DimensionError(f"Symbol {symbol} outside alphabet of size {self.counts.size}")
        self.counts[symbol] += 1
        self.length += 1

    def extend(self, symbols: Sequence[int]) -> None:
        symbols = np.asarray(symbols, dtype=np.int64)
        if symbols.size == 0:
            return
        if symbols.min() < 0 or symbols.max() >= self.counts.size:
            raise DimensionError(f"Symbols outside alphabet of size {self.counts.size}")
        self.counts += np.bincount(symbols, minlength=self.counts.size)
        self.length += int(symbols.size)

    def as_distribution(self) -> Distribution:
        if self.length == 0:
            raise DomainError("Empirical type of an empty sequence has no distribution")
        return Distribution(self.counts / self.length)

    def copy(self) -> "EmpiricalType":
        return EmpiricalType(self.alphabet_size, self.counts.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmpiricalType):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __repr__(self) -> str:
        return f"EmpiricalType(counts={self.counts.tolist()}, length={self.length})"


def _exact_fraction(value: float) -> Fraction:
    # shortest round-trip decimal, so ceil(0.1 * 10) is 1 and not 2
    return Fraction(repr(float(value)))


@dataclass(frozen=True)
class Rates:
    """Sampling rates (alpha, beta): after n steps the databases hold ceil(alpha*n) and ceil(beta*n) samples."""

    alpha: float
    beta: float
    _alpha_frac: Fraction = field(init=False, repr=False, compare=False)
    _beta_frac: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"Rate {name} must be a positive finite real, got {value!r}")
        object.__setattr__(self, "_alpha_frac", _exact_fraction(self.alpha))
        object.__setattr__(self, "_beta_frac", _exact_fraction(self.beta))

    @staticmethod
    def _ceil(frac: Fraction, n):
        num, den = frac.numerator, frac.denominator
        if isinstance(n, np.ndarray):
            return -((-num * n.astype(np.int64)) // den)
        return -((-num * int(n)) // den)

    def xi(self, n):
        """Left-database length ceil(alpha*n); accepts an int or an integer array."""
        return self._ceil(self._alpha_frac, n)

    def chi(self, n):
        """Right-database length ceil(beta*n); accepts an int or an integer array."""
        return self._ceil(self._beta_frac, n)

    @property
    def total(self) -> float:
        return self.alpha + self.beta

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta}


def _check_pair(p: Distribution, q: Distribution) -> None:
    if p.alphabet_size != q.alphabet_size:
        raise DimensionError(f"Alphabet sizes differ: {p.alphabet_size} vs {q.alphabet_size}")


def kl(p: Distribution, q: Distribution) -> float:
    """D(p||q) in nats, +inf when p is not absolutely continuous w.r.t. q."""
    _check_pair(p, q)
    return float(rel_entr(p.probs, q.probs).sum())


def renyi(p: Distribution, q: Distribution, order: float) -> float:
    """
    Rényi divergence D_order(p||q) = log(sum p^a q^(1-a)) / (a-1), with D_1 = KL.

    Args:
        p (Distribution): First argument.
        q (Distribution): Second argument.
        order (float): a > 0.

    Returns:
        float: Non-negative value, possibly +inf.
    """
    _check_pair(p, q)
    if not order > 0:
        raise DomainError(f"Rényi order must be positive, got {order}")
    if order == 1.0:
        return kl(p, q)
    support = p.probs > 0
    ps, qs = p.probs[support], q.probs[support]
    if order > 1 and np.any(qs == 0):
        return math.inf
    total = float(np.sum(ps ** order * qs ** (1.0 - order)))
    if total <= 0.0:
        return math.inf
    return max(math.log(total) / (order - 1.0), 0.0)


def binary_kl(p: float, q: float) -> float:
    """d(p||q) between Bern(p) and Bern(q), both strictly inside (0, 1)."""
    for name, value in (("p", p), ("q", q)):
        if not 0.0 < value < 1.0:
            raise DomainError(f"binary_kl needs {name} in (0, 1), got {value}")
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def mixture(p: Distribution, q: Distribution, rates: Rates) -> Distribution:
    """R = (alpha*p + beta*q) / (alpha + beta)."""
    _check_pair(p, q)
    return Distribution((rates.alpha * p.probs + rates.beta * q.probs) / rates.total)


def gjs(p: Distribution, q: Distribution, rates: Rates) -> float:
    """Generalized Jensen-Shannon divergence alpha*D(p||R) + beta*D(q||R); zero iff p == q."""
    if p == q:
        return 0.0
    r = mixture(p, q, rates)
    return rates.alpha * kl(p, r) + rates.beta * kl(q, r)


def decompose_identity_check(
    omega: Distribution,
    psi: Distribution,
    p: Distribution,
    rates: Rates
) -> Tuple[float, float]:
    """
    Both sides of alpha*D(Ω||P) + beta*D(Ψ||P) = GJS(Ω,Ψ) + (alpha+beta)*D(R||P).

    Returns:
        tuple[float, float]: (lhs, rhs).
    """
    _check_pair(omega, psi)
    _check_pair(omega, p)
    if not p.has_full_support():
        raise DomainError("decompose_identity_check needs p with full support")
    lhs = rates.alpha * kl(omega, p) + rates.beta * kl(psi, p)
    rhs = gjs(omega, psi, rates) + rates.total * kl(mixture(omega, psi, rates), p)
    return lhs, rhs


def gjs_matrix(left: np.ndarray, right: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """
    Pairwise GJS between stacked distributions.

    Args:
        left (ndarray): [..., M1, X] probability rows.
        right (ndarray): [..., M2, X] probability rows.
        alpha (float): Left rate.
        beta (float): Right rate.

    Returns:
        ndarray: [..., M1, M2] with entry (i, j) = GJS(left_i, right_j).
    """
    p = left[..., :, None, :]
    q = right[..., None, :, :]
    r = (alpha * p + beta * q) / (alpha + beta)
    value = alpha * rel_entr(p, r).sum(axis=-1) + beta * rel_entr(q, r).sum(axis=-1)
    # equal rows are exactly zero even when the mixture rounds
    same = np.all(p == q, axis=-1)
    return np.where(same, 0.0, np.maximum(value, 0.0))


def stack(dists: Sequence[Distribution]) -> np.ndarray:
    """Rows of probabilities as a [len(dists), X] array."""
    if not dists:
        raise DimensionError("Cannot stack an empty list of distributions")
    size = dists[0].alphabet_size
    for d in dists:
        if d.alphabet_size != size:
            raise DimensionError(f"Alphabet sizes differ: {size} vs {d.alphabet_size}")
    return np.stack([d.probs for d in dists])
