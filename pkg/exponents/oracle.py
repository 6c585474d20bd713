"""
Brute-force grid oracle for the constrained exponent kernel on binary alphabets.

Every free factor (a distribution touched by some constraint) is scanned over a
uniform grid of Bernoulli parameters; factors no constraint touches stay at their
data distribution. After the coarse scan a second, finer scan around the best
point tightens the value. Used only to validate the solver.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import rel_entr

from utils.distributions import Rates, gjs_matrix
from utils.errors import DomainError

GRID_POINTS = 401
REFINE_POINTS = 81
REFINE_HALF_WIDTH = 2
MAX_FREE_FACTORS = 3
CHUNK_ELEMENTS = 1 << 22
FEASIBILITY_TOLERANCE = 1e-12


@dataclass
class OracleResult:
    value: float
    omega: Optional[np.ndarray]
    psi: Optional[np.ndarray]
    mode: str


def _binary_kl(theta: np.ndarray, p: float) -> np.ndarray:
    return rel_entr(theta, p) + rel_entr(1.0 - theta, 1.0 - p)


def _rows(theta: np.ndarray) -> np.ndarray:
    return np.stack([1.0 - theta, theta], axis=-1)


def _gjs_table(theta_left: np.ndarray, theta_right: np.ndarray, rates: Rates) -> np.ndarray:
    return gjs_matrix(_rows(theta_left), _rows(theta_right), rates.alpha, rates.beta)


class GridOracle:
    """
    Args:
        left (ndarray): [M1, 2] data rows.
        right (ndarray): [M2, 2] data rows.
        rates (Rates): Sampling rates.
        points (int): Grid points per factor on [0, 1].
    """

    def __init__(self, left: np.ndarray, right: np.ndarray, rates: Rates, points: int = GRID_POINTS) -> None:
        if left.shape[-1] != 2 or right.shape[-1] != 2:
            raise DomainError("The grid oracle only supports binary alphabets")
        self.left = np.asarray(left, dtype=np.float64)
        self.right = np.asarray(right, dtype=np.float64)
        self.rates = rates
        self.grid = np.linspace(0.0, 1.0, points)

    def solve(self, weights: np.ndarray, bounds: np.ndarray) -> OracleResult:
        """
        Args:
            weights (ndarray): [C, M1, M2] constraint weights.
            bounds (ndarray): [C] non-negative bounds.
        """
        weights = np.asarray(weights, dtype=np.float64)
        bounds = np.asarray(bounds, dtype=np.float64)
        data_pairs = gjs_matrix(self.left, self.right, self.rates.alpha, self.rates.beta)
        if np.all(np.einsum("cij,ij->c", weights, data_pairs) <= bounds + FEASIBILITY_TOLERANCE):
            return OracleResult(0.0, self.left.copy(), self.right.copy(), "data")

        support = np.any(weights != 0, axis=0)
        factors = [("L", i) for i in range(self.left.shape[0]) if support[i].any()]
        factors += [("R", j) for j in range(self.right.shape[0]) if support[:, j].any()]

        if np.all(bounds == 0) and np.all(weights >= 0):
            return self._collapse(list(zip(*np.nonzero(support))))
        if len(factors) <= MAX_FREE_FACTORS:
            return self._product_scan(factors, weights, bounds)
        if len(bounds) == 1 and np.all(weights >= 0):
            return self._envelope(list(zip(*np.nonzero(support))), weights[0], float(bounds[0]))
        raise DomainError(f"Grid oracle cannot handle {len(factors)} free factors with {len(bounds)} constraints")

    def _data(self, side: str, index: int) -> float:
        return float((self.left if side == "L" else self.right)[index, 1])

    def _rate(self, side: str) -> float:
        return self.rates.alpha if side == "L" else self.rates.beta

    def _group_cost(self, group, theta: np.ndarray) -> np.ndarray:
        return sum(self._rate(side) * _binary_kl(theta, self._data(side, index)) for side, index in group)

    def _collapse(self, pairs: List[Tuple[int, int]]) -> OracleResult:
        """Constrained pairs are forced equal; each connected group shares one scanned parameter."""
        groups = []
        for i, j in pairs:
            merged = {("L", i), ("R", j)}
            keep = []
            for group in groups:
                if group & merged:
                    merged |= group
                else:
                    keep.append(group)
            groups = keep + [merged]

        omega, psi = self.left.copy(), self.right.copy()
        value = 0.0
        for group in groups:
            values = self._group_cost(group, self.grid)
            best = int(np.argmin(values))
            step = self.grid[1] - self.grid[0]
            fine = np.linspace(
                max(self.grid[best] - REFINE_HALF_WIDTH * step, 0.0),
                min(self.grid[best] + REFINE_HALF_WIDTH * step, 1.0),
                REFINE_POINTS
            )
            fine_values = self._group_cost(group, fine)
            theta = fine[int(np.argmin(fine_values))] if fine_values.min() < values[best] else self.grid[best]
            value += float(min(fine_values.min(), values[best]))
            for side, index in group:
                (omega if side == "L" else psi)[index] = [1.0 - theta, theta]
        return OracleResult(value, omega, psi, "collapse")

    def _scan(self, factors, grids, weights, bounds) -> Tuple[float, Tuple[int, ...]]:
        """Exhaustive scan of the product of grids, chunked along the first factor."""
        count = len(factors)
        axis = {factor: a for a, factor in enumerate(factors)}

        def placed(values, axes):
            shape = [1] * count
            for a in axes:
                shape[a] = len(grids[a])
            return values.reshape(shape)

        costs = [
            placed(self._rate(side) * _binary_kl(grids[a], self._data(side, index)), [a])
            for a, (side, index) in enumerate(factors)
        ]
        tables = {}
        for i, j in zip(*np.nonzero(np.any(weights != 0, axis=0))):
            a, b = axis[("L", i)], axis[("R", j)]
            # left factors precede right factors, so a < b
            tables[(i, j)] = (a, b, _gjs_table(grids[a], grids[b], self.rates))

        rest = int(np.prod([len(g) for g in grids[1:]])) if count > 1 else 1
        chunk = max(1, CHUNK_ELEMENTS // rest)
        best_value, best_index = np.inf, None
        for start in range(0, len(grids[0]), chunk):
            window = slice(start, start + chunk)
            total = sum(c[window] if c.shape[0] > 1 else c for c in costs)
            feasible = np.ones(total.shape, dtype=bool)
            for c in range(len(bounds)):
                level = 0.0
                for (i, j), (a, b, table) in tables.items():
                    if weights[c, i, j] == 0:
                        continue
                    term = placed(table, [a, b])
                    if 0 in (a, b):
                        term = term[window]
                    level = level + weights[c, i, j] * term
                feasible &= np.broadcast_to(level, total.shape) <= bounds[c] + FEASIBILITY_TOLERANCE
            masked = np.where(feasible, np.broadcast_to(total, feasible.shape), np.inf)
            flat = int(np.argmin(masked))
            if masked.flat[flat] < best_value:
                best_value = float(masked.flat[flat])
                local = np.unravel_index(flat, masked.shape)
                best_index = (local[0] + start,) + tuple(local[1:])
        return best_value, best_index

    def _product_scan(self, factors, weights, bounds) -> OracleResult:
        grids = [self.grid] * len(factors)
        value, index = self._scan(factors, grids, weights, bounds)
        if index is None:
            return OracleResult(np.inf, None, None, "product_scan")
        step = self.grid[1] - self.grid[0]
        fine_grids = [
            np.linspace(
                max(self.grid[k] - REFINE_HALF_WIDTH * step, 0.0),
                min(self.grid[k] + REFINE_HALF_WIDTH * step, 1.0),
                REFINE_POINTS
            )
            for k in index
        ]
        fine_value, fine_index = self._scan(factors, fine_grids, weights, bounds)
        if fine_index is not None and fine_value < value:
            thetas = [g[k] for g, k in zip(fine_grids, fine_index)]
            value = fine_value
        else:
            thetas = [self.grid[k] for k in index]

        omega, psi = self.left.copy(), self.right.copy()
        for (side, i), theta in zip(factors, thetas):
            (omega if side == "L" else psi)[i] = [1.0 - theta, theta]
        return OracleResult(value, omega, psi, "product_scan")

    def _envelope(self, pairs: List[Tuple[int, int]], weights: np.ndarray, bound: float) -> OracleResult:
        """
        Single absolute constraint over disjoint pairs: per-pair cost envelope on a budget
        grid, combined by inf-convolution. Budget splits round down, so the value is an
        upper bound within grid resolution. No witness is produced.
        """
        budgets = np.linspace(0.0, bound, len(self.grid))
        combined = None
        for i, j in pairs:
            cost = (
                self.rates.alpha * _binary_kl(self.grid, self._data("L", i))[:, None]
                + self.rates.beta * _binary_kl(self.grid, self._data("R", j))[None, :]
            ).ravel()
            level = (weights[i, j] * _gjs_table(self.grid, self.grid, self.rates)).ravel()
            order = np.argsort(level, kind="stable")
            running = np.minimum.accumulate(cost[order])
            reach = np.searchsorted(level[order], budgets + FEASIBILITY_TOLERANCE, side="right")
            envelope = np.where(reach > 0, running[np.maximum(reach - 1, 0)], np.inf)
            if combined is None:
                combined = envelope
                continue
            step = np.full_like(combined, np.inf)
            for k in range(len(budgets)):
                step[k] = np.min(combined[:k + 1] + envelope[k::-1])
            combined = step
        return OracleResult(float(combined[-1]), None, None, "envelope")
