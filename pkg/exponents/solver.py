"""
Batched solver for the constrained exponent kernel

    minimize   sum_i alpha D(Ω_i||P_i) + sum_j beta D(Ψ_j||Q_j)
    subject to sum_{i,j} W_c[i,j] GJS(Ω_i, Ψ_j) <= b_c   for every constraint c

over products of probability simplices. Each batch element carries its own
weight tensor W [C, M1, M2] and bounds b [C]; +1 weights select the pairs of a
matching, -1 weights subtract another matching (relative constraints).

Three paths:
    * (P, Q) already feasible: value 0 with the data as witness.
    * all bounds zero and all weights non-negative: every connected group of
      constrained factors collapses onto one distribution, solved in closed form.
    * otherwise: Lagrangian dual. For fixed multipliers the inner problem is
      minimized by mirror descent on each simplex factor (SimplexMirrorDescent),
      and the multipliers are found by doubling then bisection until the
      constraint residual drops below the tolerance. Two constraints are
      handled by coordinate sweeps followed by a joint feasibility search.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import torch
from scipy.special import logsumexp
from torch.optim import Optimizer

from config import SOLVER_DEFAULTS
from utils.distributions import Rates, gjs_matrix
from utils.errors import ConfigError, DimensionError, DomainError

logger = logging.getLogger(__name__)

TINY = 1e-300
FEASIBILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SolverSettings:
    step: float
    max_iterations: int
    tolerance: float
    residual: float
    bisection_steps: int
    sweeps: int
    batch_size: int
    smoothing: float
    max_multiplier: float

    @classmethod
    def from_dict(cls, overrides: dict = None) -> "SolverSettings":
        unknown = set(overrides or {}) - set(SOLVER_DEFAULTS)
        if unknown:
            raise ConfigError(f"Unknown solver settings: {sorted(unknown)}")
        return cls(**{**SOLVER_DEFAULTS, **(overrides or {})})


class SimplexMirrorDescent(Optimizer):
    """
    Exponentiated-gradient descent for tensors whose last axis is a probability vector.

    p <- softmax(log p - lr * scale * grad)

    A per-row step scale can be placed in ``optimizer.state[p]["scale"]``; rows whose
    scale is zero are left untouched.

    Args:
        params (iterable): Tensors holding strictly positive probability rows.
        lr (float): Base step.
    """

    def __init__(self, params, lr: float = 0.5) -> None:
        if not lr > 0:
            raise ValueError(f"Invalid step: {lr}")
        super().__init__(params, dict(lr=lr))

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        for group in self.param_groups:
            for p in group["params"]:
                if p.grad is None:
                    continue
                scale = self.state[p].get("scale", 1.0)
                logits = torch.log(p.clamp_min(TINY)) - group["lr"] * scale * p.grad
                updated = torch.softmax(logits, dim=-1)
                if torch.is_tensor(scale):
                    updated = torch.where(scale > 0, updated, p)
                p.copy_(updated)
        return loss


@dataclass
class KernelSolution:
    """
    Per batch element: optimal value, witness (Ω, Ψ), final multipliers, constraint
    values at the witness, an error estimate and the path that produced it.
    """

    values: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    multipliers: np.ndarray
    constraint_values: np.ndarray
    est_error: np.ndarray
    methods: List[str]


def _kl_rows(x: torch.Tensor, log_ref: torch.Tensor) -> torch.Tensor:
    return (x * (torch.log(x.clamp_min(TINY)) - log_ref)).sum(-1)


def _pairwise_gjs(omega: torch.Tensor, psi: torch.Tensor, alpha: float, beta: float) -> torch.Tensor:
    o = omega[:, :, None, :]
    s = psi[:, None, :, :]
    log_r = torch.log(((alpha * o + beta * s) / (alpha + beta)).clamp_min(TINY))
    return (
        alpha * (o * (torch.log(o.clamp_min(TINY)) - log_r)).sum(-1)
        + beta * (s * (torch.log(s.clamp_min(TINY)) - log_r)).sum(-1)
    )


@dataclass
class _State:
    omega: torch.Tensor
    psi: torch.Tensor
    objective: torch.Tensor
    g: torch.Tensor
    mu: torch.Tensor

    def merge(self, mask: torch.Tensor, other: "_State") -> "_State":
        """Take other's entries where mask is set."""
        rows = mask[:, None, None]
        return _State(
            torch.where(rows, other.omega, self.omega),
            torch.where(rows, other.psi, self.psi),
            torch.where(mask, other.objective, self.objective),
            torch.where(mask[:, None], other.g, self.g),
            torch.where(mask[:, None], other.mu, self.mu)
        )


class _Batch:
    """Data, weights and bounds of one chunk of problems as float64 tensors."""

    def __init__(self, left: np.ndarray, right: np.ndarray, rates: Rates, weights: np.ndarray, bounds: np.ndarray):
        self.alpha, self.beta = rates.alpha, rates.beta
        self.p = torch.as_tensor(left, dtype=torch.float64)
        self.q = torch.as_tensor(right, dtype=torch.float64)
        self.log_p = torch.log(self.p)
        self.log_q = torch.log(self.q)
        self.weights = torch.as_tensor(weights, dtype=torch.float64)
        self.bounds = torch.as_tensor(bounds, dtype=torch.float64)
        magnitude = self.weights.abs()
        self.left_degree = magnitude.sum(dim=3)  # [B, C, M1]
        self.right_degree = magnitude.sum(dim=2)  # [B, C, M2]
        self.size = self.weights.shape[0]

    def evaluate(self, omega: torch.Tensor, psi: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        objective = self.alpha * _kl_rows(omega, self.log_p).sum(-1) + self.beta * _kl_rows(psi, self.log_q).sum(-1)
        pairs = _pairwise_gjs(omega, psi, self.alpha, self.beta)
        return objective, torch.einsum("bcij,bij->bc", self.weights, pairs)

    def scales(self, mu: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Per-row mirror-descent scale 1/(w (1 + sum_c mu_c |W_c| row mass)); zero for unconstrained rows."""
        scales = []
        for degree, rate in ((self.left_degree, self.alpha), (self.right_degree, self.beta)):
            touched = degree.sum(dim=1) > 0
            load = (mu[:, :, None] * degree).sum(dim=1)
            scales.append(torch.where(touched, 1.0 / (rate * (1.0 + load)), 0.0)[..., None])
        return scales[0], scales[1]

    def data_state(self) -> _State:
        omega = self.p.expand(self.size, -1, -1).clone()
        psi = self.q.expand(self.size, -1, -1).clone()
        objective, g = self.evaluate(omega, psi)
        mu = torch.zeros_like(self.bounds)
        return _State(omega, psi, torch.zeros_like(objective), g, mu)

    def margin(self, g: torch.Tensor, watched: torch.Tensor) -> torch.Tensor:
        excess = (g - self.bounds)[:, watched]
        return excess.max(dim=-1).values


def collapse_solution(
    left: np.ndarray,
    right: np.ndarray,
    rates: Rates,
    pairs: Sequence[Tuple[int, int]]
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Minimize the objective when every listed pair must satisfy Ω_i = Ψ_j.

    Pairs chain factors into connected groups; a group with weights w_f and data p_f
    collapses onto V proportional to prod p_f^(w_f/W) at cost -W log sum prod p_f^(w_f/W),
    W = sum w_f. Groups whose data rows are identical cost exactly zero.

    Returns:
        tuple[float, ndarray, ndarray]: (value, Ω [M1, X], Ψ [M2, X]).
    """
    parent = {}

    def find(node):
        while parent.setdefault(node, node) != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    for i, j in pairs:
        parent[find(("L", i))] = find(("R", j))

    groups = {}
    for node in list(parent):
        groups.setdefault(find(node), []).append(node)

    omega, psi = left.copy(), right.copy()
    value = 0.0
    for nodes in groups.values():
        rows = [left[i] if side == "L" else right[i] for side, i in nodes]
        if all(np.array_equal(rows[0], row) for row in rows[1:]):
            continue
        weights = np.array([rates.alpha if side == "L" else rates.beta for side, _ in nodes])
        total = weights.sum()
        with np.errstate(divide="ignore"):
            log_v = (weights[:, None] / total * np.log(np.stack(rows))).sum(axis=0)
        z = logsumexp(log_v)
        value += max(-total * z, 0.0)
        v = np.exp(log_v - z)
        for side, i in nodes:
            (omega if side == "L" else psi)[i] = v
    return value, omega, psi


class ConstrainedKernel:
    """
    Solve batches of constrained-kernel instances that share the same data (P, Q) and rates.

    Args:
        left (ndarray): [M1, X] data rows P, full support.
        right (ndarray): [M2, X] data rows Q, full support.
        rates (Rates): Sampling rates.
        settings (SolverSettings, optional): Defaults come from config.SOLVER_DEFAULTS.
    """

    def __init__(self, left: np.ndarray, right: np.ndarray, rates: Rates, settings: SolverSettings = None) -> None:
        if left.shape[-1] != right.shape[-1]:
            raise DimensionError(f"Alphabet sizes differ: {left.shape[-1]} vs {right.shape[-1]}")
        if np.any(left <= 0) or np.any(right <= 0):
            raise DomainError("The iterative solver needs full-support data; smooth the model first")
        self.left = np.asarray(left, dtype=np.float64)
        self.right = np.asarray(right, dtype=np.float64)
        self.rates = rates
        self.settings = SolverSettings.from_dict() if settings is None else settings

    def data_constraints(self, weights: np.ndarray) -> np.ndarray:
        """[B, C] constraint values at (P, Q)."""
        pairs = gjs_matrix(self.left, self.right, self.rates.alpha, self.rates.beta)
        return np.einsum("bcij,ij->bc", weights, pairs)

    def solve(self, weights: np.ndarray, bounds: np.ndarray) -> KernelSolution:
        """
        Args:
            weights (ndarray): [B, C, M1, M2] constraint weights.
            bounds (ndarray): [B, C] non-negative bounds.

        Returns:
            KernelSolution: Results in input order.
        """
        weights = np.asarray(weights, dtype=np.float64)
        bounds = np.asarray(bounds, dtype=np.float64)
        m1, m2 = self.left.shape[0], self.right.shape[0]
        if weights.ndim != 4 or weights.shape[2:] != (m1, m2) or bounds.shape != weights.shape[:2]:
            raise DimensionError(f"Weights {weights.shape} and bounds {bounds.shape} do not fit ({m1}, {m2})")
        if np.any(bounds < 0):
            raise DomainError("Constraint bounds must be non-negative")

        size, count = bounds.shape
        values = np.zeros(size)
        omega = np.broadcast_to(self.left, (size,) + self.left.shape).copy()
        psi = np.broadcast_to(self.right, (size,) + self.right.shape).copy()
        multipliers = np.zeros((size, count))
        constraint_values = self.data_constraints(weights)
        est_error = np.zeros(size)
        methods = ["closed_form"] * size

        trivial = np.all(constraint_values <= bounds + FEASIBILITY_TOLERANCE, axis=1)
        collapse = ~trivial & np.all(bounds == 0, axis=1) & np.all(weights >= 0, axis=(1, 2, 3))
        for b in np.flatnonzero(collapse):
            pairs = list(zip(*np.nonzero(weights[b].sum(axis=0) > 0)))
            values[b], omega[b], psi[b] = collapse_solution(self.left, self.right, self.rates, pairs)
            constraint_values[b] = 0.0

        iterative = np.flatnonzero(~trivial & ~collapse)
        for start in range(0, len(iterative), self.settings.batch_size):
            chunk = iterative[start:start + self.settings.batch_size]
            batch = _Batch(self.left, self.right, self.rates, weights[chunk], bounds[chunk])
            state = self._dual_search(batch)
            gap = -(state.mu * (state.g - batch.bounds)).sum(-1)
            values[chunk] = state.objective.numpy()
            omega[chunk] = state.omega.numpy()
            psi[chunk] = state.psi.numpy()
            multipliers[chunk] = state.mu.numpy()
            constraint_values[chunk] = state.g.numpy()
            est_error[chunk] = gap.clamp_min(0.0).numpy()
            for b in chunk:
                methods[b] = "dual_bisection"

        violated = np.any(constraint_values > bounds + 1e-6, axis=1)
        if violated.any():
            logger.warning(f"{int(violated.sum())} kernel instance(s) stayed infeasible at the multiplier cap")
            est_error[violated] = math.inf
        return KernelSolution(values, omega, psi, multipliers, constraint_values, est_error, methods)

    def _inner(self, batch: _Batch, warm: _State, mu: torch.Tensor) -> _State:
        """Minimize the Lagrangian at fixed multipliers, warm-started."""
        omega = warm.omega.detach().clone().requires_grad_(True)
        psi = warm.psi.detach().clone().requires_grad_(True)
        optimizer = SimplexMirrorDescent([omega, psi], lr=self.settings.step)
        optimizer.state[omega]["scale"], optimizer.state[psi]["scale"] = batch.scales(mu)

        previous = None
        for _ in range(self.settings.max_iterations):
            optimizer.zero_grad()
            objective, g = batch.evaluate(omega, psi)
            lagrangian = objective + (mu * (g - batch.bounds)).sum(-1)
            lagrangian.sum().backward()
            optimizer.step()
            current = lagrangian.detach()
            if previous is not None and torch.max(torch.abs(current - previous)) < self.settings.tolerance:
                break
            previous = current

        with torch.no_grad():
            objective, g = batch.evaluate(omega, psi)
        return _State(omega.detach(), psi.detach(), objective, g, mu.clone())

    def _line_search(
        self,
        batch: _Batch,
        warm: _State,
        base: torch.Tensor,
        direction: torch.Tensor,
        watched: torch.Tensor,
        initial: torch.Tensor
    ) -> _State:
        """Smallest s >= 0 with every watched constraint satisfied at mu = base + s * direction."""
        settings = self.settings
        best = self._inner(batch, warm, base)
        current = best
        pending = batch.margin(best.g, watched) > 0
        s_lo = torch.zeros(batch.size, dtype=torch.float64)
        s_hi = torch.where(pending, initial.clamp_min(1.0), 0.0)

        while pending.any():
            if torch.max(s_hi[pending]) > settings.max_multiplier:
                logger.warning(f"Multiplier exceeded {settings.max_multiplier:g} for {int(pending.sum())} instance(s)")
                break
            mu = torch.where(pending[:, None], base + s_hi[:, None] * direction, best.mu)
            trial = self._inner(batch, current.merge(~pending, best), mu)
            ok = batch.margin(trial.g, watched) <= 0
            best = best.merge(pending & ok, trial)
            grow = pending & ~ok
            s_lo = torch.where(grow, s_hi, s_lo)
            s_hi = torch.where(grow, s_hi * 2.0, s_hi)
            current = trial
            pending = grow
            logger.debug(f"expanding multipliers, {int(pending.sum())} pending")

        feasible = batch.margin(best.g, watched) <= 0
        active = feasible & (s_hi > s_lo) & (batch.margin(best.g, watched) < -settings.residual)
        for _ in range(settings.bisection_steps):
            if not active.any():
                break
            mid = 0.5 * (s_lo + s_hi)
            mu = torch.where(active[:, None], base + mid[:, None] * direction, best.mu)
            trial = self._inner(batch, current.merge(~active, best), mu)
            ok = batch.margin(trial.g, watched) <= 0
            best = best.merge(active & ok, trial)
            s_hi = torch.where(active & ok, mid, s_hi)
            s_lo = torch.where(active & ~ok, mid, s_lo)
            current = trial
            active = active & (batch.margin(best.g, watched) < -settings.residual)
        logger.debug(f"line search done, max multiplier {float(best.mu.max()):.4g}")
        return best

    def _dual_search(self, batch: _Batch) -> _State:
        count = batch.bounds.shape[1]
        state = batch.data_state()
        if count == 1:
            unit = torch.ones(1, dtype=torch.float64)
            start = torch.ones(batch.size, dtype=torch.float64)
            return self._line_search(batch, state, state.mu, unit, unit > 0, start)

        for _ in range(self.settings.sweeps):
            for c in range(count):
                base = state.mu.clone()
                base[:, c] = 0.0
                direction = torch.zeros(count, dtype=torch.float64)
                direction[c] = 1.0
                state = self._line_search(batch, state, base, direction, direction > 0, state.mu[:, c])
        everything = torch.ones(count, dtype=torch.float64)
        start = torch.ones(batch.size, dtype=torch.float64)
        return self._line_search(batch, state, state.mu, everything, everything > 0, start)
