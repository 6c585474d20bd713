"""
Trials as a torch Dataset.

Every item is one independent trial; its seed is derived from (master_seed, trial
index) only, so a DataLoader with any number of workers yields the
same records in the same order.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import torch.utils.data as data

from procedures.common import DEFAULT_MAX_STEPS_FACTOR, KnownKVerdict, UnknownKVerdict
from procedures.known import run_fixed_length_known, run_sequential_known, run_reject_fixed_length
from procedures.unknown import OneStepThresholds, Thresholds, run_fixed_length_unknown, run_sequential_unknown
from simulation.model import SourceModel
from simulation.stream import generate_trial, trial_seed
from utils.errors import ConfigError, DomainError, TruncatedRunError
from utils.matchings import HypothesisIndex

logger = logging.getLogger(__name__)

TEST_KINDS = ("seq_known", "fl_known", "fl_reject", "seq_unknown", "fl_unknown")
SEQUENTIAL_KINDS = ("seq_known", "seq_unknown")
KNOWN_KINDS = ("seq_known", "fl_known", "fl_reject")
KIND_ALIASES = {"fl_zhou": "fl_reject"}
OUTCOMES = ("correct", "mismatch", "false_reject", "false_alarm", "truncated")

Verdict = Union[KnownKVerdict, UnknownKVerdict]


@dataclass(frozen=True)
class ProcedureSpec:
    """
    Which test to run and with which parameters.

    Attributes:
        kind (str): One of TEST_KINDS.
        k (int, optional): Match count of the known-K tests, defaults to the model's truth.
        lam (float, optional): Rejection threshold of fl_reject.
        thresholds (Thresholds | OneStepThresholds, optional): Thresholds of the unknown-K tests.
        max_steps (int, optional): Safety valve of the sequential tests.
    """

    kind: str
    k: Optional[int] = None
    lam: Optional[float] = None
    thresholds: Optional[Union[Thresholds, OneStepThresholds]] = None
    max_steps: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in TEST_KINDS:
            raise ConfigError(f"Unsupported test kind: {self.kind}")
        if self.kind == "fl_reject" and self.lam is None:
            raise ConfigError("fl_reject needs a 'lambda'")
        if self.kind == "seq_unknown" and not isinstance(self.thresholds, Thresholds):
            raise ConfigError("seq_unknown needs thresholds lambda1, lambda2, lambda3")
        if self.kind == "fl_unknown" and self.thresholds is None:
            raise ConfigError("fl_unknown needs thresholds")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError(f"max_steps must be positive, got {self.max_steps}")

    @property
    def is_sequential(self) -> bool:
        return self.kind in SEQUENTIAL_KINDS

    @property
    def can_reject(self) -> bool:
        return self.kind not in ("seq_known", "fl_known")

    @classmethod
    def from_dict(cls, spec: dict) -> "ProcedureSpec":
        """
        Parse {"kind", "k"?, "lambda"?, "thresholds"?, "max_steps"?}.

        fl_unknown accepts either {"lambda1_prime", "lambda2_prime"} or the sequential
        names, mapped through Thresholds.one_step(). Kinds in KIND_ALIASES are read as
        their canonical name.
        """
        if "kind" not in spec:
            raise ConfigError("Test section needs a 'kind'")
        kind = KIND_ALIASES.get(spec["kind"], spec["kind"])
        raw = spec.get("thresholds")
        thresholds = None
        try:
            if raw is not None and "lambda1_prime" in raw:
                thresholds = OneStepThresholds(float(raw["lambda1_prime"]), float(raw["lambda2_prime"]))
            elif raw is not None:
                thresholds = Thresholds.with_defaults(
                    float(raw["lambda3"]),
                    lambda1=raw.get("lambda1"),
                    lambda2=raw.get("lambda2")
                )
                if kind == "fl_unknown":
                    thresholds = thresholds.one_step()
        except KeyError as e:
            raise ConfigError(f"Missing threshold {e}") from e
        except DomainError as e:
            raise ConfigError(str(e)) from e
        return cls(
            kind=kind,
            k=spec.get("k"),
            lam=spec.get("lambda"),
            thresholds=thresholds,
            max_steps=spec.get("max_steps")
        )

    def to_dict(self) -> dict:
        spec = {"kind": self.kind}
        if self.k is not None:
            spec["k"] = self.k
        if self.lam is not None:
            spec["lambda"] = self.lam
        if self.thresholds is not None:
            spec["thresholds"] = self.thresholds.to_json()
        if self.max_steps is not None:
            spec["max_steps"] = self.max_steps
        return spec

    def resolve_k(self, model: SourceModel) -> int:
        if self.k is not None:
            return self.k
        if model.is_null:
            raise ConfigError(f"{self.kind} on a null model needs an explicit 'k'")
        return model.truth.k

    def run(self, model: SourceModel, horizon_n: int, seed) -> Verdict:
        """Run this test once on a fresh stream; sequential runs may raise TruncatedRunError."""
        dims, rates = model.dims, model.rates
        if self.is_sequential:
            max_steps = self.max_steps or DEFAULT_MAX_STEPS_FACTOR * horizon_n
            stream = generate_trial(model, seed, max_steps)
            if self.kind == "seq_known":
                return run_sequential_known(stream, dims, self.resolve_k(model), rates, horizon_n, max_steps)
            return run_sequential_unknown(stream, dims, rates, self.thresholds, horizon_n, max_steps)

        snapshot = generate_trial(model, seed, horizon_n).snapshot(horizon_n)
        if self.kind == "fl_known":
            return run_fixed_length_known(snapshot, dims, self.resolve_k(model), rates)
        if self.kind == "fl_reject":
            return run_reject_fixed_length(snapshot, dims, self.resolve_k(model), rates, self.lam)
        return run_fixed_length_unknown(snapshot, dims, rates, self.thresholds)


def classify_outcome(truth: HypothesisIndex, verdict: Optional[Verdict]) -> str:
    """Outcome tag of one trial; a missing verdict means the run was truncated."""
    if verdict is None:
        return "truncated"
    decided = verdict.decided
    if truth.is_reject:
        return "correct" if decided.is_reject else "false_alarm"
    if decided == truth:
        return "correct"
    return "false_reject" if decided.is_reject else "mismatch"


@dataclass
class TrialRecord:
    trial: int
    horizon_n: int
    outcome: str
    stopping_time: Optional[int]
    verdict: Optional[Verdict] = None

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "N": self.horizon_n,
            "outcome": self.outcome,
            "tau": self.stopping_time,
            "verdict": None if self.verdict is None else self.verdict.to_dict(),
        }


@dataclass(frozen=True)
class TrialTask:
    """One trial of `spec` on `model` at horizon N."""

    model: SourceModel
    spec: ProcedureSpec
    horizon_n: int
    master_seed: int

    def __call__(self, trial: int) -> TrialRecord:
        seed = trial_seed(self.master_seed, trial)
        try:
            verdict = self.spec.run(self.model, self.horizon_n, seed)
        except TruncatedRunError as e:
            logger.warning(f"Trial {trial} at N={self.horizon_n} truncated at n={e.steps}")
            return TrialRecord(trial, self.horizon_n, "truncated", None)
        outcome = classify_outcome(self.model.truth, verdict)
        return TrialRecord(trial, self.horizon_n, outcome, verdict.stopping_time, verdict)


@dataclass(frozen=True)
class CoupledTask:
    """
    Minimal-scoring and reject-capable fixed-length tests on one shared realization.

    Returns (minimal test correct, reject-capable test correct per lambda).
    """

    model: SourceModel
    k: int
    lams: Tuple[float, ...]
    horizon_n: int
    master_seed: int

    def __call__(self, trial: int) -> Tuple[bool, Tuple[bool, ...]]:
        seed = trial_seed(self.master_seed, trial)
        snapshot = generate_trial(self.model, seed, self.horizon_n).snapshot(self.horizon_n)
        dims, rates, truth = self.model.dims, self.model.rates, self.model.truth
        minimal = run_fixed_length_known(snapshot, dims, self.k, rates).decided == truth
        rejecting = tuple(
            run_reject_fixed_length(snapshot, dims, self.k, rates, lam).decided == truth for lam in self.lams
        )
        return minimal, rejecting


class TrialDataset(data.Dataset):
    def __init__(self, task: Callable[[int], object], trials: int) -> None:
        if trials < 1:
            raise DomainError(f"Need at least one trial, got {trials}")
        self.task = task
        self.trials = trials

    def __len__(self):
        return self.trials

    def __getitem__(self, index):
        return self.task(index)

    @staticmethod
    def collate_fn(batch):
        # records are not tensors
        return list(batch)


def run_trials(task: Callable[[int], object], trials: int, parallelism: int = 1, batch_size: int = 64) -> List:
    """Results of task(0..trials-1) in trial order, spread over `parallelism` worker processes."""
    loader = data.DataLoader(
        TrialDataset(task, trials),
        batch_size=batch_size,
        shuffle=False,
        num_workers=parallelism if parallelism > 1 else 0,
        collate_fn=TrialDataset.collate_fn
    )
    results = []
    for batch in loader:
        results.extend(batch)
    return results
