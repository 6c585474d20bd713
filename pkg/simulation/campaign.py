"""
Monte Carlo campaigns: error-rate estimates with Wilson intervals per horizon,
empirical exponent slopes, stopping-time audits and the coupled check that the
reject-capable fixed-length test errs whenever the minimal-scoring one does.
"""
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from exponents.solver import SolverSettings
from exponents.theory import ExponentBounds, known_bounds, one_step_bounds, sequential_unknown_bounds
from procedures.unknown import Thresholds
from simulation.dataset import KNOWN_KINDS, OUTCOMES, CoupledTask, ProcedureSpec, TrialRecord, TrialTask, run_trials
from simulation.model import SourceModel
from utils.errors import DomainError

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95
AUDIT_SIGMAS = 3.0


def wilson_interval(errors: int, trials: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """
    Wilson score interval of a binomial proportion.

    With zero observed errors the lower end is 0 and the upper end uses the
    one-sided critical value.
    """
    if trials <= 0:
        raise DomainError(f"trials must be positive, got {trials}")
    z = stats.norm.ppf(confidence if errors == 0 else 0.5 + confidence / 2)
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    low = 0.0 if errors == 0 else max(0.0, centre - half)
    return float(low), float(min(1.0, centre + half))


def error_types(model: SourceModel, spec: ProcedureSpec) -> List[str]:
    """Error probabilities a (model, test) pair can estimate."""
    if model.is_null:
        return ["false_alarm"]
    return ["mismatch", "false_reject"] if spec.can_reject else ["mismatch"]


def tau_summary(records: Sequence[TrialRecord], horizon_n: int) -> dict:
    """Mean, standard error and max of tau over completed trials, P(tau = N-1), and the mean > N + 3 SE flag."""
    taus = np.array([r.stopping_time for r in records if r.stopping_time is not None], dtype=np.float64)
    if taus.size == 0:
        return {"mean_tau": None, "se_tau": None, "max_tau": None, "p_tau_start": None, "tau_flag": False}
    mean = float(taus.mean())
    se = float(taus.std(ddof=1) / math.sqrt(taus.size)) if taus.size > 1 else 0.0
    return {
        "mean_tau": mean,
        "se_tau": se,
        "max_tau": int(taus.max()),
        "p_tau_start": float(np.mean(taus == horizon_n - 1)),
        "tau_flag": bool(mean > horizon_n + AUDIT_SIGMAS * se),
    }


def summarize_horizon(records: Sequence[TrialRecord], horizon_n: int, types: Sequence[str]) -> dict:
    counts = {outcome: 0 for outcome in OUTCOMES}
    for record in records:
        counts[record.outcome] += 1
    completed = len(records) - counts["truncated"]
    row = {"N": horizon_n, "trials": len(records), "completed": completed, "counts": counts, "errors": {}}
    for kind in types:
        errors = counts[kind]
        low, high = wilson_interval(errors, completed) if completed else (0.0, 1.0)
        row["errors"][kind] = {
            "errors": errors,
            "rate": errors / completed if completed else None,
            "ci_low": low,
            "ci_high": high,
        }
    row.update(tau_summary(records, horizon_n))
    return row


def fit_exponent_slopes(rows: Sequence[dict], error_type: str) -> dict:
    """
    Empirical exponents -ln(rate)/N per horizon.

    Rates are floored at 1/(2 * completed trials); horizons without any error are
    excluded. The largest-N estimate is the headline value, together with a
    non-decreasing trend flag and a least-squares line of the estimates against N.
    """
    points, excluded = [], []
    for row in rows:
        entry = row["errors"].get(error_type)
        if entry is None or not entry["errors"]:
            excluded.append(row["N"])
            continue
        floor = 1.0 / (2 * row["completed"])
        points.append([row["N"], -math.log(max(entry["rate"], floor)) / row["N"]])

    estimates = [p[1] for p in points]
    trend = None
    if len({p[0] for p in points}) >= 2:
        fit = stats.linregress([p[0] for p in points], estimates)
        trend = {"slope": float(fit.slope), "intercept": float(fit.intercept), "rvalue": float(fit.rvalue)}
    return {
        "points": points,
        "excluded": excluded,
        "final": estimates[-1] if estimates else None,
        "monotone": bool(all(b >= a for a, b in zip(estimates, estimates[1:]))),
        "trend": trend,
    }


def theory_for(model: SourceModel, spec: ProcedureSpec, settings: SolverSettings = None) -> Optional[ExponentBounds]:
    """Exponent guarantees matching the test that was simulated."""
    if spec.kind in KNOWN_KINDS:
        return None if model.is_null else known_bounds(model, settings)
    if spec.kind == "seq_unknown":
        return sequential_unknown_bounds(model, spec.thresholds, settings)
    thresholds = spec.thresholds.one_step() if isinstance(spec.thresholds, Thresholds) else spec.thresholds
    return one_step_bounds(model, thresholds, settings)


def config_hash(model: SourceModel, spec: ProcedureSpec, horizons: Sequence[int], trials: int, master_seed: int) -> str:
    """sha256 of everything that determines a report (parallelism does not)."""
    payload = {
        "model": model.to_dict(),
        "test": spec.to_dict(),
        "horizons": list(horizons),
        "trials": trials,
        "master_seed": master_seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class SimulationReport:
    """
    Per-horizon error estimates of one campaign.

    Attributes:
        config_hash (str): Hash of the model, test, horizons, trials and seed.
        rows (list[dict]): One summary per horizon, sorted by N.
        slopes (dict[str, dict]): Empirical exponent fit per error type.
        theory (dict | None): ExponentBounds of the simulated test.
    """

    config_hash: str
    model: dict
    test: dict
    trials: int
    master_seed: int
    rows: List[dict] = field(default_factory=list)
    slopes: Dict[str, dict] = field(default_factory=dict)
    theory: Optional[dict] = None

    @property
    def truncated(self) -> int:
        return sum(row["counts"]["truncated"] for row in self.rows)

    @property
    def audit_flags(self) -> List[int]:
        return [row["N"] for row in self.rows if row["tau_flag"]]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "model": self.model,
            "test": self.test,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "rows": self.rows,
            "slopes": self.slopes,
            "theory": self.theory,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_frame(self) -> pd.DataFrame:
        """One row per (N, error type), plot-ready."""
        records = []
        for row in self.rows:
            for kind, entry in row["errors"].items():
                records.append({
                    "N": row["N"],
                    "error_type": kind,
                    "errors": entry["errors"],
                    "completed": row["completed"],
                    "truncated": row["counts"]["truncated"],
                    "rate": entry["rate"],
                    "ci_low": entry["ci_low"],
                    "ci_high": entry["ci_high"],
                    "mean_tau": row["mean_tau"],
                    "se_tau": row["se_tau"],
                })
        columns = ["N", "error_type", "errors", "completed", "truncated", "rate", "ci_low", "ci_high", "mean_tau", "se_tau"]
        return pd.DataFrame.from_records(records, columns=columns)

    def write(self, json_path: str = None, csv_path: str = None) -> None:
        """Write the JSON and/or CSV report; files already written are removed when a later write fails."""
        written = []
        try:
            for path, writer in ((json_path, self._write_json), (csv_path, self._write_csv)):
                if path is None:
                    continue
                directory = os.path.dirname(path)
                if directory:
                    os.makedirs(directory, exist_ok=True)
                written.append(path)
                writer(path)
        except OSError:
            for path in written:
                if os.path.exists(path):
                    os.remove(path)
            raise

    def _write_json(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())
            f.write("\n")

    def _write_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)


def _check_horizons(horizons: Sequence[int]) -> List[int]:
    horizons = sorted(int(n) for n in horizons)
    if not horizons or horizons[0] < 2:
        raise DomainError(f"Horizons must be at least 2, got {horizons}")
    return horizons


def run_horizon(
    model: SourceModel,
    spec: ProcedureSpec,
    horizon_n: int,
    trials: int,
    master_seed: int,
    parallelism: int = 1
) -> List[TrialRecord]:
    return run_trials(TrialTask(model, spec, horizon_n, master_seed), trials, parallelism)


def run_campaign(
    model: SourceModel,
    spec: ProcedureSpec,
    horizons: Sequence[int],
    trials: int,
    master_seed: int,
    parallelism: int = 1,
    settings: SolverSettings = None,
    with_theory: bool = True
) -> SimulationReport:
    """
    Run `trials` independent trials of `spec` on `model` at every horizon.

    Args:
        model (SourceModel): Generating model; its truth defines the outcome classes.
        spec (ProcedureSpec): Test to simulate.
        horizons (Sequence[int]): N grid, each N >= 2.
        trials (int): Trials per horizon.
        master_seed (int): Root of every trial seed.
        parallelism (int): DataLoader worker processes; does not change the result.
        settings (SolverSettings, optional): Solver settings for the attached theory.
        with_theory (bool): Attach exponent guarantees of the simulated test.

    Returns:
        SimulationReport: Rows sorted by N; truncated trials are counted, never classified.
    """
    if trials < 1:
        raise DomainError(f"Need at least one trial, got {trials}")
    horizons = _check_horizons(horizons)
    types = error_types(model, spec)
    report = SimulationReport(
        config_hash=config_hash(model, spec, horizons, trials, master_seed),
        model=model.to_dict(),
        test=spec.to_dict(),
        trials=trials,
        master_seed=master_seed
    )
    for horizon_n in horizons:
        records = run_horizon(model, spec, horizon_n, trials, master_seed, parallelism)
        row = summarize_horizon(records, horizon_n, types)
        report.rows.append(row)
        summary = ", ".join(f"{k}={v['errors']}/{row['completed']}" for k, v in row["errors"].items())
        logger.info(f"N={horizon_n}: {summary}, mean tau={row['mean_tau']}")
        if row["counts"]["truncated"]:
            logger.warning(f"N={horizon_n}: {row['counts']['truncated']} truncated trials")

    report.slopes = {kind: fit_exponent_slopes(report.rows, kind) for kind in types}
    if with_theory:
        bounds = theory_for(model, spec, settings)
        report.theory = None if bounds is None else bounds.to_dict()
    return report


def stopping_time_audit(
    model: SourceModel,
    spec: ProcedureSpec,
    horizons: Sequence[int],
    trials: int,
    master_seed: int,
    parallelism: int = 1
) -> List[dict]:
    """Per-horizon mean tau, max tau and P(tau = N-1); `tau_flag` marks mean tau > N + 3 SE."""
    rows = []
    for horizon_n in _check_horizons(horizons):
        records = run_horizon(model, spec, horizon_n, trials, master_seed, parallelism)
        row = {"N": horizon_n, "trials": trials, "truncated": sum(r.outcome == "truncated" for r in records)}
        row.update(tau_summary(records, horizon_n))
        if row["tau_flag"]:
            logger.warning(f"N={horizon_n}: mean tau {row['mean_tau']:.2f} exceeds N by more than {AUDIT_SIGMAS} SE")
        rows.append(row)
    return rows


def coupled_containment(
    model: SourceModel,
    lams: Sequence[float],
    horizon_n: int,
    trials: int,
    master_seed: int,
    parallelism: int = 1,
    k: int = None
) -> dict:
    """
    Run the minimal-scoring and the reject-capable fixed-length tests on shared
    realizations and count trials where the former errs but the latter decides
    the truth (violations; expected 0).
    """
    if model.is_null:
        raise DomainError("The coupled check needs a model with matched pairs")
    k = model.truth.k if k is None else k
    lams = tuple(float(lam) for lam in lams)
    results = run_trials(CoupledTask(model, k, lams, horizon_n, master_seed), trials, parallelism)
    minimal_errors = [not minimal for minimal, _ in results]
    per_lambda = []
    for position, lam in enumerate(lams):
        rejecting_correct = [rejecting[position] for _, rejecting in results]
        per_lambda.append({
            "lambda": lam,
            "errors": sum(not c for c in rejecting_correct),
            "violations": sum(e and c for e, c in zip(minimal_errors, rejecting_correct)),
        })
    return {
        "N": horizon_n,
        "trials": trials,
        "minimal_errors": sum(minimal_errors),
        "per_lambda": per_lambda,
        "violations": sum(entry["violations"] for entry in per_lambda),
    }
