import json
import math

import pandas as pd
import pytest

from exponents.functions import exponent_E_s, quantity_G0
from procedures.unknown import OneStepThresholds, Thresholds
from simulation.campaign import (
    coupled_containment,
    error_types,
    fit_exponent_slopes,
    run_campaign,
    stopping_time_audit,
    summarize_horizon,
    tau_summary,
    theory_for,
    wilson_interval
)
from simulation.dataset import ProcedureSpec, TrialRecord
from utils.errors import DomainError


class TestWilson:
    def test_known_values(self):
        low, high = wilson_interval(5, 100)
        assert low == pytest.approx(0.02154, abs=1e-4)
        assert high == pytest.approx(0.11175, abs=1e-4)

    def test_zero_errors_use_one_sided_bound(self):
        low, high = wilson_interval(0, 100)
        z2 = 1.6448536269514722 ** 2
        assert low == 0.0
        assert high == pytest.approx(z2 / (100 + z2))

    def test_all_errors(self):
        low, high = wilson_interval(20, 20)
        assert high == pytest.approx(1.0)
        assert 0.8 < low < 1.0

    def test_needs_trials(self):
        with pytest.raises(DomainError):
            wilson_interval(0, 0)


def test_error_types(known_binary, unknown_null):
    assert error_types(unknown_null, ProcedureSpec("fl_known", k=1)) == ["false_alarm"]
    assert error_types(known_binary, ProcedureSpec("seq_known")) == ["mismatch"]
    assert error_types(known_binary, ProcedureSpec("fl_reject", lam=0.1)) == ["mismatch", "false_reject"]


def records(taus, outcome="correct"):
    return [TrialRecord(t, 10, outcome if tau is not None else "truncated", tau) for t, tau in enumerate(taus)]


def test_tau_summary():
    summary = tau_summary(records([9, 9, 11, 15, None]), 10)
    assert summary["mean_tau"] == 11.0
    assert summary["se_tau"] == pytest.approx(math.sqrt(8) / 2)
    assert summary["max_tau"] == 15
    assert summary["p_tau_start"] == 0.5
    assert summary["tau_flag"] is False


def test_tau_summary_flags_late_stopping():
    assert tau_summary(records([40, 41, 42]), 10)["tau_flag"] is True
    assert tau_summary(records([None]), 10)["mean_tau"] is None


def test_summarize_horizon_counts():
    trial_records = records([9, 9, None]) + [TrialRecord(3, 10, "mismatch", 12)]
    row = summarize_horizon(trial_records, 10, ["mismatch"])
    assert row["completed"] == 3
    assert row["counts"]["truncated"] == 1
    assert row["errors"]["mismatch"]["errors"] == 1
    assert row["errors"]["mismatch"]["rate"] == pytest.approx(1 / 3)


def row(n, errors, completed):
    return {"N": n, "completed": completed, "errors": {"mismatch": {"errors": errors, "rate": errors / completed}}}


def test_fit_exponent_slopes():
    fit = fit_exponent_slopes([row(10, 100, 1000), row(20, 1, 1000), row(30, 0, 1000)], "mismatch")
    assert fit["excluded"] == [30]
    assert fit["points"][0] == [10, pytest.approx(-math.log(0.1) / 10)]
    assert fit["final"] == pytest.approx(-math.log(0.001) / 20)
    assert fit["monotone"] is True
    assert fit["trend"]["slope"] == pytest.approx((fit["points"][1][1] - fit["points"][0][1]) / 10)


def test_fit_without_errors():
    fit = fit_exponent_slopes([row(10, 0, 100)], "mismatch")
    assert fit["final"] is None
    assert fit["trend"] is None


@pytest.fixture(scope="module")
def small_report(known_binary):
    return run_campaign(known_binary, ProcedureSpec("seq_known"), [20, 10], 40, master_seed=1, with_theory=False)


class TestCampaign:
    def test_rows_sorted_by_horizon(self, small_report):
        assert [r["N"] for r in small_report.rows] == [10, 20]
        assert all(r["trials"] == 40 for r in small_report.rows)
        assert set(small_report.slopes) == {"mismatch"}
        assert small_report.theory is None
        assert small_report.truncated == 0

    def test_reproducible(self, known_binary, small_report):
        again = run_campaign(known_binary, ProcedureSpec("seq_known"), [10, 20], 40, master_seed=1, with_theory=False)
        assert again.to_json() == small_report.to_json()

    def test_seed_changes_hash(self, known_binary, small_report):
        other = run_campaign(known_binary, ProcedureSpec("seq_known"), [10], 5, master_seed=2, with_theory=False)
        assert other.config_hash != small_report.config_hash

    def test_frame(self, small_report):
        frame = small_report.to_frame()
        assert list(frame["N"]) == [10, 20]
        assert set(frame["error_type"]) == {"mismatch"}
        assert "ci_high" in frame.columns

    def test_write(self, small_report, tmp_path):
        json_path, csv_path = tmp_path / "out" / "report.json", tmp_path / "out" / "report.csv"
        small_report.write(str(json_path), str(csv_path))
        assert json.loads(json_path.read_text())["config_hash"] == small_report.config_hash
        assert len(pd.read_csv(csv_path)) == 2

    def test_failed_write_removes_partial_output(self, small_report, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        json_path = tmp_path / "report.json"
        with pytest.raises(OSError):
            small_report.write(str(json_path), str(blocker / "report.csv"))
        assert not json_path.exists()

    def test_theory_attached(self, unknown_null):
        spec = ProcedureSpec("fl_unknown", thresholds=OneStepThresholds(2.0, 2.0))
        report = run_campaign(unknown_null, spec, [10], 20, master_seed=4)
        assert report.rows[0]["counts"]["correct"] == 20
        assert report.theory["false_alarm"] == 0.0
        assert report.slopes["false_alarm"]["excluded"] == [10]

    def test_invalid_horizons(self, known_binary):
        with pytest.raises(DomainError):
            run_campaign(known_binary, ProcedureSpec("seq_known"), [1, 10], 5, master_seed=0)

    @pytest.mark.slow
    def test_parallelism_does_not_change_report(self, known_binary, small_report):
        parallel = run_campaign(
            known_binary, ProcedureSpec("seq_known"), [10, 20], 40, master_seed=1, parallelism=8, with_theory=False
        )
        assert parallel.to_json() == small_report.to_json()


def test_theory_for_known_test_on_null_model(unknown_null):
    assert theory_for(unknown_null, ProcedureSpec("fl_known", k=1)) is None


def test_stopping_time_audit(known_binary):
    rows = stopping_time_audit(known_binary, ProcedureSpec("seq_known"), [10, 20], 20, master_seed=0)
    assert [r["N"] for r in rows] == [10, 20]
    for r in rows:
        assert r["truncated"] == 0
        assert r["mean_tau"] >= r["N"] - 1


def test_coupled_containment(known_binary):
    result = coupled_containment(known_binary, [0.0, 0.05, 10.0], 10, 50, master_seed=0)
    assert result["violations"] == 0
    assert [entry["lambda"] for entry in result["per_lambda"]] == [0.0, 0.05, 10.0]
    assert result["per_lambda"][2]["errors"] == 50
    assert result["per_lambda"][0]["errors"] >= result["minimal_errors"]


def test_coupled_containment_needs_matches(unknown_null):
    with pytest.raises(DomainError):
        coupled_containment(unknown_null, [0.1], 10, 5, master_seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("horizon_n", [50, 100])
def test_known_k_mean_stopping_time_within_horizon(known_binary, horizon_n):
    (row,) = stopping_time_audit(known_binary, ProcedureSpec("seq_known"), [horizon_n], 5000, master_seed=21)
    assert row["truncated"] == 0
    assert row["mean_tau"] <= horizon_n + 3 * row["se_tau"]
    assert not row["tau_flag"]


@pytest.mark.slow
def test_unknown_k_mean_stopping_time_under_null(unknown_null):
    thresholds = Thresholds.with_defaults(0.5 * quantity_G0(unknown_null))
    spec = ProcedureSpec("seq_unknown", thresholds=thresholds)
    (row,) = stopping_time_audit(unknown_null, spec, [100], 5000, master_seed=22)
    assert row["truncated"] == 0
    assert row["mean_tau"] <= 100 + 3 * row["se_tau"]


@pytest.mark.slow
def test_mismatch_slope_tracks_sequential_exponent(known_binary):
    report = run_campaign(known_binary, ProcedureSpec("seq_known"), [20, 40, 60, 80], 20000, master_seed=7, with_theory=False)
    e_s = exponent_E_s(known_binary).value
    # horizons with a handful of errors give no usable slope at this trial count
    resolved = [r for r in report.rows if r["errors"]["mismatch"]["errors"] >= 10]
    assert resolved
    last = resolved[-1]
    estimate = -math.log(last["errors"]["mismatch"]["rate"]) / last["N"]
    assert 0.4 * e_s <= estimate <= 1.6 * e_s
    assert report.slopes["mismatch"]["points"]


@pytest.mark.slow
def test_coupled_containment_at_scale(known_binary):
    result = coupled_containment(known_binary, [0.01, 0.05], 20, 10000, master_seed=3)
    assert result["violations"] == 0
    for entry in result["per_lambda"]:
        assert entry["errors"] >= result["minimal_errors"]
