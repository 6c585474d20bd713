import argparse
import json
import sys

from config import MAX_HYPOTHESES, get_config
from exponents import EXPONENT_KINDS, ExponentRequest, SolverSettings, applicable_requests, evaluate, evaluate_many
from simulation import (
    ExperimentConfig,
    SimulationReport,
    SourceModel,
    coupled_containment,
    run_campaign
)
from utils.checks import run_checks
from utils.errors import ConfigError, DimensionError, DomainError, ModelError, TruncatedRunError
from utils.general import format_table, resolve_parallelism, setup_logging, write_json
from utils.matchings import ProblemDims, enumerate_all, enumerate_matchings, ensure_enumerable

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_TRUNCATED = 3


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(description="Statistical sequence matching: tests, exponents and simulation")
    parser.add_argument('--verbose', action='store_true', help='Log progress to stderr')
    subparsers = parser.add_subparsers(dest='command', required=True)

    enum_parser = subparsers.add_parser('enumerate', help='List matching hypotheses in canonical order')
    enum_parser.add_argument('--m1', type=int, required=True, help='Size of the first database')
    enum_parser.add_argument('--m2', type=int, required=True, help='Size of the second database')
    enum_parser.add_argument('--k', type=int, default=None, help='Number of matches; all when omitted')

    exp_parser = subparsers.add_parser('exponent', help='Evaluate exponent functions of a model')
    _add_source_arguments(exp_parser)
    exp_parser.add_argument(
        '--which',
        type=str,
        default='all',
        choices=list(EXPONENT_KINDS) + ['all'],
        help='Exponent or quantity to evaluate'
    )
    exp_parser.add_argument('--lambda', dest='lam', type=float, default=None, help='Threshold of E_r, F and G')
    exp_parser.add_argument('--oracle', action='store_true', help='Use the binary grid oracle instead of the solver')
    exp_parser.add_argument('--workers', type=int, default=0, help='Worker processes for --which all')
    exp_parser.add_argument('-o', '--output', type=str, default=None, help='Also write the JSON results here')

    sim_parser = subparsers.add_parser('simulate', help='Run a Monte Carlo campaign')
    _add_source_arguments(sim_parser)
    sim_parser.add_argument('--trials', type=int, default=None, help='Override campaign.trials')
    sim_parser.add_argument('--parallelism', type=int, default=None, help='Override campaign.parallelism; SEQMATCH_THREADS still wins')
    sim_parser.add_argument('--output-json', type=str, default=None, help='Override output.json')
    sim_parser.add_argument('--output-csv', type=str, default=None, help='Override output.csv')
    sim_parser.add_argument('--no-theory', action='store_true', help='Skip the exponent guarantees')
    sim_parser.add_argument(
        '--coupled-lambdas',
        type=float,
        nargs='+',
        default=None,
        help='Also check per-trial error containment of the reject-capable fixed-length test at these lambdas'
    )

    subparsers.add_parser('verify-paper', aliases=['verify'], help='Run the reference checklist')

    return parser.parse_args(argv)


def _add_source_arguments(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('-c', '--config', type=str, help='Experiment or model JSON file')
    source.add_argument('--preset', type=str, help='Name of a preset in config.py')


def _load_experiment_dict(params) -> dict:
    if params.preset is not None:
        spec = get_config(params.preset)
        if spec is None:
            raise ConfigError(f"Unknown preset: {params.preset}")
        return spec
    try:
        with open(params.config, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{params.config} is not valid JSON: {e}") from e


def cmd_enumerate(params) -> int:
    dims = ProblemDims(params.m1, params.m2)
    ensure_enumerable(dims, MAX_HYPOTHESES, params.k)
    if params.k is None:
        entries = enumerate_all(dims)
    else:
        entries = [(params.k, l, m) for l, m in enumerate(enumerate_matchings(dims, params.k))]
    rows = [
        (k, l + 1, m, sorted(i + 1 for i in m.matched_left()), sorted(j + 1 for j in m.matched_right()))
        for k, l, m in entries
    ]
    print(format_table(["K", "l", "pairs", "C", "D"], rows))
    print(f"{len(rows)} hypotheses")
    return EXIT_OK


def cmd_exponent(params) -> int:
    spec = _load_experiment_dict(params)
    model = SourceModel.from_dict(spec.get("model", spec))
    ensure_enumerable(model.dims, MAX_HYPOTHESES)
    settings = SolverSettings.from_dict(spec.get("solver"))
    if params.which == 'all':
        requests = applicable_requests(model, params.lam)
        if params.oracle:
            results = [evaluate(r, settings, oracle=True) for r in requests]
        else:
            results = evaluate_many(requests, settings, workers=params.workers)
    else:
        if params.which in ("E_r", "F", "G") and params.lam is None:
            raise ConfigError(f"{params.which} needs --lambda")
        results = [evaluate(ExponentRequest(model, params.which, params.lam), settings, oracle=params.oracle)]

    payload = [result.to_dict() for result in results]
    print(json.dumps(payload, indent=2))
    if params.output is not None:
        write_json(params.output, payload)
    return EXIT_OK


def _print_report(cfg: ExperimentConfig, report: SimulationReport) -> None:
    rows = []
    for row in report.rows:
        for kind, entry in row["errors"].items():
            rows.append((
                row["N"], kind, entry["errors"], row["completed"], entry["rate"],
                entry["ci_low"], entry["ci_high"], row["mean_tau"], row["se_tau"], row["tau_flag"]
            ))
    print(f"Experiment: {cfg.name} | test: {cfg.test.kind} | trials: {cfg.trials} | seed: {cfg.master_seed}")
    print(format_table(
        ["N", "error", "count", "completed", "rate", "ci_low", "ci_high", "mean_tau", "se_tau", "tau_flag"],
        rows
    ))
    for kind, slope in report.slopes.items():
        print(f"{kind}: -ln(rate)/N at largest N = {slope['final']} | non-decreasing: {slope['monotone']}")
    if report.theory is not None:
        bounds = {k: report.theory[k] for k in ("false_alarm", "mismatch", "false_reject") if report.theory[k] is not None}
        print(f"Exponent guarantees: {bounds}")
    if report.truncated:
        print(f"Truncated trials: {report.truncated}")


def cmd_simulate(params) -> int:
    spec = _load_experiment_dict(params)
    cfg = ExperimentConfig.from_dict(spec)
    if params.trials is not None:
        cfg.trials = params.trials
    if params.parallelism is not None:
        cfg.parallelism = params.parallelism
    cfg.parallelism = resolve_parallelism(cfg.parallelism)
    cfg.output_json = params.output_json or cfg.output_json
    cfg.output_csv = params.output_csv or cfg.output_csv
    settings = SolverSettings.from_dict(spec.get("solver"))

    report = run_campaign(
        cfg.model,
        cfg.test,
        cfg.horizons,
        cfg.trials,
        cfg.master_seed,
        parallelism=cfg.parallelism,
        settings=settings,
        with_theory=not params.no_theory
    )
    report.write(cfg.output_json, cfg.output_csv)
    _print_report(cfg, report)

    status = EXIT_OK
    if params.coupled_lambdas:
        for horizon_n in cfg.horizons:
            coupled = coupled_containment(
                cfg.model, params.coupled_lambdas, horizon_n, cfg.trials, cfg.master_seed, cfg.parallelism, cfg.test.k
            )
            print(f"N={horizon_n}: minimal-scoring errors {coupled['minimal_errors']}, containment violations {coupled['violations']}")
            if coupled["violations"]:
                status = EXIT_CHECK_FAILED
    if report.truncated:
        return EXIT_TRUNCATED
    return status


def cmd_verify_paper(params) -> int:
    checks = run_checks()
    print(format_table(
        ["check", "expected", "computed", "status"],
        [(c.name, c.expected, c.computed, "PASS" if c.passed else "FAIL") for c in checks]
    ))
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    "enumerate": cmd_enumerate,
    "exponent": cmd_exponent,
    "simulate": cmd_simulate,
    "verify-paper": cmd_verify_paper,
    "verify": cmd_verify_paper,
}


def main(params) -> int:
    setup_logging(params.verbose)
    try:
        return COMMANDS[params.command](params)
    except TruncatedRunError as e:
        print(f"Run truncated: {e}", file=sys.stderr)
        return EXIT_TRUNCATED
    except (ConfigError, ModelError, DomainError, DimensionError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main(parse_arguments()))
