from simulation.campaign import (
    SimulationReport,
    coupled_containment,
    fit_exponent_slopes,
    run_campaign,
    stopping_time_audit,
    theory_for,
    wilson_interval
)
from simulation.dataset import ProcedureSpec, TrialDataset, TrialRecord, classify_outcome, run_trials
from simulation.experiment import ExperimentConfig, dump_config, load_config
from simulation.model import SourceModel, bernoulli_model
from simulation.stream import DatabaseStream, ReplayStream, generate_trial, trial_seed
