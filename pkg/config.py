def get_config(name):
    configs = {
        "close_distractors": cfg_close_distractors,
        "overestimate": cfg_overestimate,
        "known_binary": cfg_known_binary,
        "unknown_null": cfg_unknown_null,
        "smoke": cfg_smoke
    }
    return configs.get(name, None)


# upper bound on enumerated hypotheses before any command refuses to run
MAX_HYPOTHESES = 10 ** 6

SOLVER_DEFAULTS = {
    'step': 0.5,
    'max_iterations': 2000,
    'tolerance': 1e-10,
    'residual': 1e-8,
    'bisection_steps': 60,
    'sweeps': 3,
    'batch_size': 256,
    'smoothing': 1e-9,
    'max_multiplier': 1e8
}

cfg_close_distractors = {
    'name': 'close_distractors',
    'model': {
        'left': ['bern:0.1', 'bern:0.12', 'bern:0.3', 'bern:0.6'],
        'right': ['bern:0.1', 'bern:0.12', 'bern:0.4'],
        'truth': {'pairs': [[1, 1], [2, 2]]},
        'rates': {'alpha': 1.0, 'beta': 1.0}
    },
    'test': {
        'kind': 'seq_unknown',
        'thresholds': {'lambda1': 0.0015, 'lambda2': 0.00015, 'lambda3': 0.0015},
        'horizons': [2000, 4000]
    },
    'campaign': {'trials': 200, 'master_seed': 2024, 'parallelism': 1},
    'output': {'json': 'reports/close_distractors.json', 'csv': 'reports/close_distractors.csv'}
}

cfg_overestimate = {
    'name': 'overestimate',
    'model': {
        'left': ['bern:0.1', 'bern:0.3', 'bern:0.15', 'bern:0.8'],
        'right': ['bern:0.1', 'bern:0.3', 'bern:0.4'],
        'truth': {'pairs': [[1, 1], [2, 2]]},
        'rates': {'alpha': 1.0, 'beta': 1.0}
    },
    'test': {
        'kind': 'seq_unknown',
        'thresholds': {'lambda1': 0.04, 'lambda2': 0.004, 'lambda3': 0.04},
        'horizons': [200, 400]
    },
    'campaign': {'trials': 200, 'master_seed': 2024, 'parallelism': 1},
    'output': {'json': 'reports/overestimate.json', 'csv': 'reports/overestimate.csv'}
}

cfg_known_binary = {
    'name': 'known_binary',
    'model': {
        'left': ['bern:0.2', 'bern:0.8'],
        'right': ['bern:0.2'],
        'truth': {'k': 1, 'l': 1},
        'rates': {'alpha': 1.0, 'beta': 1.0}
    },
    'test': {'kind': 'seq_known', 'horizons': [20, 40, 60, 80]},
    'campaign': {'trials': 20000, 'master_seed': 7, 'parallelism': 4},
    'output': {'json': 'reports/known_binary.json', 'csv': 'reports/known_binary.csv'}
}

cfg_unknown_null = {
    'name': 'unknown_null',
    'model': {
        'left': ['bern:0.1', 'bern:0.5'],
        'right': ['bern:0.9'],
        'truth': 'reject',
        'rates': {'alpha': 1.0, 'beta': 1.0}
    },
    'test': {
        'kind': 'seq_unknown',
        'thresholds': {'lambda1': 0.04, 'lambda2': 0.004, 'lambda3': 0.04},
        'horizons': [100]
    },
    'campaign': {'trials': 5000, 'master_seed': 11, 'parallelism': 4},
    'output': {'json': 'reports/unknown_null.json', 'csv': 'reports/unknown_null.csv'}
}

cfg_smoke = {
    'name': 'smoke',
    'model': {
        'left': ['bern:0.2', 'bern:0.8'],
        'right': ['bern:0.2'],
        'truth': {'k': 1, 'l': 1},
        'rates': {'alpha': 1.0, 'beta': 1.0}
    },
    'test': {'kind': 'seq_known', 'horizons': [20]},
    'campaign': {'trials': 100, 'master_seed': 1, 'parallelism': 1},
    'output': {'json': 'reports/smoke.json', 'csv': 'reports/smoke.csv'}
}
