from exponents.functions import (
    EXPONENT_KINDS,
    ExponentRequest,
    ExponentResult,
    ScoreConstraint,
    applicable_requests,
    evaluate,
    evaluate_many,
    exponent_constrained,
    exponent_E_f,
    exponent_E_r,
    exponent_E_s,
    exponent_F,
    exponent_G,
    zero_thresholds,
    quantity_extend_by_one,
    quantity_G0,
    quantity_kappa,
    quantity_Lambda
)
from exponents.oracle import GridOracle
from exponents.solver import ConstrainedKernel, SimplexMirrorDescent, SolverSettings
from exponents.theory import (
    ExponentBounds,
    bayesian_exponent,
    known_bounds,
    one_step_bounds,
    sequential_unknown_bounds,
    two_step_bounds
)
