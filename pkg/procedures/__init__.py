from procedures.common import HypothesisLayout, KnownKVerdict, UnknownKVerdict, layout_for
from procedures.known import run_fixed_length_known, run_sequential_known, run_reject_fixed_length
from procedures.unknown import (
    OneStepThresholds,
    Thresholds,
    b_events,
    event_A,
    event_B_components,
    run_fixed_length_unknown,
    run_sequential_unknown
)
