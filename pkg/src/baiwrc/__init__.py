"""Best arm identification under resource constraints: SH-RR, baselines, complexity terms."""

from .complexity import (
    ComplexityReport,
    complexity_report,
    effective_consumption,
    gamma,
    h1_det,
    h2_det,
    h2_sto,
    lower_bound_value_det,
    lower_bound_value_sto,
    refined_h,
    tilde_h2_sto,
    upper_bound_value,
)
from .harness import FailureStats, TrialResult, estimate_failure, run_trial
from .model import (
    ArmModel,
    Bernoulli,
    Deterministic,
    Gaussian,
    Instance,
    InstanceError,
    Outcome,
    Uniform,
    means,
    sample,
    tight_envelope,
)
from .strategies import baseline_policy, make_policy

__version__ = "0.1.0"
