"""Propagation-calibrated pointwise adaptive estimation.

Select one estimate out of an ordered family of Gaussian estimates of a
scalar target.  The pairwise test thresholds are tuned by Monte Carlo under
the pure-noise null so that the false-alarm risk at every step stays within
a prescribed fraction of the ideal risk; oracle and diagnostic machinery
quantifies how close the data-driven choice comes to the bias-budgeted ideal.
"""

from .bench import (
    ExperimentReport,
    ExperimentSpec,
    ModelMetrics,
    emit_report,
    example1_model,
    example2_model,
    make_models,
    run_experiment,
)
from .calibrate import (
    CalibrationConfig,
    NullSample,
    build_null_sample,
    calibrate,
    calibrate_from_sample,
    gaussian_moment,
    minimality_check,
    propagation_risk,
    verify_propagation,
)
from .diagnose import (
    ConditionReport,
    condition_report,
    decay_constants,
    diagonal_bias_check,
    inverse_correlation_norms,
    max_pair_variance_ratio,
)
from .errors import (
    BalanceError,
    BracketError,
    DomainError,
    EmptyWindowError,
    InvariantError,
    NotPositiveDefiniteError,
    OrderingError,
    PropcalError,
)
from .family import (
    FamilyDesign,
    FunctionalModelSpec,
    KernelModelSpec,
    SequenceModelSpec,
    TruthProfile,
    bias_envelope,
    design_functional,
    design_kernel,
    design_sequence,
    sample_null,
    truth_deltas,
)
from .oracle import (
    BalanceResult,
    KlCheckReport,
    OracleReport,
    TailMomentEnvelope,
    balance_index,
    bivariate_tail_moment,
    build_oracle_report,
    fit_threshold_constant,
    kl_identities_check,
    oracle_index,
    oracle_rhs,
    tail_moment_envelope,
    threshold_lower_bound,
    threshold_upper_bound,
    truncated_abs_moment,
)
from .select import (
    CriticalValues,
    EstimateVector,
    PairStats,
    acceptance_trace,
    pair_stats,
    select_index,
    stepwise_index,
)

__version__ = "0.1.0"
