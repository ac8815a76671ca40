"""Numerical laboratory for nonlinear filter stability on the Lorenz-96
system: ensemble Kalman and bootstrap particle filters started from two
initial distributions, Sinkhorn-divergence distances between the resulting
filtering distributions, exponential decay fits, and RMSE correlations."""

from .bpf import (
    BpfConfig,
    allocate_offspring,
    bpf_run,
    log_likelihood,
    resample_with_jitter,
    significant_particles,
)
from .enkf import (
    EnkfConfig,
    build_localization,
    enkf_analysis_step,
    enkf_run,
    gaspari_cohn,
)
from .harness import (
    ExperimentConfig,
    SliceResult,
    SweepResult,
    derive_seeds,
    load_config,
    report,
    run_single,
    run_sweep,
    truth_initial_state,
)
from .lorenz96 import (
    ModelConfig,
    ObservationModel,
    ObservationRecord,
    Trajectory,
    flow,
    generate_truth,
    l96_rhs,
    make_propagator,
    observe,
    spin_up,
)
from .measures import (
    EmpiricalMeasure,
    GaussianSpec,
    measure_covariance_trace,
    measure_mean,
    sample_gaussian,
)
from .metrics import (
    CorrelationSummary,
    DivergenceSeries,
    ErrorSeries,
    FitResult,
    divergence_series,
    ensemble_spread,
    error_series,
    exp_fit,
    pearson,
    rmse_vs_divergence,
    scaled_l2_error,
)
from .sinkhorn import (
    DualPotentials,
    SinkhornConfig,
    cost_matrix,
    d_eps,
    ot_dual,
    pairwise_d_eps,
    sinkhorn_divergence,
    symmetric_potential,
    w2_exact_small,
)

__version__ = "0.1.0"
