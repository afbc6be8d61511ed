"""Multiscaling detection and source attribution for stochastic-process paths.

Simulators (fBm, rough Bergomi, MRW, FLSM), a generalised Hurst exponent
estimator with a weighted-least-squares multiscaling proxy, data-driven
hyperparameter tuning, surrogate generators, a two-stage permutation-testing
framework, and a reproducible Monte Carlo experiment harness.
"""

from .descriptives import DiagnosticsRecord, acf_abs_returns, compute_diagnostics, kurtosis, vol_clustering
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    GridPointSummary,
    aggregate,
    derive_seed,
    emit_figure1_paths,
    emit_figure_data,
    emit_tables,
    load_config,
    run_experiment,
    run_single,
    write_report_csv,
)
from .ghe import (
    DegenerateSeriesError,
    GheCurve,
    GheResult,
    MomentGrid,
    estimate_ghe,
    fit_hq,
    fit_hq_intercept,
    fit_multiscaling_proxy,
    normalize_standardize,
    structure_function,
)
from .processes import (
    EmbeddingError,
    FbmParams,
    FlsmParams,
    MrwParams,
    PathSeries,
    RBergomiParams,
    gaussian_noise,
    simulate_fbm,
    simulate_flsm,
    simulate_mrw,
    simulate_rbergomi,
    simulate_rbergomi_exact,
    stable_noise,
)
from .rng import RngSpec
from .surrogates import SurrogateBatch, matched_fbm, shuffle_surrogates
from .tuning import TuningResult, estimate_tail_index, select_q_range, select_tau_max, tune
from .twostage import (
    StageOne,
    StageTwo,
    TestConfig,
    TestVerdict,
    run_two_stage,
    stage1_presence,
    stage2_source,
)

__version__ = "0.1.0"

__all__ = [
    "DiagnosticsRecord", "acf_abs_returns", "compute_diagnostics", "kurtosis", "vol_clustering",
    "ExperimentConfig", "ExperimentReport", "GridPointSummary", "aggregate", "derive_seed",
    "emit_figure1_paths", "emit_figure_data", "emit_tables", "load_config", "run_experiment",
    "run_single", "write_report_csv",
    "DegenerateSeriesError", "GheCurve", "GheResult", "MomentGrid", "estimate_ghe", "fit_hq",
    "fit_hq_intercept", "fit_multiscaling_proxy", "normalize_standardize", "structure_function",
    "EmbeddingError", "FbmParams", "FlsmParams", "MrwParams", "PathSeries", "RBergomiParams",
    "gaussian_noise", "simulate_fbm", "simulate_flsm", "simulate_mrw", "simulate_rbergomi",
    "simulate_rbergomi_exact", "stable_noise",
    "RngSpec",
    "SurrogateBatch", "matched_fbm", "shuffle_surrogates",
    "TuningResult", "estimate_tail_index", "select_q_range", "select_tau_max", "tune",
    "StageOne", "StageTwo", "TestConfig", "TestVerdict", "run_two_stage",
    "stage1_presence", "stage2_source",
]
