"""Simulation and threshold checks for a diffusive SIR model driven by
multiplicative Q-Wiener noise."""

from .config import AnalysisConfig, ConfigError, RunConfig, parse_config
from .ensemble import EnsembleStats, SweepResult, ensemble_decay_fit, merge_stats, run_ensemble, sweep
from .model import (
    ModelParams,
    SystemState,
    ThresholdReport,
    compute_thresholds,
    constant_field,
    cosine_field,
    reaction_terms,
    validate_params,
)
from .noise import (
    CoefficientFamily,
    NoiseSpec,
    RngStream,
    covariance,
    eigenbasis_eval,
    sample_increment,
    sample_increment_at,
)
from .observables import (
    DecayFit,
    fit_decay_rate,
    mass_bound_reference,
    permanence_functional,
    time_average,
)
from .spatial import DiscreteSemigroup, Grid, integrate, laplacian_apply, semigroup_apply
from .stepper import StepConfig, Trajectory, self_convergence, simulate_path, simulate_paths, step

__version__ = "0.1.0"
