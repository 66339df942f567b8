"""Stochastic predator-prey model with a Holling-II functional response,
Brownian noise and two Poisson jump measures."""
from ._backend import BACKEND
from .analysis import (EnsembleStats, RegimeReport, classify_regime, run_ensemble,
                       theorem_verdicts, verify_boundedness, verify_extinction,
                       verify_lemma1, verify_mean_persistence, verify_moment_bounds,
                       verify_permanence)
from .coefficients import JumpKernel, LevyMeasureSpec, MarkDistribution, TimeFunction
from .config import AnalysisConfig, ConfigError, ExperimentConfig, load_config
from .errors import DivergenceError, DomainError, KernelDomainError, ValidationError
from .integrator import (SolverConfig, Trajectory, convergence_study,
                         integrate_deterministic, integrate_path)
from .jumps import JumpSchedule, RngSpec, build_schedule
from .model import (ModelSpec, SpeciesParams, derived_rate, drift_log, drift_state,
                    event_drift, extremes, time_average, validate_assumption1)

__version__ = "0.1.0"
