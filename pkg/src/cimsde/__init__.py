"""Measurement-feedback coherent Ising machine simulator.

Two backends integrate the same network of degenerate optical parametric
oscillators under homodyne measurement and feedback: a weighted positive-P
particle ensemble (``exact``) and a single-Gaussian moment closure
(``gaussian``).
"""

from .ensemble import Ensemble, TrialResult, run_trial
from .errors import (CapabilityError, CimError, ConfigError, DegenerateEnsembleError, InputError,
                     IntegrationDivergedError)
from .experiment import ExperimentConfig, SweepResult, load_config, run_batch, run_traced_trials
from .gaussian import GaussianState, run_gaussian_trial
from .ising import IsingProblem, energy, ground_states_bruteforce, is_success, ring_antiferromagnet
from .kernels import KERNEL
from .params import NormalizedParams, PhysicalParams, PumpSchedule, derive_normalized

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "CimError", "ConfigError", "DegenerateEnsembleError", "Ensemble",
    "ExperimentConfig", "GaussianState", "InputError", "IntegrationDivergedError", "IsingProblem",
    "KERNEL", "NormalizedParams", "PhysicalParams", "PumpSchedule", "SweepResult", "TrialResult",
    "derive_normalized", "energy", "ground_states_bruteforce", "is_success", "load_config",
    "ring_antiferromagnet", "run_batch", "run_traced_trials", "run_gaussian_trial", "run_trial",
]
