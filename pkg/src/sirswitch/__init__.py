"""Regime-switching stochastic SIRS simulation toolkit.

Simulates a three-compartment epidemic model whose parameters are modulated
by a finite-state continuous-time Markov chain and perturbed by a scalar
Brownian motion, computes the extinction/permanence threshold in closed
form, and runs seeded Monte Carlo ensembles to check the asymptotics.
"""

__version__ = "0.1.0"

from .ctmc import (
    GeneratorMatrix,
    RegimePath,
    StationaryDistribution,
    sample_regime_path,
    stationary_distribution,
    validate_generator,
)
from .model import (
    Incidence,
    SirsModel,
    SwitchingSde,
    as_switching_sde,
    compare_thresholds,
    compute_lambda,
    eval_g,
    preset_ex8,
    preset_ex17,
    sirs_diffusion,
    sirs_drift,
)
from .engine import HybridPath, SimConfig, em_step, log_infected_step, simulate_path
from .montecarlo import (
    EnsembleStats,
    estimate_lyapunov,
    estimate_persistence,
    estimate_time_average,
    occupation_check,
    run_ensemble,
)
