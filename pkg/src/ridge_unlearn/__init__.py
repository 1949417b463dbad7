"""Per-instance certified unlearning for ridge regression trained by Langevin dynamics."""

from .accounting import (
    AccountingInputs,
    CalibrationResult,
    PrivacyBudget,
    calibrate_sigma,
    epsilon_gdp,
    gdp_mu,
    gdp_to_dp_delta,
    uniform_baseline_profile,
)
from .audit import RunRepresentations, audit, fit_gdp, tradeoff_curve, train_distinguisher
from .langevin import TrajectoryConfig, empirical_sensitivity_sweep, run_learn, run_unlearn
from .numerics import RngSeed
from .ridge import (
    Dataset,
    RidgeSpec,
    build_spec,
    exact_solution,
    loo_prediction,
    retain_contractions,
)
from .sensitivity import SensitivityProfile, hp_bounds, residual_stats, sensitivity_map

__version__ = "0.1.0"
