"""Causal effect estimation from generative-model internal representations.

The package trains a deconfounder network on model representations, fits
cross-fitted nuisance functions, and reports doubly robust average and
local average treatment effects with influence-function confidence
intervals, plus overlap/separability diagnostics and a synthetic study
harness.
"""

from .data import Dataset, Observation, load_dataset, read_representations, write_representations
from .diagnostics import DiagnosticsReport, diagnostics_report, ioss
from .dml import (
    EstimateResult,
    FoldPlan,
    difference_in_means,
    estimate_ate,
    estimate_late,
    make_folds,
)
from .errors import DeconfoundError
from .network import NetworkConfig, TarNetModel, train
from .propensity import PropensityModel, fit_propensity, predict_propensity
from .simulation import (
    EstimatorSpec,
    MCReport,
    SimulationScenario,
    run_monte_carlo,
    scenario_preset,
)

__version__ = "1.0.0"

__all__ = [
    "Dataset", "Observation", "load_dataset", "read_representations",
    "write_representations", "DiagnosticsReport", "diagnostics_report",
    "ioss", "EstimateResult", "FoldPlan", "difference_in_means",
    "estimate_ate", "estimate_late", "make_folds", "DeconfoundError",
    "NetworkConfig", "TarNetModel", "train", "PropensityModel",
    "fit_propensity", "predict_propensity", "EstimatorSpec", "MCReport",
    "SimulationScenario", "run_monte_carlo", "scenario_preset",
    "__version__",
]
