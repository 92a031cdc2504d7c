"""Simulation laboratory for model-free adaptive control built on full-form
dynamic linearization."""

from .controllers import ControllerConfig, control_increment
from .edlm import HistoryBuffer, Orders, PGVector, build_delta_h
from .errors import (ConfigError, CovarianceBreakdownError, DivergenceError,
                     GainSingularError, IllPosedIdentityError, MFACError)
from .estimators import EstimatorConfig
from .plants import PRESET_IDS, make_example
from .poly import Polynomial
from .simloop import ExperimentConfig, experiment_from_preset, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig",
    "control_increment",
    "HistoryBuffer",
    "Orders",
    "PGVector",
    "build_delta_h",
    "ConfigError",
    "CovarianceBreakdownError",
    "DivergenceError",
    "GainSingularError",
    "IllPosedIdentityError",
    "MFACError",
    "EstimatorConfig",
    "PRESET_IDS",
    "make_example",
    "Polynomial",
    "ExperimentConfig",
    "experiment_from_preset",
    "run_experiment",
]
