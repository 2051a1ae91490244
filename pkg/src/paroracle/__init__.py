"""Analytical time and memory oracle for parallel CNN training strategies."""

__version__ = "0.1.0"

from .calibration import CalibrationProfile, LayerTiming, fit_alpha_beta, load_profile
from .cost import CommParams, NetworkTier, SystemDescriptor, load_system, parse_system, select_params
from .errors import OracleError
from .model_ir import LayerDescriptor, LayerKind, ModelDescriptor, load_model, parse_model
from .report import emit_breakdown, projection_accuracy, recommend
from .strategies import Prediction, format_strategy, parse_strategy, predict

__all__ = [
    "CalibrationProfile",
    "CommParams",
    "LayerDescriptor",
    "LayerKind",
    "LayerTiming",
    "ModelDescriptor",
    "NetworkTier",
    "OracleError",
    "Prediction",
    "SystemDescriptor",
    "emit_breakdown",
    "fit_alpha_beta",
    "format_strategy",
    "load_model",
    "load_profile",
    "load_system",
    "parse_model",
    "parse_strategy",
    "parse_system",
    "predict",
    "projection_accuracy",
    "recommend",
    "select_params",
]
