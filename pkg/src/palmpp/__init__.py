"""Palm likelihood fitting of cluster and void point processes."""

__version__ = "0.1.0"

from .core import (MaternParams, PointPattern, PoissonParams, RngStream, ThomasParams,
                   VoidParams, Window, make_params, pairwise_distances)
from .fit import FitConfig, FitResult, OptimizationError, OptimizerConfig, fit_model, palm_loglik
from .palm import empirical_palm, palm_intensity, palm_matern, palm_thomas, palm_void
from .sim import simulate
from .cccd import cccd_radii, suggested_truncation
from .gof import empty_space_function, gof_envelope
from .inference import (CohortDataset, Image, Patient, PipelineConfig, hierarchical_bootstrap,
                        logistic_fit, roc_curve, run_pipeline)
from .estimators import MaternProcess, ThomasProcess, VoidProcess

__all__ = [
    "Window", "PointPattern", "PoissonParams", "ThomasParams", "MaternParams", "VoidParams",
    "RngStream", "make_params", "pairwise_distances",
    "FitConfig", "FitResult", "OptimizerConfig", "OptimizationError", "fit_model", "palm_loglik",
    "palm_intensity", "palm_void", "palm_thomas", "palm_matern", "empirical_palm",
    "simulate", "cccd_radii", "suggested_truncation", "empty_space_function", "gof_envelope",
    "CohortDataset", "Image", "Patient", "PipelineConfig", "run_pipeline",
    "hierarchical_bootstrap", "logistic_fit", "roc_curve",
    "ThomasProcess", "MaternProcess", "VoidProcess",
]
