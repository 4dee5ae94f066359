"""Bayesian dose-effect network meta-analysis with restricted cubic splines.

Fits dose-effect curves for multiple agents across a network of fixed-dose
trials, with meta-regression and class-effect variants, absolute response
curves, relative effects, rankings, and model-fit diagnostics.
"""

from ._backend import active_backend
from .data import (
    PLACEBO,
    AgentInfo,
    Dataset,
    EquivalenceTable,
    Study,
    StudyArm,
    center_covariate,
    emit_dataset,
    harmonize_doses,
    parse_dataset,
    select_reference_arm,
    validate_network,
)
from .model import (
    CovariateSpec,
    DoseEffectModel,
    ModelSpec,
    ParameterState,
    PriorSet,
    parameter_layout,
    preset,
)
from .sampler import PosteriorDraws, SamplerConfig, run
from .splines import KnotSet, SplineDesign, build_design, dose_effect, place_knots, rcs_basis

__version__ = "0.1.0"

__all__ = [
    "PLACEBO",
    "AgentInfo",
    "CovariateSpec",
    "Dataset",
    "DoseEffectModel",
    "EquivalenceTable",
    "KnotSet",
    "ModelSpec",
    "ParameterState",
    "PosteriorDraws",
    "PriorSet",
    "SamplerConfig",
    "SplineDesign",
    "Study",
    "StudyArm",
    "active_backend",
    "build_design",
    "center_covariate",
    "dose_effect",
    "emit_dataset",
    "harmonize_doses",
    "parameter_layout",
    "parse_dataset",
    "place_knots",
    "preset",
    "rcs_basis",
    "run",
    "select_reference_arm",
    "validate_network",
    "__version__",
]
