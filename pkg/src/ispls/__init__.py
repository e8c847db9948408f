"""Integrative sparse partial least squares (iSPLS)."""
from .data import (
    Contrast,
    CrossProduct,
    DataError,
    DirectionState,
    FitResult,
    Model,
    MultiStudyData,
    PenaltySpec,
    StudyData,
    build_cross_products,
    standardize,
)
from .pls import LatentModel, first_direction, latent_regress, predict
from .solver import ContrastWeights, IsplsConfig, fit_ispls
from .spls import SplsConfig, fit_spls, spls_w_step

__all__ = [
    "Contrast",
    "ContrastWeights",
    "CrossProduct",
    "DataError",
    "DirectionState",
    "FitResult",
    "IsplsConfig",
    "LatentModel",
    "Model",
    "MultiStudyData",
    "PenaltySpec",
    "SplsConfig",
    "StudyData",
    "build_cross_products",
    "first_direction",
    "fit_ispls",
    "fit_spls",
    "latent_regress",
    "predict",
    "spls_w_step",
    "standardize",
]
