"""Harmonic analysis on real hyperbolic space.

Fourier, Radon, delta-spherical and generalized Abel transforms on the
ball and half-space models, with Schwartz seminorms and Paley-Wiener
diagnostics.
"""
from .geometry import BoundaryPoint, HyperbolicPoint, ModelParams
from .ktypes import KTypeIndex, pdelta
from .spherical import eisenstein, harish_chandra_c, plancherel_density, spherical_fn
from .transforms import (
    CalibrationRegistry,
    Grids,
    RadialGrid,
    SpatialFunction,
    SpectralGrid,
    bump_profile,
    calibrate_plancherel,
    delta_spherical,
    euclid_fourier,
    generalized_abel,
    helgason_fourier,
    inverse_delta_spherical,
    inverse_generalized_abel,
    inverse_helgason,
    radon,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationRegistry",
    "BoundaryPoint",
    "HyperbolicPoint",
    "ModelParams",
    "KTypeIndex",
    "pdelta",
    "eisenstein",
    "harish_chandra_c",
    "plancherel_density",
    "spherical_fn",
    "Grids",
    "RadialGrid",
    "SpatialFunction",
    "SpectralGrid",
    "bump_profile",
    "calibrate_plancherel",
    "delta_spherical",
    "euclid_fourier",
    "generalized_abel",
    "helgason_fourier",
    "inverse_delta_spherical",
    "inverse_generalized_abel",
    "inverse_helgason",
    "radon",
]
