"""Smooth unbounded private continual counting with log-perturbed Toeplitz factors."""

__version__ = "0.1.0"

from .factor import FactorPair, FactorParams, coeffs_f
from .mechanism import PrivacyParams, SideInfo, init, variance_at
from .sensitivity import compute_sensitivity

__all__ = [
    "FactorPair",
    "FactorParams",
    "PrivacyParams",
    "SideInfo",
    "coeffs_f",
    "compute_sensitivity",
    "init",
    "variance_at",
]
