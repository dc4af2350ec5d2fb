"""Centroaffine invariants of hypersurfaces and the classification of
hypersurfaces with parallel cubic form."""

from .errors import CaffineError
from .geometry import ImmersionChart, invariants_at, verify_parallel
from .classify import ClassifyConfig, classify_point, classify_tensor

__version__ = "0.1.0"

__all__ = [
    "CaffineError",
    "ClassifyConfig",
    "ImmersionChart",
    "classify_point",
    "classify_tensor",
    "invariants_at",
    "verify_parallel",
]
