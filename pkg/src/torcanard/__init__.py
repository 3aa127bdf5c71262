"""Canard cycles of slow-fast flows on the two-torus.

The package builds families of fields x' = f(x, y), y' = eps with a folded
slow curve, predicts their canard limit cycles from the singular release
map, and verifies the prediction numerically by two-sided shooting.
"""
from .errors import (ConstructionError, DomainError, NumericalError, StiffnessError,
                     UndefinedMapError, ValidationError)
from .family_builder import Family, SegmentLadder, build_family, fixture_family, fixture_ladder
from .flow import FlowConfig, TorusFlow
from .singular_tools import ReleaseMap, predict
from .slow_curve import SectionSet, SlowCurveModel

__version__ = "0.1.0"

__all__ = [
    "ConstructionError", "DomainError", "NumericalError", "StiffnessError",
    "UndefinedMapError", "ValidationError", "Family", "SegmentLadder", "build_family",
    "fixture_family", "fixture_ladder", "FlowConfig", "TorusFlow", "ReleaseMap", "predict",
    "SectionSet", "SlowCurveModel", "__version__",
]
