"""finslergeo: numerical pseudo-Finsler geometry on tangent-bundle samples.

Evaluates the full chain Lagrangian -> metric -> spray -> connection ->
curvature -> Ricci, detects Berwald-type geometries, and quantifies the
metrizability obstruction carried by the skew part of the affine Ricci
tensor.
"""

__version__ = "0.1.0"

from .defs import DslLagrangian, FamilyInstance, LagrangianDef, TangentSample
from .jets import DomainError, Jet, extract_partial, seed

__all__ = [
    "__version__",
    "DslLagrangian",
    "FamilyInstance",
    "LagrangianDef",
    "TangentSample",
    "DomainError",
    "Jet",
    "extract_partial",
    "seed",
]
