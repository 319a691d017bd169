"""Dirac eigenvalue estimates in terms of Codazzi tensors: numerical workbench."""
from .clifford import CliffordRep, build_clifford, form_mul, vector_mul
from .deformation import CodazziField, TrigPoly, deform, invariants
from .torus import TorusSpec

__all__ = [
    "CliffordRep",
    "CodazziField",
    "TorusSpec",
    "TrigPoly",
    "build_clifford",
    "deform",
    "form_mul",
    "invariants",
    "vector_mul",
]
__version__ = "0.1.0"
