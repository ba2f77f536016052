"""Robust interior-penalty discontinuous Galerkin solver for the p-Laplacian
on triangle meshes, with randomised checks of the inverse estimates that
fix its penalty parameter."""

from .mesh import TriMesh, build_structured_mesh, refine_uniform
from .space import DgFunction, DgSpace
from .penalty import PenaltyField, RationalExponent, build_penalty, parse_exponent
from .assembly import FormContext, jacobian, residual
from .solver import SolveOptions, continuation_solve, newton_solve

__version__ = "0.1.0"

__all__ = ["TriMesh", "build_structured_mesh", "refine_uniform", "DgSpace",
           "DgFunction", "PenaltyField", "RationalExponent", "build_penalty",
           "parse_exponent", "FormContext", "residual", "jacobian",
           "SolveOptions", "newton_solve", "continuation_solve"]
