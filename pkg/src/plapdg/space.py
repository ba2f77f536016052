"""Broken polynomial spaces S^r_T and functions living in them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .basis import dim_p, reference_basis
from .mesh import TriMesh
from .quadrature import quadrature_rule

__all__ = ["DgSpace", "DgFunction", "eval_dg", "project"]


class DgSpace:
    """Discontinuous piecewise polynomials with per-element degree ``r_K``.

    Element ``K`` owns the contiguous dof range
    ``dof_offsets[K]:dof_offsets[K + 1]``; local dofs are the coefficients of
    the orthonormal reference basis pulled back by the affine map.
    """

    def __init__(self, mesh: TriMesh, degrees):
        self.mesh = mesh
        degrees = np.broadcast_to(np.asarray(degrees, dtype=np.int64),
                                  (mesh.n_elements,)).copy()
        if np.any(degrees < 0):
            raise ValueError("polynomial degrees must be non-negative")
        degrees.setflags(write=False)
        self.degrees = degrees
        local = (degrees + 1) * (degrees + 2) // 2
        offsets = np.zeros(mesh.n_elements + 1, dtype=np.int64)
        np.cumsum(local, out=offsets[1:])
        offsets.setflags(write=False)
        self.dof_offsets = offsets

    @property
    def n_dofs(self) -> int:
        return int(self.dof_offsets[-1])

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    def local_dim(self, element: int) -> int:
        return dim_p(int(self.degrees[element]))

    def element_dofs(self, element: int) -> np.ndarray:
        return np.arange(self.dof_offsets[element],
                         self.dof_offsets[element + 1])

    @cached_property
    def groups(self) -> dict[int, np.ndarray]:
        """Element indices grouped by polynomial degree."""
        return {int(r): np.flatnonzero(self.degrees == r)
                for r in np.unique(self.degrees)}

    def group_dofs(self, elements: np.ndarray, r: int) -> np.ndarray:
        return self.dof_offsets[elements][:, None] + np.arange(dim_p(r))

    def zeros(self) -> "DgFunction":
        return DgFunction(self, np.zeros(self.n_dofs))

    def __repr__(self):
        return (f"DgSpace(n_elements={self.mesh.n_elements}, "
                f"degrees={sorted(self.groups)}, n_dofs={self.n_dofs})")


@dataclass
class DgFunction:
    space: DgSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ValueError(
                f"expected {self.space.n_dofs} coefficients, got "
                f"{self.coefficients.shape}")

    def local(self, element: int) -> np.ndarray:
        o = self.space.dof_offsets
        return self.coefficients[o[element]:o[element + 1]]

    def copy(self) -> "DgFunction":
        return DgFunction(self.space, self.coefficients.copy())

    def __call__(self, element, points):
        return eval_dg(self, element, points)


def eval_dg(fn: DgFunction, element: int, points, tol: float = 1e-12):
    """Values ``(n,)`` and physical gradients ``(n, 2)`` of ``fn`` at physical
    ``points`` inside ``element``."""
    mesh = fn.space.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ref = mesh.to_reference(element, pts)
    bary = np.column_stack([1.0 - ref.sum(axis=1), ref])
    if np.any(bary < -tol):
        raise ValueError(f"point(s) outside element {element}")
    r = int(fn.space.degrees[element])
    phi, dphi = reference_basis(r, ref)
    c = fn.local(element)
    grad_ref = np.einsum("njd,j->nd", dphi, c)
    return phi @ c, grad_ref @ mesh.inverse_jacobians[element]


def project(space: DgSpace, func, degree: int | None = None) -> DgFunction:
    """Element-wise L2 projection of ``func(points (n, 2)) -> (n,)``."""
    mesh = space.mesh
    coeffs = np.zeros(space.n_dofs)
    for r, elems in space.groups.items():
        rule = quadrature_rule("triangle", degree if degree is not None
                               else 2 * r + 8)
        phi, _ = reference_basis(r, rule.points)
        a = mesh.vertices[mesh.elements[elems, 0]]
        x = a[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians[elems],
                                      rule.points)
        vals = np.asarray(func(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
        local = np.einsum("eq,q,qj->ej", vals, rule.weights, phi)
        coeffs[space.group_dofs(elems, r)] = local
    return DgFunction(space, coeffs)
