"""Gauss rules on the unit segment [0, 1] and the reference triangle
{(x, y): x, y >= 0, x + y <= 1}.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre and
Gauss-Jacobi(1, 0) rules; an ``n``-point-per-direction rule is exact for
total degree ``2n - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 80


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray    # (n, dim) reference coordinates
    weights: np.ndarray   # (n,)
    exactness_degree: int
    shape: str

    def __len__(self):
        return len(self.weights)


def _check_degree(degree):
    degree = int(degree)
    if degree < 0:
        raise ValueError("quadrature degree must be non-negative")
    if degree > MAX_DEGREE:
        raise ValueError(
            f"quadrature degree {degree} exceeds implemented maximum "
            f"{MAX_DEGREE}")
    return degree


@lru_cache(maxsize=None)
def _segment(degree):
    n = degree // 2 + 1
    x, w = roots_legendre(n)
    pts = 0.5 * (x + 1.0)
    rule = QuadRule(pts[:, None], 0.5 * w, 2 * n - 1, "segment")
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def _triangle(degree):
    n = degree // 2 + 1
    a, wa = roots_legendre(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)  # weight (1 - b)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    x = 0.25 * (1.0 + A) * (1.0 - B)
    y = 0.5 * (1.0 + B)
    w = WA * WB / 8.0
    pts = np.column_stack([x.ravel(), y.ravel()])
    rule = QuadRule(pts, w.ravel(), 2 * n - 1, "triangle")
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def quadrature_rule(shape: str, degree: int) -> QuadRule:
    """Return a rule on the reference ``shape`` exact to at least ``degree``."""
    degree = _check_degree(degree)
    if shape == "segment":
        return _segment(degree)
    if shape == "triangle":
        return _triangle(degree)
    raise ValueError(f"unknown reference shape {shape!r}")


def subdivide_triangle(vertices: np.ndarray) -> np.ndarray:
    """Split triangles ``(..., 3, 2)`` into 4 congruent children
    ``(..., 4, 3, 2)``."""
    a, b, c = vertices[..., 0, :], vertices[..., 1, :], vertices[..., 2, :]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = [
        (a, ab, ca),
        (ab, b, bc),
        (ca, bc, c),
        (ab, bc, ca),
    ]
    return np.stack([np.stack(k, axis=-2) for k in kids], axis=-3)
