"""Orthonormal modal bases of P_r on the reference segment and triangle.

The triangle basis is obtained by orthonormalising the products
``P_a(2x - 1) P_b(2y - 1)`` (``a + b <= r``, ordered by total degree) against
the exact L2 inner product of the reference triangle.  The ordering makes the
basis hierarchical: the first ``(k + 1)(k + 2) / 2`` functions span P_k.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quadrature import quadrature_rule


def dim_p(r: int) -> int:
    """Dimension of P_r in two variables."""
    return (r + 1) * (r + 2) // 2


def legendre_table(n: int, x):
    """Legendre polynomials ``P_0..P_n`` and derivatives at ``x`` on [-1, 1].

    Returns arrays of shape ``x.shape + (n + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    P = np.empty(x.shape + (n + 1,))
    dP = np.empty_like(P)
    P[..., 0] = 1.0
    dP[..., 0] = 0.0
    if n >= 1:
        P[..., 1] = x
        dP[..., 1] = 1.0
    for k in range(2, n + 1):
        P[..., k] = ((2 * k - 1) * x * P[..., k - 1] - (k - 1) * P[..., k - 2]) / k
        dP[..., k] = dP[..., k - 2] + (2 * k - 1) * P[..., k - 1]
    return P, dP


def _monomial_order(r):
    return [(a, d - a) for d in range(r + 1) for a in range(d, -1, -1)]


def _raw_basis(r, points):
    points = np.asarray(points, dtype=float)
    s = 2.0 * points[..., 0] - 1.0
    t = 2.0 * points[..., 1] - 1.0
    Ps, dPs = legendre_table(r, s)
    Pt, dPt = legendre_table(r, t)
    order = _monomial_order(r)
    ia = np.array([a for a, _ in order])
    ib = np.array([b for _, b in order])
    val = Ps[..., ia] * Pt[..., ib]
    gx = 2.0 * dPs[..., ia] * Pt[..., ib]
    gy = 2.0 * Ps[..., ia] * dPt[..., ib]
    return val, np.stack([gx, gy], axis=-1)


@lru_cache(maxsize=None)
def _orthonormal_coefficients(r):
    rule = quadrature_rule("triangle", 2 * r)
    val, _ = _raw_basis(r, rule.points)
    coeffs = np.eye(val.shape[1])
    # two Cholesky passes: the raw product basis is ill-conditioned on the
    # triangle for r >= 4
    for _ in range(2):
        phi = val @ coeffs
        gram = phi.T @ (rule.weights[:, None] * phi)
        L = np.linalg.cholesky(gram)
        coeffs = coeffs @ np.linalg.inv(L).T
    coeffs.setflags(write=False)
    return coeffs


def reference_basis(r: int, points):
    """Values ``(..., nb)`` and reference gradients ``(..., nb, 2)`` of the
    L2-orthonormal basis of P_r on the reference triangle."""
    if r < 0:
        raise ValueError("degree must be non-negative")
    C = _orthonormal_coefficients(int(r))
    val, grad = _raw_basis(int(r), points)
    return val @ C, np.einsum("...kd,kj->...jd", grad, C)


def segment_basis(r: int, x):
    """L2(0, 1)-orthonormal shifted Legendre basis and derivatives."""
    x = np.asarray(x, dtype=float)
    P, dP = legendre_table(r, 2.0 * x - 1.0)
    scale = np.sqrt(2.0 * np.arange(r + 1) + 1.0)
    return P * scale, 2.0 * dP * scale
