"""Quadrature, reference bases and the DG space."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapdg.basis import dim_p, reference_basis, segment_basis
from plapdg.mesh import build_structured_mesh
from plapdg.quadrature import MAX_DEGREE, quadrature_rule, subdivide_triangle
from plapdg.space import DgFunction, DgSpace, eval_dg, project

from conftest import random_mesh


def _triangle_monomial(a, b):
    # ∫_T̂ x^a y^b = a! b! / (a + b + 2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_segment_degree_three():
    rule = quadrature_rule("segment", 3)
    assert len(rule) == 2
    assert rule.weights @ rule.points[:, 0] ** 3 == pytest.approx(0.25, abs=1e-14)


def test_triangle_degree_two():
    rule = quadrature_rule("triangle", 2)
    x, y = rule.points.T
    assert rule.weights @ (x ** 2 + y ** 2) == pytest.approx(1 / 6, abs=1e-13)


@pytest.mark.parametrize("shape,measure", [("segment", 1.0), ("triangle", 0.5)])
@pytest.mark.parametrize("degree", [0, 1, 5, 12, 25])
def test_weights_sum_to_measure(shape, measure, degree):
    rule = quadrature_rule(shape, degree)
    assert rule.weights.sum() == pytest.approx(measure, abs=1e-14)
    assert np.all(rule.weights > 0)
    assert rule.exactness_degree >= degree


@pytest.mark.parametrize("degree", range(1, 21))
def test_triangle_monomial_sweep(degree):
    rule = quadrature_rule("triangle", degree)
    x, y = rule.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = _triangle_monomial(a, b)
            assert rule.weights @ (x ** a * y ** b) == pytest.approx(exact, rel=1e-11)


def test_degree_limit():
    assert MAX_DEGREE >= 25
    with pytest.raises(ValueError):
        quadrature_rule("triangle", MAX_DEGREE + 1)
    with pytest.raises(ValueError):
        quadrature_rule("segment", -1)
    with pytest.raises(ValueError):
        quadrature_rule("square", 2)


def test_subdivision_preserves_area():
    tri = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    kids = subdivide_triangle(tri).reshape(-1, 3, 2)
    assert kids.shape == (4, 3, 2)
    a = kids[:, 1] - kids[:, 0]
    b = kids[:, 2] - kids[:, 0]
    areas = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    assert np.allclose(areas, 0.125)


def test_constant_basis_function():
    pts = np.random.default_rng(0).uniform(0, 0.5, (7, 2))
    phi, dphi = reference_basis(0, pts)
    assert phi.shape == (7, 1)
    assert np.allclose(phi, math.sqrt(2))
    assert np.allclose(dphi, 0)


@pytest.mark.parametrize("r", [1, 2, 3, 5])
def test_basis_is_orthonormal(r):
    rule = quadrature_rule("triangle", 2 * r)
    phi, _ = reference_basis(r, rule.points)
    assert phi.shape[1] == dim_p(r)
    gram = phi.T @ (rule.weights[:, None] * phi)
    assert np.allclose(gram, np.eye(dim_p(r)), atol=1e-12)


@pytest.mark.parametrize("r", [1, 3, 5])
def test_basis_gradients_match_finite_differences(r):
    pts = np.random.default_rng(r).uniform(0.05, 0.45, (5, 2))
    _, dphi = reference_basis(r, pts)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (reference_basis(r, pts + e)[0] - reference_basis(r, pts - e)[0]) / (2 * h)
        assert np.allclose(dphi[..., d], fd, atol=1e-7)


def test_segment_basis_orthonormal():
    rule = quadrature_rule("segment", 12)
    P, _ = segment_basis(5, rule.points[:, 0])
    assert np.allclose(P.T @ (rule.weights[:, None] * P), np.eye(6), atol=1e-13)


def test_space_dof_layout():
    mesh = build_structured_mesh((0, 1, 0, 1), 0.5)
    deg = np.arange(mesh.n_elements) % 3 + 1
    space = DgSpace(mesh, deg)
    assert space.n_dofs == sum(dim_p(int(r)) for r in deg)
    assert np.all(np.diff(space.dof_offsets) > 0)
    assert sorted(space.groups) == [1, 2, 3]
    with pytest.raises(ValueError):
        DgFunction(space, np.zeros(space.n_dofs + 1))


def test_eval_constant_and_affine(small_mesh):
    space = DgSpace(small_mesh, 2)
    one = project(space, lambda x: np.ones(len(x)))
    xfun = project(space, lambda x: x[:, 0])
    for k in (0, 7, 31):
        centroid = small_mesh.vertices[small_mesh.elements[k]].mean(axis=0)
        v, g = eval_dg(one, k, centroid)
        assert v[0] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(g, 0, atol=1e-11)
        v, g = xfun(k, centroid)
        assert v[0] == pytest.approx(centroid[0], abs=1e-12)
        assert np.allclose(g, [[1.0, 0.0]], atol=1e-11)


def test_eval_outside_element_rejected(small_mesh):
    u = DgSpace(small_mesh, 1).zeros()
    with pytest.raises(ValueError):
        eval_dg(u, 0, [[0.9, 0.9]])


def test_eval_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    mesh = random_mesh(rng)
    space = DgSpace(mesh, 3)
    u = DgFunction(space, rng.standard_normal(space.n_dofs))
    k = 5
    c = mesh.vertices[mesh.elements[k]].mean(axis=0)
    _, g = eval_dg(u, k, c)
    h = 1e-6
    fd = [(eval_dg(u, k, c + h * e)[0] - eval_dg(u, k, c - h * e)[0])[0] / (2 * h)
          for e in np.eye(2)]
    assert np.allclose(g[0], fd, atol=1e-6)


@given(st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_projection_reproduces_polynomials(r, seed):
    rng = np.random.default_rng(seed)
    mesh = build_structured_mesh((0, 1, 0, 1), 0.5)
    space = DgSpace(mesh, r)
    c = rng.standard_normal((r + 1, r + 1))

    def poly(x):
        return sum(c[a, b] * x[:, 0] ** a * x[:, 1] ** b
                   for a in range(r + 1) for b in range(r + 1 - a))

    u = project(space, poly)
    again = project(space, lambda x: _eval_global(u, x))
    assert np.allclose(u.coefficients, again.coefficients, atol=1e-10)
    k = 3
    pts = mesh.vertices[mesh.elements[k]].mean(axis=0)[None] + 0.01
    assert eval_dg(u, k, pts)[0][0] == pytest.approx(poly(pts)[0], abs=1e-10)


def _eval_global(u, x):
    """Evaluate a DgFunction at arbitrary points by locating elements."""
    mesh = u.space.mesh
    out = np.empty(len(x))
    for i, pt in enumerate(x):
        for k in range(mesh.n_elements):
            ref = mesh.to_reference(k, pt[None])[0]
            if ref.min() >= -1e-12 and ref.sum() <= 1 + 1e-12:
                out[i] = eval_dg(u, k, pt[None])[0][0]
                break
    return out


def test_global_polynomial_has_no_jumps():
    mesh = build_structured_mesh((0, 1, 0, 1), 0.3)
    space = DgSpace(mesh, 2)
    u = project(space, lambda x: 1 + x[:, 0] * x[:, 1] - 2 * x[:, 1] ** 2)
    for f in np.flatnonzero(~mesh.boundary_flags):
        kp, km = mesh.face_elements[f]
        ends = mesh.vertices[mesh.face_vertices[f]]
        pts = ends[0] + np.linspace(0, 1, 5)[:, None] * (ends[1] - ends[0])
        jump = eval_dg(u, kp, pts)[0] - eval_dg(u, km, pts)[0]
        assert np.max(np.abs(jump)) <= 1e-11
