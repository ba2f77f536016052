import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapdg.mesh import build_structured_mesh, refine_uniform
from plapdg.penalty import (C_INV, build_penalty, inverse_constant_G,
                            mu_epsilon, parse_exponent, qn_inverse_constant,
                            rationalize_exponent, select_epsilon)
from plapdg.space import DgSpace


@pytest.mark.parametrize("num,den,k,l", [(4, 1, 1, 1), (5, 2, 1, 4), (9, 2, 5, 4),
                                         (3, 1, 1, 2), (7, 3, 1, 6)])
def test_rationalize(num, den, k, l):
    e = rationalize_exponent(num, den)
    assert (e.k_p, e.l_p) == (k, l)
    assert math.gcd(e.k_p, e.l_p) == 1
    assert 2 + Fraction(2 * e.k_p, e.l_p) == e.p
    assert 1 / e.p + 1 / e.conjugate == 1


@given(st.integers(1, 60), st.integers(1, 60))
def test_rationalize_property(a, b):
    p = 2 + Fraction(a, b)
    e = rationalize_exponent(p.numerator, p.denominator)
    assert 2 + Fraction(2 * e.k_p, e.l_p) == p
    assert math.gcd(e.k_p, e.l_p) == 1


def test_p_at_most_two_rejected():
    with pytest.raises(ValueError):
        rationalize_exponent(2, 1)
    with pytest.raises(ValueError):
        rationalize_exponent(3, 2)
    lin = rationalize_exponent(2, 1, linear_mode=True)
    assert lin.is_linear and lin.k_p == 0


@pytest.mark.parametrize("text,expected", [("2.5", Fraction(5, 2)), ("4", Fraction(4)),
                                           ("9/2", Fraction(9, 2)), (4.5, Fraction(9, 2))])
def test_parse_exponent(text, expected):
    assert parse_exponent(text).p == expected


def test_G_examples():
    p4 = parse_exponent("4")
    assert inverse_constant_G(0.5, 1.0, 1, p4) == pytest.approx(512.0)
    assert inverse_constant_G(0.5, 1.0, 2, p4) == pytest.approx(1536.0)
    assert inverse_constant_G(0.25, 1.0, 2, p4) == pytest.approx(2 * 1536.0)


def test_qn_constant_grouping():
    # the two groupings agree at r = 1 and differ for r > 1
    p = parse_exponent("5/2")
    assert qn_inverse_constant(0.5, 1.0, 1, p) == pytest.approx(
        2 ** (2.5 / 2 + 1) * C_INV[2] * 1.0 / (2 * 0.5))
    assert qn_inverse_constant(0.5, 1.0, 3, p) < inverse_constant_G(0.5, 1.0, 3, p)


def test_epsilon_example():
    # C̃ = (2^3 + 2^4 + 2^5) + 1 = 57 for p = 4, C1 = 1; first term 2^-3 / 70
    eps = select_epsilon(parse_exponent("4"), -1.0, 1.0, 1.0)
    assert eps == pytest.approx(1 / 560, rel=1e-14)


@given(st.sampled_from(["5/2", "3", "4", "9/2", "7"]),
       st.sampled_from([-1.0, 0.0, 1.0, 0.3]),
       st.floats(0.01, 10), st.floats(0.01, 10))
def test_epsilon_at_most_quarter(p, theta, c1, c2):
    eps = select_epsilon(parse_exponent(p), theta, c1, c2)
    assert 0 < eps <= 0.25


def test_epsilon_theta_zero_drops_second_term():
    p = parse_exponent("7")
    # with a negligible first term, 2^(4-p)/|θ| = 1/8 binds for |θ| = 1
    assert select_epsilon(p, 1.0, 1e-9, 1e9) == pytest.approx(1 / 8)
    assert select_epsilon(p, 0.0, 1e-9, 1e9) == pytest.approx(1 / 4)
    with pytest.raises(ValueError):
        select_epsilon(p, 2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        select_epsilon(p, 0.0, 0.0, 1.0)


def test_uniform_weights_are_half(small_mesh):
    pen = build_penalty(small_mesh, DgSpace(small_mesh, 2), parse_exponent("4"))
    inner = ~small_mesh.boundary_flags
    assert np.allclose(pen.w_plus[inner], 0.5)
    assert np.allclose(pen.w_minus[inner], 0.5)
    assert np.all(pen.w_plus[~inner] == 1.0)
    assert np.all(pen.w_minus[~inner] == 0.0)


@pytest.mark.parametrize("mode", ["practical", "theoretical"])
def test_penalty_invariants(mode, small_mesh):
    deg = 1 + np.arange(small_mesh.n_elements) % 4
    space = DgSpace(small_mesh, deg)
    pen = build_penalty(small_mesh, space, parse_exponent("9/2"), theta=-1,
                        mode=mode, C1=1.0, C2=0.2)
    assert np.allclose(pen.sigma * (pen.zeta_plus + pen.zeta_minus), 1.0, rtol=1e-14)
    assert np.allclose(pen.w_plus + pen.w_minus, 1.0, rtol=1e-14)
    assert np.all((pen.w_plus >= 0) & (pen.w_plus <= 1))
    # good-penalty bound: sigma <= mu * min(m G) / eps  (eps/mu = 1 in practical mode)
    ratio = 1.0 if mode == "practical" else pen.epsilon / pen.mu
    fe = small_mesh.face_elements
    mg = np.minimum(3 * pen.G_plus, np.where(small_mesh.boundary_flags, np.inf, 3 * pen.G_minus))
    assert np.all(pen.sigma <= mg / ratio * (1 + 1e-14))
    assert fe.shape[0] == len(pen.sigma)


def test_mixed_degree_weights(unit_square_two):
    space = DgSpace(unit_square_two, [1, 5])
    pen = build_penalty(unit_square_two, space, parse_exponent("4"),
                        mode="theoretical", C1=1.0, C2=1.0)
    f = int(np.flatnonzero(~unit_square_two.boundary_flags)[0])
    plus = unit_square_two.face_elements[f, 0]
    lo, hi = (pen.w_plus[f], pen.w_minus[f]) if space.degrees[plus] == 1 \
        else (pen.w_minus[f], pen.w_plus[f])
    assert lo > hi
    bound = pen.mu * 3 * min(pen.G_plus[f], pen.G_minus[f]) / pen.epsilon
    assert pen.sigma[f] <= bound


def test_sigma_hand_evaluation(unit_square_two):
    """Independent evaluation of the zeta formulas on the 2-element mesh."""
    m = unit_square_two
    pen = build_penalty(m, DgSpace(m, 1), parse_exponent("4"),
                        mode="theoretical", C1=1.0, C2=1.0)
    eps = 1 / 560
    mu = max(1.0, 1 / (4 * eps))
    for f in range(m.n_interfaces):
        F = m.face_lengths[f]
        G = 2 ** 3 * 4 * 16 * 1 * F / (2 * 0.5)
        zeta = eps / (3 * mu * G)
        expected = 1 / zeta if m.boundary_flags[f] else 1 / (2 * zeta)
        assert pen.sigma[f] == pytest.approx(expected, rel=1e-12)
    assert pen.mu == mu_epsilon(eps)


def test_sigma_monotone_in_degree(small_mesh):
    p = parse_exponent("5/2")
    base = np.ones(small_mesh.n_elements, dtype=int)
    s0 = build_penalty(small_mesh, DgSpace(small_mesh, base), p).sigma
    rng = np.random.default_rng(1)
    for _ in range(5):
        up = base + rng.integers(0, 3, small_mesh.n_elements)
        s1 = build_penalty(small_mesh, DgSpace(small_mesh, up), p).sigma
        assert np.all(s1 >= s0 * (1 - 1e-14))


def test_linear_mode_scales_like_F_over_K():
    m0 = build_structured_mesh((0, 1, 0, 1), 0.5)
    m1 = refine_uniform(m0)
    p2 = parse_exponent("2")
    s0 = build_penalty(m0, DgSpace(m0, 2), p2, mode="theoretical", epsilon=0.25).sigma
    s1 = build_penalty(m1, DgSpace(m1, 2), p2, mode="theoretical", epsilon=0.25).sigma
    # |F| / |K| doubles under red refinement
    assert s1.max() == pytest.approx(2 * s0.max(), rel=1e-12)
    assert s1.min() == pytest.approx(2 * s0.min(), rel=1e-12)


def test_bad_arguments(small_mesh):
    space = DgSpace(small_mesh, 1)
    p = parse_exponent("3")
    with pytest.raises(ValueError):
        build_penalty(small_mesh, space, p, theta=1.5)
    with pytest.raises(ValueError):
        build_penalty(small_mesh, space, p, mode="magic")
    with pytest.raises(ValueError):
        build_penalty(small_mesh, space, p, user_scale=0.0)
    other = build_structured_mesh((0, 1, 0, 1), 0.5)
    with pytest.raises(ValueError):
        build_penalty(other, space, p)
