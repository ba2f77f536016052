"""Inverse-estimate and algebraic checks at small sample counts.

The full-size certification runs live in the acceptance suite.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev, legendre

from plapdg.penalty import lp_trace_constant
from plapdg.verify import (CheckReport, check_algebraic, check_interval_lemma,
                           check_markov, check_qn_trace_inverse,
                           check_trace_inverse, estimate_lemma21_constants)
from plapdg.verify.algebraic import (flux_difference, lemma21_ratios,
                                     tri_vec_ratio, young_original_ratio)
from plapdg.verify.integrate import (abs_power_line, adaptive_1d,
                                     adaptive_triangle, line_coefficients)


def chebyshev_on_unit_interval(r):
    """Legendre coefficients (in 2x - 1) of T_r(2x - 1)."""
    e = np.zeros(r + 1)
    e[r] = 1.0
    return legendre.poly2leg(chebyshev.cheb2poly(e))


# -- integrators -------------------------------------------------------------

@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.5])
def test_abs_power_of_linear_function(q):
    exact = ((1 / 3) ** (q + 1) + (2 / 3) ** (q + 1)) / (q + 1)
    assert abs_power_line(np.array([[-1 / 3, 1.0]]), q)[0] == pytest.approx(exact, rel=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.sampled_from([0.5, 1.0, 3.5]))
def test_abs_power_with_double_root_region(a, b, q):
    # (t - a)(t - b) has two roots in [0, 1]; compare with a dense split rule
    coef = np.array([[a * b, -(a + b), 1.0]])
    got = abs_power_line(coef, q)[0]
    cuts = np.unique(np.clip([0.0, min(a, b), max(a, b), 1.0], 0, 1))
    x, w = np.polynomial.legendre.leggauss(400)
    ref = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        t = lo + (hi - lo) * (x + 1) / 2
        ref += (hi - lo) / 2 * w @ np.abs((t - a) * (t - b)) ** q
    assert got == pytest.approx(ref, rel=1e-8, abs=1e-14)


def test_line_coefficients_recover_polynomial():
    starts = np.array([[0.0, 0.0], [0.2, 0.1]])
    ends = np.array([[1.0, 0.0], [0.2, 0.9]])
    coef = line_coefficients(lambda p: p[..., 0] ** 2 + p[..., 1], starts, ends, 2)
    assert np.allclose(coef[0], [0.0, 0.0, 1.0], atol=1e-13)
    assert np.allclose(coef[1], [0.04 + 0.1, 0.8, 0.0], atol=1e-13)


def test_adaptive_1d_with_break():
    def func(sid, x):
        return np.abs(x - 0.3) ** 0.5
    vals, ok = adaptive_1d(func, 1, breaks=np.array([[0.3]]), grading=2)
    exact = (0.3 ** 1.5 + 0.7 ** 1.5) / 1.5
    assert ok[0] and vals[0] == pytest.approx(exact, rel=1e-9)


def test_adaptive_triangle_conical_kink():
    # ∫ over the unit right triangle of |x|, a kink along one edge, and of
    # the cone sqrt(x² + y²), singular at a vertex
    tri = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]] * 2)

    def func(sid, x):
        cone = np.hypot(x[..., 0], x[..., 1])
        return np.where(sid[:, None] == 0, np.abs(x[..., 0]), cone)
    vals, ok = adaptive_triangle(func, tri, 6, rtol=1e-10)
    assert ok.all()
    assert vals[0] == pytest.approx(1 / 6, rel=1e-10)
    # polar coordinates: ∫_0^{π/2} (cos t + sin t)^{-3} / 3 dt
    exact = (1 + np.arcsinh(1.0) / np.sqrt(2)) / 6
    assert vals[1] == pytest.approx(exact, rel=1e-8)


# -- polynomial inverse estimates --------------------------------------------

def test_markov_for_identity():
    # v = x on [0, 1]: ‖v'‖ = 1, ‖v‖ = 1, constant 2 r² = 2
    rep = check_markov(1, coefficients=[[0.5, 0.5]])
    assert rep.max_ratio == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("r", [1, 2, 3, 5, 8])
def test_markov_is_sharp_for_chebyshev(r):
    rep = check_markov(r, coefficients=[chebyshev_on_unit_interval(r)])
    assert rep.violations == 0
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-10)


def test_markov_constants_and_random():
    assert check_markov(0, n_samples=10).max_ratio == 0.0
    rep = check_markov(4, n_samples=500, seed=3)
    assert isinstance(rep, CheckReport) and rep.passed
    assert rep.n_samples == 500 and 0 < rep.max_ratio <= 1
    with pytest.raises(ValueError):
        check_markov(-1)


@pytest.mark.parametrize("r", [1, 3, 6])
def test_interval_lemma(r):
    rep = check_interval_lemma(r, n_samples=500, seed=r)
    assert rep.passed
    sharp = check_interval_lemma(r, coefficients=[chebyshev_on_unit_interval(r)])
    assert sharp.passed
    assert rep.params["delta"] == pytest.approx(1 / (2 * (1 + 2 * r * r)))


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.5])
def test_trace_constant_functions(d, q):
    # for v ≡ const both sides are measures, so the ratio is 1 / constant
    rep = check_trace_inverse(d, 0, q, n_samples=20, seed=1)
    assert rep.max_ratio == pytest.approx(1 / lp_trace_constant(q, 0, d), rel=1e-12)


@pytest.mark.parametrize("r", [1, 2, 4])
def test_trace_one_d_below_sharp_legendre_bound(r):
    # max over degree-r v of v(1)² / ∫_0^1 v² is (r + 1)², attained by a
    # sum of Legendre polynomials
    rep = check_trace_inverse(1, r, 2.0, n_samples=2000, seed=0)
    sharp = (r + 1) ** 2 / lp_trace_constant(2.0, r, 1)
    assert rep.max_ratio <= sharp * (1 + 1e-10)
    assert rep.passed


@pytest.mark.parametrize("r,q", [(1, 0.5), (2, 1.0), (3, 3.5)])
def test_trace_two_d_small(r, q):
    rep = check_trace_inverse(2, r, q, n_samples=20, seed=2)
    assert rep.passed and rep.excluded == 0
    assert rep.max_ratio < 1


def test_trace_argument_checks():
    with pytest.raises(ValueError):
        check_trace_inverse(3, 1, 2.0)
    with pytest.raises(ValueError):
        check_trace_inverse(2, 1, 0.0)


@pytest.mark.parametrize("p", ["5/2", "4"])
def test_qn_trace_small(p):
    rep = check_qn_trace_inverse(p, 2, n_samples=20, seed=0)
    assert rep.passed and rep.excluded == 0
    assert rep.extra["max_ratio_penalty_constant"] > 0
    assert rep.extra["strict_samples"] >= min(10, rep.n_samples)
    assert rep.to_dict()["lemma"] == rep.lemma


def test_qn_trace_rejects_low_exponent():
    with pytest.raises(ValueError):
        check_qn_trace_inverse("2", 1, n_samples=2)
    with pytest.raises(ValueError):
        check_qn_trace_inverse("3", 0, n_samples=2)


def test_checks_are_seeded():
    a = check_trace_inverse(2, 2, 1.0, n_samples=10, seed=5)
    b = check_trace_inverse(2, 2, 1.0, n_samples=10, seed=5)
    c = check_trace_inverse(2, 2, 1.0, n_samples=10, seed=6)
    assert a.max_ratio == b.max_ratio != c.max_ratio


# -- algebraic inequalities --------------------------------------------------

def test_flux_difference_matches_direct_evaluation(rng):
    p, a = 3.5, 0.3
    y, z = rng.standard_normal((50, 2)), rng.standard_normal((50, 2))

    def flux(x):
        return (a * a + np.sum(x * x, axis=1, keepdims=True)) ** ((p - 2) / 2) * x
    assert np.allclose(flux_difference(p, a, y, z), flux(y) - flux(z), rtol=1e-12)


def test_flux_difference_small_separation(rng):
    # for y ≈ z the difference is the Jacobian times (y - z)
    p, a = 4.5, 0.0
    y = rng.standard_normal((20, 2))
    d = 1e-9 * rng.standard_normal((20, 2))
    n2 = np.sum(y * y, axis=1)
    m = (p - 2) / 2
    lin = (n2 ** m)[:, None] * d + (2 * m * n2 ** (m - 1) * np.sum(y * d, axis=1))[:, None] * y
    got = flux_difference(p, a, y + d, y)
    assert np.allclose(got, lin, rtol=1e-6)


def test_lemma21_at_p_two_is_identity():
    c1, c2 = estimate_lemma21_constants(2, n_samples=5000)
    assert c1 == pytest.approx(1.0, abs=1e-12)
    assert c2 == pytest.approx(1.0, abs=1e-12)
    cont, mono = lemma21_ratios(2.0, np.zeros(1), np.zeros((1, 2)), np.zeros((1, 2)))
    assert np.isnan(cont[0]) and np.isnan(mono[0])


@pytest.mark.parametrize("p", ["5/2", "4"])
def test_lemma21_constants_positive(p):
    c1, c2 = estimate_lemma21_constants(p, n_samples=20_000, seed=1)
    # Cauchy-Schwarz: each monotonicity ratio is at most its continuity ratio
    assert 0 < c2 < 1
    assert c2 <= c1
    assert 0.9 < c1 < 2


def test_young_equality_case():
    p, b1, eps = 3.0, 2.0, 0.5
    b2 = eps * (eps * b1) ** (p - 1)
    ratio = young_original_ratio(p, np.array([b1]), np.array([b2]), eps)[0]
    assert ratio == pytest.approx(1.0, rel=1e-14)


def test_tri_vec_zero_vectors():
    zero = np.zeros((1, 2))
    assert tri_vec_ratio(3.0, np.array([1.0]), zero, zero)[0] == 0.0


@pytest.mark.parametrize("p", ["2", "5/2", "4", "9/2"])
def test_algebraic_small(p):
    rep = check_algebraic(p, n_samples=5000, seed=4)
    assert rep.passed
    assert rep.n_samples == 4 * 5000
    assert set(rep.extra) == {"young_original", "young", "young_generalised", "tri_vec"}
    assert rep.max_ratio <= 1 + 1e-10


def test_algebraic_rejects_small_p():
    with pytest.raises(ValueError):
        check_algebraic(1.5, n_samples=10)
