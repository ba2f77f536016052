"""Discontinuity-penalisation and average weights for the robust IPDG form.

Per interface F with neighbours K+ and K-:

    zeta_F^± = eps / (m_K± mu_eps G_{K±,F}),
    w_F^±    = zeta_F^± / (zeta_F^+ + zeta_F^-),
    sigma_F  = 1 / (zeta_F^+ + zeta_F^-),

with G_{K,F} = 2^(p/2 + 1/k_p) C_inv p^2 k_p^2 (2(r-1)^2 + 1) |F| / (d |K|)
and mu_eps = max(1, 1/(4 eps)).  Boundary interfaces use w = (1, 0) and
sigma_F = 1/zeta_F^+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

DIM = 2
# C_inv,d for d = 1, 2, 3
C_INV = {1: 1.0, 2: 4.0, 3: 8.0}

THEORETICAL = "theoretical"
PRACTICAL = "practical"


@dataclass(frozen=True)
class RationalExponent:
    """p = 2 + 2 k_p / l_p held exactly; ``k_p == 0`` is the linear case."""

    p: Fraction
    k_p: int
    l_p: int

    @property
    def conjugate(self) -> Fraction:
        return self.p / (self.p - 1)

    @property
    def is_linear(self) -> bool:
        return self.p == 2

    def __float__(self):
        return float(self.p)

    def __str__(self):
        return str(self.p)


def rationalize_exponent(p_num: int, p_den: int = 1, *,
                         linear_mode: bool = False) -> RationalExponent:
    p = Fraction(p_num, p_den)
    if p == 2 and linear_mode:
        return RationalExponent(p, 0, 1)
    if p <= 2:
        raise ValueError(f"p must exceed 2 (got {p}); p = 2 needs linear_mode")
    half = (p - 2) / 2  # Fraction is already in lowest terms
    return RationalExponent(p, half.numerator, half.denominator)


def parse_exponent(value, *, linear_mode: bool = True) -> RationalExponent:
    """Exact exponent from a decimal string, int, Fraction or float."""
    if isinstance(value, RationalExponent):
        return value
    if isinstance(value, float):
        frac = Fraction(repr(value))
    else:
        frac = Fraction(str(value).strip())
    return rationalize_exponent(frac.numerator, frac.denominator,
                                linear_mode=linear_mode)


def degree_factor(r):
    return 2.0 * (np.asarray(r, dtype=float) - 1.0) ** 2 + 1.0


def gkf_prefactor(p: RationalExponent) -> float:
    """2^(p/2 + 1/k_p) p^2 k_p^2; in linear mode the coercivity-sufficient
    value 2^(p + 1) is used instead."""
    pf = float(p.p)
    if p.k_p == 0:
        return 2.0 ** (pf + 1.0)
    return 2.0 ** (pf / 2 + 1.0 / p.k_p) * pf ** 2 * p.k_p ** 2


def inverse_constant_G(area, face_length, r, p: RationalExponent, d: int = DIM):
    """G_{K,F} for a conforming mesh (F_K = F)."""
    return (gkf_prefactor(p) * C_INV[d] * degree_factor(r)
            * np.asarray(face_length, dtype=float) / (d * np.asarray(area, dtype=float)))


def qn_inverse_constant(area, face_length, r, p: RationalExponent, d: int = DIM):
    """Constant of the quasi-norm trace inverse estimate, grouped as
    2^(p/2 + 1/k_p) C_inv (2 p^2 k_p^2 (r-1)^2 + 1) |F| / (d |K|)."""
    pf = float(p.p)
    k = p.k_p
    r = np.asarray(r, dtype=float)
    return (2.0 ** (pf / 2 + 1.0 / k) * C_INV[d]
            * (2 * pf ** 2 * k ** 2 * (r - 1) ** 2 + 1)
            * np.asarray(face_length, dtype=float) / (d * np.asarray(area, dtype=float)))


def lp_trace_constant(q, r, d: int = DIM) -> float:
    """2^(q+1) C_inv (2 r^2 + 1) / d, to be multiplied by |F|/|K|."""
    return 2.0 ** (q + 1) * C_INV[d] * (2 * r ** 2 + 1) / d


def select_epsilon(p, theta: float, C1: float, C2: float) -> float:
    pf = float(p.p) if isinstance(p, RationalExponent) else float(p)
    if not (C1 > 0 and C2 > 0):
        raise ValueError("C1 and C2 must be positive")
    if not -1 <= theta <= 1:
        raise ValueError("theta must lie in [-1, 1]")
    pc = pf / (pf - 1)
    ctilde = (2 ** (pf - 1) + 2 ** (2 * pf - 4) + 2 ** (2 * pf - 3)) * C1 + 1
    terms = [
        2 ** (1 - pf) * C2 / (2 ** (pf - 2) * C1 + ctilde
                              + (2 ** (pf - 1) + 1) * abs(theta)),
        2 ** (4 - pf) / abs(theta) if theta != 0 else math.inf,
        (pc / 4) * (pf / 4) ** (1 / (pf - 1)),
        0.25,
    ]
    return min(terms)


def mu_epsilon(eps: float) -> float:
    return max(1.0, 1.0 / (4.0 * eps))


@lru_cache(maxsize=None)
def default_lemma21_constants(p: Fraction) -> tuple[float, float]:
    from .verify.algebraic import estimate_lemma21_constants

    return estimate_lemma21_constants(float(p), n_samples=200_000, seed=0)


@dataclass(frozen=True)
class PenaltyField:
    sigma: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    G_plus: np.ndarray
    G_minus: np.ndarray
    mode: str
    epsilon: float | None
    mu: float
    theta: float
    p: RationalExponent
    scale: float


def build_penalty(mesh, space, p: RationalExponent, theta: float = -1.0,
                  mode: str = PRACTICAL, user_scale: float = 10.0,
                  C1: float | None = None, C2: float | None = None,
                  epsilon: float | None = None) -> PenaltyField:
    """Compute sigma_F, (w_F^+, w_F^-) and zeta_F^± on every interface.

    ``practical`` mode replaces G_{K,F} by ``user_scale (2(r-1)^2+1)|F|/|K|``
    and takes eps/mu_eps = 1; ``theoretical`` mode uses G_{K,F} and the eps
    of :func:`select_epsilon` (C1, C2 default to sampled estimates).
    """
    if not -1 <= theta <= 1:
        raise ValueError("theta must lie in [-1, 1]")
    if space.mesh is not mesh:
        raise ValueError("space is defined on a different mesh")
    fe = mesh.face_elements
    flen = mesh.face_lengths
    area = mesh.areas
    deg = space.degrees
    m = mesh.faces_per_element
    bnd = mesh.boundary_flags

    if mode == THEORETICAL:
        if epsilon is None:
            if C1 is None or C2 is None:
                c1, c2 = default_lemma21_constants(p.p)
                C1 = c1 if C1 is None else C1
                C2 = c2 if C2 is None else C2
            epsilon = select_epsilon(p, theta, C1, C2)
        mu = mu_epsilon(epsilon)
        ratio = epsilon / mu

        def G(k):
            return inverse_constant_G(area[fe[:, k]], flen, deg[fe[:, k]], p)
    elif mode == PRACTICAL:
        if not user_scale > 0:
            raise ValueError("penalty scale must be positive")
        epsilon, mu, ratio = None, 1.0, 1.0

        def G(k):
            return user_scale * degree_factor(deg[fe[:, k]]) * flen / area[fe[:, k]]
    else:
        raise ValueError(f"unknown penalty mode {mode!r}")

    Gp, Gm = G(0), G(1)
    zp = ratio / (m[fe[:, 0]] * Gp)
    zm = ratio / (m[fe[:, 1]] * Gm)
    zm = np.where(bnd, 0.0, zm)
    total = zp + zm
    sigma = 1.0 / total
    wp = zp / total
    wm = zm / total
    return PenaltyField(sigma=sigma, w_plus=wp, w_minus=wm, zeta_plus=zp,
                        zeta_minus=zm, G_plus=Gp, G_minus=Gm, mode=mode,
                        epsilon=epsilon, mu=mu, theta=float(theta), p=p,
                        scale=float(user_scale))
