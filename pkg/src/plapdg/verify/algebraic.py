"""Sampled checks of the algebraic inequalities behind the stability analysis.

Two kinds of routine live here:

* :func:`estimate_lemma21_constants` estimates the constants in the
  continuity / strong-monotonicity bounds of the regularised flux
  ``F_a(y) = (a² + |y|²)^{(p-2)/2} y`` by extreme ratios over random samples.
* :func:`check_algebraic` verifies four Young / triangle-type inequalities
  whose constants are explicit, counting violations like the polynomial
  checks do.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .checks import CheckReport, RATIO_TOL, _finish

__all__ = ["estimate_lemma21_constants", "check_algebraic", "flux_difference",
           "ALGEBRAIC_LEMMAS"]

ALGEBRAIC_LEMMAS = ("young_original", "young", "young_generalised", "tri_vec")


def _as_float(p) -> float:
    if isinstance(p, str):
        return float(Fraction(p))
    return float(p)


def flux_difference(p: float, a, y, z):
    """F_a(y) - F_a(z) evaluated without cancellation for y ≈ z.

    Writes the difference as ρ(y)(y - z) + (ρ(y) - ρ(z)) z with
    ρ(x) = (a² + |x|²)^m, m = (p-2)/2, and forms ρ(y) - ρ(z) from
    |y|² - |z|² = (y - z)·(y + z) through ``expm1``/``log1p``.
    """
    a = np.asarray(a, dtype=float)
    m = 0.5 * (p - 2.0)
    sy = a * a + np.einsum("...i,...i->...", y, y)
    sz = a * a + np.einsum("...i,...i->...", z, z)
    ds = np.einsum("...i,...i->...", y - z, y + z)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_y = np.where(sy > 0, sy ** m, 0.0) if m != 0 else np.ones_like(sy)
        rho_z = np.where(sz > 0, sz ** m, 0.0) if m != 0 else np.ones_like(sz)
        rel = np.where(sz > 0, ds / np.where(sz > 0, sz, 1.0), 0.0)
        drho = np.where((sz > 0) & (rel > -1.0),
                        rho_z * np.expm1(m * np.log1p(np.maximum(rel, -1.0 + 1e-300))),
                        rho_y - rho_z)
    if m == 0:
        drho = np.zeros_like(sy)
    return rho_y[..., None] * (y - z) + drho[..., None] * z


def _unit(rng, n):
    t = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack([np.cos(t), np.sin(t)], axis=-1)


def _disk(rng, n, radius):
    return radius * np.sqrt(rng.uniform(0.0, 1.0, n))[:, None] * _unit(rng, n)


def _lemma21_samples(rng, n):
    """(a, y, z) with |y|, |z| ≤ 10 and a ∈ [0, 10]: a generic block plus
    blocks concentrating on a = 0, y ≈ z, collinear pairs and tiny a."""
    sizes = np.array([0.4, 0.15, 0.2, 0.15, 0.1])
    counts = np.floor(sizes * n).astype(int)
    counts[0] += n - counts.sum()
    a, y, z = [], [], []

    k = counts[0]
    a.append(rng.uniform(0.0, 10.0, k))
    y.append(_disk(rng, k, 10.0))
    z.append(_disk(rng, k, 10.0))

    k = counts[1]
    a.append(np.zeros(k))
    y.append(_disk(rng, k, 10.0))
    z.append(_disk(rng, k, 10.0))

    # near-degenerate: |y - z| ≤ 1e-6
    k = counts[2]
    yy = _disk(rng, k, 10.0)
    delta = 1e-6 * rng.uniform(0.0, 1.0, k)[:, None] * _unit(rng, k)
    aa = np.where(rng.uniform(size=k) < 0.5, 0.0, rng.uniform(0.0, 10.0, k))
    a.append(aa)
    y.append(yy)
    z.append(yy + delta)

    # collinear and antipodal pairs z = t y, t ∈ [-1, 1]
    k = counts[3]
    yy = _disk(rng, k, 10.0)
    t = rng.uniform(-1.0, 1.0, k)
    a.append(10.0 * rng.uniform(0.0, 1.0, k) ** 3)
    y.append(yy)
    z.append(t[:, None] * yy)

    # a small relative to |y|, |z|
    k = counts[4]
    a.append(10.0 ** rng.uniform(-6.0, 1.0, k))
    y.append(_disk(rng, k, 10.0))
    z.append(_disk(rng, k, 10.0))

    return np.concatenate(a), np.concatenate(y), np.concatenate(z)


def lemma21_ratios(p, a, y, z):
    """Ratios (continuity, monotonicity) of the two bounds; NaN where both
    sides vanish."""
    p = _as_float(p)
    dF = flux_difference(p, a, y, z)
    d = y - z
    nd = np.linalg.norm(d, axis=-1)
    scale = (a + np.linalg.norm(y, axis=-1) + np.linalg.norm(z, axis=-1)) ** (p - 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cont = np.linalg.norm(dF, axis=-1) / (scale * nd)
        mono = np.einsum("...i,...i->...", dF, d) / (scale * nd * nd)
    bad = ~(nd > 0) | ~(scale > 0)
    cont[bad] = np.nan
    mono[bad] = np.nan
    return cont, mono


def estimate_lemma21_constants(p, n_samples: int = 200_000, seed: int = 0):
    """Return ``(C1_est, C2_est)``.

    ``C1_est`` is the largest observed continuity ratio, so it
    under-estimates the true constant. ``C2_est`` is the smallest observed
    monotonicity ratio, so it over-estimates the true constant. Samples where
    both sides vanish (y = z) are skipped.
    """
    pf = _as_float(p)
    if pf <= 1.0:
        raise ValueError("p must exceed 1")
    rng = np.random.default_rng(seed)
    a, y, z = _lemma21_samples(rng, int(n_samples))
    cont, mono = lemma21_ratios(pf, a, y, z)
    return float(np.nanmax(cont)), float(np.nanmin(mono))


# ---------------------------------------------------------------------------
# inequalities with explicit constants

def _mu(eps):
    return np.maximum(1.0, 1.0 / (4.0 * eps))


def _magnitudes(rng, n, lo=-3.0, hi=3.0):
    """Non-negative scalars spread over several decades, with exact zeros
    mixed in."""
    x = 10.0 ** rng.uniform(lo, hi, n)
    x[rng.uniform(size=n) < 0.05] = 0.0
    return x


def _ratio(lhs, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0),
                       np.where(lhs > 0, np.inf, 0.0))
    return out


def young_original_ratio(p, b1, b2, eps):
    q = p / (p - 1.0)
    rhs = eps ** p / p * b1 ** p + b2 ** q / (q * eps ** q)
    return _ratio(b1 * b2, rhs)


def young_ratio(p, alpha, b1, b2, eps):
    lhs = (alpha + b1) ** (p - 2.0) * b1 * b2
    rhs = (_mu(eps) * (alpha + b1) ** (p - 2.0) * b1 ** 2
           + eps * (alpha + b2) ** (p - 2.0) * b2 ** 2)
    return _ratio(lhs, rhs)


def young_generalised_ratio(p, alpha, b1, b2, eps, gamma):
    lhs = (alpha + b1) ** (p - 2.0) * b1 * b2
    rhs = (_mu(eps) / gamma * (alpha + b1) ** (p - 2.0) * b1 ** 2
           + gamma * eps * (alpha + gamma * b2) ** (p - 2.0) * b2 ** 2)
    return _ratio(lhs, rhs)


def tri_vec_ratio(p, lam, y, z):
    def phi(v):
        n = np.linalg.norm(v, axis=-1)
        return (lam + n) ** (p - 2.0) * n * n
    const = max(2.0, 2.0 ** (p - 1.0))
    return _ratio(phi(y + z), const * (phi(y) + phi(z)))


def _vectors(rng, n):
    """Random 2-vectors with magnitudes over several decades, including the
    extremal configurations y = z and y = -z."""
    y = _magnitudes(rng, n)[:, None] * _unit(rng, n)
    z = _magnitudes(rng, n)[:, None] * _unit(rng, n)
    pick = rng.uniform(size=n)
    z = np.where((pick < 0.1)[:, None], y, z)
    z = np.where(((pick >= 0.1) & (pick < 0.2))[:, None], -y, z)
    return y, z


def check_algebraic(p, n_samples: int = 100_000, seed: int = 0) -> CheckReport:
    """Verify the four inequalities on ``n_samples`` random inputs each.

    The returned report aggregates all four; ``extra`` holds the per-inequality
    violation count and maximum ratio.
    """
    pf = _as_float(p)
    if pf < 2.0:
        raise ValueError("the Young-type bounds need p ≥ 2")
    rng = np.random.default_rng(seed)
    n = int(n_samples)
    ratios = {}

    b1, b2 = _magnitudes(rng, n), _magnitudes(rng, n)
    eps = 10.0 ** rng.uniform(-3.0, 1.0, n)
    # the equality case (ε b1)^p = (b2 / ε)^{p'}
    eq = rng.uniform(size=n) < 0.1
    b2 = np.where(eq, eps * (eps * b1) ** (pf - 1.0), b2)
    ratios["young_original"] = young_original_ratio(pf, b1, b2, eps)

    alpha = _magnitudes(rng, n)
    b1, b2 = _magnitudes(rng, n), _magnitudes(rng, n)
    eps = 10.0 ** rng.uniform(-3.0, 1.0, n)
    ratios["young"] = young_ratio(pf, alpha, b1, b2, eps)

    alpha = _magnitudes(rng, n)
    b1, b2 = _magnitudes(rng, n), _magnitudes(rng, n)
    eps = 10.0 ** rng.uniform(-3.0, 1.0, n)
    gamma = 10.0 ** rng.uniform(-3.0, 3.0, n)
    ratios["young_generalised"] = young_generalised_ratio(pf, alpha, b1, b2, eps, gamma)

    lam = _magnitudes(rng, n)
    y, z = _vectors(rng, n)
    ratios["tri_vec"] = tri_vec_ratio(pf, lam, y, z)

    extra = {}
    for name, r in ratios.items():
        extra[name] = {"violations": int((r > 1.0 + RATIO_TOL).sum()),
                       "max_ratio": float(np.max(r))}
    all_r = np.concatenate(list(ratios.values()))
    report = _finish("algebraic", all_r, {"p": str(p)}, seed, extra=extra)
    report.n_samples = n * len(ratios)
    return report
