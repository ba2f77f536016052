"""Batched integrators for non-smooth integrands of polynomial data.

* :func:`abs_power_line` integrates |P(t)|^q over [0, 1] for many polynomials
  P at once by splitting at the real roots and using Gauss–Jacobi rules whose
  weight absorbs the |t - t_0|^q behaviour at each root.
* :func:`adaptive_1d` is a globally batched adaptive Gauss rule (8 vs 16
  points per panel) for piecewise-smooth integrands.
* :func:`adaptive_triangle` refines triangles where a rule and its
  four-child composite disagree, for integrands with point singularities.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ..quadrature import quadrature_rule, subdivide_triangle


# ---------------------------------------------------------------------------
# polynomial helpers

@lru_cache(maxsize=None)
def _cheb_fit_matrix(m):
    """Nodes on [0, 1] and the matrix mapping values there to monomial
    coefficients (low to high) of the degree m-1 interpolant."""
    k = np.arange(m)
    t = 0.5 * (1.0 - np.cos((2 * k + 1) * np.pi / (2 * m)))
    V = t[:, None] ** k[None, :]
    return t, np.linalg.inv(V)


def monomial_eval(coef, t):
    """Horner evaluation; ``coef (..., m)`` low to high, ``t (..., k)``."""
    out = np.zeros(np.broadcast_shapes(coef.shape[:-1] + (1,), t.shape))
    for k in range(coef.shape[-1] - 1, -1, -1):
        out = out * t + coef[..., k:k + 1]
    return out


def line_coefficients(evaluate, starts, ends, degree):
    """Monomial coefficients in t ∈ [0, 1] of ``v(start + t (end - start))``.

    ``evaluate(points (L, m, dim)) -> (L, m)`` must be a polynomial of total
    degree ≤ ``degree`` in the points.
    """
    m = degree + 1
    t, Vinv = _cheb_fit_matrix(m)
    pts = starts[:, None, :] + t[None, :, None] * (ends - starts)[:, None, :]
    vals = evaluate(pts)
    return vals @ Vinv.T


def _real_splits(coef):
    """Sorted split points in (0, 1) per polynomial and whether each is a
    real root.  Returns ``(splits (L, n), is_root (L, n))`` padded with 1."""
    L, m = coef.shape
    scale = np.max(np.abs(coef), axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    nz = np.abs(coef) > 1e-13 * scale[:, None]
    eff = np.where(nz.any(axis=1), m - 1 - np.argmax(nz[:, ::-1], axis=1), 0)
    nmax = max(m - 1, 1)
    splits = np.ones((L, nmax))
    is_root = np.zeros((L, nmax), dtype=bool)
    for d in np.unique(eff):
        if d < 1:
            continue
        idx = np.flatnonzero(eff == d)
        c = coef[idx, :d + 1]
        comp = np.zeros((len(idx), d, d))
        if d > 1:
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
        comp[:, :, -1] = -c[:, :d] / c[:, d:d + 1]
        lam = np.linalg.eigvals(comp)
        re, im = lam.real, np.abs(lam.imag)
        real = im <= 1e-7 * (1.0 + np.abs(re))
        # polish real roots with Newton on the polynomial itself
        x = re.copy()
        dc = c[:, 1:] * np.arange(1, d + 1)
        for _ in range(3):
            pv = monomial_eval(c, x)
            dv = monomial_eval(dc, x)
            step = np.where(real & (dv != 0), pv / np.where(dv != 0, dv, 1.0), 0.0)
            x = x - step
        # near-real complex pairs split the interval without a root weight
        near = (~real) & (im <= 0.25)
        keep = (real | near) & (x > 0.0) & (x < 1.0)
        s = np.where(keep, x, 1.0)
        order = np.argsort(s, axis=1)
        s = np.take_along_axis(s, order, axis=1)
        r = np.take_along_axis(real & keep, order, axis=1)
        # drop the duplicate split of a conjugate pair
        dup = np.zeros_like(r)
        dup[:, 1:] = (s[:, 1:] == s[:, :-1]) & (s[:, 1:] < 1.0)
        s = np.where(dup, 1.0, s)
        r = r & ~dup
        order = np.argsort(s, axis=1, kind="stable")
        splits[idx, :d] = np.take_along_axis(s, order, axis=1)
        is_root[idx, :d] = np.take_along_axis(r, order, axis=1)
    return splits, is_root


@lru_cache(maxsize=None)
def _jacobi(n, alpha, beta):
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


def abs_power_line(coef, q: float, n_nodes: int = 10, rtol: float = 1e-10,
                   max_rounds: int = 40, return_converged: bool = False):
    """∫_0^1 |P(t)|^q dt for monomial coefficients ``coef (L, m)``.

    The interval is split at the real roots of P (and at the real parts of
    nearly real complex roots); pieces ending at a root use a Gauss–Jacobi
    rule with the matching |t - t_0|^q weight.  Each piece is compared with
    the rule of twice the size and bisected until the two agree.
    """
    coef = np.atleast_2d(np.asarray(coef, dtype=float))
    L = coef.shape[0]
    q = float(q)
    if q == 2.0:
        x, w = roots_legendre(coef.shape[1] + 1)
        t = 0.5 * (x + 1.0)
        out = 0.5 * (monomial_eval(coef, t[None, :]) ** 2) @ w
        return (out, np.ones(L, dtype=bool)) if return_converged else out
    splits, is_root = _real_splits(coef)
    ends = np.concatenate([np.zeros((L, 1)), splits, np.ones((L, 1))], axis=1)
    root = np.concatenate([np.zeros((L, 1), bool), is_root,
                           np.zeros((L, 1), bool)], axis=1)
    a, b = ends[:, :-1], ends[:, 1:]
    keep = b > a
    lid = np.nonzero(keep)[0]
    A, B = a[keep], b[keep]
    RA, RB = root[:, :-1][keep], root[:, 1:][keep]
    out = np.zeros(L)
    converged = np.ones(L, dtype=bool)
    estimate = None
    for _ in range(max_rounds):
        if len(lid) == 0:
            break
        lo_val = np.empty(len(lid))
        hi_val = np.empty(len(lid))
        for qa_on in (False, True):
            for qb_on in (False, True):
                mask = (RA == qa_on) & (RB == qb_on)
                if not mask.any():
                    continue
                for n, dest in ((n_nodes, lo_val), (2 * n_nodes, hi_val)):
                    dest[mask] = _jacobi_piece(coef[lid[mask]], A[mask], B[mask],
                                               q, qa_on, qb_on, n)
        if estimate is None:
            estimate = np.bincount(lid, weights=hi_val, minlength=L)
        tol = rtol * np.abs(estimate[lid])
        ok = np.abs(hi_val - lo_val) <= np.maximum(tol, 1e-300)
        ok |= (B - A) <= 1e-15          # negligible pieces
        out += np.bincount(lid[ok], weights=hi_val[ok], minlength=L)
        bad = ~ok
        mid = 0.5 * (A[bad] + B[bad])
        lid = np.concatenate([lid[bad], lid[bad]])
        A, B = np.concatenate([A[bad], mid]), np.concatenate([mid, B[bad]])
        RA = np.concatenate([RA[bad], np.zeros(bad.sum(), bool)])
        RB = np.concatenate([np.zeros(bad.sum(), bool), RB[bad]])
    if len(lid):
        converged[np.unique(lid)] = False
        for qa_on in (False, True):
            for qb_on in (False, True):
                mask = (RA == qa_on) & (RB == qb_on)
                if mask.any():
                    v = _jacobi_piece(coef[lid[mask]], A[mask], B[mask], q,
                                      qa_on, qb_on, 2 * n_nodes)
                    out += np.bincount(lid[mask], weights=v, minlength=L)
    return (out, converged) if return_converged else out


def _jacobi_piece(coef, A, B, q, qa_on, qb_on, n):
    """∫_A^B |P|^q with the endpoint root factors moved into the weight."""
    qa = q if qa_on else 0.0
    qb = q if qb_on else 0.0
    x, w = _jacobi(n, qb, qa)
    A, B = A[:, None], B[:, None]
    half = 0.5 * (B - A)
    tt = A + half * (1.0 + x[None, :])
    h = np.abs(monomial_eval(coef, tt))
    # distances to the endpoints taken from the reference nodes, never 0
    if qa_on:
        h = h / (half * (1.0 + x[None, :]))
    if qb_on:
        h = h / (half * (1.0 - x[None, :]))
    return half[:, 0] ** (1.0 + qa + qb) * ((h ** q) @ w)


# ---------------------------------------------------------------------------
# adaptive Gauss on intervals

@lru_cache(maxsize=None)
def _gl01(n):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _sigmoid(s, m):
    """Sidi-type grading map of [0, 1] onto itself and its derivative."""
    a, b = s ** m, (1.0 - s) ** m
    den = a + b
    return a / den, m * (s * (1.0 - s)) ** (m - 1) / den ** 2


def adaptive_1d(func, n_samples: int, a=0.0, b=1.0, rtol: float = 1e-9,
                n_low: int = 8, init_panels: int = 4, max_rounds: int = 40,
                breaks=None, grading: int = 0, max_active: int = 200_000):
    """Integrate ``func(sample_ids (k,), x (k, n)) -> (k, n)`` over [a, b]
    for every sample.  Returns ``(integrals, converged)``.

    ``breaks (n_samples, k)`` (NaN-padded) lists known singular points; the
    interval is split there and, with ``grading = m > 0``, each piece is
    mapped through a degree-m sigmoidal transform that flattens endpoint
    singularities before the 8-vs-16-point comparison.
    """
    xl, wl = _gl01(n_low)
    xh, wh = _gl01(2 * n_low)
    if breaks is None:
        edges = np.linspace(a, b, init_panels + 1)
        sid = np.repeat(np.arange(n_samples), init_panels)
        base_lo = np.tile(edges[:-1], n_samples)
        base_hi = np.tile(edges[1:], n_samples)
    else:
        br = np.asarray(breaks, dtype=float).reshape(n_samples, -1)
        br = np.where((br > a) & (br < b), br, np.nan)
        pts = np.sort(np.concatenate([np.full((n_samples, 1), a), br,
                                      np.full((n_samples, 1), b)], axis=1), axis=1)
        lo_all, hi_all = pts[:, :-1], pts[:, 1:]
        ok = np.isfinite(hi_all) & (hi_all > lo_all)
        sid, _ = np.nonzero(ok)
        base_lo, base_hi = lo_all[ok], hi_all[ok]
    s_lo = np.zeros(len(sid))
    s_hi = np.ones(len(sid))

    def evaluate(sid, base_lo, base_hi, s_lo, s_hi, nodes):
        S = s_lo[:, None] + (s_hi - s_lo)[:, None] * nodes[None, :]
        if grading:
            psi, dpsi = _sigmoid(S, grading)
        else:
            psi, dpsi = S, np.ones_like(S)
        width = (base_hi - base_lo)[:, None]
        x = base_lo[:, None] + width * psi
        return func(sid, x) * dpsi * width * (s_hi - s_lo)[:, None]

    done = np.zeros(n_samples)
    converged = np.ones(n_samples, dtype=bool)
    estimate = None
    for _ in range(max_rounds):
        if len(sid) == 0:
            break
        f = evaluate(sid, base_lo, base_hi, s_lo, s_hi, np.concatenate([xl, xh]))
        il = f[:, :n_low] @ wl
        ih = f[:, n_low:] @ wh
        estimate = done + np.bincount(sid, weights=ih, minlength=n_samples)
        frac = (base_hi - base_lo) * (s_hi - s_lo) / (b - a)
        tol = rtol * np.abs(estimate[sid]) * frac
        ok = np.abs(ih - il) <= np.maximum(tol, 1e-300)
        ok |= frac <= 1e-15
        done += np.bincount(sid[ok], weights=ih[ok], minlength=n_samples)
        bad = ~ok
        if bad.sum() > max_active:
            sid, base_lo, base_hi = sid[bad], base_lo[bad], base_hi[bad]
            s_lo, s_hi = s_lo[bad], s_hi[bad]
            break
        mid = 0.5 * (s_lo[bad] + s_hi[bad])
        sid = np.concatenate([sid[bad], sid[bad]])
        base_lo = np.concatenate([base_lo[bad], base_lo[bad]])
        base_hi = np.concatenate([base_hi[bad], base_hi[bad]])
        s_lo, s_hi = (np.concatenate([s_lo[bad], mid]),
                      np.concatenate([mid, s_hi[bad]]))
    if len(sid):
        converged[np.unique(sid)] = False
        f = evaluate(sid, base_lo, base_hi, s_lo, s_hi, xh)
        done += np.bincount(sid, weights=f @ wh, minlength=n_samples)
    return done, converged


# ---------------------------------------------------------------------------
# adaptive triangle subdivision

def adaptive_triangle(func, triangles, degree: int, rtol: float = 1e-9,
                      max_rounds: int = 30, max_active: int = 400_000):
    """Integrate ``func(sample_ids (k,), x (k, n, 2)) -> (k, n)`` over
    ``triangles (S, 3, 2)``.  Returns ``(integrals, converged)``.

    A panel is accepted when its coarse/fine difference is below
    ``rtol * |I| * sqrt(area fraction)``; the square root lets isolated
    point singularities (conical kinks) be resolved in O(log 1/rtol) levels.
    A sample counts as converged only if every panel was accepted and the
    accepted differences sum to at most ``rtol * |I|``.
    """
    rule = quadrature_rule("triangle", degree)
    rp, rw = rule.points, rule.weights
    S = triangles.shape[0]

    def apply(sids, tris):
        a = tris[:, 0]
        J = np.stack([tris[:, 1] - a, tris[:, 2] - a], axis=-1)
        det = np.abs(np.linalg.det(J))
        x = (a[:, None, :] + J[:, None, :, 0] * rp[None, :, 0, None]
             + J[:, None, :, 1] * rp[None, :, 1, None])
        return (func(sids, x) @ rw) * det

    def areas(t):
        return 0.5 * np.abs(np.linalg.det(np.stack(
            [t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]], axis=-1)))

    sid = np.arange(S)
    tris = np.asarray(triangles, dtype=float)
    coarse = apply(sid, tris)
    total_area = areas(tris)
    done = np.zeros(S)
    spent = np.zeros(S)
    converged = np.ones(S, dtype=bool)
    for _ in range(max_rounds):
        if len(sid) == 0:
            break
        kids = subdivide_triangle(tris).reshape(-1, 3, 2)
        ksid = np.repeat(sid, 4)
        kval = apply(ksid, kids)
        fine = kval.reshape(-1, 4).sum(axis=1)
        estimate = done + np.bincount(sid, weights=fine, minlength=S)
        err = np.abs(fine - coarse)
        tol = 0.25 * rtol * np.abs(estimate[sid]) * np.sqrt(areas(tris) / total_area[sid])
        ok = err <= np.maximum(tol, 1e-300)
        done += np.bincount(sid[ok], weights=fine[ok], minlength=S)
        spent += np.bincount(sid[ok], weights=err[ok], minlength=S)
        keep = np.repeat(~ok, 4)
        sid, tris, coarse = ksid[keep], kids[keep], kval[keep]
        if len(sid) > max_active:
            break
    if len(sid):
        converged[np.unique(sid)] = False
        done += np.bincount(sid, weights=coarse, minlength=S)
    converged &= spent <= rtol * np.abs(done) + 1e-300
    return done, converged
