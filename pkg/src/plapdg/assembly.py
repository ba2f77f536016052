"""Nonlinear IPDG form for the p-Laplacian: residual, Jacobian, energy and
error functionals.

For z, u, v in S^r_T the form is

    B(z; u, v) = ∫_Ω |∇u|^{p-2} ∇u·∇v
               + ∫_Γ σ {{(|∇z|^2 + σ^2|[u]|^2)^{(p-2)/2}}}_w [u]·[v]
               - ∫_Γ {{|∇u|^{p-2} ∇u}}_w·[v]
               + θ ∫_Γ {{(|∇z|^2 + σ^2|[u]|^2)^{(p-2)/2} ∇v}}_w·[u]

with [v] = v⁺n⁺ + v⁻n⁻ and {{v}}_w = w⁺v⁺ + w⁻v⁻.  On boundary interfaces
v⁻ = 0 and w = (1, 0).  All interface integrals are evaluated once per
interface with both traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import dim_p, reference_basis
from .penalty import PenaltyField
from .quadrature import quadrature_rule
from .space import DgFunction, DgSpace

__all__ = [
    "AssemblyError",
    "FormContext",
    "ExactField",
    "load_vector",
    "residual",
    "jacobian",
    "energy",
    "quasi_norm",
    "broken_norm",
    "consistency_defect",
]


class AssemblyError(FloatingPointError):
    """Non-finite integrand encountered during assembly."""


@dataclass
class _ElementBlock:
    degree: int
    elements: np.ndarray
    dofs: np.ndarray      # (ne, nb)
    phi: np.ndarray       # (nq, nb)
    grad: np.ndarray      # (ne, nq, nb, 2) physical gradients
    wdet: np.ndarray      # (ne, nq) weights times |det J|
    points: np.ndarray    # (ne, nq, 2) physical quadrature points


@dataclass
class _FaceBlock:
    faces: np.ndarray
    boundary: bool
    dofs: np.ndarray      # (nf, m) plus dofs then minus dofs
    n_plus: int
    jump: np.ndarray      # (nf, ng, m) derivative of the scalar jump u⁺ - u⁻
    grad_p: np.ndarray    # (nf, ng, m, 2) plus-side gradients, zero-padded
    grad_m: np.ndarray    # (nf, ng, m, 2) minus-side gradients, zero-padded
    dn_p: np.ndarray      # (nf, ng, m) grad_p · n
    dn_m: np.ndarray      # (nf, ng, m) grad_m · n
    normal: np.ndarray    # (nf, 2) unit normal out of the plus element
    wds: np.ndarray       # (nf, ng) weights times |F|
    sigma: np.ndarray     # (nf,)
    w_plus: np.ndarray    # (nf,)
    w_minus: np.ndarray   # (nf,)
    points: np.ndarray    # (nf, ng, 2)


@dataclass
class _ElemSample:
    val: np.ndarray   # (ne, nq)
    grad: np.ndarray  # (ne, nq, 2)


@dataclass
class _FaceSample:
    val_p: np.ndarray
    grad_p: np.ndarray
    val_m: np.ndarray
    grad_m: np.ndarray

    @property
    def jump(self):
        return self.val_p - self.val_m


class FormContext:
    """Precomputed quadrature tables and parameters of B_T.

    Quadrature degrees are ``quad_factor * r + quad_offset`` on elements and
    the maximum over both neighbours on interfaces.  ``delta`` floors |∇u| in
    the negative powers of the Jacobian.
    """

    def __init__(self, space: DgSpace, penalty: PenaltyField, p=None,
                 theta: float | None = None, quad_factor: int = 3,
                 quad_offset: int = 4, delta: float = 1e-12):
        self.space = space
        self.mesh = space.mesh
        self.penalty = penalty
        self.p = float(penalty.p if p is None else p)
        self.theta = float(penalty.theta if theta is None else theta)
        if delta < 0:
            raise ValueError("delta must be non-negative")
        if not -1 <= self.theta <= 1:
            raise ValueError("theta must lie in [-1, 1]")
        self.delta = float(delta)
        self.quad_factor = int(quad_factor)
        self.quad_offset = int(quad_offset)
        if self.quad_degree(space.max_degree) < 2 * space.max_degree:
            raise ValueError("quadrature degree must be at least 2 max r_K")
        if len(penalty.sigma) != self.mesh.n_interfaces:
            raise ValueError("penalty field does not match the mesh")
        self.element_blocks = [self._element_block(r, e)
                               for r, e in space.groups.items()]
        self.face_blocks = self._face_blocks()
        self._pattern = None

    def quad_degree(self, r: int) -> int:
        return self.quad_factor * int(r) + self.quad_offset

    def with_exponent(self, p, penalty: PenaltyField | None = None):
        """Same tables, different p (and optionally a rebuilt penalty)."""
        ctx = object.__new__(FormContext)
        ctx.__dict__.update(self.__dict__)
        ctx.p = float(p)
        if penalty is not None and penalty is not self.penalty:
            ctx.penalty = penalty
            ctx.face_blocks = [
                _replace_penalty(b, penalty) for b in self.face_blocks]
        return ctx

    # -- table construction ------------------------------------------------
    def _element_block(self, r, elems):
        mesh = self.mesh
        rule = quadrature_rule("triangle", self.quad_degree(r))
        phi, dphi = reference_basis(r, rule.points)
        jinv = mesh.inverse_jacobians[elems]
        grad = np.einsum("qjk,ekd->eqjd", dphi, jinv)
        wdet = (2.0 * mesh.areas[elems])[:, None] * rule.weights[None, :]
        a = mesh.vertices[mesh.elements[elems, 0]]
        pts = a[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians[elems],
                                        rule.points)
        return _ElementBlock(r, elems, self.space.group_dofs(elems, r), phi,
                             grad, wdet, pts)

    def _trace_tables(self, elems, pts, r):
        mesh = self.mesh
        a = mesh.vertices[mesh.elements[elems, 0]]
        jinv = mesh.inverse_jacobians[elems]
        ref = np.einsum("fgi,fki->fgk", pts - a[:, None, :], jinv)
        phi, dphi = reference_basis(r, ref)
        grad = np.einsum("fgjk,fkd->fgjd", dphi, jinv)
        return phi, grad

    def _face_blocks(self):
        mesh, space, pen = self.mesh, self.space, self.penalty
        fe = mesh.face_elements
        rp = space.degrees[fe[:, 0]]
        rm = space.degrees[fe[:, 1]]
        bnd = mesh.boundary_flags
        keys = np.column_stack([rp, rm, bnd.astype(np.int64)])
        blocks = []
        for key in np.unique(keys, axis=0):
            r_p, r_m, is_b = int(key[0]), int(key[1]), bool(key[2])
            faces = np.flatnonzero(np.all(keys == key, axis=1))
            deg = max(self.quad_degree(r_p), self.quad_degree(r_m))
            rule = quadrature_rule("segment", deg)
            t = rule.points[:, 0]
            P = mesh.vertices[mesh.face_vertices[faces, 0]]
            Q = mesh.vertices[mesh.face_vertices[faces, 1]]
            pts = P[:, None, :] + t[None, :, None] * (Q - P)[:, None, :]
            ep, em = fe[faces, 0], fe[faces, 1]
            phi_p, grad_p = self._trace_tables(ep, pts, r_p)
            dofs_p = space.group_dofs(ep, r_p)
            nf, ng, nbp = phi_p.shape
            if is_b:
                phi_m = np.zeros((nf, ng, 0))
                grad_m = np.zeros((nf, ng, 0, 2))
                dofs_m = np.zeros((nf, 0), dtype=np.int64)
            else:
                phi_m, grad_m = self._trace_tables(em, pts, r_m)
                dofs_m = space.group_dofs(em, r_m)
            nbm = phi_m.shape[2]
            zp = np.zeros((nf, ng, nbp, 2))
            zm = np.zeros((nf, ng, nbm, 2))
            gp = np.concatenate([grad_p, zm], axis=2)
            gm = np.concatenate([zp, grad_m], axis=2)
            normal = mesh.face_normals[faces]
            blocks.append(_FaceBlock(
                faces=faces, boundary=is_b,
                dofs=np.concatenate([dofs_p, dofs_m], axis=1),
                n_plus=nbp,
                jump=np.concatenate([phi_p, -phi_m], axis=2),
                grad_p=gp, grad_m=gm,
                dn_p=np.einsum("fgmd,fd->fgm", gp, normal),
                dn_m=np.einsum("fgmd,fd->fgm", gm, normal),
                normal=normal,
                wds=rule.weights[None, :] * mesh.face_lengths[faces][:, None],
                sigma=pen.sigma[faces], w_plus=pen.w_plus[faces],
                w_minus=pen.w_minus[faces], points=pts))
        return blocks

    # -- sparse pattern ------------------------------------------------------
    def pattern(self):
        """CSR pattern and scatter map shared by every Jacobian."""
        if self._pattern is None:
            rows, cols = [], []
            for blk in self.element_blocks:
                d = blk.dofs
                rows.append(np.repeat(d, d.shape[1], axis=1).ravel())
                cols.append(np.tile(d, (1, d.shape[1])).ravel())
            for blk in self.face_blocks:
                d = blk.dofs
                rows.append(np.repeat(d, d.shape[1], axis=1).ravel())
                cols.append(np.tile(d, (1, d.shape[1])).ravel())
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            n = self.space.n_dofs
            keys = rows * n + cols
            uniq, inverse = np.unique(keys, return_inverse=True)
            r = uniq // n
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, r + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._pattern = (indptr, (uniq % n).astype(np.int64),
                             inverse.reshape(-1), len(uniq))
        return self._pattern


def _replace_penalty(block: _FaceBlock, pen: PenaltyField) -> _FaceBlock:
    new = _FaceBlock(**block.__dict__)
    new.sigma = pen.sigma[block.faces]
    new.w_plus = pen.w_plus[block.faces]
    new.w_minus = pen.w_minus[block.faces]
    return new


# ---------------------------------------------------------------------------
# sampling of functions at quadrature points

class ExactField:
    """Wrap ``fn(points (n, 2)) -> (values (n,), gradients (n, 2))``.

    Exact fields are single-valued, so both traces coincide on interior
    interfaces; on boundary interfaces the exterior trace is zero.
    """

    def __init__(self, fn):
        self.fn = fn

    def _eval(self, pts):
        shape = pts.shape[:-1]
        val, grad = self.fn(pts.reshape(-1, 2))
        return (np.asarray(val, dtype=float).reshape(shape),
                np.asarray(grad, dtype=float).reshape(shape + (2,)))

    def sample(self, ctx: FormContext):
        elems = []
        for blk in ctx.element_blocks:
            v, g = self._eval(blk.points)
            elems.append(_ElemSample(v, g))
        faces = []
        for blk in ctx.face_blocks:
            v, g = self._eval(blk.points)
            if blk.boundary:
                faces.append(_FaceSample(v, g, np.zeros_like(v), np.zeros_like(g)))
            else:
                faces.append(_FaceSample(v, g, v, g))
        return elems, faces


class _Difference:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def sample(self, ctx):
        ea, fa = _sample(ctx, self.a)
        eb, fb = _sample(ctx, self.b)
        elems = [_ElemSample(x.val - y.val, x.grad - y.grad) for x, y in zip(ea, eb)]
        faces = [_FaceSample(x.val_p - y.val_p, x.grad_p - y.grad_p,
                             x.val_m - y.val_m, x.grad_m - y.grad_m)
                 for x, y in zip(fa, fb)]
        return elems, faces


def difference(a, b):
    """Evaluable ``a - b`` for DgFunctions and exact fields."""
    return _Difference(a, b)


def _sample_coeffs(ctx: FormContext, coeffs: np.ndarray):
    elems = []
    for blk in ctx.element_blocks:
        c = coeffs[blk.dofs]
        elems.append(_ElemSample(c @ blk.phi.T,
                                 np.einsum("eqjd,ej->eqd", blk.grad, c)))
    faces = []
    for blk in ctx.face_blocks:
        c = coeffs[blk.dofs]
        nbp = blk.n_plus
        jump = np.einsum("fgm,fm->fg", blk.jump, c)
        val_p = np.einsum("fgm,fm->fg", blk.jump[:, :, :nbp], c[:, :nbp])
        faces.append(_FaceSample(
            val_p, np.einsum("fgmd,fm->fgd", blk.grad_p, c),
            val_p - jump, np.einsum("fgmd,fm->fgd", blk.grad_m, c)))
    return elems, faces


def _sample(ctx, obj):
    if isinstance(obj, DgFunction):
        if obj.space is not ctx.space:
            raise ValueError("function lives in a different space")
        return _sample_coeffs(ctx, obj.coefficients)
    if isinstance(obj, np.ndarray):
        return _sample_coeffs(ctx, obj)
    if hasattr(obj, "sample"):
        return obj.sample(ctx)
    if callable(obj):
        return ExactField(obj).sample(ctx)
    raise TypeError(f"cannot evaluate {type(obj).__name__} on the mesh")


def _coeffs(u):
    return u.coefficients if isinstance(u, DgFunction) else np.asarray(u, dtype=float)


# ---------------------------------------------------------------------------
# pointwise nonlinearities

def _norm(g):
    return np.sqrt(np.einsum("...d,...d->...", g, g))


def _flux(g, p):
    return (_norm(g) ** (p - 2))[..., None] * g


def _check_finite(arr, ids, what):
    bad = ~np.isfinite(arr.reshape(len(ids), -1)).all(axis=1)
    if bad.any():
        raise AssemblyError(
            f"non-finite integrand on {what} {ids[bad][:10].tolist()}")


def load_vector(ctx: FormContext, f) -> np.ndarray:
    """(f, φ_i) for ``f(points (n, 2)) -> (n,)``."""
    out = np.zeros(ctx.space.n_dofs)
    for blk in ctx.element_blocks:
        vals = np.asarray(f(blk.points.reshape(-1, 2)), dtype=float)
        vals = vals.reshape(blk.wdet.shape)
        local = np.einsum("eq,qj->ej", vals * blk.wdet, blk.phi)
        _check_finite(local, blk.elements, "element")
        np.add.at(out, blk.dofs, local)
    return out


def _form_vector(ctx, zs, us):
    """B(z; u, φ_i) for all i from samples of z and u."""
    p, theta = ctx.p, ctx.theta
    out = np.zeros(ctx.space.n_dofs)
    ez, fz = zs
    eu, fu = us
    for blk, su in zip(ctx.element_blocks, eu):
        flux = _flux(su.grad, p) * blk.wdet[..., None]
        local = np.einsum("eqd,eqjd->ej", flux, blk.grad)
        _check_finite(local, blk.elements, "element")
        np.add.at(out, blk.dofs, local)
    for blk, sz, su in zip(ctx.face_blocks, fz, fu):
        sig = blk.sigma[:, None]
        wp, wm = blk.w_plus[:, None], blk.w_minus[:, None]
        j = su.jump
        s2j2 = (sig * j) ** 2
        Ap = (np.einsum("fgd,fgd->fg", sz.grad_p, sz.grad_p) + s2j2) ** ((p - 2) / 2)
        Am = (np.einsum("fgd,fgd->fg", sz.grad_m, sz.grad_m) + s2j2) ** ((p - 2) / 2)
        Abar = wp * Ap + wm * Am
        n = blk.normal[:, None, :]
        fn = (wp * np.einsum("fgd,fgd->fg", _flux(su.grad_p, p), n)
              + wm * np.einsum("fgd,fgd->fg", _flux(su.grad_m, p), n))
        coef_jump = (sig * Abar * j - fn) * blk.wds
        coef_p = theta * j * wp * Ap * blk.wds
        coef_m = theta * j * wm * Am * blk.wds
        local = (np.einsum("fg,fgm->fm", coef_jump, blk.jump)
                 + np.einsum("fg,fgm->fm", coef_p, blk.dn_p)
                 + np.einsum("fg,fgm->fm", coef_m, blk.dn_m))
        _check_finite(local, blk.faces, "interface")
        np.add.at(out, blk.dofs, local)
    return out


def residual(ctx: FormContext, u, f=None, *, load=None) -> np.ndarray:
    """B(u; u, φ_i) - (f, φ_i).  ``load`` may pass a precomputed (f, φ_i)."""
    c = _coeffs(u)
    s = _sample_coeffs(ctx, c)
    out = _form_vector(ctx, s, s)
    if load is None and f is not None:
        load = load_vector(ctx, f)
    if load is not None:
        out -= load
    return out


def consistency_defect(ctx: FormContext, z, exact, f) -> np.ndarray:
    """B(z; u, φ_i) - (f, φ_i) with the exact solution ``u`` in the second
    slot; vanishes up to quadrature error when ``f`` matches ``u``."""
    zs = _sample(ctx, z)
    us = _sample(ctx, exact)
    return _form_vector(ctx, zs, us) - load_vector(ctx, f)


def jacobian(ctx: FormContext, u) -> sp.csr_matrix:
    """Gateaux derivative of :func:`residual` with respect to u (both slots)."""
    p, theta, delta = ctx.p, ctx.theta, ctx.delta
    c = _coeffs(u)
    data = []
    eye = np.eye(2)
    for blk in ctx.element_blocks:
        g = np.einsum("eqjd,ej->eqd", blk.grad, c[blk.dofs])
        D = _dflux(g, p, delta, eye) * blk.wdet[..., None, None]
        tmp = np.einsum("eqdk,eqjk->eqjd", D, blk.grad)
        K = np.einsum("eqid,eqjd->eij", blk.grad, tmp)
        _check_finite(K, blk.elements, "element")
        data.append(K.ravel())
    for blk in ctx.face_blocks:
        data.append(_face_jacobian(blk, c, p, theta, delta, eye).ravel())
    indptr, indices, scatter, nnz = ctx.pattern()
    vals = np.bincount(scatter, weights=np.concatenate(data), minlength=nnz)
    n = ctx.space.n_dofs
    return sp.csr_matrix((vals, indices, indptr), shape=(n, n))


def _dflux(g, p, delta, eye):
    """D[|g|^{p-2} g] as a (..., 2, 2) matrix."""
    ng = _norm(g)
    D = (ng ** (p - 2))[..., None, None] * eye
    if p != 2:
        ngf = np.maximum(ng, delta)
        D = D + ((p - 2) * ngf ** (p - 4))[..., None, None] * (
            g[..., :, None] * g[..., None, :])
    return D


def _face_jacobian(blk, c, p, theta, delta, eye):
    cl = c[blk.dofs]
    sig = blk.sigma[:, None]
    wp, wm = blk.w_plus[:, None], blk.w_minus[:, None]
    S = blk.wds
    j = np.einsum("fgm,fm->fg", blk.jump, cl)
    gp = np.einsum("fgmd,fm->fgd", blk.grad_p, cl)
    gm = np.einsum("fgmd,fm->fgd", blk.grad_m, cl)
    s2j2 = (sig * j) ** 2
    sp_ = np.einsum("fgd,fgd->fg", gp, gp) + s2j2
    sm_ = np.einsum("fgd,fgd->fg", gm, gm) + s2j2
    Ap = sp_ ** ((p - 2) / 2)
    Am = sm_ ** ((p - 2) / 2)
    Abar = wp * Ap + wm * Am
    n = blk.normal[:, None, :]

    # derivatives of A± in direction φ_j
    sig2j = (sig ** 2 * j)[..., None] * blk.jump
    if p != 2:
        cp = (p - 2) * np.maximum(sp_, delta ** 2) ** ((p - 4) / 2)
        cm = (p - 2) * np.maximum(sm_, delta ** 2) ** ((p - 4) / 2)
        dAp = cp[..., None] * (np.einsum("fgd,fgmd->fgm", gp, blk.grad_p) + sig2j)
        dAm = cm[..., None] * (np.einsum("fgd,fgmd->fgm", gm, blk.grad_m) + sig2j)
    else:
        dAp = np.zeros_like(blk.jump)
        dAm = dAp
    dAbar = wp[..., None] * dAp + wm[..., None] * dAm

    # derivative of the normal flux average
    vnp = np.einsum("fgdk,fgk->fgd", _dflux(gp, p, delta, eye), np.broadcast_to(n, gp.shape))
    vnm = np.einsum("fgdk,fgk->fgd", _dflux(gm, p, delta, eye), np.broadcast_to(n, gm.shape))
    dfn = (wp[..., None] * np.einsum("fgd,fgmd->fgm", vnp, blk.grad_p)
           + wm[..., None] * np.einsum("fgd,fgmd->fgm", vnm, blk.grad_m))

    col = (sig * Abar)[..., None] * blk.jump + (sig * j)[..., None] * dAbar - dfn
    T = theta * ((wp * Ap)[..., None] * blk.dn_p + (wm * Am)[..., None] * blk.dn_m)
    K = np.einsum("fgi,fgj->fij", S[..., None] * blk.jump, col)
    K += np.einsum("fgi,fgj->fij", S[..., None] * T, blk.jump)
    if theta != 0 and p != 2:
        K += theta * np.einsum("fgi,fgj->fij", (S * j * wp)[..., None] * blk.dn_p, dAp)
        K += theta * np.einsum("fgi,fgj->fij", (S * j * wm)[..., None] * blk.dn_m, dAm)
    _check_finite(K, blk.faces, "interface")
    return K


# ---------------------------------------------------------------------------
# energies and norms

def energy(ctx: FormContext, u) -> float:
    """B(u; u, u), integrated pointwise."""
    p, theta = ctx.p, ctx.theta
    elems, faces = _sample(ctx, u)
    total = 0.0
    for blk, s in zip(ctx.element_blocks, elems):
        total += float(np.sum(blk.wdet * _norm(s.grad) ** p))
    for blk, s in zip(ctx.face_blocks, faces):
        sig = blk.sigma[:, None]
        wp, wm = blk.w_plus[:, None], blk.w_minus[:, None]
        j = s.jump
        n = blk.normal[:, None, :]
        Ap = (_norm(s.grad_p) ** 2 + (sig * j) ** 2) ** ((p - 2) / 2)
        Am = (_norm(s.grad_m) ** 2 + (sig * j) ** 2) ** ((p - 2) / 2)
        gnp = np.einsum("fgd,fgd->fg", s.grad_p, n)
        gnm = np.einsum("fgd,fgd->fg", s.grad_m, n)
        fn = (wp * _norm(s.grad_p) ** (p - 2) * gnp
              + wm * _norm(s.grad_m) ** (p - 2) * gnm)
        integrand = (sig * (wp * Ap + wm * Am) * j * j - fn * j
                     + theta * j * (wp * Ap * gnp + wm * Am * gnm))
        total += float(np.sum(blk.wds * integrand))
    return total


def quasi_norm(ctx: FormContext, e, weight) -> float:
    """|||e|||_(T; p, weight)."""
    p = ctx.p
    ee, fe = _sample(ctx, e)
    ew, fw = _sample(ctx, weight)
    total = 0.0
    for blk, se, sw in zip(ctx.element_blocks, ee, ew):
        ge = _norm(se.grad)
        total += float(np.sum(blk.wdet * (_norm(sw.grad) + ge) ** (p - 2) * ge ** 2))
    for blk, se, sw in zip(ctx.face_blocks, fe, fw):
        sig = blk.sigma[:, None]
        aj = np.abs(se.jump)
        avg = (blk.w_plus[:, None] * (_norm(sw.grad_p) + sig * aj) ** (p - 2)
               + blk.w_minus[:, None] * (_norm(sw.grad_m) + sig * aj) ** (p - 2))
        total += float(np.sum(blk.wds * sig * avg * aj ** 2))
    return total ** 0.5


def broken_norm(ctx: FormContext, e, q: float) -> float:
    """|||e|||_q = (∫|∇_h e|^q + ∫_Γ σ^{q-1}|[e]|^q)^{1/q}."""
    if q < 1:
        raise ValueError("q must be at least 1")
    ee, fe = _sample(ctx, e)
    total = 0.0
    for blk, se in zip(ctx.element_blocks, ee):
        total += float(np.sum(blk.wdet * _norm(se.grad) ** q))
    for blk, se in zip(ctx.face_blocks, fe):
        total += float(np.sum(blk.wds * blk.sigma[:, None] ** (q - 1)
                              * np.abs(se.jump) ** q))
    return total ** (1.0 / q)


def local_dim(r):
    return dim_p(r)
