"""Newton–Raphson with backtracking, p-continuation and a direct sparse solve."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FormContext, jacobian, load_vector, residual
from .space import DgFunction, DgSpace

log = logging.getLogger(__name__)

__all__ = [
    "SolveOptions",
    "SolveStats",
    "LinearSolveError",
    "NewtonError",
    "linear_solve",
    "newton_solve",
    "continuation_schedule",
    "continuation_solve",
]


@dataclass(frozen=True)
class SolveOptions:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    line_search: bool = True
    continuation_step: Fraction = Fraction(1, 2)
    # Newton steps only need to be accurate well below the step size
    linear_tol: float = 1e-8
    max_halvings: int = 20

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_newton_iters < 0:
            raise ValueError("max_newton_iters must be non-negative")
        step = Fraction(self.continuation_step)
        if step <= 0:
            raise ValueError("continuation_step must be positive")
        object.__setattr__(self, "continuation_step", step)


@dataclass
class SolveStats:
    q_values: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    histories: list = field(default_factory=list)
    # form context of the last stage, so callers can evaluate errors with it
    context: FormContext | None = field(default=None, repr=False, compare=False)

    @property
    def total_newton_iters(self) -> int:
        return int(sum(self.newton_iters))

    def extend(self, other: "SolveStats"):
        for name in ("q_values", "newton_iters", "residual_norms",
                     "wall_times", "histories"):
            getattr(self, name).extend(getattr(other, name))


class LinearSolveError(RuntimeError):
    pass


class NewtonError(RuntimeError):
    """Newton failed; carries the best iterate seen and the residual history."""

    def __init__(self, message, best: DgFunction, history, q=None):
        super().__init__(message)
        self.best = best
        self.history = list(history)
        self.q = q


def linear_solve(system, rhs, tol: float = 1e-12) -> np.ndarray:
    """Sparse LU solve with a residual check."""
    A = sp.csc_matrix(system)
    b = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: system {A.shape}, rhs {b.shape}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise LinearSolveError(f"factorisation failed: {exc}") from exc
    x = lu.solve(b)
    rel = np.linalg.norm(A @ x - b) / bnorm
    if not np.isfinite(rel) or rel > tol:
        # one step of iterative refinement before giving up
        x = x + lu.solve(b - A @ x)
        rel = np.linalg.norm(A @ x - b) / bnorm
    if not np.isfinite(rel) or rel > tol:
        diag = np.abs(lu.U.diagonal())
        cond = diag.max() / diag.min() if diag.min() > 0 else np.inf
        raise LinearSolveError(
            f"relative residual {rel:.3e} exceeds {tol:.1e} "
            f"(pivot ratio ~{cond:.2e}; matrix may be singular)")
    return x


def newton_solve(ctx: FormContext, f, u0, opts: SolveOptions = SolveOptions(),
                 *, load=None):
    """Solve B(u; u, v) = (f, v) for all v by Newton's method."""
    t0 = time.perf_counter()
    space = ctx.space
    u = np.array(u0.coefficients if isinstance(u0, DgFunction) else u0,
                 dtype=float)
    if load is None:
        load = load_vector(ctx, f) if f is not None else np.zeros(space.n_dofs)
    R = residual(ctx, u, load=load)
    rn = float(np.linalg.norm(R))
    history = [rn]
    best_u, best_rn = u.copy(), rn
    it = 0
    while rn > opts.newton_tol:
        if it >= opts.max_newton_iters:
            raise NewtonError(
                f"no convergence after {it} Newton iterations "
                f"(residual {rn:.3e})", DgFunction(space, best_u), history)
        J = jacobian(ctx, u)
        du = linear_solve(J, -R, opts.linear_tol)
        step = 1.0
        u_new = u + du
        R_new = residual(ctx, u_new, load=load)
        rn_new = float(np.linalg.norm(R_new))
        if opts.line_search:
            halvings = 0
            while not rn_new < rn and halvings < opts.max_halvings:
                step *= 0.5
                halvings += 1
                u_new = u + step * du
                R_new = residual(ctx, u_new, load=load)
                rn_new = float(np.linalg.norm(R_new))
            if not rn_new < rn:
                # no descent along the Newton direction: report the best iterate
                it += 1
                history.append(rn_new)
                raise NewtonError(
                    f"line search failed at iteration {it} "
                    f"(residual {rn:.3e})", DgFunction(space, best_u), history)
        u, R, rn = u_new, R_new, rn_new
        it += 1
        history.append(rn)
        log.debug("newton it=%d |R|=%.3e step=%g", it, rn, step)
        if rn < best_rn:
            best_u, best_rn = u.copy(), rn
    stats = SolveStats([ctx.p], [it], [rn], [time.perf_counter() - t0], [history])
    return DgFunction(space, u), stats


def continuation_schedule(p_target, step=Fraction(1, 2), start=Fraction(2)):
    """q = start, start + step, ..., with the last step clamped to p_target."""
    p_target = Fraction(p_target) if not isinstance(p_target, float) \
        else Fraction(repr(p_target))
    step = Fraction(step)
    if step <= 0:
        raise ValueError("continuation step must be positive")
    if p_target < start:
        raise ValueError("p_target must be at least the starting exponent")
    qs = [Fraction(start)]
    while qs[-1] < p_target:
        qs.append(min(qs[-1] + step, p_target))
    return qs


def continuation_solve(space: DgSpace, penalty_builder, p_target, theta, f,
                       opts: SolveOptions = SolveOptions(), *,
                       context_kwargs=None, u0=None):
    """Solve the p_target-Laplacian by continuation from the Poisson problem.

    ``penalty_builder(q)`` returns the PenaltyField for exponent ``q`` (a
    Fraction); ``f(points, q)`` returns the forcing for the q-Laplacian.
    Each stage warm-starts Newton from the previous stage's solution.
    """
    context_kwargs = dict(context_kwargs or {})
    stats = SolveStats()
    u = u0 if u0 is not None else space.zeros()
    ctx = None
    for q in continuation_schedule(p_target, opts.continuation_step):
        pen = penalty_builder(q)
        if ctx is None:
            ctx = FormContext(space, pen, p=float(q), theta=theta, **context_kwargs)
        else:
            ctx = ctx.with_exponent(float(q), pen)
        try:
            u, st = newton_solve(ctx, lambda x, q=q: f(x, q), u, opts)
        except NewtonError as exc:
            exc.q = q
            exc.args = (f"stage q = {q}: {exc.args[0]}",)
            raise
        stats.extend(st)
    stats.context = ctx
    return u, stats
