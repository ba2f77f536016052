"""h- and p-version convergence studies on manufactured solutions."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

from ..assembly import ExactField, broken_norm, difference, quasi_norm
from ..mesh import build_structured_mesh
from ..penalty import build_penalty, parse_exponent
from ..solver import NewtonError, LinearSolveError, SolveOptions, continuation_solve
from ..space import DgSpace
from .fields import DOMAINS, forcing, manufactured_solution
from .fitting import fit_slope

log = logging.getLogger(__name__)

__all__ = ["StudyConfig", "CellResult", "SlopeResult", "ConvergenceReport",
           "run_cell", "run_h_study", "run_p_study", "worker_count"]


@dataclass
class StudyConfig:
    example: int = 1
    p_values: list = field(default_factory=lambda: ["2.5", "4", "4.5"])
    r_values: list = field(default_factory=lambda: [1, 2])
    levels: list = field(default_factory=lambda: [0, 1, 2, 3])
    h0: float = 0.2
    theta: float = -1.0
    penalty_mode: str = "practical"
    penalty_scale: float = 10.0
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    line_search: bool = True
    continuation_step: str = "1/2"
    quad_factor: int = 3
    quad_offset: int = 4
    record_timings: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.example not in DOMAINS:
            raise ValueError(f"unknown example {self.example!r}")
        self.p_values = [str(p) for p in self.p_values]
        for p in self.p_values:
            if Fraction(p) < 2:
                raise ValueError(f"p = {p} is below 2")
        self.r_values = [int(r) for r in self.r_values]
        self.levels = [int(j) for j in self.levels]
        if any(r < 1 for r in self.r_values):
            raise ValueError("polynomial degrees must be at least 1")
        if any(j < 0 for j in self.levels):
            raise ValueError("refinement levels must be non-negative")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        self.continuation_step = str(Fraction(self.continuation_step))

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(newton_tol=self.newton_tol,
                            max_newton_iters=self.max_newton_iters,
                            line_search=self.line_search,
                            continuation_step=Fraction(self.continuation_step))


@dataclass
class CellResult:
    example: int
    p: str
    r: int
    h_or_r: float
    h_max: float
    n_dofs: int
    quasi_norm_error: float
    broken_norm_error: float
    newton_iters: int
    wall_ms: int
    converged: bool
    message: str = ""


@dataclass
class SlopeResult:
    example: int
    p: str
    r: str
    error_type: str
    scale: str
    slope: float
    r_squared: float
    n_points: int


@dataclass
class ConvergenceReport:
    study: str
    example: int
    cells: list
    slopes: list
    config: dict
    seed: int = 0

    @property
    def all_converged(self) -> bool:
        return all(c.converged for c in self.cells)

    def cell(self, p, r, h_or_r=None):
        p = str(p)
        for c in self.cells:
            if c.p == p and c.r == r and (h_or_r is None or c.h_or_r == h_or_r):
                return c
        raise KeyError((p, r, h_or_r))

    def slope(self, p, error_type, r=None):
        rkey = "all" if r is None else str(r)
        for s in self.slopes:
            if s.p == str(p) and s.r == rkey and s.error_type == error_type:
                return s
        raise KeyError((p, r, error_type))

    def errors(self, p, r=None, error_type="quasi"):
        attr = f"{error_type}_norm_error"
        cells = [c for c in self.cells
                 if c.p == str(p) and (r is None or c.r == r)]
        return [getattr(c, attr) for c in cells]


def solve_manufactured(example, p, r, target_h, cfg: StudyConfig):
    """Continuation solve of one configuration; returns (u_h, ctx, stats, field)."""
    field_ = manufactured_solution(example)
    mesh = build_structured_mesh(DOMAINS[example], target_h)
    space = DgSpace(mesh, r)

    def penalty(q):
        return build_penalty(mesh, space, parse_exponent(q), theta=cfg.theta,
                             mode=cfg.penalty_mode, user_scale=cfg.penalty_scale)

    def f(x, q):
        return forcing(field_, q, x)

    u, stats = continuation_solve(
        space, penalty, Fraction(p), cfg.theta, f, cfg.solve_options(),
        context_kwargs=dict(quad_factor=cfg.quad_factor,
                            quad_offset=cfg.quad_offset))
    return u, stats.context, stats, field_


def run_cell(cfg: StudyConfig, p: str, r: int, target_h: float,
             h_or_r: float) -> CellResult:
    t0 = time.perf_counter()
    try:
        u, ctx, stats, field_ = solve_manufactured(cfg.example, p, r, target_h, cfg)
    except (NewtonError, LinearSolveError, FloatingPointError) as exc:
        log.warning("cell p=%s r=%d h=%g failed: %s", p, r, target_h, exc)
        return CellResult(cfg.example, p, r, h_or_r, float("nan"), 0,
                          float("nan"), float("nan"), 0, 0, False, str(exc))
    err = difference(u, ExactField(field_.value_and_gradient))
    qn = quasi_norm(ctx, err, u)
    bn = broken_norm(ctx, err, float(Fraction(p)))
    wall = int(round(1000 * (time.perf_counter() - t0))) if cfg.record_timings else 0
    return CellResult(cfg.example, p, r, h_or_r, float(ctx.mesh.h_max),
                      ctx.space.n_dofs, qn, bn, stats.total_newton_iters, wall,
                      True)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("PLAPDG_THREADS", "1")))
    except ValueError:
        return 1


def _run_cells(cfg, jobs):
    workers = min(worker_count(), len(jobs)) if jobs else 1
    if workers <= 1:
        return [run_cell(cfg, *job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_cell, cfg, *job) for job in jobs]
        return [fut.result() for fut in futures]


def _fit(cells, x_attr, scale, example, p, rkey):
    out = []
    good = [c for c in cells if c.converged]
    for etype in ("quasi", "broken"):
        pts = [(getattr(c, x_attr), getattr(c, f"{etype}_norm_error"))
               for c in good]
        pts = [(x, y) for x, y in pts if y > 0]
        if len(pts) < 2:
            continue
        slope, r2 = fit_slope(pts, scale)
        out.append(SlopeResult(example, p, rkey, etype, scale, slope, r2, len(pts)))
    return out


def run_h_study(cfg: StudyConfig) -> ConvergenceReport:
    """Errors on meshes with target h = h0 / 2^j; slopes fitted against the
    actual h_max of each mesh."""
    jobs = [(p, r, cfg.h0 / 2 ** j, cfg.h0 / 2 ** j)
            for p in cfg.p_values for r in cfg.r_values for j in cfg.levels]
    cells = _run_cells(cfg, jobs)
    slopes = []
    for p in cfg.p_values:
        for r in cfg.r_values:
            group = [c for c in cells if c.p == p and c.r == r]
            slopes += _fit(group, "h_max", "loglog", cfg.example, p, str(r))
    return ConvergenceReport("h", cfg.example, cells, slopes, cfg.to_dict(),
                             cfg.seed)


def run_p_study(cfg: StudyConfig) -> ConvergenceReport:
    """Errors on one mesh with target h = h0 for every r in r_values."""
    jobs = [(p, r, cfg.h0, float(r)) for p in cfg.p_values for r in cfg.r_values]
    cells = _run_cells(cfg, jobs)
    slopes = []
    for p in cfg.p_values:
        group = [c for c in cells if c.p == p]
        slopes += _fit(group, "h_or_r", "semilogy", cfg.example, p, "all")
    return ConvergenceReport("p", cfg.example, cells, slopes, cfg.to_dict(),
                             cfg.seed)
