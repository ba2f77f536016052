"""CSV, JSON and SVG output for convergence reports.

All output is deterministic: rows are sorted, floats are written with
``repr`` and the SVG markup contains no timestamps or random ids.
"""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

from .fitting import fit_slope
from .studies import ConvergenceReport

ERROR_COLUMNS = ["example", "p", "r", "h_or_r", "quasi_norm_error",
                 "broken_norm_error", "newton_iters", "wall_ms"]
SLOPE_COLUMNS = ["example", "p", "r", "error_type", "scale", "slope",
                 "r_squared", "n_points"]
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _sorted_cells(report):
    return sorted(report.cells, key=lambda c: (Fraction(c.p), c.r, -c.h_or_r
                                               if report.study == "h" else c.h_or_r))


def emit_report(report: ConvergenceReport, out_dir) -> list[Path]:
    """Write errors.csv, slopes.csv, config.json and one SVG per error type."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "errors.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ERROR_COLUMNS)
        for c in _sorted_cells(report):
            w.writerow([_fmt(getattr(c, k)) for k in ERROR_COLUMNS])
    written.append(path)

    path = out / "slopes.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SLOPE_COLUMNS)
        for s in sorted(report.slopes, key=lambda s: (Fraction(s.p), s.r, s.error_type)):
            w.writerow([_fmt(getattr(s, k)) for k in SLOPE_COLUMNS])
    written.append(path)

    path = out / "config.json"
    meta = {"study": report.study, "example": report.example,
            "seed": report.seed, "config": report.config,
            "all_converged": report.all_converged}
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(path)

    if report.cells:
        for etype in ("quasi", "broken"):
            path = out / f"{report.study}_study_{etype}.svg"
            path.write_text(render_svg(report, etype))
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# minimal SVG plotting

W, H = 560, 420
ML, MR, MT, MB = 70, 150, 30, 55


def _log_ticks(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def render_svg(report: ConvergenceReport, error_type: str) -> str:
    """Static SVG: log-scale y axis (and x axis for h studies), markers per
    series and a least-squares line where at least two points exist."""
    loglog = report.study == "h"
    attr = f"{error_type}_norm_error"
    series = {}
    for c in _sorted_cells(report):
        y = getattr(c, attr)
        if not c.converged or not (y > 0):
            continue
        key = (c.p, c.r) if loglog else (c.p, None)
        x = c.h_max if loglog else c.h_or_r
        series.setdefault(key, []).append((x, y))
    pts = [pt for s in series.values() for pt in s]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    title = f"Example {report.example}, {report.study}-version, {error_type}-norm error"
    parts.append(f'<text x="{ML}" y="18" font-family="sans-serif" font-size="13">'
                 f'{title}</text>')
    if not pts:
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    ys = [y for _, y in pts]
    ya, yb = _log_ticks(min(ys), max(ys))
    xs = [x for x, _ in pts]
    if loglog:
        xa, xb = _log_ticks(min(xs), max(xs))
        x0, x1 = float(xa), float(xb)
    else:
        x0, x1 = min(xs) - 0.5, max(xs) + 0.5
    pw, ph = W - ML - MR, H - MT - MB

    def sx(x):
        v = math.log10(x) if loglog else x
        return ML + (v - x0) / (x1 - x0) * pw

    def sy(y):
        return MT + ph - (math.log10(y) - ya) / (yb - ya) * ph

    parts.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" '
                 'fill="none" stroke="black"/>')
    for k in range(ya, yb + 1):
        yy = sy(10.0 ** k)
        parts.append(f'<line x1="{ML - 4}" y1="{yy:.2f}" x2="{ML}" y2="{yy:.2f}" stroke="black"/>')
        parts.append(f'<text x="{ML - 8}" y="{yy + 4:.2f}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="end">1e{k}</text>')
    if loglog:
        xticks = [(10.0 ** k, f"1e{k}") for k in range(int(x0), int(x1) + 1)]
        xlabel = "h"
    else:
        xticks = [(float(r), str(int(r))) for r in sorted(set(xs))]
        xlabel = "r"
    for xv, lab in xticks:
        xx = sx(xv)
        parts.append(f'<line x1="{xx:.2f}" y1="{MT + ph}" x2="{xx:.2f}" y2="{MT + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{xx:.2f}" y="{MT + ph + 18}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="middle">{lab}</text>')
    parts.append(f'<text x="{ML + pw / 2:.2f}" y="{H - 12}" font-family="sans-serif" '
                 f'font-size="12" text-anchor="middle">{xlabel}</text>')

    for i, (key, s) in enumerate(sorted(series.items(), key=lambda kv: (Fraction(kv[0][0]), kv[0][1] or 0))):
        color = COLORS[i % len(COLORS)]
        label = f"p={key[0]}" + (f", r={key[1]}" if key[1] is not None else "")
        for x, y in s:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.5" fill="{color}"/>')
        if len(s) >= 2 and len({x for x, _ in s}) >= 2:
            slope, _ = fit_slope(s, "loglog" if loglog else "semilogy")
            # least-squares intercept in the same coordinates
            X = [math.log(x) if loglog else x for x, _ in s]
            Y = [math.log(y) for _, y in s]
            b = sum(Y) / len(Y) - slope * sum(X) / len(X)
            xa_, xb_ = min(x for x, _ in s), max(x for x, _ in s)

            def line_y(x):
                return math.exp(slope * (math.log(x) if loglog else x) + b)
            parts.append(f'<line x1="{sx(xa_):.2f}" y1="{sy(line_y(xa_)):.2f}" '
                         f'x2="{sx(xb_):.2f}" y2="{sy(line_y(xb_)):.2f}" '
                         f'stroke="{color}" stroke-dasharray="5,3"/>')
            label += f" (slope {slope:.2f})"
        ly = MT + 14 + 18 * i
        parts.append(f'<circle cx="{ML + pw + 12}" cy="{ly - 4}" r="3.5" fill="{color}"/>')
        parts.append(f'<text x="{ML + pw + 20}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
