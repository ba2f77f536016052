"""Command-line entry point: ``plapdg {solve,study-h,study-p,verify}``.

Study settings come from a TOML or JSON file (keys of :class:`StudyConfig`)
and may be overridden by flags.  Exit status is 0 only when every solve
converged (and, for ``verify``, when no check reported a violation).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .experiments.report import emit_report
from .experiments.studies import (StudyConfig, run_cell, run_h_study,
                                  run_p_study)

try:  # Python ≥ 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

log = logging.getLogger("plapdg")

LEMMAS = ("markov", "interval", "trace", "qn_trace", "algebraic", "lemma21")


def load_config(path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        data = tomllib.loads(raw.decode())
    elif path.suffix.lower() == ".json":
        data = json.loads(raw)
    else:
        raise ValueError(f"config must be .toml or .json, got {path.name!r}")
    # a [study] table is accepted as well as top-level keys
    return dict(data.get("study", data))


def _csv(kind):
    def parse(text):
        return [kind(t) for t in text.split(",") if t.strip()]
    return parse


def build_config(args) -> StudyConfig:
    data = load_config(args.config) if args.config else {}
    overrides = {
        "example": args.example,
        "p_values": args.p,
        "r_values": args.r,
        "levels": args.levels,
        "h0": args.h0,
        "theta": args.theta,
        "penalty_mode": args.penalty_mode,
        "penalty_scale": args.penalty_scale,
        "seed": args.seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_timings:
        data["record_timings"] = False
    return StudyConfig.from_dict(data)


def _add_study_flags(sp):
    sp.add_argument("--config", help="TOML or JSON file with study settings")
    sp.add_argument("--example", type=int, choices=[1, 2])
    sp.add_argument("--p", type=_csv(str), help="comma-separated exponents, e.g. 2.5,4")
    sp.add_argument("--r", type=_csv(int), help="comma-separated polynomial degrees")
    sp.add_argument("--levels", type=_csv(int), help="refinement levels j (h = h0/2^j)")
    sp.add_argument("--h0", type=float)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--penalty-mode", choices=["practical", "theoretical"])
    sp.add_argument("--penalty-scale", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-timings", action="store_true",
                    help="write wall_ms = 0 so output is byte-reproducible")
    sp.add_argument("--out", default=None, help="output directory")


def cmd_study(args, kind) -> int:
    cfg = build_config(args)
    report = run_h_study(cfg) if kind == "h" else run_p_study(cfg)
    out = Path(args.out or f"results/{kind}_study")
    files = emit_report(report, out)
    for c in report.cells:
        if not c.converged:
            log.error("p=%s r=%d h_or_r=%g failed: %s", c.p, c.r, c.h_or_r, c.message)
    summary = {"study": kind, "out": str(out), "files": [f.name for f in files],
               "all_converged": report.all_converged,
               "slopes": [{"p": s.p, "r": s.r, "error_type": s.error_type,
                           "slope": s.slope, "r_squared": s.r_squared}
                          for s in report.slopes]}
    print(json.dumps(summary, indent=2))
    return 0 if report.all_converged else 1


def cmd_solve(args) -> int:
    cfg = build_config(args)
    if len(cfg.p_values) != 1 or len(cfg.r_values) != 1:
        raise SystemExit("solve takes a single --p and a single --r")
    h = args.h if args.h is not None else cfg.h0
    cell = run_cell(cfg, cfg.p_values[0], cfg.r_values[0], h, h)
    print(json.dumps(cell.__dict__, indent=2))
    return 0 if cell.converged else 1


def run_verify(lemma, r, q, p, samples, seed, d=2):
    from . import verify
    from .verify import algebraic

    if lemma == "markov":
        return verify.check_markov(r, samples, seed).to_dict()
    if lemma == "interval":
        return verify.check_interval_lemma(r, samples, seed).to_dict()
    if lemma == "trace":
        return verify.check_trace_inverse(d, r, q, samples, seed).to_dict()
    if lemma == "qn_trace":
        return verify.check_qn_trace_inverse(p, r, samples, seed).to_dict()
    if lemma == "algebraic":
        return algebraic.check_algebraic(p, samples, seed).to_dict()
    if lemma == "lemma21":
        c1, c2 = algebraic.estimate_lemma21_constants(p, samples, seed)
        return {"lemma": "lemma21", "p": str(p), "n_samples": samples,
                "seed": seed, "C1_lower_estimate": c1, "C2_upper_estimate": c2}
    raise ValueError(f"unknown lemma {lemma!r}")


def cmd_verify(args) -> int:
    p = args.p if args.p is None else str(Fraction(args.p))
    result = run_verify(args.lemma, args.r, args.q, p, args.samples,
                        args.seed, args.d)
    print(json.dumps(result, indent=2))
    return 0 if result.get("violations", 0) == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plapdg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one manufactured problem and report errors")
    _add_study_flags(sp)
    sp.add_argument("--h", type=float, help="target mesh size (default h0)")

    for name, kind in (("study-h", "h"), ("study-p", "p")):
        sp = sub.add_parser(name, help=f"{kind}-version convergence study")
        _add_study_flags(sp)

    sp = sub.add_parser("verify", help="randomised check of an inequality")
    sp.add_argument("--lemma", choices=LEMMAS, required=True)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--p", default="4")
    sp.add_argument("--d", type=int, choices=[1, 2], default=2)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve":
        return cmd_solve(args)
    if args.command == "study-h":
        return cmd_study(args, "h")
    if args.command == "study-p":
        return cmd_study(args, "p")
    return cmd_verify(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
