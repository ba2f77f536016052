import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapdg.experiments import (CellResult, ConvergenceReport, StudyConfig,
                                emit_report, fit_slope, forcing,
                                manufactured_solution, run_h_study,
                                run_p_study)
from plapdg.experiments.dual import Jet, cos, sin, tanh
from plapdg.experiments.report import render_svg


# -- dual numbers and fields -------------------------------------------------

def test_jet_product_rule():
    pts = np.array([[0.3, 0.7], [1.2, -0.4]])
    x, y = Jet.variables(pts)
    j = x * x * y + 3
    assert np.allclose(j.val, pts[:, 0] ** 2 * pts[:, 1] + 3)
    assert np.allclose(j.grad, np.column_stack([2 * pts[:, 0] * pts[:, 1], pts[:, 0] ** 2]))
    assert np.allclose(j.hess[:, 0, 0], 2 * pts[:, 1])
    assert np.allclose(j.hess[:, 0, 1], 2 * pts[:, 0])
    assert np.allclose(j.hess[:, 1, 1], 0)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_jet_elementary_functions(a, b):
    pts = np.array([[a, b]])
    x, y = Jet.variables(pts)
    for fn, d1, d2 in [(sin, np.cos, lambda t: -np.sin(t)),
                       (cos, lambda t: -np.sin(t), lambda t: -np.cos(t)),
                       (tanh, lambda t: 1 - np.tanh(t) ** 2,
                        lambda t: -2 * np.tanh(t) * (1 - np.tanh(t) ** 2))]:
        j = fn(x * y)
        t = a * b
        assert j.grad[0] == pytest.approx(d1(t) * np.array([b, a]), abs=1e-12)
        expect = d2(t) * np.array([[b * b, a * b], [a * b, a * a]]) + d1(t) * np.array([[0, 1], [1, 0]])
        assert j.hess[0] == pytest.approx(expect, abs=1e-12)


def test_example_one_values():
    u = manufactured_solution(1)
    assert u(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.0625, rel=1e-14)
    edge = np.column_stack([np.linspace(0, 1, 9), np.zeros(9)])
    for pts in (edge, edge[:, ::-1], 1 - edge, 1 - edge[:, ::-1]):
        assert np.allclose(u(pts), 0.0, atol=1e-15)


def test_example_two_vanishes_on_boundary():
    u = manufactured_solution(2)
    s = np.linspace(-1, 1, 11)
    for pts in (np.column_stack([s, -np.ones(11)]), np.column_stack([np.ones(11), s])):
        assert np.allclose(u(pts), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        manufactured_solution(3)


@pytest.mark.parametrize("example", [1, 2])
def test_field_gradient_matches_finite_differences(example):
    u = manufactured_solution(example)
    lo, hi = u.domain[0], u.domain[1]
    pts = np.random.default_rng(example).uniform(lo + 0.1, hi - 0.1, (20, 2))
    _, g, H = u.evaluate(pts)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (u(pts + e) - u(pts - e)) / (2 * h)
        assert np.allclose(g[:, d], fd, atol=1e-6 * max(1.0, np.abs(g).max()))
        gfd = (u.value_and_gradient(pts + e)[1] - u.value_and_gradient(pts - e)[1]) / (2 * h)
        assert np.allclose(H[:, :, d], gfd, atol=1e-5 * max(1.0, np.abs(H).max()))


@pytest.mark.parametrize("p", [2.0, 2.5, 4.0, 4.5])
def test_forcing_is_flux_divergence(p):
    # central differences of the flux |∇u|^{p-2}∇u
    u = manufactured_solution(1)
    pts = np.random.default_rng(7).uniform(0.1, 0.9, (25, 2))

    def flux(x):
        g = u.value_and_gradient(x)[1]
        return np.linalg.norm(g, axis=1, keepdims=True) ** (p - 2) * g
    h = 1e-5
    div = sum((flux(pts + h * e)[:, d] - flux(pts - h * e)[:, d]) / (2 * h)
              for d, e in enumerate(np.eye(2)))
    f = forcing(u, p, pts)
    assert np.allclose(f, -div, rtol=1e-5, atol=1e-5 * np.abs(f).max())


def test_forcing_at_critical_point():
    # the gradient of Example 1 vanishes at the centre; for p > 2 the flux
    # is differentiable there with zero divergence
    u = manufactured_solution(1)
    centre = np.array([[0.5, 0.5]])
    assert np.linalg.norm(u.value_and_gradient(centre)[1]) < 1e-14
    assert forcing(u, 4.0, centre)[0] == 0.0
    with pytest.raises(ValueError):
        forcing(u, 1.5, centre)


# -- slope fitting -----------------------------------------------------------

def test_fit_exact_power_law():
    pts = [(h, 3 * h ** 2) for h in (0.2, 0.1, 0.05)]
    slope, r2 = fit_slope(pts)
    assert slope == pytest.approx(2.0, rel=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_semilog():
    pts = [(r, math.exp(-1.5 * r)) for r in range(1, 6)]
    slope, r2 = fit_slope(pts, "semilogy")
    assert slope == pytest.approx(-1.5, rel=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_noisy_r_squared():
    pts = [(1, 1.0), (2, 0.5), (3, 0.4), (4, 0.05)]
    _, r2 = fit_slope(pts, "semilogy")
    assert 0 < r2 < 1


@pytest.mark.parametrize("pts,scale", [
    ([(1.0, 1.0)], "loglog"),
    ([(1.0, 1.0), (1.0, 2.0)], "loglog"),
    ([(1.0, 1.0), (2.0, 0.0)], "loglog"),
    ([(0.0, 1.0), (2.0, 1.0)], "loglog"),
    ([(1.0, 1.0), (2.0, 1.0)], "linear"),
])
def test_fit_rejects_bad_input(pts, scale):
    with pytest.raises(ValueError):
        fit_slope(pts, scale)


# -- configuration -----------------------------------------------------------

def test_config_defaults_and_roundtrip():
    cfg = StudyConfig()
    assert cfg.p_values == ["2.5", "4", "4.5"]
    assert cfg.solve_options().continuation_step == 0.5
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad", [
    {"example": 3}, {"p_values": ["1.5"]}, {"r_values": [0]},
    {"levels": [-1]}, {"h0": 0.0}, {"colour": "red"},
])
def test_config_validation(bad):
    with pytest.raises((ValueError, TypeError)):
        StudyConfig.from_dict(bad)


# -- reports -----------------------------------------------------------------

def _cell(p, r, x, err, ok=True):
    return CellResult(1, p, r, x, x, 10, err, 2 * err, 3, 0, ok)


def test_empty_report_has_headers_only(tmp_path):
    rep = ConvergenceReport("h", 1, [], [], StudyConfig().to_dict())
    written = emit_report(rep, tmp_path)
    names = sorted(p.name for p in written)
    assert names == ["config.json", "errors.csv", "slopes.csv"]
    rows = list(csv.reader(open(tmp_path / "errors.csv")))
    assert len(rows) == 1 and rows[0][0] == "example"
    assert json.loads((tmp_path / "config.json").read_text())["all_converged"] is True


def test_single_point_report_has_marker_but_no_line(tmp_path):
    rep = ConvergenceReport("h", 1, [_cell("4", 1, 0.2, 0.01)], [], {})
    emit_report(rep, tmp_path)
    svg = (tmp_path / "h_study_quasi.svg").read_text()
    assert svg.count("<circle") == 2          # data marker + legend marker
    assert "stroke-dasharray" not in svg
    rows = list(csv.DictReader(open(tmp_path / "errors.csv")))
    assert rows[0]["quasi_norm_error"] == repr(0.01)


def test_svg_draws_fit_line_and_skips_failures():
    cells = [_cell("2.5", 1, h, h) for h in (0.2, 0.1)] + [_cell("2.5", 1, 0.05, float("nan"), False)]
    rep = ConvergenceReport("h", 1, cells, [], {})
    svg = render_svg(rep, "quasi")
    assert svg.count("stroke-dasharray") == 1
    assert "slope 1.00" in svg
    assert svg.count("<circle") == 3


def test_reports_are_sorted(tmp_path):
    cells = [_cell("4", 2, 0.1, 1e-3), _cell("2.5", 1, 0.2, 1e-2), _cell("4", 1, 0.05, 1e-3)]
    emit_report(ConvergenceReport("h", 1, cells, [], {}), tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "errors.csv")))
    assert [(r["p"], r["r"]) for r in rows] == [("2.5", "1"), ("4", "1"), ("4", "2")]


# -- small end-to-end studies --------------------------------------------------

def test_tiny_h_study():
    cfg = StudyConfig(p_values=["4"], r_values=[1], levels=[0, 1], record_timings=False)
    rep = run_h_study(cfg)
    assert rep.all_converged
    errs = rep.errors("4", 1)
    assert errs[1] < errs[0]
    assert all(c.wall_ms == 0 for c in rep.cells)
    s = rep.slope("4", "quasi", 1)
    assert s.n_points == 2 and s.slope > 0.5


def test_tiny_p_study():
    cfg = StudyConfig(p_values=["5/2"], r_values=[1, 2, 3], h0=0.5)
    rep = run_p_study(cfg)
    assert rep.all_converged
    errs = rep.errors("5/2")
    assert errs[0] > errs[1] > errs[2]
    assert rep.slope("5/2", "quasi").scale == "semilogy"
    assert rep.cell("5/2", 2).h_or_r == 2.0
