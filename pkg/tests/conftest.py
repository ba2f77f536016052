import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plapdg.mesh import TriMesh, build_structured_mesh, refine_uniform

settings.register_profile(
    "repo", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def unit_square_two():
    """The 2-element mesh of the unit square."""
    return build_structured_mesh((0, 1, 0, 1), np.sqrt(2.0))


@pytest.fixture
def small_mesh():
    """4 x 4 grid of the unit square (32 triangles)."""
    return build_structured_mesh((0, 1, 0, 1), np.sqrt(2.0) / 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_mesh(rng):
    """A conforming mesh with jittered interior vertices."""
    m = build_structured_mesh((0, 1, 0, 1), np.sqrt(2.0) / 3)
    v = m.vertices.copy()
    interior = (v[:, 0] > 0) & (v[:, 0] < 1) & (v[:, 1] > 0) & (v[:, 1] < 1)
    v[interior] += rng.uniform(-0.08, 0.08, (interior.sum(), 2))
    return TriMesh(v, m.elements)


__all__ = ["record_criterion", "random_mesh", "refine_uniform"]
