"""Manufactured solutions and the p-Laplacian forcing they induce."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dual
from .dual import Jet

__all__ = ["ScalarField", "manufactured_solution", "forcing", "DOMAINS"]

DOMAINS = {1: (0.0, 1.0, 0.0, 1.0), 2: (-1.0, 1.0, -1.0, 1.0)}


@dataclass(frozen=True)
class ScalarField:
    """Closed-form scalar field differentiated by :class:`Jet` arithmetic."""

    expression: Callable[[Jet, Jet], Jet]
    domain: tuple
    zero_on_boundary: bool = True
    name: str = ""

    def jet(self, points) -> Jet:
        x1, x2 = Jet.variables(np.atleast_2d(points))
        return self.expression(x1, x2)

    def evaluate(self, points):
        """Values ``(n,)``, gradients ``(n, 2)`` and Hessians ``(n, 2, 2)``."""
        j = self.jet(points)
        return j.val, j.grad, j.hess

    def value_and_gradient(self, points):
        j = self.jet(points)
        return j.val, j.grad

    def __call__(self, points):
        return self.jet(points).val


def _example1(x1, x2):
    return x1 * x2 * (1 - x1) * (1 - x2) * dual.sin(2 * np.pi * x1 * x2)


def _example2(x1, x2):
    layer = dual.tanh(50 * ((x1 - 0.5) ** 2 + x2 * x2 - 0.01))
    return -(1 - x1 * x1) * (1 - x2 * x2) * layer


def manufactured_solution(example: int) -> ScalarField:
    if example == 1:
        return ScalarField(_example1, DOMAINS[1], True, "example1")
    if example == 2:
        return ScalarField(_example2, DOMAINS[2], True, "example2")
    raise ValueError(f"unknown example {example!r}; expected 1 or 2")


def forcing(field: ScalarField, p, x, grad_floor: float = 1e-14):
    """f = -div(|∇u|^{p-2} ∇u) at points ``x (n, 2)``."""
    p = float(p)
    if p < 2:
        raise ValueError("forcing requires p >= 2")
    _, g, H = field.evaluate(x)
    lap = H[:, 0, 0] + H[:, 1, 1]
    if p == 2:
        return -lap
    ng = np.sqrt(np.einsum("nd,nd->n", g, g))
    gHg = np.einsum("nd,nde,ne->n", g, H, g)
    safe = np.where(ng > grad_floor, ng, 1.0)
    f = -(p - 2) * safe ** (p - 4) * gHg - safe ** (p - 2) * lap
    return np.where(ng > grad_floor, f, 0.0)
