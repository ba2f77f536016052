"""Second-order forward-mode differentiation on arrays of 2D points.

A :class:`Jet` carries value, gradient and Hessian of a scalar expression at
many points at once; arithmetic propagates all three exactly.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val      # (n,)
        self.grad = grad    # (n, 2)
        self.hess = hess    # (n, 2, 2)

    @classmethod
    def variables(cls, points):
        """Independent coordinate jets ``x1, x2`` at ``points (n, 2)``."""
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        out = []
        for k in range(2):
            g = np.zeros((n, 2))
            g[:, k] = 1.0
            out.append(cls(pts[:, k].copy(), g, np.zeros((n, 2, 2))))
        return tuple(out)

    @classmethod
    def constant(cls, c, like: "Jet"):
        n = like.val.shape[0]
        return cls(np.full(n, float(c)), np.zeros((n, 2)), np.zeros((n, 2, 2)))

    def _lift(self, other):
        return other if isinstance(other, Jet) else Jet.constant(other, self)

    def _chain(self, f0, f1, f2):
        """Apply a scalar function with derivatives f1, f2 at self.val."""
        g = self.grad
        return Jet(f0, f1[:, None] * g,
                   f1[:, None, None] * self.hess
                   + f2[:, None, None] * g[:, :, None] * g[:, None, :])

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = float(other)
            return Jet(c * self.val, c * self.grad, c * self.hess)
        a, b = self, other
        cross = a.grad[:, :, None] * b.grad[:, None, :]
        return Jet(a.val * b.val,
                   a.grad * b.val[:, None] + a.val[:, None] * b.grad,
                   a.hess * b.val[:, None, None] + a.val[:, None, None] * b.hess
                   + cross + np.swapaxes(cross, 1, 2))

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        k = float(k)
        v = self.val
        return self._chain(v ** k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def laplacian(self):
        return self.hess[:, 0, 0] + self.hess[:, 1, 1]


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.val), np.cos(a.val)
    return a._chain(s, c, -s)


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.val), np.cos(a.val)
    return a._chain(c, -s, -c)


def tanh(a: Jet) -> Jet:
    t = np.tanh(a.val)
    d1 = 1.0 - t ** 2
    return a._chain(t, d1, -2.0 * t * d1)
