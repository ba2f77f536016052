"""Least-squares convergence-rate fits."""

from __future__ import annotations

import numpy as np


def fit_slope(points, scale: str = "loglog"):
    """Fit a line to ``(x, y)`` pairs; returns ``(slope, r_squared)``.

    ``loglog`` fits log y against log x, ``semilogy`` fits log y against x.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0):
        raise ValueError("y values must be positive")
    if scale == "loglog":
        if np.any(x <= 0):
            raise ValueError("x values must be positive for a log-log fit")
        X = np.log(x)
    elif scale == "semilogy":
        X = x
    else:
        raise ValueError(f"unknown scale {scale!r}")
    Y = np.log(y)
    if np.ptp(X) == 0:
        raise ValueError("degenerate fit: all x values are equal")
    slope, intercept = np.polyfit(X, Y, 1)
    ss_res = float(np.sum((Y - (slope * X + intercept)) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
