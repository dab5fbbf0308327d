"""Volume coefficients and the spherical quadrature behind them.

The Busemann-Hausdorff coefficient compares the Euclidean unit-ball volume
with the volume of the sublevel set {y : F(x, y) < 1}, computed in polar
form as (1/n) * integral of F(x, theta)^(-n) over the unit sphere.  The
sphere rules are a 2048-point trapezoid on the circle, a Gauss-Legendre by
trapezoid product on S^2, and Gauss-Jacobi products in higher dimension;
every evaluation runs the rule twice (base and refined) and reports the
difference as its error bound.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .expr import evaluate

__all__ = [
    "QuadratureError",
    "unit_ball_volume",
    "sphere_quadrature",
    "unit_set_volume",
    "bh_volume_coefficient",
]

CIRCLE_POINTS = 2048
SUB_CIRCLE_POINTS = 64
POLAR_POINTS = 24
QUAD_TOL = 1e-7


class QuadratureError(ArithmeticError):
    """Quadrature refinement did not settle below the tolerance."""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate {estimate:.12g}, bound {error_bound:.3g})")
        self.estimate = estimate
        self.error_bound = error_bound


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@lru_cache(maxsize=None)
def sphere_quadrature(
    n: int, level: int = 0, _nested: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (m, n) and weights (m,) integrating smooth functions over S^(n-1).

    Weights sum to the sphere area; ``level`` doubles the resolution once per
    increment for the refinement comparison.  The circle factor inside
    product rules uses a smaller count than the standalone circle rule.
    """
    if n < 2:
        raise ValueError("sphere_quadrature requires n >= 2")
    if n == 2:
        m = (SUB_CIRCLE_POINTS if _nested else CIRCLE_POINTS) * 2 ** level
        angles = 2.0 * math.pi * np.arange(m) / m
        points = np.column_stack([np.cos(angles), np.sin(angles)])
        weights = np.full(m, 2.0 * math.pi / m)
        return points, weights
    from scipy.special import roots_jacobi

    sub_points, sub_weights = sphere_quadrature(n - 1, level, _nested=True)
    # cos(polar angle) with weight (1 - t^2)^((n-3)/2) from the area element
    a = (n - 3) / 2.0
    t, wt = roots_jacobi(POLAR_POINTS * 2 ** level, a, a)
    sin_t = np.sqrt(1.0 - t ** 2)
    points = np.empty((len(t) * len(sub_points), n))
    weights = np.empty(len(t) * len(sub_points))
    for i, (ti, si, wi) in enumerate(zip(t, sin_t, wt)):
        block = slice(i * len(sub_points), (i + 1) * len(sub_points))
        points[block, : n - 1] = si * sub_points
        points[block, n - 1] = ti
        weights[block] = wi * sub_weights
    return points, weights


def _norm_on_sphere(model, x, points: np.ndarray) -> np.ndarray:
    xs = [float(v) for v in x]
    ys = [points[:, i] for i in range(points.shape[1])]
    values = evaluate(model.f_ast, xs, ys, model.params)
    return np.asarray(values, dtype=float)


def unit_set_volume(model, x, level: int = 0) -> float:
    """Volume of {y : F(x, y) < 1} by the polar-form sphere integral."""
    n = model.dim
    points, weights = sphere_quadrature(n, level)
    values = _norm_on_sphere(model, x, points)
    if np.any(values <= 0.0):
        raise QuadratureError(
            "F is not positive on the unit sphere", float(values.min()), math.inf
        )
    return float(np.sum(weights * values ** (-n)) / n)


def bh_volume_coefficient(model, x) -> float:
    """Busemann-Hausdorff coefficient vol(B^n) / vol{F(x, .) < 1}.

    Runs the base rule and one refinement; raises :class:`QuadratureError`
    when the two disagree beyond the tolerance.
    """
    n = model.dim
    ball = unit_ball_volume(n)
    coarse = ball / unit_set_volume(model, x, level=0)
    fine = ball / unit_set_volume(model, x, level=1)
    error = abs(fine - coarse)
    if error > QUAD_TOL:
        raise QuadratureError("sphere quadrature did not converge", fine, error)
    return fine


def bh_log_gradient(model, x, base_step: float = 1e-4) -> np.ndarray:
    """Gradient of ln(sigma_BH) by central differences with one Richardson level."""
    x = np.asarray(x, dtype=float)
    h0 = base_step * (1.0 + float(np.linalg.norm(x)))
    grad = np.empty(model.dim)

    def diff(i: int, h: float) -> float:
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        return (
            math.log(bh_volume_coefficient(model, xp))
            - math.log(bh_volume_coefficient(model, xm))
        ) / (2.0 * h)

    for i in range(model.dim):
        coarse = diff(i, h0)
        fine = diff(i, h0 / 2.0)
        grad[i] = (4.0 * fine - coarse) / 3.0
    return grad
