"""Clamped B-spline bases and the derivative maps used for shape constraints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DomainError, SplineSpecError

MAX_DEGREE = 3


@dataclass(frozen=True)
class SplineSpec:
    """Degree, interior knots and closed domain ``[lo, hi]`` of a spline."""

    degree: int
    interior_knots: tuple[float, ...] = ()
    domain: tuple[float, float] = (0.0, 1.0)
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots_in = tuple(float(k) for k in self.interior_knots)
        lo, hi = (float(v) for v in self.domain)
        object.__setattr__(self, "interior_knots", knots_in)
        object.__setattr__(self, "domain", (lo, hi))
        if int(self.degree) != self.degree or not 0 <= self.degree <= MAX_DEGREE:
            raise SplineSpecError(f"degree must be an integer in [0, {MAX_DEGREE}], got {self.degree}")
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise SplineSpecError(f"domain must be a finite interval lo < hi, got {self.domain}")
        inner = np.asarray(knots_in, dtype=float)
        if inner.size:
            if not np.all(np.isfinite(inner)):
                raise SplineSpecError("interior knots must be finite")
            if np.any(np.diff(inner) <= 0):
                raise SplineSpecError(f"interior knots must be strictly ascending, got {knots_in}")
            if inner[0] <= lo or inner[-1] >= hi:
                raise SplineSpecError(f"interior knots {knots_in} must lie strictly inside {self.domain}")
        k = int(self.degree)
        object.__setattr__(self, "degree", k)
        object.__setattr__(self, "knots", np.r_[[lo] * (k + 1), inner, [hi] * (k + 1)])

    @property
    def n_basis(self) -> int:
        return self.degree + 1 + len(self.interior_knots)

    def grid(self, n_points: int = 20, interval: tuple[float, float] | None = None) -> np.ndarray:
        """Uniform constraint grid over ``interval`` (default: whole domain)."""
        lo, hi = self.domain if interval is None else interval
        if lo < self.domain[0] or hi > self.domain[1] or lo > hi:
            raise DomainError(f"interval {interval} is not inside domain {self.domain}")
        return np.linspace(lo, hi, int(n_points))


def _check_points(points, spec: SplineSpec) -> np.ndarray:
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if x.ndim != 1:
        raise ValueError("points must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise DomainError("spline evaluation points must be finite")
    lo, hi = spec.domain
    outside = (x < lo) | (x > hi)
    if np.any(outside):
        bad = x[outside]
        raise DomainError(
            f"{outside.sum()} point(s) outside spline domain [{lo}, {hi}], e.g. {bad[0]!r}"
        )
    return x


def _evaluate(points, spec: SplineSpec, nu: int) -> np.ndarray:
    x = _check_points(points, spec)
    basis = BSpline(spec.knots, np.eye(spec.n_basis), spec.degree, extrapolate=False)
    if nu:
        basis = basis.derivative(nu)
    out = basis(x)
    # extrapolate=False yields nan only outside the base interval; we already rejected those
    return np.nan_to_num(np.asarray(out, dtype=float).reshape(x.size, spec.n_basis))


def build_basis(points, spec: SplineSpec) -> np.ndarray:
    """Evaluate all basis functions at ``points``; shape ``(len(points), n_basis)``."""
    B = _evaluate(points, spec, 0)
    # kill the ~1e-17 negatives from the recursion
    return np.clip(B, 0.0, None)


def first_derivative_map(spec: SplineSpec, eval_points) -> np.ndarray:
    """Matrix ``D`` with ``D @ theta == f'(eval_points)`` for ``f = basis @ theta``."""
    if spec.degree < 1:
        raise SplineSpecError("first derivative map needs degree >= 1")
    return _evaluate(eval_points, spec, 1)


def second_derivative_map(spec: SplineSpec, eval_points) -> np.ndarray:
    """Matrix ``D`` with ``D @ theta == f''(eval_points)``.

    Constraining ``D @ theta >= 0`` makes the spline convex on the grid.
    """
    if spec.degree < 2:
        raise SplineSpecError("second derivative map needs degree >= 2")
    return _evaluate(eval_points, spec, 2)
