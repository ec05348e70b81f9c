"""Constraint and prior declarations, compiled against a spec's coefficient layout."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import PogitSpec
from .data import Dataset


@dataclass(frozen=True)
class Sign:
    """Pin the sign of one coefficient, e.g. ``Sign("p.sex", "positive")`` for ``theta >= 0``."""

    coef: str
    sign: str = "positive"

    def __post_init__(self):
        if self.sign not in ("positive", "negative"):
            raise ValueError(f"sign must be 'positive' or 'negative', got {self.sign!r}")

    def rows(self, spec: PogitSpec):
        a = np.zeros(spec.n_coef)
        a[spec.coef_index(self.coef)] = -1.0 if self.sign == "positive" else 1.0
        return a[None, :], np.zeros(1), [f"sign({self.coef})"]


_SHAPES = {"increasing": (1, -1.0), "decreasing": (1, 1.0), "convex": (2, -1.0), "concave": (2, 1.0)}


@dataclass(frozen=True)
class Shape:
    """Monotone or convex/concave shape of a spline term on a grid over ``interval``.

    The shape applies to the term's own contribution to the linear predictor.
    """

    block: str
    term: str
    kind: str
    interval: tuple[float, float] | None = None
    n_points: int = 20

    def __post_init__(self):
        if self.kind not in _SHAPES:
            raise ValueError(f"shape kind must be one of {sorted(_SHAPES)}, got {self.kind!r}")
        if self.n_points < 1:
            raise ValueError("n_points must be positive")

    def grid(self, spec: PogitSpec) -> np.ndarray:
        term, _ = spec.design(self.block).term_slice(self.term)
        if hasattr(term, "spec"):
            return term.spec.grid(self.n_points, self.interval)
        if self.interval is None:
            raise ValueError(f"term {self.term!r} has no domain; give an interval")
        return np.linspace(*self.interval, self.n_points)

    def rows(self, spec: PogitSpec):
        order, sgn = _SHAPES[self.kind]
        design = spec.design(self.block)
        pts = self.grid(spec)
        D = design.derivative_rows(self.term, order, pts)
        A = np.zeros((pts.size, spec.n_coef))
        off = spec.block_offset(self.block)
        A[:, off: off + len(design)] = sgn * D
        labels = [f"{self.kind}({self.block}.{self.term}@{x:.6g})" for x in pts]
        return A, np.zeros(pts.size), labels


@dataclass(frozen=True)
class LinearInequality:
    """``sum_j coefs[j] * theta_j <= upper`` over named coefficients."""

    coefs: Mapping[str, float]
    upper: float = 0.0
    label: str | None = None

    def rows(self, spec: PogitSpec):
        a = np.zeros(spec.n_coef)
        for name, v in self.coefs.items():
            a[spec.coef_index(name)] += float(v)
        if not np.isfinite(self.upper):
            raise ValueError("constraint right-hand side must be finite")
        lab = self.label or " + ".join(f"{v:g}*{k}" for k, v in self.coefs.items()) + f" <= {self.upper:g}"
        return a[None, :], np.array([float(self.upper)]), [lab]


@dataclass(frozen=True)
class Bound:
    """Per-coefficient box bounds overriding the model-wide default."""

    coef: str
    lower: float = -np.inf
    upper: float = np.inf


@dataclass(frozen=True)
class GaussianPrior:
    """Quadratic penalty ``weight/2 * ||C theta - target||^2``."""

    C: np.ndarray
    target: np.ndarray
    weight: float
    label: str = "prior"

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        m = np.broadcast_to(np.asarray(self.target, dtype=float), (C.shape[0],)).copy()
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise ValueError(f"prior weight must be positive, got {self.weight}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "target", m)

    def compile(self, spec, data=None) -> "GaussianPrior":
        if self.C.shape[1] != spec.n_coef:
            raise ValueError(f"prior has {self.C.shape[1]} columns, model has {spec.n_coef} coefficients")
        return self

    def penalty(self, theta) -> float:
        r = self.C @ theta - self.target
        return 0.5 * self.weight * float(r @ r)


@dataclass(frozen=True)
class PredictorPrior:
    """Pull a block's linear predictor toward ``target``.

    ``functional="rows"`` penalizes every observation's predictor,
    ``functional="mean"`` only their average.  ``target_value`` gives the
    target on the parameter scale instead (e.g. a reporting rate).
    """

    block: str
    weight: float
    target: float = 0.0
    functional: str = "rows"
    target_value: float | None = None

    def __post_init__(self):
        if self.functional not in ("rows", "mean"):
            raise ValueError(f"functional must be 'rows' or 'mean', got {self.functional!r}")

    def _eta_target(self, spec: PogitSpec) -> float:
        if self.target_value is None:
            return float(self.target)
        v = float(self.target_value)
        if self.block in ("lambda", "lam"):
            return float(np.log(v))
        lo, hi = spec.p_link.range
        if not lo < v < hi:
            raise ValueError(f"target {v} outside the p-link range ({lo}, {hi})")
        s = (v - lo) / (hi - lo)
        return float(np.log(s) - np.log1p(-s))

    def compile(self, spec: PogitSpec, data: Dataset) -> GaussianPrior:
        design = spec.design(self.block)
        X = design.build(data.covariates, data.n)
        if self.functional == "mean":
            X = X.mean(axis=0, keepdims=True)
        C = np.zeros((X.shape[0], spec.n_coef))
        off = spec.block_offset(self.block)
        C[:, off: off + X.shape[1]] = X
        return GaussianPrior(C, self._eta_target(spec), self.weight, f"{self.functional}-prior({self.block})")


@dataclass(frozen=True)
class CoefficientPrior:
    coef: str
    weight: float
    target: float = 0.0

    def compile(self, spec: PogitSpec, data=None) -> GaussianPrior:
        C = np.zeros((1, spec.n_coef))
        C[0, spec.coef_index(self.coef)] = 1.0
        return GaussianPrior(C, self.target, self.weight, f"prior({self.coef})")


@dataclass
class ConstraintSet:
    """Compiled ``A theta <= b`` plus box bounds, one label per row."""

    A: np.ndarray
    b: np.ndarray
    labels: list[str]
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] = field(default=())

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def stacked(self):
        """All inequalities including the finite box bounds, as one system."""
        k = self.lower.size
        eye = np.eye(k)
        lo_idx = np.flatnonzero(np.isfinite(self.lower))
        hi_idx = np.flatnonzero(np.isfinite(self.upper))
        A = np.vstack([self.A, eye[hi_idx], -eye[lo_idx]])
        b = np.concatenate([self.b, self.upper[hi_idx], -self.lower[lo_idx]])
        nm = self.names or tuple(f"theta[{j}]" for j in range(k))
        labels = (
            list(self.labels)
            + [f"{nm[j]} <= {self.upper[j]:g}" for j in hi_idx]
            + [f"{nm[j]} >= {self.lower[j]:g}" for j in lo_idx]
        )
        return A, b, labels

    def violation(self, theta) -> float:
        A, b, _ = self.stacked()
        if A.shape[0] == 0:
            return 0.0
        return float(max(0.0, np.max(A @ theta - b)))

    def touches(self, index: np.ndarray) -> bool:
        return bool(self.A.shape[0] and np.any(np.abs(self.A[:, index]) > 0))


def compile_constraints(spec: PogitSpec, extra=()) -> ConstraintSet:
    k = spec.n_coef
    lower = np.full(k, float(spec.bounds[0]))
    upper = np.full(k, float(spec.bounds[1]))
    blocks_A, blocks_b, labels = [np.zeros((0, k))], [np.zeros(0)], []
    for c in (*spec.constraints, *extra):
        if isinstance(c, Bound):
            j = spec.coef_index(c.coef)
            lower[j], upper[j] = c.lower, c.upper
            continue
        A, b, lab = c.rows(spec)
        blocks_A.append(A)
        blocks_b.append(b)
        labels.extend(lab)
    if np.any(lower > upper):
        j = int(np.flatnonzero(lower > upper)[0])
        from .exceptions import InfeasibleConstraintsError

        raise InfeasibleConstraintsError(
            f"empty box for {spec.coef_names[j]}: [{lower[j]}, {upper[j]}]", [spec.coef_names[j]], lower[j] - upper[j]
        )
    return ConstraintSet(np.vstack(blocks_A), np.concatenate(blocks_b), labels, lower, upper, spec.coef_names)


def compile_priors(spec: PogitSpec, data: Dataset) -> list[GaussianPrior]:
    return [p.compile(spec, data) for p in spec.priors]


def block_index(spec: PogitSpec, block: str) -> np.ndarray:
    off = spec.block_offset(block)
    return np.arange(off, off + len(spec.design(block)))


__all__ = [
    "Bound",
    "CoefficientPrior",
    "ConstraintSet",
    "GaussianPrior",
    "LinearInequality",
    "PredictorPrior",
    "Shape",
    "Sign",
    "compile_constraints",
    "compile_priors",
]
