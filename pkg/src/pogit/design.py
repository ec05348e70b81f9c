"""Design builders: named terms that turn covariate columns into a block of the model matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .exceptions import SchemaError
from .splines import SplineSpec, build_basis, first_derivative_map, second_derivative_map


@dataclass(frozen=True)
class Intercept:
    name: str = "intercept"

    @property
    def column_names(self) -> list[str]:
        return [self.name]

    @property
    def covariates(self) -> tuple[str, ...]:
        return ()

    def build(self, covariates: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        return np.ones((n, 1))


@dataclass(frozen=True)
class Linear:
    column: str
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.column

    @property
    def column_names(self) -> list[str]:
        return [self.label]

    @property
    def covariates(self) -> tuple[str, ...]:
        return (self.column,)

    def build(self, covariates, n):
        return _column(covariates, self.column, n)[:, None]


@dataclass(frozen=True)
class Spline:
    """B-spline expansion of one covariate.

    ``drop_first`` removes the first basis column, which is needed when the
    same block already carries an intercept (the full basis spans constants).
    """

    column: str
    spec: SplineSpec
    name: str | None = None
    drop_first: bool = False

    @property
    def label(self) -> str:
        return self.name or self.column

    @property
    def _start(self) -> int:
        return 1 if self.drop_first else 0

    @property
    def column_names(self) -> list[str]:
        return [f"{self.label}[{j}]" for j in range(self._start, self.spec.n_basis)]

    @property
    def covariates(self) -> tuple[str, ...]:
        return (self.column,)

    def build(self, covariates, n):
        return build_basis(_column(covariates, self.column, n), self.spec)[:, self._start:]

    def derivative_map(self, order: int, points) -> np.ndarray:
        if order == 1:
            D = first_derivative_map(self.spec, points)
        elif order == 2:
            D = second_derivative_map(self.spec, points)
        else:
            raise ValueError(f"derivative order must be 1 or 2, got {order}")
        return D[:, self._start:]


Term = Union[Intercept, Linear, Spline]


def _column(covariates: Mapping[str, np.ndarray], name: str, n: int) -> np.ndarray:
    if name not in covariates:
        raise SchemaError(f"missing covariate column {name!r}")
    col = np.asarray(covariates[name], dtype=float).reshape(-1)
    if col.size != n:
        raise SchemaError(f"covariate {name!r} has {col.size} rows, expected {n}")
    if not np.all(np.isfinite(col)):
        bad = int(np.flatnonzero(~np.isfinite(col))[0])
        raise SchemaError(f"covariate {name!r} is not finite at row {bad}")
    return col


class Design:
    """Ordered collection of terms forming one linear predictor."""

    def __init__(self, terms: Sequence[Term] = ()):
        self.terms = tuple(terms)
        names = self.column_names
        if len(set(names)) != len(names):
            dup = sorted({c for c in names if names.count(c) > 1})
            raise ValueError(f"duplicate design columns: {dup}")
        labels = [t.name if isinstance(t, Intercept) else t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate term names: {labels}")

    def __repr__(self):
        return f"Design({list(self.terms)!r})"

    def __eq__(self, other):
        return isinstance(other, Design) and self.terms == other.terms

    def __len__(self):
        return len(self.column_names)

    @property
    def column_names(self) -> list[str]:
        return [c for t in self.terms for c in t.column_names]

    @property
    def covariates(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for t in self.terms:
            for c in t.covariates:
                seen[c] = None
        return tuple(seen)

    def build(self, covariates: Mapping[str, np.ndarray], n: int | None = None) -> np.ndarray:
        if n is None:
            n = _infer_rows(covariates)
        if not self.terms:
            return np.zeros((n, 0))
        return np.hstack([t.build(covariates, n) for t in self.terms])

    def term_slice(self, name: str) -> tuple[Term, slice]:
        start = 0
        for t in self.terms:
            k = len(t.column_names)
            label = t.name if isinstance(t, Intercept) else t.label
            if label == name:
                return t, slice(start, start + k)
            start += k
        raise KeyError(f"no term named {name!r}; terms are {[c for c in self.term_names]}")

    @property
    def term_names(self) -> list[str]:
        return [t.name if isinstance(t, Intercept) else t.label for t in self.terms]

    def derivative_rows(self, term: str, order: int, points) -> np.ndarray:
        """Rows mapping this block's coefficients to a spline term's derivative at ``points``.

        Linear terms are accepted too: their derivative is the coefficient itself.
        """
        t, sl = self.term_slice(term)
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        rows = np.zeros((pts.size, len(self)))
        if isinstance(t, Spline):
            rows[:, sl] = t.derivative_map(order, pts)
        elif isinstance(t, Linear):
            if order == 1:
                rows[:, sl] = 1.0
        else:
            raise ValueError(f"term {term!r} has no covariate to differentiate against")
        return rows


def _infer_rows(covariates: Mapping[str, np.ndarray]) -> int:
    for v in covariates.values():
        return int(np.asarray(v).reshape(-1).size)
    raise SchemaError("cannot infer the number of rows from an empty covariate table")
