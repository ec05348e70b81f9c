"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .exceptions import SchemaError


def as_columns(X, feature_names=None) -> dict[str, np.ndarray]:
    """Accept a DataFrame, a mapping of columns or a 2-D array and return named float columns.

    Arrays get the names ``feature_names`` or ``x0, x1, ...``.
    """
    if hasattr(X, "columns") and hasattr(X, "to_numpy"):
        cols = {str(c): X[c].to_numpy(dtype=float) for c in X.columns}
    elif isinstance(X, Mapping):
        cols = {str(k): np.asarray(v, dtype=float).reshape(-1) for k, v in X.items()}
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array of covariates, got shape {arr.shape}")
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(arr.shape[1])]
        if len(names) != arr.shape[1]:
            raise ValueError(f"{len(names)} feature names for {arr.shape[1]} columns")
        cols = {n: arr[:, j] for j, n in enumerate(names)}
    sizes = {v.size for v in cols.values()}
    if len(sizes) > 1:
        raise SchemaError(f"covariate columns have unequal lengths {sorted(sizes)}")
    for k, v in cols.items():
        if not np.all(np.isfinite(v)):
            raise SchemaError(f"covariate {k!r} contains non-finite values")
    return cols


def check_counts(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if n is not None and y.size != n:
        raise ValueError(f"y has {y.size} entries, X has {n} rows")
    if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("y must contain non-negative integer counts")
    return y.astype(np.int64)


def check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return level
