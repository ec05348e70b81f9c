"""Dataset container and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import SchemaError


def _as_counts(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} contains non-finite values")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        bad = int(np.flatnonzero((arr < 0) | (arr != np.round(arr)))[0])
        raise SchemaError(f"{name} must hold non-negative integers (row {bad}: {arr[bad]!r})")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class Dataset:
    """Covariates plus observed counts.

    ``y_true`` holds the fully reported counts when known; fitting never
    reads it, it is only used for validation protocols.
    """

    covariates: Mapping[str, np.ndarray]
    y: np.ndarray
    exposure: np.ndarray | None = None
    y_true: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = _as_counts(self.y, "counts")
        n = y.size
        cov = {}
        for k, v in self.covariates.items():
            col = np.asarray(v, dtype=float).reshape(-1)
            if col.size != n:
                raise SchemaError(f"covariate {k!r} has {col.size} rows, counts have {n}")
            col.setflags(write=False)
            cov[str(k)] = col
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)
        if self.exposure is not None:
            e = np.asarray(self.exposure, dtype=float).reshape(-1)
            if e.size != n:
                raise SchemaError(f"exposure has {e.size} rows, counts have {n}")
            if not np.all(np.isfinite(e) & (e > 0)):
                raise SchemaError("exposure must be positive and finite")
            e.setflags(write=False)
            object.__setattr__(self, "exposure", e)
        if self.y_true is not None:
            yt = _as_counts(self.y_true, "true counts")
            if yt.size != n:
                raise SchemaError(f"true counts have {yt.size} rows, counts have {n}")
            if np.any(y > yt):
                bad = int(np.flatnonzero(y > yt)[0])
                raise SchemaError(f"reported count exceeds true count at row {bad}")
            yt.setflags(write=False)
            object.__setattr__(self, "y_true", yt)

    @property
    def n(self) -> int:
        return int(self.y.size)

    def __len__(self):
        return self.n

    def with_counts(self, y, y_true=None) -> "Dataset":
        return replace(self, y=y, y_true=y_true)

    def subset(self, index) -> "Dataset":
        idx = np.asarray(index)
        return Dataset(
            {k: v[idx] for k, v in self.covariates.items()},
            self.y[idx],
            None if self.exposure is None else self.exposure[idx],
            None if self.y_true is None else self.y_true[idx],
        )

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence[float]],
        count: str,
        covariates: Sequence[str] | None = None,
        exposure: str | None = None,
        true_count: str | None = None,
    ) -> "Dataset":
        """Split a table of named columns into counts, covariates and extras."""
        for name in [count, exposure, true_count, *(covariates or [])]:
            if name is not None and name not in columns:
                raise SchemaError(f"missing column {name!r}; available: {sorted(columns)}")
        special = {count, exposure, true_count}
        names = list(covariates) if covariates is not None else [c for c in columns if c not in special]
        cov = {}
        for c in names:
            try:
                cov[c] = np.asarray(columns[c], dtype=float)
            except ValueError as exc:
                raise SchemaError(f"column {c!r} is not numeric: {exc}") from None
        return cls(
            cov,
            columns[count],
            None if exposure is None else columns[exposure],
            None if true_count is None else columns[true_count],
        )


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Read a comma-separated file with a header row into float columns.

    Lines starting with ``#`` are skipped so files written by this package
    can be read back.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError(f"{path}: empty file") from None
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    cols: dict[str, list[float]] = {h: [] for h in header}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
        for h, v in zip(header, row):
            try:
                cols[h].append(float(v))
            except ValueError:
                raise SchemaError(f"{path}: row {lineno}, column {h!r}: {v!r} is not a number") from None
    return {h: np.asarray(v, dtype=float) for h, v in cols.items()}


def format_float(x: float) -> str:
    """17 significant digits: enough for a bitwise round trip of a double."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53 and not (x == 0.0 and math.copysign(1.0, x) < 0):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: str | Path, columns: Mapping[str, Sequence[float]], header_lines: Sequence[str] = ()):
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[c]).reshape(-1) for c in names]
    n = {d.size for d in data}
    if len(n) > 1:
        raise ValueError(f"columns have unequal lengths {sorted(n)}")
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def dataset_to_columns(data: Dataset, count: str = "y", true_count: str = "y_true", exposure: str = "exposure"):
    cols: dict[str, np.ndarray] = dict(data.covariates)
    cols[count] = data.y
    if data.y_true is not None:
        cols[true_count] = data.y_true
    if data.exposure is not None:
        cols[exposure] = data.exposure
    return cols
