"""Pogit model: links, mean structure and the negative log-likelihood with exact derivatives.

Reported counts follow ``Y ~ Poisson(lambda * p)`` with ``lambda = exp(X_lam @ theta_lam)``
(times exposure) and ``p = link^{-1}(X_p @ theta_p)``.  An empty p-design fixes ``p = 1``,
which turns every function here into plain Poisson regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, gammaln

from .data import Dataset
from .design import Design
from .exceptions import NumericalOverflowError, SchemaError

DEFAULT_BOUNDS = (-20.0, 20.0)


@dataclass(frozen=True)
class Link:
    """Inverse link of a block: ``log``, ``logit`` or ``bounded-logit`` on ``(lower, upper)``."""

    kind: str = "logit"
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in ("log", "logit", "bounded-logit"):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == "bounded-logit":
            lo, hi = float(self.lower), float(self.upper)
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"bounded-logit needs 0 <= lower < upper <= 1, got ({lo}, {hi})")
            if lo == 0.0 and hi == 1.0:
                object.__setattr__(self, "kind", "logit")

    @classmethod
    def bounded(cls, lower: float, upper: float) -> "Link":
        return cls("bounded-logit", lower, upper)

    @property
    def range(self) -> tuple[float, float]:
        if self.kind == "log":
            return 0.0, np.inf
        if self.kind == "logit":
            return 0.0, 1.0
        return float(self.lower), float(self.upper)

    def inverse(self, eta):
        return inverse_link(self, eta)

    def log_inverse(self, eta):
        """``log g^{-1}(eta)`` and its first two derivatives in ``eta``."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "log":
            return eta, np.ones_like(eta), np.zeros_like(eta)
        s, sc = expit(eta), expit(-eta)
        if self.kind == "logit":
            return -np.logaddexp(0.0, -eta), sc, -s * sc
        a, b = float(self.lower), float(self.upper)
        w = b - a
        if a == 0.0:
            logp = np.log(b) - np.logaddexp(0.0, -eta)
            p = b * s
        else:
            p = a + w * s
            logp = np.log(p)
        dp = w * s * sc
        d1 = dp / p
        d2 = dp * (sc - s) / p - d1 * d1
        return logp, d1, d2


LOG = Link("log")
LOGIT = Link("logit")


def inverse_link(link: Link, eta):
    """Map a linear predictor into the link's range, strictly inside it for finite ``eta``."""
    eta = np.asarray(eta, dtype=float)
    if link.kind == "log":
        return np.exp(eta)
    a, b = link.range
    if link.kind == "logit":
        val = np.where(eta >= 0, 1.0 - expit(-eta), expit(eta))
    else:
        w = b - a
        val = np.where(eta >= 0, b - w * expit(-eta), a + w * expit(eta))
    # rounding would otherwise hit the endpoints for |eta| beyond ~37
    return np.clip(val, np.nextafter(a, b), np.nextafter(b, a))


@dataclass(frozen=True)
class ParameterVector:
    """Coefficients ``[theta_lambda; theta_p]`` with their names and block boundary."""

    values: np.ndarray
    n_lambda: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not 0 <= self.n_lambda <= v.size:
            raise ValueError(f"block boundary {self.n_lambda} outside [0, {v.size}]")
        if self.names and len(self.names) != v.size:
            raise ValueError("one name per coefficient required")

    @property
    def lam(self) -> np.ndarray:
        return self.values[: self.n_lambda]

    @property
    def p(self) -> np.ndarray:
        return self.values[self.n_lambda:]

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PogitSpec:
    """Full model description.

    ``constraints`` and ``priors`` hold declarations from :mod:`pogit.constraints`;
    they are compiled against the column layout when fitting.  ``offset_column``
    names a covariate holding exposure (multiplies lambda); when it is ``None``
    the dataset's own ``exposure`` is used if present.
    """

    lambda_design: Design
    p_design: Design = field(default_factory=Design)
    p_link: Link = LOGIT
    constraints: Sequence = ()
    priors: Sequence = ()
    offset_column: str | None = None
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    lambda_link: Link = LOG

    def __post_init__(self):
        if self.lambda_link.kind != "log":
            raise ValueError("the lambda block must use the log link")
        if self.p_link.kind == "log":
            raise ValueError("the p block needs a logit or bounded-logit link")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"invalid box bounds {self.bounds}")
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "priors", tuple(self.priors))

    @property
    def n_lambda(self) -> int:
        return len(self.lambda_design)

    @property
    def n_p(self) -> int:
        return len(self.p_design)

    @property
    def n_coef(self) -> int:
        return self.n_lambda + self.n_p

    @property
    def coef_names(self) -> tuple[str, ...]:
        return tuple(
            [f"lambda.{c}" for c in self.lambda_design.column_names]
            + [f"p.{c}" for c in self.p_design.column_names]
        )

    def coef_index(self, name: str) -> int:
        names = self.coef_names
        if name not in names:
            raise KeyError(f"unknown coefficient {name!r}; known: {list(names)}")
        return names.index(name)

    def design(self, block: str) -> Design:
        if block in ("lambda", "lam"):
            return self.lambda_design
        if block == "p":
            return self.p_design
        raise ValueError(f"block must be 'lambda' or 'p', got {block!r}")

    def block_offset(self, block: str) -> int:
        return 0 if block in ("lambda", "lam") else self.n_lambda

    def parameters(self, values) -> ParameterVector:
        return ParameterVector(np.asarray(values, dtype=float), self.n_lambda, self.coef_names)

    def zeros(self) -> ParameterVector:
        return self.parameters(np.zeros(self.n_coef))


def poisson_spec(design: Design, offset_column: str | None = None, bounds=DEFAULT_BOUNDS) -> PogitSpec:
    """Plain Poisson regression expressed as a Pogit spec with ``p = 1``."""
    return PogitSpec(design, Design(()), offset_column=offset_column, bounds=bounds)


@dataclass(frozen=True)
class ModelMatrices:
    """Design matrices and count data evaluated once for repeated likelihood calls."""

    X_lam: np.ndarray
    X_p: np.ndarray
    log_offset: np.ndarray | None
    y: np.ndarray
    log_y_factorial: np.ndarray
    link: Link

    @property
    def n(self) -> int:
        return self.y.size


def _exposure(spec: PogitSpec, data) -> np.ndarray | None:
    if spec.offset_column is not None:
        cov = data.covariates if isinstance(data, Dataset) else data
        if spec.offset_column not in cov:
            raise SchemaError(f"missing exposure column {spec.offset_column!r}")
        e = np.asarray(cov[spec.offset_column], dtype=float).reshape(-1)
        if not np.all(np.isfinite(e) & (e > 0)):
            raise SchemaError(f"exposure column {spec.offset_column!r} must be positive")
        return e
    if isinstance(data, Dataset):
        return data.exposure
    return None


def model_matrices(spec: PogitSpec, data: Dataset, y=None) -> ModelMatrices:
    y = data.y if y is None else np.asarray(y)
    Xl = spec.lambda_design.build(data.covariates, data.n)
    Xp = spec.p_design.build(data.covariates, data.n)
    e = _exposure(spec, data)
    yf = y.astype(float)
    return ModelMatrices(Xl, Xp, None if e is None else np.log(e), yf, gammaln(yf + 1.0), spec.p_link)


def _theta_array(theta) -> np.ndarray:
    return np.asarray(theta.values if isinstance(theta, ParameterVector) else theta, dtype=float).reshape(-1)


@dataclass
class _Eval:
    lam: np.ndarray
    p: np.ndarray
    mu: np.ndarray
    log_mu: np.ndarray
    d1: np.ndarray  # d log p / d eta_p
    d2: np.ndarray  # d^2 log p / d eta_p^2


def _components(m: ModelMatrices, theta: np.ndarray) -> _Eval:
    kl = m.X_lam.shape[1]
    if theta.size != kl + m.X_p.shape[1]:
        raise ValueError(f"theta has {theta.size} entries, model has {kl + m.X_p.shape[1]}")
    eta_l = m.X_lam @ theta[:kl]
    if m.log_offset is not None:
        eta_l = eta_l + m.log_offset
    with np.errstate(over="ignore"):
        lam = np.exp(eta_l)
    if m.X_p.shape[1] == 0:
        p = np.ones(m.n)
        logp = d1 = d2 = np.zeros(m.n)
    else:
        eta_p = m.X_p @ theta[kl:]
        p = inverse_link(m.link, eta_p)
        logp, d1, d2 = m.link.log_inverse(eta_p)
    mu = lam * p
    bad = ~np.isfinite(mu) | ~np.isfinite(eta_l)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise NumericalOverflowError(f"mean is not finite at row {row} (eta_lambda={eta_l[row]!r})", row=row)
    return _Eval(lam, p, mu, eta_l + logp, d1, d2)


def nll_terms(m: ModelMatrices, theta: np.ndarray) -> np.ndarray:
    """Per-observation ``mu - y log mu + log y!``."""
    ev = _components(m, theta)
    return ev.mu - m.y * ev.log_mu + m.log_y_factorial


def nll_value(m: ModelMatrices, theta: np.ndarray) -> float:
    return float(np.sum(nll_terms(m, theta)))


def nll_derivatives(m: ModelMatrices, theta: np.ndarray, order: int = 2):
    """Value, gradient and (for ``order == 2``) Hessian of the summed nll."""
    ev = _components(m, theta)
    r = ev.mu - m.y
    f = float(np.sum(ev.mu - m.y * ev.log_mu + m.log_y_factorial))
    Xl, Xp = m.X_lam, m.X_p
    g = np.concatenate([Xl.T @ r, Xp.T @ (r * ev.d1)])
    if order < 2:
        return f, g, None
    w_ll = ev.mu
    w_lp = ev.mu * ev.d1
    w_pp = ev.mu * ev.d1 * ev.d1 + r * ev.d2
    H_ll = (Xl * w_ll[:, None]).T @ Xl
    H_lp = (Xl * w_lp[:, None]).T @ Xp
    H_pp = (Xp * w_pp[:, None]).T @ Xp
    H = np.block([[H_ll, H_lp], [H_lp.T, H_pp]])
    return f, g, 0.5 * (H + H.T)


def score_matrix(m: ModelMatrices, theta: np.ndarray) -> np.ndarray:
    """Per-observation gradients of the nll, one row per observation."""
    ev = _components(m, theta)
    r = ev.mu - m.y
    return np.hstack([m.X_lam * r[:, None], m.X_p * (r * ev.d1)[:, None]])


# ----------------------------------------------------------------------------
# public functional surface


def predict(spec: PogitSpec, theta, covariates: Mapping[str, Sequence[float]] | Dataset):
    """Return ``(lambda, p, mu)`` arrays for every row of ``covariates``.

    ``mu`` is computed as ``lambda * p``.  A single record (scalar values)
    is accepted and yields length-one arrays.
    """
    if isinstance(covariates, Dataset):
        data = covariates
    else:
        cols = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in covariates.items()}
        needed = set(spec.lambda_design.covariates) | set(spec.p_design.covariates)
        if spec.offset_column:
            needed.add(spec.offset_column)
        missing = sorted(needed - set(cols))
        if missing:
            raise SchemaError(f"missing covariate(s) {missing}")
        n = max((v.size for v in cols.values()), default=1)
        data = Dataset(cols, np.zeros(n))
    m = model_matrices(spec, data)
    ev = _components(m, _theta_array(theta))
    return ev.lam, ev.p, ev.mu


def neg_log_likelihood(spec: PogitSpec, theta, data: Dataset) -> float:
    return nll_value(model_matrices(spec, data), _theta_array(theta))


def gradient(spec: PogitSpec, theta, data: Dataset) -> np.ndarray:
    return nll_derivatives(model_matrices(spec, data), _theta_array(theta), order=1)[1]


def hessian(spec: PogitSpec, theta, data: Dataset) -> np.ndarray:
    return nll_derivatives(model_matrices(spec, data), _theta_array(theta))[2]


def poisson_nll(design: Design, theta, data: Dataset, offset_column: str | None = None):
    """Poisson regression nll with its gradient and Hessian, as a tuple."""
    m = model_matrices(poisson_spec(design, offset_column), data)
    return nll_derivatives(m, _theta_array(theta))


def reparameterize_shared(spec: PogitSpec, theta) -> np.ndarray:
    """Alternate coefficients giving the same mean when p-columns repeat lambda-columns.

    Maps ``(theta_lam, theta_p)`` to ``(theta_lam + theta_p on the shared columns, -theta_p)``
    using ``expit(t) = exp(t) * expit(-t)``.  Only valid for the plain logit link.
    """
    if spec.p_link.kind != "logit":
        raise ValueError("the alternate parameterization exists only for the logit link")
    t = _theta_array(theta).copy()
    lam_cols = spec.lambda_design.column_names
    p_cols = spec.p_design.column_names
    missing = [c for c in p_cols if c not in lam_cols]
    if missing:
        raise ValueError(f"p-design columns {missing} are not lambda-design columns")
    kl = spec.n_lambda
    out = t.copy()
    for j, c in enumerate(p_cols):
        out[lam_cols.index(c)] += t[kl + j]
        out[kl + j] = -t[kl + j]
    return out
