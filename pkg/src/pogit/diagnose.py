"""Model comparison (AIC, likelihood-ratio test), the oracle/Pogit/naive protocol and identifiability warnings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaincc, gammaln

from .constraints import block_index, compile_constraints, compile_priors, Shape, Sign, LinearInequality
from .data import Dataset, write_csv
from .design import Intercept
from .estimate import FitOptions, fit, fit_poisson
from .exceptions import OrderingError, ProtocolError
from .model import PogitSpec, model_matrices


def aic(k: int, loglik: float) -> float:
    if k < 0:
        raise ValueError("parameter count must be non-negative")
    return 2.0 * k - 2.0 * loglik


@dataclass(frozen=True)
class LRTResult:
    statistic: float
    p_value: float
    df: int


def lrt(loglik_full: float, loglik_reduced: float, df: int = 1) -> LRTResult:
    """Likelihood-ratio test; the p-value is the chi-square upper tail ``Q(df/2, stat/2)``."""
    if df < 1:
        raise ValueError("df must be >= 1")
    stat = 2.0 * (loglik_full - loglik_reduced)
    if stat < 0:
        raise OrderingError(
            f"likelihood-ratio statistic {stat:.6g} < 0: the 'full' model fits worse than the reduced one"
        )
    return LRTResult(stat, float(gammaincc(df / 2.0, stat / 2.0)), df)


def poisson_loglik(y, mu) -> float:
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return float(np.sum(y * np.log(mu) - mu - gammaln(y + 1.0)))


@dataclass
class ModelEntry:
    name: str
    k: int
    loglik: float
    aic: float
    converged: bool = True


@dataclass
class ComparisonReport:
    models: list[ModelEntry]
    tests: list[dict] = field(default_factory=list)

    def entry(self, name: str) -> ModelEntry:
        for m in self.models:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "models": [m.__dict__.copy() for m in self.models],
            "tests": [dict(t) for t in self.tests],
        }

    def to_json(self, path=None, header: dict | None = None) -> str:
        doc = {**(header or {}), **self.to_dict()}
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def to_csv(self, path, header_lines=()):
        write_csv(path, {
            "model": np.array([m.name for m in self.models], dtype=object),
            "k": np.array([m.k for m in self.models]),
            "loglik": np.array([m.loglik for m in self.models]),
            "aic": np.array([m.aic for m in self.models]),
            "converged": np.array([int(m.converged) for m in self.models]),
        }, header_lines)


def _lambda_constraints(spec: PogitSpec):
    """Constraint declarations that only involve lambda-block coefficients."""
    out = []
    for c in spec.constraints:
        if isinstance(c, Shape) and c.block in ("lambda", "lam"):
            out.append(c)
        elif isinstance(c, Sign) and c.coef.startswith("lambda."):
            out.append(c)
        elif isinstance(c, LinearInequality) and all(k.startswith("lambda.") for k in c.coefs):
            out.append(c)
    return tuple(out)


def oracle_protocol(spec: PogitSpec, data: Dataset, options: FitOptions | None = None,
                    pogit_fit=None) -> ComparisonReport:
    """Compare three lambda estimates by the Poisson likelihood of the true counts.

    * ``oracle``: Poisson regression of the true counts on the lambda design,
    * ``pogit``: the lambda part of the full model fitted to reported counts,
    * ``naive``: Poisson regression of reported counts on the lambda design.

    ``k`` is the number of free coefficients (both blocks for the Pogit model).
    """
    if data.y_true is None:
        raise ProtocolError("the oracle protocol needs true counts (y_true) in the dataset")
    opts = options or FitOptions()
    lam_cons = _lambda_constraints(spec)
    kw = dict(offset_column=spec.offset_column, bounds=spec.bounds, constraints=lam_cons)
    oracle = fit_poisson(spec.lambda_design, data, opts, y=data.y_true, **kw)
    naive = fit_poisson(spec.lambda_design, data, opts, **kw)
    full = pogit_fit if pogit_fit is not None else fit(spec, data, opts)

    m = model_matrices(spec, data)
    off = 0.0 if m.log_offset is None else m.log_offset

    def lam_of(theta_lam):
        return np.exp(m.X_lam @ theta_lam + off)

    entries = []
    for name, res, k in (
        ("oracle", oracle, spec.n_lambda),
        ("pogit", full, spec.n_coef),
        ("naive", naive, spec.n_lambda),
    ):
        ll = poisson_loglik(data.y_true, lam_of(res.theta.values[: spec.n_lambda]))
        entries.append(ModelEntry(name, int(k), ll, aic(k, ll), bool(res.converged)))
    tests = []
    for a, b in (("oracle", "pogit"), ("pogit", "naive"), ("oracle", "naive")):
        ea = next(e for e in entries if e.name == a)
        eb = next(e for e in entries if e.name == b)
        hi, lo = (ea, eb) if ea.loglik >= eb.loglik else (eb, ea)
        t = lrt(hi.loglik, lo.loglik, 1)
        tests.append({"better": hi.name, "worse": lo.name, "statistic": t.statistic, "p_value": t.p_value,
                      "df": t.df})
    return ComparisonReport(entries, tests)


def _span_contains(X_big: np.ndarray, X_small: np.ndarray, tol: float) -> bool:
    if X_small.shape[1] == 0:
        return True
    if X_big.shape[1] == 0:
        return False
    coef, *_ = np.linalg.lstsq(X_big, X_small, rcond=None)
    resid = X_small - X_big @ coef
    scale = np.maximum(np.linalg.norm(X_small, axis=0), np.finfo(float).tiny)
    return bool(np.all(np.linalg.norm(resid, axis=0) <= tol * scale))


def identifiability_check(spec: PogitSpec, data: Dataset | None = None, tol: float = 1e-10) -> list[str]:
    """Warn when the p-block is not separated from the lambda-block.

    Without data the check is structural (each p term repeats a lambda term or
    is an intercept paired with one); with data it tests whether the p-design
    columns lie in the span of the lambda-design columns.  A sign constraint or
    prior touching the p block silences the warning, as does a bounded link.
    """
    if spec.n_p == 0:
        return []
    if data is not None:
        Xl = spec.lambda_design.build(data.covariates, data.n)
        Xp = spec.p_design.build(data.covariates, data.n)
        overlapping = _span_contains(Xl, Xp, tol)
    else:
        lam_terms = set(spec.lambda_design.terms)
        lam_has_intercept = any(isinstance(t, Intercept) for t in lam_terms)
        overlapping = all(
            t in lam_terms or (isinstance(t, Intercept) and lam_has_intercept) for t in spec.p_design.terms
        )
    if not overlapping:
        return []
    p_idx = block_index(spec, "p")
    if compile_constraints(spec).touches(p_idx):
        return []
    if spec.priors:
        if data is None:
            touched = any(getattr(pr, "block", None) == "p" or str(getattr(pr, "coef", "")).startswith("p.")
                          or (hasattr(pr, "C") and np.any(np.abs(np.atleast_2d(pr.C)[:, p_idx]) > 0))
                          for pr in spec.priors)
        else:
            touched = any(np.any(np.abs(pr.C[:, p_idx]) > 0) for pr in compile_priors(spec, data))
        if touched:
            return []
    if spec.p_link.kind == "bounded-logit":
        return []
    return [
        "p-design columns lie in the span of the lambda-design columns and nothing pins the p block: "
        "(theta_lambda, theta_p) and (theta_lambda + theta_p on the shared columns, -theta_p) give the "
        "same mean, since exp(a) * expit(b) = exp(a + b) * expit(-b). Add a sign constraint or a prior "
        "on a p coefficient, or exclude a covariate from the lambda design."
    ]
