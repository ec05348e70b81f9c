"""scikit-learn compatible wrapper around the functional API."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._validation import as_columns, check_counts, check_level
from .data import Dataset
from .design import Design, Intercept, Linear
from .diagnose import identifiability_check, poisson_loglik
from .estimate import FitOptions, fit
from .exceptions import RankDeficiencyError
from .model import Link, PogitSpec, predict
from .uq import intervals, sandwich


class PogitRegressor(RegressorMixin, BaseEstimator):
    """Pogit regression: ``y ~ Poisson(lambda(x) * p(x))``.

    Parameters
    ----------
    lambda_terms, p_terms : sequence of design terms or None
        Terms of each linear predictor.  ``None`` for ``lambda_terms`` means an
        intercept plus a linear term per input column; ``None`` for ``p_terms``
        means an intercept only.
    p_link : ``"logit"`` or ``(lower, upper)`` for a bounded logit.
    constraints, priors : declarations from :mod:`pogit.constraints`.
    bounds : box bounds applied to every coefficient.
    offset_column : covariate holding exposure, if any.
    level : default interval level for :meth:`predict_interval`.

    ``predict`` returns the reported-count mean ``mu``; use
    :meth:`predict_components` for ``lambda`` and ``p``.
    """

    def __init__(self, lambda_terms=None, p_terms=None, p_link="logit", constraints=(), priors=(),
                 bounds=(-20.0, 20.0), offset_column=None, tol=1e-6, max_iter=500, level=0.90):
        self.lambda_terms = lambda_terms
        self.p_terms = p_terms
        self.p_link = p_link
        self.constraints = constraints
        self.priors = priors
        self.bounds = bounds
        self.offset_column = offset_column
        self.tol = tol
        self.max_iter = max_iter
        self.level = level

    def _build_spec(self, columns) -> PogitSpec:
        if self.lambda_terms is None:
            names = [c for c in columns if c != self.offset_column]
            lam_terms = [Intercept()] + [Linear(c) for c in names]
        else:
            lam_terms = list(self.lambda_terms)
        p_terms = [Intercept()] if self.p_terms is None else list(self.p_terms)
        link = Link("logit") if self.p_link == "logit" else Link.bounded(*self.p_link)
        return PogitSpec(Design(lam_terms), Design(p_terms), link, tuple(self.constraints), tuple(self.priors),
                         self.offset_column, tuple(self.bounds))

    def fit(self, X, y, exposure=None):
        cols = as_columns(X)
        n = len(next(iter(cols.values())))
        y = check_counts(y, n)
        self.feature_names_in_ = np.array(list(cols), dtype=object)
        self.n_features_in_ = len(cols)
        spec = self._build_spec(cols)
        data = Dataset(cols, y, exposure)
        self.spec_ = spec
        self.result_ = fit(spec, data, FitOptions(tol=self.tol, max_iter=self.max_iter))
        self.coef_ = self.result_.theta.values.copy()
        self.coef_names_ = list(spec.coef_names)
        self.converged_ = self.result_.converged
        self.warnings_ = identifiability_check(spec, data)
        for w in self.warnings_:
            warnings.warn(w, stacklevel=2)
        try:
            self.covariance_ = sandwich(spec, self.result_, data)
        except RankDeficiencyError as exc:
            warnings.warn(str(exc), stacklevel=2)
            self.covariance_ = None
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit before predicting")

    def _rows(self, X, exposure=None) -> Dataset:
        cols = as_columns(X, feature_names=getattr(self, "feature_names_in_", None))
        n = len(next(iter(cols.values())))
        return Dataset(cols, np.zeros(n, dtype=int), exposure)

    def predict_components(self, X, exposure=None):
        """``(lambda, p, mu)`` per row."""
        self._check_fitted()
        return predict(self.spec_, self.coef_, self._rows(X, exposure))

    def predict(self, X, exposure=None):
        return self.predict_components(X, exposure)[2]

    def predict_interval(self, X, level=None, exposure=None):
        """Sandwich delta-method intervals for ``lambda``, ``p`` and ``mu``."""
        self._check_fitted()
        if self.covariance_ is None:
            raise RankDeficiencyError("no covariance available: the information matrix was singular")
        level = check_level(self.level if level is None else level)
        return intervals(self.spec_, self.coef_, self.covariance_, self._rows(X, exposure), level)

    def score(self, X, y, exposure=None):
        """Mean Poisson log-likelihood of ``y`` per observation."""
        mu = self.predict(X, exposure)
        y = check_counts(y, mu.size)
        return poisson_loglik(y, mu) / y.size
