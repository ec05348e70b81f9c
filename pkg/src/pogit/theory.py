"""Cramer-Rao bound for the two-covariate Pogit setting and a Monte-Carlo Fisher-information check.

Setting: ``x_lam ~ N(mu_lam, sigma_lam^2)``, ``x_p ~ N(0, sigma_p^2)`` independent,
``Y ~ Poisson(exp(x_lam * theta_lam) * expit(x_p * theta_p))``, coefficients ordered
``[theta_lam, theta_p]``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .rng import stream


@dataclass(frozen=True)
class TwoCovariateSetting:
    theta_lambda: float = 1.0
    theta_p: float = 1.0
    mu_lambda: float = 0.0
    sigma_lambda: float = 1.0
    sigma_p: float = 1.0
    n: int = 50

    def __post_init__(self):
        if not (self.sigma_lambda > 0 and self.sigma_p > 0):
            raise ValueError("sigma_lambda and sigma_p must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")

    @property
    def mean_lambda(self) -> float:
        """Lognormal mean ``E[exp(x_lam * theta_lam)]``."""
        t = self.theta_lambda
        return float(np.exp(self.mu_lambda * t + 0.5 * self.sigma_lambda**2 * t**2))

    @property
    def mean_p(self) -> float:
        # x_p is symmetric about 0 and expit(u) + expit(-u) = 1
        return 0.5

    def replace(self, **kw) -> "TwoCovariateSetting":
        return TwoCovariateSetting(**{**self.__dict__, **kw})


def crlb(setting: TwoCovariateSetting) -> np.ndarray:
    """Lower bound on the covariance of any unbiased estimator of ``[theta_lam, theta_p]``."""
    s = setting
    m2 = (s.mu_lambda + s.sigma_lambda**2 * s.theta_lambda) ** 2 + s.sigma_lambda**2
    scale = 1.0 / (s.n * s.mean_lambda)
    return np.diag([scale / (s.mean_p * m2), scale * 2.0 * s.theta_p**2])


def crlb_sd(setting: TwoCovariateSetting) -> np.ndarray:
    return np.sqrt(np.diag(crlb(setting)))


def fisher_lambda_entry(setting: TwoCovariateSetting) -> float:
    """Closed-form per-observation information for ``theta_lam``."""
    s = setting
    m2 = (s.mu_lambda + s.sigma_lambda**2 * s.theta_lambda) ** 2 + s.sigma_lambda**2
    return s.mean_p * s.mean_lambda * m2


@dataclass(frozen=True)
class FisherEstimate:
    """Monte-Carlo per-observation Fisher information with entrywise standard errors.

    ``inverse`` / ``inverse_se`` are ``I^{-1}`` and first-order standard errors of
    its entries, from the per-sample influence ``-I^{-1} h_k I^{-1}``.
    """

    matrix: np.ndarray
    stderr: np.ndarray
    inverse: np.ndarray
    inverse_se: np.ndarray
    n_samples: int

    def bound(self, n: int):
        """``I^{-1} / n`` and its standard errors."""
        return self.inverse / n, self.inverse_se / n


def per_sample_neg_hessian(setting: TwoCovariateSetting, x_lam, x_p, y) -> np.ndarray:
    """Negative Hessian of the conditional log-likelihood, one 2x2 block per sample.

    Written directly from the closed forms; it shares no code with
    :mod:`pogit.model` so that the two can check each other.
    """
    tl, tp = setting.theta_lambda, setting.theta_p
    lam = np.exp(x_lam * tl)
    s = expit(x_p * tp)
    sc = expit(-x_p * tp)
    h_ll = lam * s * x_lam**2
    h_lp = lam * s * sc * x_lam * x_p
    # e/(1+e)^3 * (lam (1-e) + y (1+e)) with e = exp(x_p tp), rewritten without overflow
    h_pp = (lam * s * sc * (sc - s) + y * s * sc) * x_p**2
    out = np.empty((x_lam.size, 2, 2))
    out[:, 0, 0] = h_ll
    out[:, 0, 1] = out[:, 1, 0] = h_lp
    out[:, 1, 1] = h_pp
    return out


def _chunk(setting: TwoCovariateSetting, size: int, seed: int, index: int):
    rng = stream(seed, "fisher", index)
    x_lam = rng.normal(setting.mu_lambda, setting.sigma_lambda, size)
    x_p = rng.normal(0.0, setting.sigma_p, size)
    mu = np.exp(x_lam * setting.theta_lambda) * expit(x_p * setting.theta_p)
    y = rng.poisson(mu)
    return per_sample_neg_hessian(setting, x_lam, x_p, y)


def fisher_information_mc(setting: TwoCovariateSetting, n_samples: int = 1_000_000, seed: int = 0,
                          chunk_size: int = 250_000, threads: int = 1) -> FisherEstimate:
    """Average the per-sample negative Hessian over draws of ``(x_lam, x_p, Y)``.

    Chunks use their own seeded sub-streams and are reduced in index order, so
    the result does not depend on ``threads``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sizes = [min(chunk_size, n_samples - i) for i in range(0, n_samples, chunk_size)]
    work = lambda i: _chunk(setting, sizes[i], seed, i)  # noqa: E731
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    h = np.concatenate(parts)
    I = h.mean(axis=0)
    se = h.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.full((2, 2), np.inf)
    Iinv = np.linalg.inv(I)
    infl = -np.einsum("ij,kjl,lm->kim", Iinv, h, Iinv)
    inv_se = infl.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.full((2, 2), np.inf)
    return FisherEstimate(I, se, Iinv, inv_se, int(n_samples))


def _c_objective(u):
    u = np.asarray(u, dtype=float)
    # exp(u)/(1+exp(u))^3 = expit(u) * expit(-u)^2
    return expit(u) * expit(-u) ** 2 * u * u


def constant_c_bound(return_argmax: bool = False, lo: float = -50.0, hi: float = 50.0, n_grid: int = 1_000_000):
    """Maximum over ``u`` of ``exp(u) u^2 / (1 + exp(u))^3``: dense grid, then golden-section."""
    u = np.linspace(lo, hi, n_grid)
    vals = _c_objective(u)
    j = int(np.argmax(vals))
    step = u[1] - u[0]
    a, b = u[max(j - 1, 0)], u[min(j + 1, n_grid - 1)]
    res = minimize_scalar(lambda t: -float(_c_objective(t)), bracket=(a, u[j], b), method="golden",
                          tol=1e-10)
    ustar, cstar = float(res.x), float(-res.fun)
    if not (abs(ustar - u[j]) <= step and cstar >= vals[j]):
        ustar, cstar = float(u[j]), float(vals[j])
    return (cstar, ustar) if return_argmax else cstar
