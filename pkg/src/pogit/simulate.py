"""Seeded Pogit data generation and the two simulation studies (variance sweep, nonlinear deconvolution)."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .constraints import PredictorPrior, Shape
from .data import Dataset
from .design import Design, Linear, Spline
from .estimate import FitOptions, fit
from .exceptions import NumericalOverflowError
from .model import Link, PogitSpec, predict
from .rng import stream
from .splines import SplineSpec
from .theory import TwoCovariateSetting, crlb_sd

log = logging.getLogger(__name__)

MAX_RATE = 1e15


def sample_counts(lam, p, rng: np.random.Generator, two_stage: bool = True):
    """Draw reported counts; returns ``(y, y_true)`` with ``y_true=None`` in direct mode.

    Two-stage draws ``Y* ~ Poisson(lam)`` then ``Y ~ Binomial(Y*, p)``; direct
    draws ``Y ~ Poisson(lam * p)``.
    """
    lam = np.asarray(lam, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), lam.shape)
    bad = ~np.isfinite(lam) | (lam > MAX_RATE)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise NumericalOverflowError(f"rate {lam[row]!r} at row {row} is too large to sample", row=row)
    if two_stage:
        y_true = rng.poisson(lam)
        return rng.binomial(y_true, p), y_true
    return rng.poisson(lam * p), None


def generate_pogit(spec: PogitSpec, theta, covariates, seed: int, two_stage: bool = True, key=()) -> Dataset:
    """Simulate counts for fixed covariates under ``spec`` at coefficients ``theta``."""
    lam, p, _ = predict(spec, theta, covariates)
    rng = stream(seed, "pogit", *key)
    y, y_true = sample_counts(lam, p, rng, two_stage)
    cov = covariates.covariates if isinstance(covariates, Dataset) else covariates
    return Dataset(dict(cov), y, y_true=y_true)


def generate_setting(setting: TwoCovariateSetting, seed: int, two_stage: bool = True, key=()) -> Dataset:
    """Draw covariates and counts for the two-covariate setting (columns ``x_lambda``, ``x_p``)."""
    rng = stream(seed, *key)
    x_lam = rng.normal(setting.mu_lambda, setting.sigma_lambda, setting.n)
    x_p = rng.normal(0.0, setting.sigma_p, setting.n)
    lam = np.exp(x_lam * setting.theta_lambda)
    y, y_true = sample_counts(lam, expit(x_p * setting.theta_p), rng, two_stage)
    return Dataset({"x_lambda": x_lam, "x_p": x_p}, y, y_true=y_true)


TWO_COVARIATE_SPEC = PogitSpec(Design([Linear("x_lambda")]), Design([Linear("x_p")]))


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ----------------------------------------------------------------------------
# variance sweep


_SWEEPABLE = ("theta_lambda", "theta_p")


@dataclass(frozen=True)
class SweepConfig:
    fixed: tuple[str, float] = ("theta_lambda", 1.0)
    swept: tuple[str, tuple[float, ...]] = ("theta_p", tuple(np.linspace(-5, 5, 21)))
    n: int = 50
    replicates: int = 1000
    seed: int = 0
    mu_lambda: float = 0.0
    sigma_lambda: float = 1.0
    sigma_p: float = 1.0
    bounds: tuple[float, float] = (-20.0, 20.0)
    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        if self.fixed[0] not in _SWEEPABLE or self.swept[0] not in _SWEEPABLE or self.fixed[0] == self.swept[0]:
            raise ValueError(f"fixed and swept must be distinct members of {_SWEEPABLE}")
        if len(self.swept[1]) == 0:
            raise ValueError("sweep grid is empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def setting(self, value: float) -> TwoCovariateSetting:
        return TwoCovariateSetting(
            mu_lambda=self.mu_lambda, sigma_lambda=self.sigma_lambda, sigma_p=self.sigma_p, n=self.n,
            **{self.fixed[0]: float(self.fixed[1]), self.swept[0]: float(value)},
        )


SWEEP_COLUMNS = ("swept_param", "value", "mean_theta_lambda", "sd_theta_lambda", "mean_theta_p", "sd_theta_p",
                 "crlb_sd_lambda", "crlb_sd_p", "n_converged")


def sweep_point(config: SweepConfig, value: float, threads: int = 1):
    """Fit every replicate at one grid value; returns ``(estimates, converged)`` arrays."""
    setting = config.setting(value)
    spec = PogitSpec(TWO_COVARIATE_SPEC.lambda_design, TWO_COVARIATE_SPEC.p_design, bounds=config.bounds)
    opts = FitOptions(tol=config.tol, max_iter=config.max_iter)

    def one(r):
        # common random numbers: replicate r sees the same stream at every grid value
        data = generate_setting(setting, config.seed, key=("sweep", r))
        res = fit(spec, data, opts)
        return res.theta.values, res.converged

    out = _map(one, range(config.replicates), threads)
    est = np.array([o[0] for o in out])
    ok = np.array([o[1] for o in out], dtype=bool)
    return est, ok


def run_sweep(config: SweepConfig, threads: int = 1) -> dict[str, np.ndarray]:
    """Mean and empirical sd of the MLE per grid value, next to the Cramer-Rao sd.

    Non-converged replicates are excluded from the moments and counted in
    ``n_converged`` (``n_failed`` holds the rest).
    """
    rows = {c: [] for c in SWEEP_COLUMNS}
    rows["n_failed"] = []
    for value in config.swept[1]:
        est, ok = sweep_point(config, value, threads)
        good = est[ok]
        if (~ok).any():
            log.warning("%d of %d replicates failed to converge at %s=%g", (~ok).sum(), ok.size,
                        config.swept[0], value)
        ddof = 1 if good.shape[0] > 1 else 0
        mean = good.mean(axis=0) if good.size else np.full(2, np.nan)
        sd = good.std(axis=0, ddof=ddof) if good.size else np.full(2, np.nan)
        bound = crlb_sd(config.setting(value))
        rows["swept_param"].append(config.swept[0])
        rows["value"].append(float(value))
        rows["mean_theta_lambda"].append(mean[0])
        rows["sd_theta_lambda"].append(sd[0])
        rows["mean_theta_p"].append(mean[1])
        rows["sd_theta_p"].append(sd[1])
        rows["crlb_sd_lambda"].append(bound[0])
        rows["crlb_sd_p"].append(bound[1])
        rows["n_converged"].append(int(ok.sum()))
        rows["n_failed"].append(int((~ok).sum()))
    return {k: (np.array(v, dtype=object) if k == "swept_param" else np.array(v)) for k, v in rows.items()}


# ----------------------------------------------------------------------------
# nonlinear synthetic study


def true_lambda(x0):
    return 15.0 + np.exp(np.cos(2 * np.pi * np.asarray(x0, dtype=float)))


def true_p(x1):
    return expit(np.sin(2 * np.pi * np.asarray(x1, dtype=float)))


VARIANTS = ("unconstrained", "bounded", "prior", "convex")


@dataclass(frozen=True)
class SyntheticConfig:
    """Nonlinear deconvolution study.

    ``prior_weight=None`` means ``2 / n``: the per-row penalty ``w/2 * eta_p^2``
    summed over all rows then costs one nll unit when every ``eta_p = 1``.
    """

    n: int = 1000
    realizations: int = 100
    variants: tuple[str, ...] = VARIANTS
    seed: int = 0
    degree: int = 3
    n_knots: int = 5
    link_bounds: tuple[float, float] = (0.2, 0.8)
    prior_weight: float | None = None
    convex_lambda: tuple[float, float] = (0.2, 0.8)
    convex_p: tuple[float, float] = (0.5, 1.0)
    n_constraint_points: int = 20
    n_grid: int = 101
    interior: tuple[float, float] = (0.05, 0.95)
    bounds: tuple[float, float] = (-20.0, 20.0)
    tol: float = 1e-6
    max_iter: int = 500
    envelope: tuple[float, float] = (5.0, 95.0)

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}; choose from {VARIANTS}")

    def spline(self) -> SplineSpec:
        knots = np.linspace(0, 1, self.n_knots + 2)[1:-1]
        return SplineSpec(self.degree, tuple(knots), (0.0, 1.0))

    def variant_spec(self, variant: str) -> PogitSpec:
        sp = self.spline()
        lam_design = Design([Spline("x0", sp)])
        p_design = Design([Spline("x1", sp)])
        link = Link("logit")
        constraints, priors = [], []
        if variant == "bounded":
            link = Link.bounded(*self.link_bounds)
        elif variant == "prior":
            w = 2.0 / self.n if self.prior_weight is None else self.prior_weight
            priors.append(PredictorPrior("p", w, 0.0))
        elif variant == "convex":
            constraints += [
                Shape("lambda", "x0", "convex", self.convex_lambda, self.n_constraint_points),
                Shape("p", "x1", "convex", self.convex_p, self.n_constraint_points),
            ]
        elif variant != "unconstrained":
            raise ValueError(f"unknown variant {variant!r}")
        return PogitSpec(lam_design, p_design, link, constraints, priors, bounds=self.bounds)


def synthetic_dataset(config: SyntheticConfig, realization: int) -> Dataset:
    rng = stream(config.seed, "synthetic", realization)
    x0 = rng.uniform(0.0, 1.0, config.n)
    x1 = rng.uniform(0.0, 1.0, config.n)
    y, y_true = sample_counts(true_lambda(x0), true_p(x1), rng, two_stage=True)
    return Dataset({"x0": x0, "x1": x1}, y, y_true=y_true)


@dataclass
class VariantCurves:
    """Fitted curves of one variant over all realizations, rows = realizations."""

    variant: str
    x: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    converged: np.ndarray
    envelope: tuple[float, float] = (5.0, 95.0)
    truth: dict = field(default_factory=dict)

    def table(self, quantity: str) -> dict[str, np.ndarray]:
        vals = getattr(self, quantity)
        lo, hi = np.percentile(vals, self.envelope, axis=0)
        return {"x": self.x, "true_value": self.truth[quantity], "fit_mean": vals.mean(axis=0),
                "fit_lo": lo, "fit_hi": hi}

    def ise(self, quantity: str) -> np.ndarray:
        """Integrated squared error per realization (trapezoid rule over the grid)."""
        err = (getattr(self, quantity) - self.truth[quantity]) ** 2
        return np.trapezoid(err, self.x, axis=1)


def curve_grid(config: SyntheticConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, config.n_grid)


def run_synthetic(config: SyntheticConfig, threads: int = 1) -> dict[str, VariantCurves]:
    """Fit each variant to every realization and evaluate p(x1), lambda(x0), mu(x, x) on a grid.

    The mu curve runs along the diagonal ``x0 = x1 = x``.
    """
    x = curve_grid(config)
    grid = {"x0": x, "x1": x}
    truth = {"p": true_p(x), "lam": true_lambda(x), "mu": true_lambda(x) * true_p(x)}
    specs = {v: config.variant_spec(v) for v in config.variants}
    opts = FitOptions(tol=config.tol, max_iter=config.max_iter)

    def one(r):
        data = synthetic_dataset(config, r)
        out = {}
        for v, spec in specs.items():
            res = fit(spec, data, opts)
            lam, p, mu = predict(spec, res.theta, grid)
            out[v] = (p, lam, mu, res.converged)
        return out

    per_rep = _map(one, range(config.realizations), threads)
    result = {}
    for v in config.variants:
        p = np.array([r[v][0] for r in per_rep])
        lam = np.array([r[v][1] for r in per_rep])
        mu = np.array([r[v][2] for r in per_rep])
        ok = np.array([r[v][3] for r in per_rep])
        result[v] = VariantCurves(v, x, p, lam, mu, ok, config.envelope, truth)
    return result


def interior_mask(config: SyntheticConfig, x: np.ndarray) -> np.ndarray:
    lo, hi = config.interior
    return (x >= lo) & (x <= hi)


__all__ = [
    "SweepConfig",
    "SyntheticConfig",
    "VariantCurves",
    "generate_pogit",
    "generate_setting",
    "run_sweep",
    "run_synthetic",
    "sample_counts",
]
