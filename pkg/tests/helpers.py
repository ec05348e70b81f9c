"""Shared test utilities (imported by the test modules, not collected)."""

import numpy as np

from pogit.data import Dataset
from pogit.design import Design, Intercept, Linear, Spline
from pogit.model import Link, PogitSpec, gradient, hessian, neg_log_likelihood
from pogit.simulate import generate_setting
from pogit.splines import SplineSpec
from pogit.theory import TwoCovariateSetting


def simulate(n=200, seed=0, key=(), **kw):
    return generate_setting(TwoCovariateSetting(n=n, **kw), seed=seed, key=key)


def relerr(a, b, floor=1e-8):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def random_problem(rng: np.random.Generator, n: int = 30):
    """A random spec (links, splines, exposure vary) with a dataset and coefficients."""
    sp = SplineSpec(int(rng.integers(1, 4)), (0.35, 0.7))
    lam_terms = [Intercept(), Linear("a")]
    p_terms = [Intercept(), Linear("b")]
    if rng.random() < 0.5:
        lam_terms.append(Spline("u", sp))
    if rng.random() < 0.5:
        p_terms.append(Spline("v", sp, drop_first=True))
    link = Link("logit") if rng.random() < 0.5 else Link.bounded(0.1 * rng.random(), 0.6 + 0.4 * rng.random())
    use_exposure = rng.random() < 0.3
    spec = PogitSpec(Design(lam_terms), Design(p_terms), link, offset_column="e" if use_exposure else None)
    cov = {"a": rng.normal(size=n), "b": rng.normal(size=n), "u": rng.random(n), "v": rng.random(n),
           "e": rng.uniform(0.5, 2.0, n)}
    theta = rng.normal(0.0, 0.5, spec.n_coef)
    y = rng.poisson(3.0, n)
    return spec, Dataset(cov, y), theta


def fd_gradient(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h * max(1.0, abs(theta[j]))
        g[j] = (f(theta + e) - f(theta - e)) / (2 * e[j])
    return g


def fd_hessian(gfun, theta, h=1e-5):
    H = np.empty((theta.size, theta.size))
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h * max(1.0, abs(theta[j]))
        H[:, j] = (gfun(theta + e) - gfun(theta - e)) / (2 * e[j])
    return 0.5 * (H + H.T)


def derivative_errors(spec, data, theta):
    """Relative errors of the analytic gradient and Hessian against central differences."""
    g = gradient(spec, theta, data)
    H = hessian(spec, theta, data)
    g_fd = fd_gradient(lambda t: neg_log_likelihood(spec, t, data), theta)
    H_fd = fd_hessian(lambda t: gradient(spec, t, data), theta)
    eg = np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g)))
    eh = np.max(np.abs(H - H_fd)) / max(1.0, np.max(np.abs(H)))
    return eg, eh
