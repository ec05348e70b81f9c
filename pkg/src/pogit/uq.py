"""Sandwich covariance of fitted coefficients and delta-method intervals for lambda, p and mu."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import Dataset
from .model import PogitSpec, _components, _theta_array, inverse_link, model_matrices, nll_derivatives, score_matrix

RANK_TOL = 1e-10


@dataclass(frozen=True)
class SandwichCovariance:
    """``V = A^{-1} B A^{-1}``.

    ``A`` is the observed information (Hessian of the negative log-likelihood
    summed over observations), ``B`` the summed outer product of
    per-observation scores.  ``model_based`` is ``A^{-1}``.
    """

    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    names: tuple[str, ...] = ()
    constraints_active: bool = False

    @property
    def model_based(self) -> np.ndarray:
        return _sym_inv(self.A)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.V), 0.0, None))


def _check_rank(A: np.ndarray, names) -> None:
    from .exceptions import RankDeficiencyError

    ev, vecs = np.linalg.eigh(A)
    top = float(np.abs(ev).max(initial=0.0))
    small = np.flatnonzero(np.abs(ev) <= RANK_TOL * max(top, np.finfo(float).tiny))
    if top == 0.0 or small.size:
        names = names or tuple(f"theta[{j}]" for j in range(A.shape[0]))
        dirs = []
        for j in small if small.size else range(A.shape[0]):
            v = vecs[:, j]
            dirs.append({n: float(c) for n, c in zip(names, v) if abs(c) > 1e-6})
        raise RankDeficiencyError(
            f"information matrix is singular (eigenvalue ratio <= {RANK_TOL:g}); "
            f"near-null directions: {dirs}. The model is likely unidentifiable.",
            dirs,
        )


def _sym_inv(A: np.ndarray) -> np.ndarray:
    Ainv = np.linalg.inv(A)
    return 0.5 * (Ainv + Ainv.T)


def sandwich_from_matrices(A: np.ndarray, B: np.ndarray, names=()) -> SandwichCovariance:
    A = 0.5 * (np.asarray(A, dtype=float) + np.asarray(A, dtype=float).T)
    B = 0.5 * (np.asarray(B, dtype=float) + np.asarray(B, dtype=float).T)
    _check_rank(A, names)
    Ainv = _sym_inv(A)
    if np.array_equal(A, B):
        # information identity holds exactly: skip the extra products and their rounding
        return SandwichCovariance(A, B, Ainv, tuple(names))
    V = Ainv @ B @ Ainv
    return SandwichCovariance(A, B, 0.5 * (V + V.T), tuple(names))


def sandwich(spec: PogitSpec, theta_hat, data: Dataset, active_constraints=()) -> SandwichCovariance:
    """Robust covariance from the unpenalized likelihood at ``theta_hat``.

    Priors and active constraints move the estimate but are not reflected in
    ``V``; ``constraints_active`` flags the latter case.  ``theta_hat`` may be
    a :class:`~pogit.estimate.FitResult`.
    """
    if hasattr(theta_hat, "active_constraints"):
        active_constraints = theta_hat.active_constraints
        theta_hat = theta_hat.theta
    t = _theta_array(theta_hat)
    m = model_matrices(spec, data)
    _, _, A = nll_derivatives(m, t)
    S = score_matrix(m, t)
    out = sandwich_from_matrices(A, S.T @ S, spec.coef_names)
    if active_constraints:
        out = SandwichCovariance(out.A, out.B, out.V, out.names, True)
    return out


@dataclass(frozen=True)
class Intervals:
    level: float
    lam: np.ndarray
    lam_lo: np.ndarray
    lam_hi: np.ndarray
    p: np.ndarray
    p_lo: np.ndarray
    p_hi: np.ndarray
    mu: np.ndarray
    mu_lo: np.ndarray
    mu_hi: np.ndarray

    def as_columns(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in
                ("lam", "lam_lo", "lam_hi", "p", "p_lo", "p_hi", "mu", "mu_lo", "mu_hi")}


def _quad(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.clip(np.einsum("ij,jk,ik->i", X, V, X), 0.0, None)


def intervals(spec: PogitSpec, theta_hat, V, rows: Dataset, level: float = 0.90) -> Intervals:
    """Per-row delta-method intervals mapped through each inverse link.

    lambda and p use the normal interval of their own linear predictor;
    mu uses the normal interval of ``log lambda + log p``.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    V = V.V if isinstance(V, SandwichCovariance) else np.asarray(V, dtype=float)
    t = _theta_array(theta_hat)
    z = float(ndtri(0.5 + level / 2.0))
    m = model_matrices(spec, rows)
    ev = _components(m, t)
    kl = spec.n_lambda
    Vl, Vp = V[:kl, :kl], V[kl:, kl:]
    eta_l = m.X_lam @ t[:kl] + (0.0 if m.log_offset is None else m.log_offset)
    se_l = np.sqrt(_quad(m.X_lam, Vl))
    lam_lo, lam_hi = np.exp(eta_l - z * se_l), np.exp(eta_l + z * se_l)
    if spec.n_p:
        eta_p = m.X_p @ t[kl:]
        se_p = np.sqrt(_quad(m.X_p, Vp))
        p_lo = inverse_link(spec.p_link, eta_p - z * se_p)
        p_hi = inverse_link(spec.p_link, eta_p + z * se_p)
    else:
        p_lo = p_hi = np.ones(m.n)
    # gradient of log mu with respect to theta, row by row
    G = np.hstack([m.X_lam, m.X_p * ev.d1[:, None]])
    se_mu = np.sqrt(_quad(G, V))
    mu_lo, mu_hi = np.exp(ev.log_mu - z * se_mu), np.exp(ev.log_mu + z * se_mu)
    return Intervals(level, ev.lam, lam_lo, lam_hi, ev.p, p_lo, p_hi, ev.mu, mu_lo, mu_hi)


def coefficient_intervals(theta_hat, V, level: float = 0.90):
    """Wald intervals ``theta +/- z * se`` for each coefficient."""
    V = V.V if isinstance(V, SandwichCovariance) else np.asarray(V, dtype=float)
    t = _theta_array(theta_hat)
    z = float(ndtri(0.5 + level / 2.0))
    se = np.sqrt(np.clip(np.diag(V), 0.0, None))
    return t - z * se, t + z * se
