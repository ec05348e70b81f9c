"""Constrained, penalized maximum-likelihood fitting.

Minimizes ``nll(theta) + sum_k w_k/2 ||C_k theta - m_k||^2`` subject to
``A theta <= b`` and box bounds with a sequential-QP method: each step
solves a QP on a positive-definite modification of the exact Hessian over
the linearized feasible set, then backtracks on the objective.  Every
iterate is feasible, so accepted steps never increase the objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

from ._qp import solve_qp
from .constraints import ConstraintSet, GaussianPrior, compile_constraints, compile_priors
from .data import Dataset
from .design import Design
from .exceptions import InfeasibleConstraintsError, NumericalOverflowError
from .model import (
    ModelMatrices,
    ParameterVector,
    PogitSpec,
    _components,
    model_matrices,
    nll_derivatives,
    nll_value,
    poisson_spec,
)

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 500
    init: np.ndarray | None = None
    feas_tol: float = 1e-8


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``kkt_residual`` is the infinity norm of the gradient of the Lagrangian
    with nonnegative multipliers on the tight constraints.
    """

    spec: PogitSpec
    theta: ParameterVector
    objective: float
    nll: float
    converged: bool
    n_iterations: int
    kkt_residual: float
    active_constraints: list[str]
    multipliers: dict[str, float] = field(default_factory=dict)
    message: str = ""
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta.values

    @property
    def loglik(self) -> float:
        return -self.nll

    def summary(self) -> dict:
        return {
            "theta": self.theta.as_dict(),
            "objective": self.objective,
            "nll": self.nll,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "kkt_residual": self.kkt_residual,
            "active_constraints": list(self.active_constraints),
            "message": self.message,
        }


class Problem:
    """Objective, derivatives and feasible set of one fit, evaluated on fixed data."""

    def __init__(self, spec: PogitSpec, data: Dataset, extra_constraints=(), mats: ModelMatrices | None = None):
        self.spec = spec
        self.mats = mats if mats is not None else model_matrices(spec, data)
        self.priors: list[GaussianPrior] = compile_priors(spec, data)
        self.constraints: ConstraintSet = compile_constraints(spec, extra_constraints)
        self.A, self.b, self.labels = self.constraints.stacked()

    def value(self, theta) -> float:
        f = nll_value(self.mats, theta)
        for pr in self.priors:
            f += pr.penalty(theta)
        return f

    def magnitude(self, theta) -> float:
        """Sum of absolute summands of the objective: the scale of its rounding error."""
        ev = _components(self.mats, theta)
        m = self.mats
        total = float(np.sum(ev.mu + np.abs(m.y * ev.log_mu) + m.log_y_factorial))
        return total + sum(pr.penalty(theta) for pr in self.priors)

    def derivatives(self, theta):
        f, g, H = nll_derivatives(self.mats, theta)
        for pr in self.priors:
            r = pr.C @ theta - pr.target
            f += 0.5 * pr.weight * float(r @ r)
            g = g + pr.weight * (pr.C.T @ r)
            H = H + pr.weight * (pr.C.T @ pr.C)
        return f, g, H

    def kkt(self, theta, g, act_tol):
        """Return residual, tight row indices and their multipliers."""
        if self.A.shape[0] == 0:
            return float(np.abs(g).max(initial=0.0)), np.zeros(0, int), np.zeros(0)
        slack = self.b - self.A @ theta
        tight = np.flatnonzero(slack <= act_tol * (1.0 + np.abs(self.b)))
        if tight.size == 0:
            return float(np.abs(g).max(initial=0.0)), tight, np.zeros(0)
        nu, _ = nnls(self.A[tight].T, -g)
        r = g + self.A[tight].T @ nu
        return float(np.abs(r).max()), tight, nu

    def feasible_start(self, theta0, feas_tol):
        A, b = self.A, self.b
        if A.shape[0] == 0 or np.all(A @ theta0 - b <= feas_tol):
            return theta0
        k = theta0.size
        # minimize the largest violation t over (theta, t)
        c = np.zeros(k + 1)
        c[-1] = 1.0
        A_ub = np.hstack([A, -np.ones((A.shape[0], 1))])
        bounds = [(None, None)] * k + [(0, None)]
        res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
        if res.status != 0:
            raise InfeasibleConstraintsError(f"feasibility problem failed: {res.message}")
        t = float(res.x[-1])
        point = res.x[:k]
        if t > feas_tol:
            viol = A @ point - b
            cert = [self.labels[i] for i in np.flatnonzero(viol >= t - 1e-9)]
            raise InfeasibleConstraintsError(
                f"constraints are infeasible: smallest achievable violation {t:.3g} on {cert}", cert, t
            )
        # project the requested start onto the feasible set
        slack = np.maximum(b - A @ point, 0.0)
        d, _ = solve_qp(np.eye(k), point - theta0, A, slack)
        return point + d


def _modify(H: np.ndarray) -> np.ndarray:
    """Positive-definite surrogate of ``H``: eigenvalues replaced by their magnitude, floored."""
    ev, V = np.linalg.eigh(H)
    floor = 1e-8 * max(1.0, float(np.abs(ev).max(initial=0.0)))
    ev = np.maximum(np.abs(ev), floor)
    return (V * ev) @ V.T


def fit(spec: PogitSpec, data: Dataset, options: FitOptions | None = None, **kw) -> FitResult:
    """Fit ``spec`` to ``data``.

    Keyword arguments override fields of ``options`` (``tol``, ``max_iter``,
    ``init``, ``feas_tol``).  Non-convergence is reported through
    ``converged=False``; infeasible constraints raise
    :class:`InfeasibleConstraintsError`.
    """
    opts = options or FitOptions()
    if kw:
        opts = FitOptions(**{**opts.__dict__, **kw})
    if data.n == 0:
        raise ValueError("cannot fit an empty dataset")
    prob = Problem(spec, data)
    return _solve(prob, opts)


def _solve(prob: Problem, opts: FitOptions) -> FitResult:
    spec = prob.spec
    k = spec.n_coef
    theta0 = np.zeros(k) if opts.init is None else np.array(opts.init, dtype=float).reshape(-1)
    if theta0.size != k:
        raise ValueError(f"init has {theta0.size} entries, model has {k}")
    theta = prob.feasible_start(theta0, opts.feas_tol)
    f, g, H = prob.derivatives(theta)
    history = [f]
    working: list[int] = []
    n_iter = 0
    message = ""
    converged = False
    while True:
        kkt, tight, nu = prob.kkt(theta, g, opts.feas_tol)
        if kkt <= opts.tol:
            converged = True
            message = "KKT conditions satisfied"
            break
        if n_iter >= opts.max_iter:
            message = f"iteration limit {opts.max_iter} reached"
            break
        slack = prob.b - prob.A @ theta
        d, working = solve_qp(_modify(H), g, prob.A, slack, working)
        gd = float(g @ d)
        if not gd < 0 or np.linalg.norm(d) <= 1e-15 * (1.0 + np.linalg.norm(theta)):
            message = "no descent direction; stalled"
            break
        alpha = 1.0
        slop = 8 * _EPS * max(abs(f), prob.magnitude(theta))
        while True:
            trial = theta + alpha * d
            try:
                ft = prob.value(trial)
            except NumericalOverflowError:
                ft = np.inf
            if ft <= f + 1e-4 * alpha * gd + slop:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                break
        if alpha < 1e-14:
            message = "line search failed"
            break
        theta = trial
        f, g, H = prob.derivatives(theta)
        history.append(f)
        n_iter += 1
    kkt, tight, nu = prob.kkt(theta, g, opts.feas_tol)
    if not converged:
        log.warning("fit did not converge: %s (kkt residual %.3g)", message, kkt)
    active = [prob.labels[i] for i in tight]
    return FitResult(
        spec=spec,
        theta=spec.parameters(theta),
        objective=f,
        nll=nll_value(prob.mats, theta),
        converged=converged,
        n_iterations=n_iter,
        kkt_residual=kkt,
        active_constraints=active,
        multipliers={lab: float(v) for lab, v in zip(active, nu)},
        message=message,
        history=history,
    )


def fit_poisson(design: Design, data: Dataset, options: FitOptions | None = None, *, y=None,
                offset_column: str | None = None, bounds=None, constraints=(), **kw) -> FitResult:
    """Plain Poisson regression (``p = 1``), optionally on replacement counts ``y``."""
    spec = poisson_spec(design, offset_column, bounds or (-20.0, 20.0))
    if constraints:
        spec = PogitSpec(spec.lambda_design, spec.p_design, constraints=constraints,
                         offset_column=offset_column, bounds=spec.bounds)
    if y is not None:
        data = data.with_counts(y)
    return fit(spec, data, options, **kw)
