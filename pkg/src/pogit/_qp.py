"""Dense primal active-set solver for the strictly convex QP subproblems of the fitter."""

from __future__ import annotations

import numpy as np


def _eqp(H, grad, AW):
    """Minimize ``0.5 p'Hp + grad'p`` subject to ``AW p = 0``; return step and multipliers."""
    k = H.shape[0]
    if AW.shape[0] == 0:
        return np.linalg.solve(H, -grad), np.zeros(0)
    m = AW.shape[0]
    K = np.zeros((k + m, k + m))
    K[:k, :k] = H
    K[:k, k:] = AW.T
    K[k:, :k] = AW
    rhs = np.concatenate([-grad, np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k], sol[k:]


def _independent(A, rows, tol=1e-10):
    keep: list[int] = []
    for i in rows:
        trial = A[keep + [i]]
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(trial).max())) == len(keep) + 1:
            keep.append(i)
    return keep


def solve_qp(H, g, A, slack, working=(), max_iter=None):
    """Solve ``min 0.5 d'Hd + g'd  s.t.  A d <= slack`` for positive definite ``H``.

    ``slack >= 0`` so that ``d = 0`` is feasible.  ``working`` warm-starts the
    active set with rows that are currently tight.  Returns ``(d, working_set)``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    k = g.size
    m = A.shape[0]
    slack = np.maximum(np.asarray(slack, dtype=float), 0.0)
    scale = 1e-12 * max(1.0, float(np.abs(slack).max(initial=0.0)))
    W = _independent(A, [i for i in working if i < m and slack[i] <= scale]) if m else []
    d = np.zeros(k)
    max_iter = max_iter or 10 * (m + k) + 50
    gscale = max(1.0, float(np.abs(g).max(initial=0.0)))
    stationary = False
    for _ in range(max_iter):
        grad = H @ d + g
        p, nu = _eqp(H, grad, A[W])
        # after an unblocked full step d already minimizes over the working set;
        # re-solving only returns rounding noise
        if stationary or np.linalg.norm(p) <= 1e-14 * (1.0 + np.linalg.norm(d)):
            stationary = False
            if not W or nu.min() >= -1e-12 * gscale:
                return d, W
            W.pop(int(np.argmin(nu)))
            continue
        Ap = A @ p
        resid = slack - A @ d
        alpha, block = 1.0, -1
        mask = Ap > 1e-14 * max(1.0, np.linalg.norm(p))
        if W:
            mask[W] = False
        if np.any(mask):
            ratios = np.maximum(resid[mask], 0.0) / Ap[mask]
            j = int(np.argmin(ratios))
            if ratios[j] < 1.0:
                alpha = float(ratios[j])
                block = int(np.flatnonzero(mask)[j])
        d = d + alpha * p
        if block >= 0:
            W.append(block)
        else:
            stationary = True
    return d, W
