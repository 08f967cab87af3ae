"""Gauss-Newton with backtracking for row-blocked least-squares problems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = ["GaussNewtonConfig", "GaussNewtonResult", "RankDeficientJacobianError",
           "gauss_newton", "BlockedQR"]


_NOISE = 64 * np.finfo(float).eps


class RankDeficientJacobianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GaussNewtonConfig:
    """Stopping and line-search settings.

    Iteration stops when ``|J^T r| <= max(rel_tol * |J^T r|_0, abs_tol)`` or
    after ``max_iter`` iterations. A step whose predicted decrease lies below
    the rounding level of the objective is taken in full without a decrease
    test.
    """

    max_iter: int = 50
    rel_tol: float = 1e-8
    abs_tol: float = 0.0
    max_halvings: int = 10
    rank_tol: float = 1e-13


@dataclass
class GaussNewtonResult:
    x: np.ndarray
    objective: float
    grad_norm: float
    status: str
    history: list = field(default_factory=list)
    iterates: list | None = None

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def n_iterations(self):
        return len(self.history) - 1


class BlockedQR:
    """Triangular factor of ``[J | r]`` accumulated over row blocks."""

    def __init__(self, n):
        self.n = n
        self.R = np.zeros((0, n + 1))
        self.sumsq = 0.0

    def add(self, r, J):
        r = np.asarray(r, dtype=float).ravel()
        if r.size == 0:
            return
        self.sumsq += float(r @ r)
        block = np.column_stack([J, r])
        self.R = np.linalg.qr(np.vstack([self.R, block]), mode="r")

    def factors(self):
        n = self.n
        R = self.R
        if R.shape[0] < n:
            R = np.vstack([R, np.zeros((n - R.shape[0], n + 1))])
        return np.triu(R[:n, :n]), R[:n, n]


def gauss_newton(linearize, objective, x0, cfg=None, keep_iterates=False):
    """Minimize ``|r(x)|^2`` by Gauss-Newton with step halving.

    Parameters
    ----------
    linearize : callable
        ``linearize(x)`` yields ``(r_block, J_block)`` row blocks.
    objective : callable
        ``objective(x)`` returns ``|r(x)|^2``; may raise ``ValueError`` for
        inadmissible states, which counts as an increase.
    x0 : ndarray
        Initial guess.
    """
    cfg = cfg or GaussNewtonConfig()
    x = np.array(x0, dtype=float)
    n = x.size
    history = []
    iterates = [] if keep_iterates else None
    g0 = None
    step = 0.0
    status = "max_iter"
    f = np.inf
    gnorm = np.inf
    for k in range(cfg.max_iter + 1):
        acc = BlockedQR(n)
        for r_b, J_b in linearize(x):
            acc.add(r_b, J_b)
        R, z = acc.factors()
        f = acc.sumsq
        g = R.T @ z
        gnorm = float(np.linalg.norm(g))
        history.append(dict(iteration=k, objective=f, grad_norm=gnorm, step=step))
        if keep_iterates:
            iterates.append(x.copy())
        if not np.isfinite(f):
            status = "diverged"
            break
        if g0 is None:
            g0 = gnorm
        if gnorm <= max(cfg.rel_tol * g0, cfg.abs_tol):
            status = "converged"
            break
        if k == cfg.max_iter:
            break
        d = np.abs(np.diag(R))
        if d.size and d.min() <= cfg.rank_tol * max(d.max(), 1e-300):
            raise RankDeficientJacobianError(
                "Gauss-Newton Jacobian is numerically rank deficient; "
                "increase the number of samples or reduce the basis size")
        delta = -scipy.linalg.solve_triangular(R, z)
        lam = 1.0
        # predicted decrease |z|^2 below the rounding of f: a decrease test
        # cannot discriminate, so take the full Gauss-Newton step
        accepted = float(z @ z) <= _NOISE * f
        for _ in range(0 if accepted else cfg.max_halvings + 1):
            try:
                f_new = objective(x + lam * delta)
            except ValueError:
                f_new = np.inf
            if np.isfinite(f_new) and f_new < f:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            status = "stalled"
            break
        x = x + lam * delta
        step = lam
    return GaussNewtonResult(x, f, gnorm, status, history, iterates)
