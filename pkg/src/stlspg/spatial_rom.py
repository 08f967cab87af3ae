"""Spatial LSPG and GNAT reduced-order models (one minimization per time step)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .optim import GaussNewtonConfig, gauss_newton
from .time_integration import Trajectory

__all__ = [
    "SpatialIdentityWeighting",
    "SpatialGappyWeighting",
    "gnat_weighting",
    "SpatialRomResult",
    "SpatialROM",
    "lspg_solve",
    "DEFAULT_STEP_CONFIG",
]

DEFAULT_STEP_CONFIG = GaussNewtonConfig(max_iter=20, rel_tol=0.0, abs_tol=1e-8)


class SpatialIdentityWeighting:
    name = "identity"
    rows = None

    def apply(self, v):
        return v


class SpatialGappyWeighting:
    """``A = (Z Phi_r)^+ Z`` for sampled rows ``rows``; touches only those rows."""

    name = "gnat"

    def __init__(self, rows, Phi_r):
        rows = np.asarray(rows, dtype=int)
        if np.unique(rows).size != rows.size:
            raise ValueError("duplicate sample rows")
        Phi_r = np.asarray(Phi_r, dtype=float)
        if rows.size < Phi_r.shape[1]:
            raise ValueError("need at least as many sample rows as residual basis vectors")
        self.rows = rows
        self.Phi_r = Phi_r
        self.Q, self.R = np.linalg.qr(Phi_r[rows])
        d = np.abs(np.diag(self.R))
        if d.size and d.min() <= 1e-12 * d.max():
            raise np.linalg.LinAlgError("sampled residual basis is rank deficient")

    def apply(self, v_rows):
        return scipy.linalg.solve_triangular(self.R, self.Q.T @ v_rows)

    def matrix(self, n_dofs):
        Z = np.zeros((self.rows.size, n_dofs))
        Z[np.arange(self.rows.size), self.rows] = 1.0
        return self.apply(Z)


def gnat_weighting(rows, Phi_r):
    return SpatialGappyWeighting(rows, Phi_r)


@dataclass
class SpatialRomResult:
    trajectory: Trajectory
    coordinates: np.ndarray
    iterations: list
    statuses: list
    residual_snapshots: np.ndarray | None = None
    final_grad_norms: list = field(default_factory=list)

    @property
    def converged(self):
        return all(s == "converged" for s in self.statuses)


def lspg_solve(model, scheme, grid, Phi, weighting, mu, gn_config=None,
               record_residuals=False, reconstruct=True):
    """Sequential LSPG/GNAT solve starting from ``w0(mu)``.

    Parameters
    ----------
    Phi : (N_s, n_s) ndarray
        Orthonormal trial basis.
    weighting : SpatialIdentityWeighting or SpatialGappyWeighting
    record_residuals : bool
        Keep the full residual at every Gauss-Newton iterate (identity
        weighting only); used to train residual bases.
    """
    cfg = gn_config or DEFAULT_STEP_CONFIG
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    w0 = model.initial_state(mu)
    t = grid.times
    n_s = Phi.shape[1]
    rows = weighting.rows
    full = rows is None
    if full:
        Pr, w0r = Phi, w0
    else:
        closure = model.stencil_closure(rows)
        Pr, w0r, Pc = Phi[rows], w0[rows], Phi[closure]
    Y = np.zeros((grid.n_steps + 1, n_s))
    iters, stats, gnorms, snaps = [], [], [], []

    def f_rows(y, tm):
        if full:
            return model.velocity(w0 + Phi @ y, tm, mu)
        w = w0.copy()
        w[closure] += Pc @ y
        return model.velocity_rows(w, tm, mu, rows)

    def jac_rows(y, tm):
        if full:
            return model.velocity_jacobian(w0 + Phi @ y, tm, mu) @ Phi
        w = w0.copy()
        w[closure] += Pc @ y
        cols, blk = model.jacobian_rows(w, tm, mu, rows)
        return blk @ Phi[cols]

    for n in range(1, grid.n_steps + 1):
        alpha, beta = scheme.coefficients(n)
        dt = grid.dt(n)
        known = np.zeros(w0r.size)
        for j in range(1, alpha.size):
            if alpha[j] != 0.0:
                known += alpha[j] * (w0r + Pr @ Y[n - j])
            if beta[j] != 0.0:
                known -= dt * beta[j] * f_rows(Y[n - j], t[n - j])
        a0, b0, tn = alpha[0], beta[0], t[n]

        def resid(y):
            r = a0 * (w0r + Pr @ y) + known
            if b0 != 0.0:
                r = r - dt * b0 * f_rows(y, tn)
            return r

        def linearize(y):
            r = resid(y)
            J = a0 * Pr
            if b0 != 0.0:
                J = J - dt * b0 * jac_rows(y, tn)
            if record_residuals:
                snaps.append(r.copy())
            yield weighting.apply(r), weighting.apply(J)

        def objective(y):
            v = weighting.apply(resid(y))
            return float(v @ v)

        res = gauss_newton(linearize, objective, Y[n - 1], cfg)
        if res.status == "diverged":
            raise RuntimeError(f"Gauss-Newton diverged at time step {n}")
        Y[n] = res.x
        iters.append(res.n_iterations)
        stats.append(res.status)
        gnorms.append(res.grad_norm)
    states = w0[:, None] + Phi @ Y.T if reconstruct else None
    traj = Trajectory(states, mu, t) if reconstruct else None
    R = np.column_stack(snaps) if record_residuals and snaps else None
    return SpatialRomResult(traj, Y, iters, stats, R, gnorms)


class SpatialROM:
    """Bundles a trial basis and weighting for repeated online queries."""

    def __init__(self, model, scheme, grid, Phi, weighting=None, gn_config=None):
        self.model = model
        self.scheme = scheme
        self.grid = grid
        self.Phi = Phi
        self.weighting = weighting or SpatialIdentityWeighting()
        self.gn_config = gn_config or DEFAULT_STEP_CONFIG

    @property
    def n_unknowns(self):
        return self.Phi.shape[1]

    def solve(self, mu, **kw):
        return lspg_solve(self.model, self.scheme, self.grid, self.Phi, self.weighting, mu,
                          self.gn_config, **kw)
