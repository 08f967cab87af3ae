"""Space-time least-squares Petrov-Galerkin (ST-LSPG) reduced-order models.

The whole trajectory is approximated as ``w0(mu) + sum_m y_m pi_m`` and the
generalized coordinates ``y`` minimize a weighted norm of the residuals of
every time step at once.  The weighting is the identity, a collocation
sample selector, or a gappy-POD projection onto a space-time residual basis
restricted to sampled entries (ST-GNAT).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .optim import GaussNewtonConfig, gauss_newton
from .samples import SampleSet
from .time_integration import Trajectory

__all__ = [
    "SpaceTimeProblem",
    "IdentityWeighting",
    "CollocationWeighting",
    "GappyWeighting",
    "StRomSolution",
    "SpaceTimeROM",
    "st_residual",
    "st_jacobian_columns",
    "st_gauss_newton",
    "reconstruct_solution",
    "project_fom_solution",
    "LinearRBFInterpolator",
    "rbf_initial_guess",
]

_CHUNK_ENTRIES = 2.5e7  # max entries of a Jacobian row block


class SpaceTimeProblem:
    """Residual and Jacobian of the space-time system for one parameter.

    Parameters
    ----------
    model : SemiDiscreteModel
    scheme : LinearMultistepScheme
    grid : TimeGrid
    basis : SpaceTimeBasis
    mu : array_like
    """

    def __init__(self, model, scheme, grid, basis, mu):
        if basis.n_time != grid.n_steps or basis.n_space != model.n_dofs:
            raise ValueError("basis dimensions do not match model and time grid")
        self.model = model
        self.scheme = scheme
        self.grid = grid
        self.basis = basis
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.w0 = model.initial_state(self.mu)
        self.times = grid.times
        self._coef = {n: scheme.coefficients(n) for n in range(1, min(grid.n_steps, scheme.max_steps) + 1)}

    @property
    def n_st(self):
        return self.basis.n_st

    def coefficients(self, n):
        return self._coef[min(n, self.scheme.max_steps)]

    def states(self, y):
        """Reconstructed states ``(N_s, N_t + 1)``."""
        C = self.basis.mode_coefficients(y)
        return self.w0[:, None] + self.basis.spatial @ C.T

    # per-time blocks ----------------------------------------------------
    def _block(self, n, rows, C, jac):
        """Residual (and Jacobian) rows ``rows`` of ``r^n``; ``rows=None`` is all."""
        model, Phi, T = self.model, self.basis.spatial, self.basis.temporal_ext
        alpha, beta = self.coefficients(n)
        dt = self.grid.dt(n)
        full = rows is None
        if not full:
            closure = model.stencil_closure(rows)
        r = 0.0
        J = 0.0
        for j in range(alpha.size):
            m = n - j
            a, b = alpha[j], beta[j]
            if b != 0.0:
                if full:
                    w = self.w0 + Phi @ C[m]
                    r = r + a * w - dt * b * model.velocity(w, self.times[m], self.mu)
                    if jac:
                        G = a * Phi - dt * b * (model.velocity_jacobian(w, self.times[m], self.mu) @ Phi)
                else:
                    w = self.w0.copy()
                    w[closure] += Phi[closure] @ C[m]
                    r = r + a * w[rows] - dt * b * model.velocity_rows(w, self.times[m], self.mu, rows)
                    if jac:
                        cols, blk = model.jacobian_rows(w, self.times[m], self.mu, rows)
                        G = a * Phi[rows] - dt * b * (blk @ Phi[cols])
            elif a != 0.0:
                Pr = Phi if full else Phi[rows]
                w0 = self.w0 if full else self.w0[rows]
                r = r + a * (w0 + Pr @ C[m])
                G = a * Pr
            else:
                continue
            if jac and m > 0:
                J = J + G[:, self.basis.mode_of] * T[m]
        if jac and np.isscalar(J):
            J = np.zeros((self.model.n_dofs if full else len(rows), self.n_st))
        return r, J

    def residual_matrix(self, y):
        """Full residual as an ``(N_s, N_t)`` matrix (column ``n-1`` is ``r^n``)."""
        C = self.basis.mode_coefficients(y)
        out = np.empty((self.model.n_dofs, self.grid.n_steps))
        for n in range(1, self.grid.n_steps + 1):
            out[:, n - 1] = self._block(n, None, C, False)[0]
        return out

    def residual(self, y, samples=None):
        """Residual at ``samples`` (ordered as the sample set) or the full vec."""
        if samples is None:
            return self.residual_matrix(y).ravel(order="F")
        C = self.basis.mode_coefficients(y)
        out = np.empty(samples.size)
        for q, pos, rows in samples.grouped():
            out[pos] = self._block(q + 1, rows, C, False)[0]
        return out

    def jacobian(self, y, samples=None):
        return self.linearize(y, samples)[1]

    def linearize(self, y, samples=None):
        """Residual and Jacobian at ``samples`` (or of the full vec)."""
        C = self.basis.mode_coefficients(y)
        if samples is None:
            rs, Js = zip(*self.full_blocks(y, C=C))
            return np.concatenate(rs), np.vstack(Js)
        r = np.empty(samples.size)
        J = np.empty((samples.size, self.n_st))
        for q, pos, rows in samples.grouped():
            r[pos], J[pos] = self._block(q + 1, rows, C, True)
        return r, J

    def full_blocks(self, y, C=None, chunk_entries=_CHUNK_ENTRIES):
        """Yield full residual/Jacobian row blocks grouped over time steps."""
        if C is None:
            C = self.basis.mode_coefficients(y)
        N = self.model.n_dofs
        per = max(1, int(chunk_entries // max(1, N * self.n_st)))
        for start in range(1, self.grid.n_steps + 1, per):
            stop = min(self.grid.n_steps, start + per - 1)
            rs, Js = [], []
            for n in range(start, stop + 1):
                r, J = self._block(n, None, C, True)
                rs.append(r)
                Js.append(J)
            yield np.concatenate(rs), np.vstack(Js)


def st_residual(problem, y, samples=None):
    return problem.residual(y, samples)


def st_jacobian_columns(problem, y, samples=None):
    return problem.jacobian(y, samples)


# weightings ---------------------------------------------------------------
class IdentityWeighting:
    name = "identity"

    def linearize(self, problem, y):
        yield from problem.full_blocks(y)

    def objective(self, problem, y):
        r = problem.residual_matrix(y)
        return float(np.sum(r * r))

    def weighted_residual(self, problem, y):
        return problem.residual(y)


class CollocationWeighting:
    """Selects sampled residual entries."""

    name = "collocation"

    def __init__(self, samples: SampleSet):
        self.samples = samples

    def check(self, problem):
        if self.samples.size < problem.n_st:
            raise ValueError("collocation needs at least n_st samples")

    def linearize(self, problem, y):
        yield problem.linearize(y, self.samples)

    def objective(self, problem, y):
        r = problem.residual(y, self.samples)
        return float(r @ r)

    def weighted_residual(self, problem, y):
        return problem.residual(y, self.samples)


class GappyWeighting:
    """``(Z Phi_r)^+ Z`` applied through a thin QR of the sampled basis.

    Parameters
    ----------
    samples : SampleSet
    sampled_basis : (n_z, n_r) ndarray
        Residual basis rows at ``samples`` (same order).
    """

    name = "gappy"

    def __init__(self, samples: SampleSet, sampled_basis):
        B = np.asarray(sampled_basis, dtype=float)
        if B.shape[0] != samples.size:
            raise ValueError("sampled basis rows must match the sample count")
        if B.shape[0] < B.shape[1]:
            raise ValueError("need at least as many samples as residual basis vectors")
        self.samples = samples
        self.Q, self.R = np.linalg.qr(B)
        d = np.abs(np.diag(self.R))
        if d.size and d.min() <= 1e-12 * d.max():
            raise np.linalg.LinAlgError("sampled residual basis is rank deficient")

    @classmethod
    def from_basis(cls, samples, residual_basis):
        return cls(samples, residual_basis.rows(samples.space, samples.time))

    def apply(self, r_sampled):
        return scipy.linalg.solve_triangular(self.R, self.Q.T @ r_sampled)

    def linearize(self, problem, y):
        r, J = problem.linearize(y, self.samples)
        yield self.apply(r), self.apply(J)

    def objective(self, problem, y):
        c = self.apply(problem.residual(y, self.samples))
        return float(c @ c)

    def weighted_residual(self, problem, y):
        return self.apply(problem.residual(y, self.samples))


# solutions -----------------------------------------------------------------
@dataclass
class StRomSolution:
    coordinates: np.ndarray
    trajectory: Trajectory
    history: list
    converged: bool
    status: str
    iterates: list | None = None

    @property
    def n_iterations(self):
        return len(self.history) - 1


def reconstruct_solution(basis, y, w0, mu=None, times=None) -> Trajectory:
    C = basis.mode_coefficients(y)
    states = np.asarray(w0, dtype=float)[:, None] + basis.spatial @ C.T
    return Trajectory(states, np.zeros(0) if mu is None else mu, times)


def st_gauss_newton(problem, weighting, y0, cfg=None, keep_iterates=False) -> StRomSolution:
    """Solve the weighted space-time least-squares problem."""
    cfg = cfg or GaussNewtonConfig()
    if hasattr(weighting, "check"):
        weighting.check(problem)
    res = gauss_newton(lambda y: weighting.linearize(problem, y),
                       lambda y: weighting.objective(problem, y),
                       y0, cfg, keep_iterates)
    traj = reconstruct_solution(problem.basis, res.x, problem.w0, problem.mu, problem.times)
    return StRomSolution(res.x, traj, res.history, res.converged, res.status, res.iterates)


def project_fom_solution(basis, trajectory):
    """Least-squares coordinates of a centred trajectory in the basis span."""
    X = trajectory.states[:, 1:] - trajectory.states[:, :1]
    G = basis.gram()
    b = basis.project(X)
    try:
        c = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("space-time basis Gram matrix is singular") from exc
    return scipy.linalg.cho_solve(c, b)


# initial guesses ----------------------------------------------------------
class LinearRBFInterpolator:
    """Interpolation with the kernel ``phi(r) = r`` plus a constant term.

    The linear kernel is only conditionally positive definite, so the
    interpolant is augmented by a constant with the usual side condition
    ``sum_k w_k = 0``; this also makes constant data reproduce exactly.
    Parameters are mapped to the unit box spanned by the training points
    before distances are taken (axes with zero extent are left unscaled).
    """

    def __init__(self, params, values, normalize=True):
        P = np.atleast_2d(np.asarray(params, dtype=float))
        if P.shape[0] == 1 and np.ndim(params) == 1:
            P = P.T
        Y = np.asarray(values, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if P.shape[0] != Y.shape[0]:
            raise ValueError("number of parameters and values differ")
        if np.unique(P, axis=0).shape[0] != P.shape[0]:
            raise ValueError("duplicate training parameters")
        self.lo = P.min(axis=0)
        span = P.max(axis=0) - self.lo
        self.span = np.where(span > 0, span, 1.0) if normalize else np.ones_like(span)
        if not normalize:
            self.lo = np.zeros_like(self.lo)
        self.centers = (P - self.lo) / self.span
        k = P.shape[0]
        M = np.zeros((k + 1, k + 1))
        M[:k, :k] = self._kernel(self.centers)
        M[:k, k] = M[k, :k] = 1.0
        sol = np.linalg.solve(M, np.vstack([Y, np.zeros((1, Y.shape[1]))]))
        self.weights, self.constant = sol[:k], sol[k]

    def _kernel(self, X):
        return np.linalg.norm(X[:, None, :] - self.centers[None, :, :], axis=2)

    def __call__(self, mu):
        X = (np.atleast_2d(np.asarray(mu, dtype=float)) - self.lo) / self.span
        out = self._kernel(X) @ self.weights + self.constant
        return out[0] if X.shape[0] == 1 else out


def rbf_initial_guess(params, coordinates, mu):
    return LinearRBFInterpolator(params, coordinates)(mu)


# ROM wrapper ---------------------------------------------------------------
class SpaceTimeROM:
    """An ST-LSPG / ST-collocation / ST-GNAT model ready for online queries.

    Parameters
    ----------
    model, scheme, grid, basis
        Problem definition and space-time trial basis.
    weighting
        One of :class:`IdentityWeighting`, :class:`CollocationWeighting`,
        :class:`GappyWeighting`.
    initial_guess : callable, optional
        Maps ``mu`` to ``y0``; zero when omitted.
    """

    def __init__(self, model, scheme, grid, basis, weighting, initial_guess=None,
                 gn_config=None):
        self.model = model
        self.scheme = scheme
        self.grid = grid
        self.basis = basis
        self.weighting = weighting
        self.initial_guess = initial_guess
        self.gn_config = gn_config or GaussNewtonConfig()

    @property
    def n_unknowns(self):
        return self.basis.n_st

    def problem(self, mu):
        return SpaceTimeProblem(self.model, self.scheme, self.grid, self.basis, mu)

    def solve(self, mu, y0=None, keep_iterates=False) -> StRomSolution:
        prob = self.problem(mu)
        if y0 is None:
            y0 = np.zeros(self.basis.n_st) if self.initial_guess is None else self.initial_guess(mu)
        return st_gauss_newton(prob, self.weighting, y0, self.gn_config, keep_iterates)
