"""Offline hyper-reduction: residual snapshots, residual bases, greedy sampling.

Residual bases are Kronecker products of spatial and temporal residual
vectors, orthonormalized in column order.  Sample sets are built greedily so
that gappy-POD reconstruction of each basis vector from the previous ones is
as poor as possible at unsampled entries.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from .samples import SampleSet
from .st_rom import IdentityWeighting, SpaceTimeProblem, st_gauss_newton, project_fom_solution
from .tensor_decomp import (
    SpaceTimeBasis,
    spatial_pod,
    temporal_basis_sthosvd,
    temporal_basis_tailored,
    temporal_basis_thosvd,
)

__all__ = [
    "SampleSet",
    "ResidualTensor",
    "ResidualBasis",
    "DenseBasis",
    "collect_residual_snapshots",
    "residual_snapshots_rom_training",
    "residual_snapshots_fom_projection",
    "residual_snapshots_random",
    "residual_basis",
    "sample_quotas",
    "greedy_spacetime_samples",
    "greedy_temporal_samples",
    "greedy_spatial_samples",
    "temporal_then_spatial_samples",
    "spatial_then_temporal_samples",
    "gappy_reconstruct",
]


@dataclass
class ResidualTensor:
    """Residual snapshots ``R[i, j, k]`` with one provenance record per ``k``."""

    data: np.ndarray
    provenance: list = field(default_factory=list)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_res(self):
        return self.data.shape[2]


# snapshot collection -------------------------------------------------------
def residual_snapshots_rom_training(model, scheme, grid, basis, params,
                                    initial_guess=None, gn_config=None):
    """Residuals at every Gauss-Newton iterate of identity-weighted solves."""
    mats, prov = [], []
    for mu in params:
        prob = SpaceTimeProblem(model, scheme, grid, basis, mu)
        y0 = np.zeros(basis.n_st) if initial_guess is None else initial_guess(mu)
        try:
            sol = st_gauss_newton(prob, IdentityWeighting(), y0, gn_config, keep_iterates=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            warnings.warn(f"training solve at mu={mu} failed: {exc}")
            continue
        if not sol.converged:
            warnings.warn(f"training solve at mu={mu} ended with status {sol.status}")
        for k, y in enumerate(sol.iterates):
            mats.append(prob.residual_matrix(y))
            prov.append(dict(method="rom_training", mu=list(np.atleast_1d(mu)), iteration=k))
    if not mats:
        raise RuntimeError("no residual snapshots collected")
    return ResidualTensor(np.stack(mats, axis=2), prov)


def residual_snapshots_fom_projection(model, scheme, grid, basis, trajectories):
    """Residuals at the projections of full-order trajectories."""
    mats, prov = [], []
    for tr in trajectories:
        prob = SpaceTimeProblem(model, scheme, grid, basis, tr.mu)
        mats.append(prob.residual_matrix(project_fom_solution(basis, tr)))
        prov.append(dict(method="fom_projection", mu=list(tr.mu)))
    return ResidualTensor(np.stack(mats, axis=2), prov)


def residual_snapshots_random(model, scheme, grid, basis, coord_bounds, param_bounds,
                              n_samples, seed=0):
    """Residuals at Latin-hypercube samples of ``(y, mu)`` in a box.

    Parameters
    ----------
    coord_bounds : (n_st, 2) array_like
        Lower and upper bounds of the generalized coordinates.
    param_bounds : (n_mu, 2) array_like
        Parameter box; zero-width rows pin a component.
    """
    cb = np.asarray(coord_bounds, dtype=float)
    pb = np.atleast_2d(np.asarray(param_bounds, dtype=float))
    lo = np.concatenate([cb[:, 0], pb[:, 0]])
    hi = np.concatenate([cb[:, 1], pb[:, 1]])
    U = qmc.LatinHypercube(d=lo.size, seed=seed).random(n_samples)
    Z = lo + U * (hi - lo)
    mats, prov = [], []
    n_st = cb.shape[0]
    for z in Z:
        prob = SpaceTimeProblem(model, scheme, grid, basis, z[n_st:])
        mats.append(prob.residual_matrix(z[:n_st]))
        prov.append(dict(method="random", mu=list(z[n_st:]), seed=seed))
    return ResidualTensor(np.stack(mats, axis=2), prov)


def collect_residual_snapshots(method, **setup):
    """Dispatch to one of the three snapshot protocols by name."""
    table = {
        "rom_training": residual_snapshots_rom_training,
        "fom_projection": residual_snapshots_fom_projection,
        "random": residual_snapshots_random,
    }
    if method not in table:
        raise KeyError(f"unknown residual snapshot method {method!r}")
    return table[method](**setup)


# residual bases ----------------------------------------------------------------
class DenseBasis:
    """Explicit ``(N_s N_t, n)`` basis with column-major space-fastest rows."""

    def __init__(self, matrix, n_space, n_time):
        self.M = np.asarray(matrix, dtype=float)
        if self.M.shape[0] != n_space * n_time:
            raise ValueError("row count must equal n_space * n_time")
        self.n_space, self.n_time = n_space, n_time

    @property
    def n_r(self):
        return self.M.shape[1]

    def rows(self, space, time, cols=None):
        idx = np.asarray(space) + self.n_space * np.asarray(time)
        cols = slice(None) if cols is None else cols
        return self.M[idx][:, cols]

    def field(self, d):
        v = self.M[:, : len(d)] @ d
        return v.reshape(self.n_space, self.n_time, order="F")

    def matrix(self):
        return self.M


class ResidualBasis:
    """Orthonormal ``Phi_r = Pi_r R^{-1}`` stored in factored form.

    ``Pi_r`` is a :class:`SpaceTimeBasis` of Kronecker candidates in ``I_r``
    order; ``Rinv`` is ``None`` when the candidates are already orthonormal.
    """

    def __init__(self, candidates: SpaceTimeBasis, Rinv=None, dropped=()):
        self.pi = candidates
        self.Rinv = Rinv
        self.dropped = list(dropped)
        self.n_space, self.n_time = candidates.n_space, candidates.n_time

    @property
    def n_r(self):
        return self.pi.n_st

    def rows(self, space, time, cols=None):
        if self.Rinv is None:
            return self.pi.rows(space, time, cols)
        if cols is None:
            return self.pi.rows(space, time) @ self.Rinv
        idx = np.arange(self.n_r)[cols]
        last = int(idx.max()) + 1 if idx.size else 0
        return self.pi.rows(space, time, slice(0, last)) @ self.Rinv[:last, idx]

    def field(self, d):
        """``Phi_r d`` as an ``(N_s, N_t)`` matrix; ``d`` may be a prefix."""
        d = np.asarray(d, dtype=float)
        if self.Rinv is not None:
            d = self.Rinv[:, : d.size] @ d
        nz = np.flatnonzero(d)
        K = np.zeros((self.pi.n_s, self.n_time))
        np.add.at(K, self.pi.mode_of[nz], d[nz][:, None] * self.pi.temporal[:, nz].T)
        return self.pi.spatial @ K

    def matrix(self):
        M = self.pi.matrix()
        return M if self.Rinv is None else M @ self.Rinv


def _orthonormalize(G, tol=1e-10):
    """Upper-triangular ``R`` with ``G[keep][:, keep] = R^T R``; drops dependents."""
    n = G.shape[0]
    if np.allclose(G, np.eye(n), rtol=0.0, atol=1e-12):
        return None, np.arange(n), []
    try:
        L = np.linalg.cholesky(G)
        d = np.diag(L) ** 2
        if d.min() > tol * np.diag(G).max():
            return L.T, np.arange(n), []
    except np.linalg.LinAlgError:
        pass
    keep, dropped = [], []
    R = np.zeros((0, 0))
    for m in range(n):
        g = G[keep, m]
        r = scipy.linalg.solve_triangular(R, g, trans="T") if keep else np.zeros(0)
        d = G[m, m] - r @ r
        if d <= tol * G[m, m] or G[m, m] == 0:
            dropped.append(m)
            continue
        k = len(keep)
        Rn = np.zeros((k + 1, k + 1))
        Rn[:k, :k] = R
        Rn[:k, k] = r
        Rn[k, k] = np.sqrt(d)
        R = Rn
        keep.append(m)
    return R, np.array(keep, dtype=int), dropped


def residual_basis(tensor, variant, n_rs, n_rt):
    """Space-time residual basis from a residual tensor.

    Parameters
    ----------
    tensor : ResidualTensor or ndarray
    variant : {"thosvd", "sthosvd", "tailored"}
    n_rs : int
        Number of spatial residual vectors.
    n_rt : int or sequence of int
        Temporal vectors (shared count, or per spatial mode for tailored).
    """
    X = tensor.data if isinstance(tensor, ResidualTensor) else np.asarray(tensor)
    Phi = spatial_pod(X, n_rs, check_rank=False)
    if variant == "thosvd":
        T = temporal_basis_thosvd(X, int(n_rt), check_rank=False)
    elif variant == "sthosvd":
        T = temporal_basis_sthosvd(X, Phi, int(n_rt), check_rank=False)
    elif variant == "tailored":
        T = temporal_basis_tailored(X, Phi, n_rt, check_rank=False)
    else:
        raise ValueError(f"unknown residual basis variant {variant!r}")
    cand = SpaceTimeBasis(Phi, T)
    R, keep, dropped = _orthonormalize(cand.gram())
    if dropped:
        warnings.warn(f"dropped {len(dropped)} linearly dependent residual basis vectors")
        cand = SpaceTimeBasis(cand.spatial, _subset_families(cand, keep))
    Rinv = None if R is None else scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
    return ResidualBasis(cand, Rinv, dropped)


def _subset_families(basis, keep):
    keep = set(int(k) for k in keep)
    fams = []
    for i, T in enumerate(basis.families):
        cols = [j for j in range(T.shape[1]) if basis.offsets[i] + j in keep]
        fams.append(T[:, cols])
    # spatial modes left without temporal vectors contribute no columns
    return fams


# greedy sampling -----------------------------------------------------------------
def sample_quotas(n_samples, n_basis):
    """Samples added at each of the ``n_basis`` greedy iterations."""
    base, extra = divmod(int(n_samples), int(n_basis))
    q = np.full(int(n_basis), base, dtype=int)
    q[:extra] += 1
    return q


def _top(scores, k, excluded):
    """Indices of the ``k`` largest scores outside ``excluded``; ties -> lowest."""
    s = np.array(scores, dtype=float)
    if excluded:
        s[list(excluded)] = -np.inf
    order = np.argsort(-s, kind="stable")
    picks = order[:k]
    if np.any(~np.isfinite(s[picks])):
        raise ValueError("not enough unsampled indices left")
    return [int(p) for p in picks]


def _gappy_error(basis, i, space, time):
    """Error field of the gappy reconstruction of column ``i`` from columns ``< i``."""
    d = np.zeros(i + 1)
    d[i] = 1.0
    if i > 0 and len(space):
        A = basis.rows(space, time, slice(0, i))
        b = basis.rows(space, time, slice(i, i + 1))[:, 0]
        c = np.linalg.lstsq(A, b, rcond=None)[0]  # minimum-norm when underdetermined
        d[:i] = -c
    return basis.field(d)


def _check_count(count, available, n_basis):
    if count > available:
        raise ValueError(f"requested {count} samples but only {available} indices exist")
    if count < 1:
        raise ValueError("need at least one sample")


def greedy_spacetime_samples(basis, n_samples):
    """Pairwise greedy selection (returns a pair-form :class:`SampleSet`)."""
    Ns, Nt = basis.n_space, basis.n_time
    _check_count(n_samples, Ns * Nt, basis.n_r)
    quotas = sample_quotas(n_samples, basis.n_r)
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        sp = np.array([c % Ns for c in chosen], dtype=int)
        tm = np.array([c // Ns for c in chosen], dtype=int)
        E = _gappy_error(basis, i, sp, tm)
        chosen += _top(np.abs(E).ravel(order="F"), q, chosen)
    chosen = np.array(chosen, dtype=int)
    return SampleSet.pairs(chosen % Ns, chosen // Ns)


def greedy_temporal_samples(basis, n_samples, spatial):
    """Greedy time indices given spatial rows ``spatial`` (zero-based)."""
    spatial = np.asarray(spatial, dtype=int)
    if spatial.size == 0:
        raise ValueError("spatial sample set is empty")
    _check_count(n_samples, basis.n_time, basis.n_r)
    quotas = sample_quotas(n_samples, basis.n_r)
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        tt, ss = np.meshgrid(np.array(chosen, dtype=int), spatial, indexing="ij")
        E = _gappy_error(basis, i, ss.ravel(), tt.ravel())
        chosen += _top(np.sum(E * E, axis=0), q, chosen)
    return np.array(chosen, dtype=int)


def greedy_spatial_samples(basis, n_samples, temporal):
    """Greedy spatial rows given time indices ``temporal`` (zero-based)."""
    temporal = np.asarray(temporal, dtype=int)
    if temporal.size == 0:
        raise ValueError("temporal sample set is empty")
    _check_count(n_samples, basis.n_space, basis.n_r)
    quotas = sample_quotas(n_samples, basis.n_r)
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        ss, tt = np.meshgrid(np.array(chosen, dtype=int), temporal, indexing="ij")
        E = _gappy_error(basis, i, ss.ravel(), tt.ravel())
        chosen += _top(np.sum(E * E, axis=1), q, chosen)
    return np.array(chosen, dtype=int)


def temporal_then_spatial_samples(basis, n_space_samples, n_time_samples):
    t = greedy_temporal_samples(basis, n_time_samples, np.arange(basis.n_space))
    s = greedy_spatial_samples(basis, n_space_samples, t)
    return SampleSet.product(s, t)


def spatial_then_temporal_samples(basis, n_space_samples, n_time_samples):
    s = greedy_spatial_samples(basis, n_space_samples, np.arange(basis.n_time))
    t = greedy_temporal_samples(basis, n_time_samples, s)
    return SampleSet.product(s, t)


def gappy_reconstruct(basis, samples, values):
    """Least-squares fit of sampled values; returns ``(coefficients, field)``."""
    B = basis.rows(samples.space, samples.time)
    Q, R = np.linalg.qr(B)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= 1e-12 * d.max():
        raise np.linalg.LinAlgError("sampled basis is rank deficient")
    c = scipy.linalg.solve_triangular(R, Q.T @ np.asarray(values, dtype=float))
    return c, basis.field(c)
