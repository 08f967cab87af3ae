"""State tensors, unfoldings and space-time basis construction.

Snapshots are collected in a third-order tensor ``X[i, j, k]`` (space, time,
training parameter) centred on the initial state.  Spatial bases come from the
mode-1 unfolding; temporal bases from the mode-2 unfolding (T-HOSVD), from
the mode-2 unfolding of the spatially contracted tensor (ST-HOSVD), or per
spatial mode (tailored).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateTensor",
    "SpaceTimeBasis",
    "build_state_tensor",
    "unfold",
    "fold",
    "truncated_svd",
    "rank_for_energy",
    "spatial_pod",
    "temporal_basis_thosvd",
    "temporal_basis_sthosvd",
    "temporal_basis_tailored",
    "assemble_st_basis",
    "RankDeficiencyError",
]


class RankDeficiencyError(ValueError):
    def __init__(self, msg, attainable):
        super().__init__(msg)
        self.attainable = attainable


@dataclass
class StateTensor:
    """Centred snapshot tensor of shape ``(N_s, N_t, n_train)``."""

    data: np.ndarray
    params: list = field(default_factory=list)

    @property
    def shape(self):
        return self.data.shape


def build_state_tensor(trajectories) -> StateTensor:
    """Stack ``w(t^j; mu_k) - w^0(mu_k)`` for ``j = 1..N_t``."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("no trajectories given")
    shape = trajectories[0].states.shape
    if any(tr.states.shape != shape for tr in trajectories):
        raise ValueError("trajectories differ in state dimension or step count")
    X = np.empty((shape[0], shape[1] - 1, len(trajectories)))
    for k, tr in enumerate(trajectories):
        X[:, :, k] = tr.states[:, 1:] - tr.states[:, :1]
    return StateTensor(X, [np.array(tr.mu, dtype=float) for tr in trajectories])


def _data(tensor):
    return tensor.data if isinstance(tensor, StateTensor) else np.asarray(tensor)


def unfold(tensor, mode):
    """Mode-1 (``N_s x N_t n``) or mode-2 (``N_t x N_s n``) unfolding.

    Column blocks run over the third index, so block ``k`` of the mode-1
    unfolding is the snapshot matrix of training instance ``k``.
    """
    X = _data(tensor)
    if mode == 1:
        return X.reshape(X.shape[0], -1, order="F")
    if mode == 2:
        return X.transpose(1, 0, 2).reshape(X.shape[1], -1, order="F")
    raise ValueError("mode must be 1 or 2")


def fold(matrix, mode, shape):
    if mode == 1:
        return matrix.reshape(shape, order="F")
    if mode == 2:
        s = (shape[1], shape[0], shape[2])
        return matrix.reshape(s, order="F").transpose(1, 0, 2)
    raise ValueError("mode must be 1 or 2")


def _fix_signs(U, Vt):
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s, Vt * s[:, None]


def truncated_svd(M, r):
    """Leading ``r`` singular triplets with a deterministic sign convention.

    Returns
    -------
    U : (m, r) ndarray
    s : (r,) ndarray
    V : (n, r) ndarray
    """
    M = np.asarray(M, dtype=float)
    if r < 0 or r > min(M.shape):
        raise ValueError(f"rank {r} exceeds min{M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, Vt = _fix_signs(U[:, :r], Vt[:r])
    return U, s[:r], Vt.T


def rank_for_energy(s, eta):
    """Smallest rank retaining a fraction ``eta`` of the squared spectrum."""
    e = np.cumsum(np.asarray(s) ** 2)
    if e[-1] == 0:
        return 0
    return int(np.searchsorted(e / e[-1], eta - 1e-15) + 1)


def _numerical_rank(s, shape):
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(shape) * np.finfo(float).eps * s[0]))


def _leading(M, r, what, check_rank=True):
    if r > min(M.shape):
        raise ValueError(f"{what}: requested {r} vectors from a {M.shape} matrix")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if check_rank:
        rank = _numerical_rank(s, M.shape)
        if rank < r:
            raise RankDeficiencyError(
                f"{what}: snapshot matrix has numerical rank {rank} < {r}", rank)
    U, _ = _fix_signs(U[:, :r], Vt[:r])
    return U, s


def spatial_pod(tensor, n_s, return_spectrum=False, check_rank=True):
    """Leading left singular vectors of the mode-1 unfolding."""
    U, s = _leading(unfold(tensor, 1), n_s, "spatial POD", check_rank)
    return (U, s) if return_spectrum else U


def temporal_basis_thosvd(tensor, n_t, check_rank=True):
    """One temporal family shared by every spatial mode (T-HOSVD)."""
    U, _ = _leading(unfold(tensor, 2), n_t, "T-HOSVD temporal basis", check_rank)
    return U


def contract_space(tensor, Phi):
    """``X x_1 Phi^T`` of shape ``(n_s, N_t, n_train)``."""
    return np.einsum("is,ijk->sjk", Phi, _data(tensor), optimize=True)


def temporal_basis_sthosvd(tensor, Phi, n_t, check_rank=True):
    """Shared temporal family from the contracted tensor (ST-HOSVD)."""
    Y = contract_space(tensor, Phi)
    U, _ = _leading(unfold(Y, 2), n_t, "ST-HOSVD temporal basis", check_rank)
    return U


def temporal_basis_tailored(tensor, Phi, n_t_per_mode, check_rank=True):
    """Per-mode temporal families from ``N_t x n_train`` contractions."""
    X = _data(tensor)
    n_train = X.shape[2]
    n_s = Phi.shape[1]
    counts = np.broadcast_to(np.asarray(n_t_per_mode, dtype=int), (n_s,))
    if np.any(counts > n_train):
        raise ValueError(f"tailored temporal dimension exceeds n_train={n_train}")
    if np.any(counts < 1):
        raise ValueError("each spatial mode needs at least one temporal vector")
    Y = contract_space(X, Phi)
    return [_leading(Y[i], int(counts[i]), f"tailored mode {i}", check_rank)[0]
            for i in range(n_s)]


class SpaceTimeBasis:
    """Kronecker-structured space-time vectors ``phi_i (x) psi^{ij}``.

    Column ``I(i, j) = sum_{k<i} n_t^k + j`` (zero-based here) pairs spatial
    vector ``i`` with the ``j``-th vector of temporal family ``i``.  Temporal
    values refer to ``t^1..t^{N_t}``; every vector is zero at ``t^0``.

    Parameters
    ----------
    spatial : (N_s, n_s) ndarray
    temporal : ndarray or list of ndarray
        A single ``(N_t, n_t)`` family shared by all modes, or one family per
        spatial mode.
    """

    def __init__(self, spatial, temporal):
        self.spatial = np.asarray(spatial, dtype=float)
        n_s = self.spatial.shape[1]
        if isinstance(temporal, np.ndarray) and temporal.ndim == 2:
            self.shared = True
            families = [temporal] * n_s
        else:
            self.shared = False
            families = [np.asarray(T, dtype=float) for T in temporal]
        if len(families) != n_s:
            raise ValueError("need one temporal family per spatial mode")
        N_t = families[0].shape[0]
        if any(T.shape[0] != N_t for T in families):
            raise ValueError("temporal families differ in length")
        self.families = families
        self.counts = np.array([T.shape[1] for T in families], dtype=int)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)])
        self.mode_of = np.repeat(np.arange(n_s), self.counts)
        self.temporal = np.hstack(families)  # (N_t, n_st)
        self.temporal_ext = np.vstack([np.zeros((1, self.n_st)), self.temporal])
        # one-hot aggregation of columns into spatial modes
        self._agg = np.zeros((self.n_st, n_s))
        self._agg[np.arange(self.n_st), self.mode_of] = 1.0

    @property
    def n_space(self):
        return self.spatial.shape[0]

    @property
    def n_time(self):
        return self.temporal.shape[0]

    @property
    def n_s(self):
        return self.spatial.shape[1]

    @property
    def n_st(self):
        return int(self.offsets[-1])

    @property
    def storage_bound(self):
        return self.n_s * self.n_space + self.n_st * self.n_time

    def index(self, i, j):
        """One-based map ``I(i, j)``."""
        if not (1 <= i <= self.n_s and 1 <= j <= self.counts[i - 1]):
            raise IndexError("mode index out of range")
        return int(self.offsets[i - 1] + j)

    def column(self, m):
        """Column ``m`` (zero-based) as an ``(N_s, N_t)`` matrix."""
        return np.outer(self.spatial[:, self.mode_of[m]], self.temporal[:, m])

    def evaluate(self, n):
        """Values of all vectors at ``t^n`` as an ``(N_s, n_st)`` matrix."""
        return self.spatial[:, self.mode_of] * self.temporal_ext[n]

    def mode_coefficients(self, y):
        """Spatial-mode coefficients at ``t^0..t^{N_t}``, shape ``(N_t+1, n_s)``."""
        return (self.temporal_ext * np.asarray(y)) @ self._agg

    def field(self, y):
        """``sum_m y_m pi_m`` as an ``(N_s, N_t)`` matrix (``t^1..t^{N_t}``)."""
        return self.spatial @ self.mode_coefficients(y)[1:].T

    def rows(self, space_idx, time_idx, cols=None):
        """Matrix of basis values at pairs ``(space_idx[p], time_idx[p])``.

        ``time_idx`` are zero-based columns of the ``(N_s, N_t)`` layout.
        """
        cols = slice(None) if cols is None else cols
        mo = self.mode_of[cols]
        return self.spatial[np.asarray(space_idx)[:, None], mo] * \
            self.temporal[np.asarray(time_idx)][:, cols]

    def gram(self):
        """``Pi^T Pi`` from spatial and temporal inner products."""
        Gs = self.spatial.T @ self.spatial
        Gt = self.temporal.T @ self.temporal
        return Gs[np.ix_(self.mode_of, self.mode_of)] * Gt

    def project(self, X):
        """``Pi^T vec(X)`` for an ``(N_s, N_t)`` matrix ``X``."""
        P = self.spatial.T @ X  # (n_s, N_t)
        return np.einsum("mn,nm->m", P[self.mode_of], self.temporal)

    def matrix(self):
        """Dense ``(N_s N_t, n_st)`` matrix; column-major, space fastest."""
        out = np.empty((self.n_space * self.n_time, self.n_st))
        for m in range(self.n_st):
            out[:, m] = self.column(m).ravel(order="F")
        return out


def assemble_st_basis(spatial, temporal) -> SpaceTimeBasis:
    return SpaceTimeBasis(spatial, temporal)
