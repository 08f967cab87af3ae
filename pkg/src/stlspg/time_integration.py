"""Linear multistep time discretization.

A scheme advances the semi-discrete system ``dw/dt = f(w, t; mu)`` through
the residual

    r^n = sum_j alpha_j^n w^{n-j} - dt^n sum_j beta_j^n f(w^{n-j}, t^{n-j}; mu)

for ``j = 0..k_n``.  Multi-step members start up with the lower-order members
of the same family so that ``k_n = min(k, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

__all__ = [
    "LinearMultistepScheme",
    "TimeGrid",
    "Trajectory",
    "NewtonConfig",
    "NewtonConvergenceError",
    "SCHEME_NAMES",
    "backward_euler_scheme",
    "multistep_scheme_table",
    "lmm_step_residual",
    "lmm_step_jacobian",
    "solve_fom",
    "assemble_lmm_operators",
    "lmm_singular_values",
]


def _fr(*vals):
    return tuple(Fraction(v) for v in vals)


# Family members indexed by step count; each entry is (alpha, beta).
_BDF = [
    (_fr(1, -1), _fr(1, 0)),
    (_fr("3/2", -2, "1/2"), _fr(1, 0, 0)),
    (_fr("11/6", -3, "3/2", "-1/3"), _fr(1, 0, 0, 0)),
]
_AB = [
    (_fr(1, -1), _fr(0, 1)),
    (_fr(1, -1, 0), _fr(0, "3/2", "-1/2")),
    (_fr(1, -1, 0, 0), _fr(0, "23/12", "-16/12", "5/12")),
]
_AM = [
    (_fr(1, -1), _fr("1/2", "1/2")),
    (_fr(1, -1, 0), _fr("5/12", "8/12", "-1/12")),
    (_fr(1, -1, 0, 0), _fr("9/24", "19/24", "-5/24", "1/24")),
]

_TABLE = {
    "BE": _BDF[:1],
    "BDF2": _BDF[:2],
    "BDF3": _BDF[:3],
    "AB2": _AB[:2],
    "AB3": _AB[:3],
    "AM1": _AM[:1],
    "AM2": _AM[:2],
    "AM3": _AM[:3],
}

SCHEME_NAMES = tuple(_TABLE)


@dataclass(frozen=True)
class LinearMultistepScheme:
    """Coefficients of a (start-up aware) linear multistep method.

    Parameters
    ----------
    name : str
        Label of the scheme.
    members : tuple
        ``members[k-1]`` holds the ``(alpha, beta)`` tuples of the k-step
        member.  Step ``n`` uses member ``min(n, len(members))``.
    """

    name: str
    members: tuple

    @property
    def max_steps(self) -> int:
        return len(self.members)

    def steps_at(self, n: int) -> int:
        if n < 1:
            raise ValueError("time index must be >= 1")
        return min(n, self.max_steps)

    def _member(self, n):
        return self.members[self.steps_at(n) - 1]

    def alpha(self, n: int, j: int) -> float:
        a = self._member(n)[0]
        if not 0 <= j < len(a):
            raise IndexError(f"j={j} outside 0..{len(a) - 1}")
        return float(a[j])

    def beta(self, n: int, j: int) -> float:
        b = self._member(n)[1]
        if not 0 <= j < len(b):
            raise IndexError(f"j={j} outside 0..{len(b) - 1}")
        return float(b[j])

    def coefficients(self, n: int):
        """Return ``(alpha, beta)`` float arrays of length ``k_n + 1``."""
        a, b = self._member(n)
        return np.array(a, dtype=float), np.array(b, dtype=float)

    def exact_coefficients(self, n: int):
        return self._member(n)

    @property
    def is_explicit(self) -> bool:
        return all(m[1][0] == 0 for m in self.members)


def backward_euler_scheme() -> LinearMultistepScheme:
    return multistep_scheme_table("BE")


def multistep_scheme_table(name: str) -> LinearMultistepScheme:
    """Look up one of BE, BDF2, BDF3, AB2, AB3, AM1, AM2, AM3."""
    key = name.upper()
    if key not in _TABLE:
        raise KeyError(f"unknown scheme {name!r}; choose from {SCHEME_NAMES}")
    return LinearMultistepScheme(key, tuple(_TABLE[key]))


@dataclass(frozen=True)
class TimeGrid:
    """Time steps ``dt[n-1] = t^n - t^{n-1}`` for ``n = 1..N_t``."""

    steps: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.steps, dtype=float))
        if s.ndim != 1 or s.size < 1:
            raise ValueError("need at least one time step")
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("time steps must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "steps", s)

    @classmethod
    def uniform(cls, dt: float, n_steps: int) -> "TimeGrid":
        return cls(np.full(int(n_steps), float(dt)))

    @property
    def n_steps(self) -> int:
        return self.steps.size

    def dt(self, n: int) -> float:
        return float(self.steps[n - 1])

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.steps)])

    @property
    def final_time(self) -> float:
        return float(self.steps.sum())

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.steps, self.steps[0], rtol=1e-12, atol=0.0))


@dataclass
class Trajectory:
    """States ``w^0..w^{N_t}`` stored column-wise."""

    states: np.ndarray
    mu: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))

    @property
    def n_dofs(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    def state(self, n: int) -> np.ndarray:
        return self.states[:, n]


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50


class NewtonConvergenceError(RuntimeError):
    def __init__(self, n, norm, iterations):
        super().__init__(
            f"Newton failed at time step {n}: |r|={norm:.3e} after {iterations} iterations"
        )
        self.n = n
        self.norm = norm
        self.iterations = iterations


def _check_window(scheme, window, n):
    k = scheme.steps_at(n)
    window = [np.asarray(w, dtype=float) for w in window]
    if len(window) != k + 1:
        raise ValueError(f"step {n} of {scheme.name} needs {k + 1} states, got {len(window)}")
    size = window[0].shape
    if any(w.shape != size or w.ndim != 1 for w in window):
        raise ValueError("window states must be 1-D vectors of equal length")
    return window


def lmm_step_residual(scheme, model, window, grid, n, mu):
    """Residual ``r^n`` given ``window = [w^n, w^{n-1}, ..., w^{n-k_n}]``."""
    window = _check_window(scheme, window, n)
    if window[0].size != model.n_dofs:
        raise ValueError("state length does not match model dimension")
    alpha, beta = scheme.coefficients(n)
    t = grid.times
    dt = grid.dt(n)
    r = np.zeros_like(window[0])
    for j, w in enumerate(window):
        if alpha[j] != 0.0:
            r += alpha[j] * w
        if beta[j] != 0.0:
            r -= dt * beta[j] * model.velocity(w, t[n - j], mu)
    return r


def lmm_step_jacobian(scheme, model, window, grid, n, mu, j):
    """``dr^n / dw^{n-j}``."""
    window = _check_window(scheme, window, n)
    k = scheme.steps_at(n)
    if not 0 <= j <= k:
        raise IndexError(f"j={j} outside 0..{k}")
    a, b = scheme.alpha(n, j), scheme.beta(n, j)
    J = a * np.eye(window[0].size)
    if b != 0.0:
        J -= grid.dt(n) * b * model.velocity_jacobian(window[j], grid.times[n - j], mu)
    return J


def _newton(residual, jacobian, w, cfg, blowup=1e4):
    """Plain Newton; returns ``(w, norm, iterations, ok)``."""
    norm0 = None
    norm = np.inf
    for it in range(cfg.max_iter + 1):
        try:
            r = residual(w)
        except ValueError:
            return w, np.inf, it, False
        norm = np.linalg.norm(r)
        if not np.isfinite(norm):
            return w, norm, it, False
        if norm <= cfg.tol:
            return w, norm, it, True
        norm0 = norm if norm0 is None else norm0
        if it == cfg.max_iter or norm > blowup * norm0:
            return w, norm, it, False
        try:
            w = w - np.linalg.solve(jacobian(w), r)
        except (ValueError, np.linalg.LinAlgError):
            return w, np.inf, it, False
    return w, norm, cfg.max_iter, False


def solve_fom(model, scheme, grid, mu, newton=None) -> Trajectory:
    """Integrate the full-order model with Newton's method at each step.

    If Newton stalls from the previous state, the step is re-solved by
    continuation in the step scale ``s`` (``dt -> s dt``, ``s`` increasing to
    one); the accepted state always solves the unscaled step equation.
    """
    cfg = newton or NewtonConfig()
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    t = grid.times
    W = np.empty((model.n_dofs, grid.n_steps + 1))
    W[:, 0] = model.initial_state(mu)
    F = {}  # cached velocities of accepted states
    eye = np.eye(model.n_dofs)

    def vel(m):
        if m not in F:
            F[m] = model.velocity(W[:, m], t[m], mu)
        return F[m]

    for n in range(1, grid.n_steps + 1):
        alpha, beta = scheme.coefficients(n)
        dt = grid.dt(n)
        hist = np.zeros(model.n_dofs)
        hist_f = np.zeros(model.n_dofs)
        for j in range(1, alpha.size):
            hist += alpha[j] * W[:, n - j]
            if beta[j] != 0.0:
                hist_f += beta[j] * vel(n - j)

        def system(s):
            def res(w):
                r = alpha[0] * w + hist - s * dt * hist_f
                if beta[0] != 0.0:
                    r -= s * dt * beta[0] * model.velocity(w, t[n], mu)
                return r

            def jac(w):
                if beta[0] == 0.0:
                    return alpha[0] * eye
                return alpha[0] * eye - s * dt * beta[0] * model.velocity_jacobian(w, t[n], mu)
            return res, jac

        w, norm, it, ok = _newton(*system(1.0), W[:, n - 1].copy(), cfg)
        if not ok:
            s, ds, w = 0.0, 0.125, W[:, n - 1].copy()
            while s < 1.0:
                s1 = min(1.0, s + ds)
                w1, norm, it, ok = _newton(*system(s1), w, cfg)
                if ok:
                    s, w, ds = s1, w1, 2 * ds
                else:
                    ds *= 0.5
                    if ds < 1e-6:
                        raise NewtonConvergenceError(n, norm, it)
        W[:, n] = w
        F.pop(n - scheme.max_steps, None)
    return Trajectory(W, mu, t)


def _lmm_bands(scheme, n_steps):
    """Sparse lower-triangular scalar-block operators for a uniform grid."""
    rows, cols, va, vb = [], [], [], []
    for n in range(1, n_steps + 1):
        alpha, beta = scheme.coefficients(n)
        for j in range(alpha.size):
            m = n - j
            if m < 1:
                continue  # initial state is known data, not an unknown
            rows.append(n - 1)
            cols.append(m - 1)
            va.append(alpha[j])
            vb.append(beta[j])
    shape = (n_steps, n_steps)
    A = scipy.sparse.csr_matrix((va, (rows, cols)), shape=shape)
    B = scipy.sparse.csr_matrix((vb, (rows, cols)), shape=shape)
    return A, B


def assemble_lmm_operators(scheme, grid, n_steps=None):
    """Return dense ``(A_LM, B_LM)`` of size ``N_t x N_t`` (scalar blocks).

    Block ``(n, m)`` carries ``alpha_{n-m}^n`` (resp. ``beta_{n-m}^n``) so that
    ``A_LM w - dt B_LM f(w) + b = 0`` collects every time step.
    """
    if grid is not None:
        if not grid.is_uniform:
            raise ValueError("operator assembly requires a uniform time step")
        n_steps = grid.n_steps if n_steps is None else n_steps
    if n_steps is None or n_steps < 1:
        raise ValueError("number of steps must be >= 1")
    A, B = _lmm_bands(scheme, int(n_steps))
    return A.toarray(), B.toarray()


def _smax(M):
    N = M.shape[0]
    if N <= 400:
        return float(np.linalg.norm(M.toarray(), 2))
    # M^T M is symmetric banded; take only its largest eigenvalue
    MtM = (M.T @ M).tocsr()
    bw = int(max(abs(MtM.todia().offsets).max(), 0))
    ab = np.zeros((bw + 1, N))  # lower form: ab[d, j] = MtM[j + d, j]
    for d in range(bw + 1):
        ab[d, : N - d] = MtM.diagonal(-d)
    lam = scipy.linalg.eigvals_banded(ab, lower=True, select="i",
                                      select_range=(N - 1, N - 1))
    return float(np.sqrt(lam[-1]))


def _smin_lower(A):
    """Smallest singular value of an invertible banded lower-triangular matrix."""
    N = A.shape[0]
    if N <= 400:
        return float(np.linalg.svd(A.toarray(), compute_uv=False)[-1])
    dia = A.todia()
    lower = int(-dia.offsets.min())
    ab = np.zeros((lower + 1, N))  # solve_banded layout, (l, u) = (lower, 0)
    abT = np.zeros((lower + 1, N))  # transpose: (l, u) = (0, lower)
    Ad = A.tocsr()
    for d in range(lower + 1):
        diag = Ad.diagonal(-d)
        ab[d, : N - d] = diag
        abT[lower - d, d:] = diag

    def apply(x):
        y = scipy.linalg.solve_banded((lower, 0), ab, x)
        return scipy.linalg.solve_banded((0, lower), abT, y)

    op = scipy.sparse.linalg.LinearOperator((N, N), matvec=apply, dtype=float)
    lam = scipy.sparse.linalg.eigsh(op, k=1, which="LA", v0=np.ones(N), tol=1e-12,
                                    return_eigenvectors=False)
    return float(1.0 / np.sqrt(lam[0]))


def lmm_singular_values(scheme, n_steps):
    """``(sigma_min(A_LM), sigma_max(A_LM), sigma_max(B_LM))`` for ``N_t`` steps."""
    A, B = _lmm_bands(scheme, int(n_steps))
    return _smin_lower(A), _smax(A), _smax(B)
