"""Common machinery for cell-centred 1-D finite-volume models."""
from __future__ import annotations

import warnings

import numpy as np

__all__ = ["EvaluationCounter", "SemiDiscreteModel", "FiniteVolumeModel",
           "NonphysicalStateError"]


class NonphysicalStateError(ValueError):
    """Raised when a state leaves the admissible set (e.g. negative density)."""

    def __init__(self, msg, cell=None):
        super().__init__(msg)
        self.cell = cell


class EvaluationCounter:
    """Tallies velocity components and Jacobian rows that were evaluated."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.velocity_components = 0
        self.jacobian_rows = 0
        self.velocity_calls = 0

    def snapshot(self):
        return dict(velocity_components=self.velocity_components,
                    jacobian_rows=self.jacobian_rows,
                    velocity_calls=self.velocity_calls)


class SemiDiscreteModel:
    """Interface of the full-order system ``dw/dt = f(w, t; mu)``.

    Subclasses provide ``n_dofs``, ``label``, ``param_bounds`` and the
    evaluation methods.  Row-restricted evaluation (``velocity_rows`` and
    ``jacobian_rows``) lets hyper-reduced solvers touch only sampled entries.
    """

    n_dofs: int
    label: str = "model"
    param_bounds: np.ndarray | None = None

    def velocity(self, w, t, mu):
        raise NotImplementedError

    def velocity_jacobian(self, w, t, mu):
        raise NotImplementedError

    def initial_state(self, mu):
        raise NotImplementedError

    def stencil_closure(self, rows):
        """DOFs that the velocity components ``rows`` depend on."""
        return np.arange(self.n_dofs)

    def velocity_rows(self, w, t, mu, rows):
        return self.velocity(w, t, mu)[rows]

    def jacobian_rows(self, w, t, mu, rows):
        cols = self.stencil_closure(rows)
        return cols, self.velocity_jacobian(w, t, mu)[np.ix_(rows, cols)]

    def check_parameters(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if self.param_bounds is not None:
            lo, hi = self.param_bounds[:, 0], self.param_bounds[:, 1]
            if mu.shape != lo.shape:
                raise ValueError(f"{self.label} expects {lo.size} parameters, got {mu.size}")
            if np.any(mu < lo - 1e-12) or np.any(mu > hi + 1e-12):
                warnings.warn(f"{self.label}: parameter {mu} outside the training box",
                              stacklevel=3)
        return mu


class FiniteVolumeModel(SemiDiscreteModel):
    """Cell-centred model whose cell update depends on nearest neighbours only.

    State layout is interleaved, ``w[c * n_vars + v]``.  Subclasses implement
    ``_cell_rates(U, cells, t, mu)`` returning an array ``(len(cells), n_vars)``
    that reads ``U`` only at ``cells`` and their immediate neighbours.
    """

    n_vars = 1
    fd_step = 1e-7

    def __init__(self, n_cells):
        self.n_cells = int(n_cells)
        self.n_dofs = self.n_cells * self.n_vars
        self.counter = EvaluationCounter()

    def _cell_rates(self, U, cells, t, mu):
        raise NotImplementedError

    def _as_cells(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_dofs,):
            raise ValueError(f"state must have length {self.n_dofs}")
        return w.reshape(self.n_cells, self.n_vars)

    def _count(self, n_cells):
        self.counter.velocity_components += n_cells * self.n_vars
        self.counter.velocity_calls += 1

    def velocity(self, w, t, mu):
        U = self._as_cells(w)
        cells = np.arange(self.n_cells)
        self._count(cells.size)
        return self._cell_rates(U, cells, t, np.asarray(mu, dtype=float)).ravel()

    def cells_of(self, rows):
        return np.unique(np.asarray(rows, dtype=int) // self.n_vars)

    def neighbour_cells(self, cells):
        c = np.concatenate([cells - 1, cells, cells + 1])
        return np.unique(c[(c >= 0) & (c < self.n_cells)])

    def stencil_closure(self, rows):
        cells = self.neighbour_cells(self.cells_of(rows))
        return (cells[:, None] * self.n_vars + np.arange(self.n_vars)).ravel()

    def velocity_rows(self, w, t, mu, rows):
        rows = np.asarray(rows, dtype=int)
        U = self._as_cells(w)
        cells = self.cells_of(rows)
        self._count(cells.size)
        V = self._cell_rates(U, cells, t, np.asarray(mu, dtype=float))
        pos = np.searchsorted(cells, rows // self.n_vars)
        return V[pos, rows % self.n_vars]

    # Jacobians ----------------------------------------------------------
    def _fd_cell_jacobian(self, U, cells, t, mu):
        """Colored one-sided differences of the rates of ``cells``.

        Returns ``D`` with ``D[a, v, d, s]`` = d rate(cells[a], v) /
        d U(cells[a] + d - 1, s), zero where the neighbour does not exist.
        """
        nv = self.n_vars
        base = self._cell_rates(U, cells, t, mu)
        D = np.zeros((cells.size, nv, 3, nv))
        nbrs = self.neighbour_cells(cells)
        for color in range(3):
            pert = nbrs[nbrs % 3 == color]
            if pert.size == 0:
                continue
            # each target cell sees at most one perturbed cell within +-1
            src = np.full(cells.size, -1)
            for d in (-1, 0, 1):
                hit = np.isin(cells + d, pert)
                src[hit] = cells[hit] + d
            mask = src >= 0
            if not mask.any():
                continue
            for s in range(nv):
                Up = U.copy()
                h = self.fd_step * np.maximum(1.0, np.abs(U[pert, s]))
                Up[pert, s] += h
                hs = np.zeros(self.n_cells)
                hs[pert] = Up[pert, s] - U[pert, s]
                V = self._cell_rates(Up, cells, t, mu)
                d_idx = src[mask] - cells[mask] + 1
                D[np.flatnonzero(mask), :, d_idx, s] = (
                    (V[mask] - base[mask]) / hs[src[mask]][:, None])
        return D

    def _cell_jacobian(self, U, cells, t, mu):
        return self._fd_cell_jacobian(U, cells, t, mu)

    def velocity_jacobian(self, w, t, mu):
        U = self._as_cells(w)
        cells = np.arange(self.n_cells)
        D = self._cell_jacobian(U, cells, t, np.asarray(mu, dtype=float))
        nv = self.n_vars
        J = np.zeros((self.n_dofs, self.n_dofs))
        for d in range(3):
            nb = cells + d - 1
            ok = (nb >= 0) & (nb < self.n_cells)
            for v in range(nv):
                r = cells[ok] * nv + v
                for s in range(nv):
                    J[r, nb[ok] * nv + s] = D[ok, v, d, s]
        self.counter.jacobian_rows += self.n_dofs
        return J

    def jacobian_rows(self, w, t, mu, rows):
        """Return ``(cols, block)`` with ``block = df[rows] / dw[cols]``."""
        rows = np.asarray(rows, dtype=int)
        U = self._as_cells(w)
        cells = self.cells_of(rows)
        cols = self.stencil_closure(rows)
        D = self._cell_jacobian(U, cells, t, np.asarray(mu, dtype=float))
        nv = self.n_vars
        block = np.zeros((rows.size, cols.size))
        pos = np.searchsorted(cells, rows // nv)
        var = rows % nv
        for d in range(3):
            nb = cells[pos] + d - 1
            ok = (nb >= 0) & (nb < self.n_cells)
            for s in range(nv):
                cidx = np.searchsorted(cols, nb[ok] * nv + s)
                block[np.flatnonzero(ok), cidx] = D[pos[ok], var[ok], d, s]
        self.counter.jacobian_rows += rows.size
        return cols, block
