"""Inviscid Burgers equation with a Godunov finite-volume discretization."""
from __future__ import annotations

import numpy as np

from .base import FiniteVolumeModel

__all__ = ["BurgersModel", "burgers_model", "godunov_flux", "godunov_flux_derivatives"]

BURGERS_DOMAIN = np.array([[1.2, 1.5], [0.02, 0.025]])


def _f(w):
    return 0.5 * w * w


def godunov_flux(wl, wr):
    """Exact Riemann flux for ``f(w) = w^2 / 2``."""
    wl = np.asarray(wl, dtype=float)
    wr = np.asarray(wr, dtype=float)
    rare = np.where(wl > 0, _f(wl), np.where(wr < 0, _f(wr), 0.0))
    shock = np.maximum(_f(wl), _f(wr))
    return np.where(wl <= wr, rare, shock)


def godunov_flux_derivatives(wl, wr):
    """Partial derivatives ``(dF/dwl, dF/dwr)`` of :func:`godunov_flux`."""
    wl = np.asarray(wl, dtype=float)
    wr = np.asarray(wr, dtype=float)
    zero = np.zeros(np.broadcast(wl, wr).shape)
    rare_l = np.where(wl > 0, wl, zero)
    rare_r = np.where((wl <= 0) & (wr < 0), wr, zero)
    left_wins = _f(wl) >= _f(wr)
    shock_l = np.where(left_wins, wl, zero)
    shock_r = np.where(left_wins, zero, wr)
    rare = wl <= wr
    return np.where(rare, rare_l, shock_l), np.where(rare, rare_r, shock_r)


class BurgersModel(FiniteVolumeModel):
    """``dw/dt + d(w^2/2)/dx = 0.02 exp(mu_2 x)`` on [0, 1] with ``w(0) = mu_1``.

    The right boundary uses zero-gradient extrapolation; the initial state is
    one everywhere.
    """

    label = "burgers"
    n_vars = 1

    def __init__(self, n_cells=100):
        if n_cells < 2:
            raise ValueError("need at least two cells")
        super().__init__(n_cells)
        self.dx = 1.0 / self.n_cells
        self.x = (np.arange(self.n_cells) + 0.5) * self.dx
        self.param_bounds = BURGERS_DOMAIN.copy()

    def initial_state(self, mu):
        self.check_parameters(mu)
        return np.ones(self.n_dofs)

    def _states(self, u, cells, mu):
        left = np.where(cells > 0, u[np.maximum(cells - 1, 0)], mu[0])
        right = u[np.minimum(cells + 1, self.n_cells - 1)]
        return left, u[cells], right

    def _cell_rates(self, U, cells, t, mu):
        u = U[:, 0]
        wl, wc, wr = self._states(u, cells, mu)
        flux = godunov_flux(wc, wr) - godunov_flux(wl, wc)
        src = 0.02 * np.exp(mu[1] * self.x[cells])
        return (-flux / self.dx + src)[:, None]

    def _cell_jacobian(self, U, cells, t, mu):
        u = U[:, 0]
        wl, wc, wr = self._states(u, cells, mu)
        dl_l, dl_r = godunov_flux_derivatives(wl, wc)  # left face
        dr_l, dr_r = godunov_flux_derivatives(wc, wr)  # right face
        last = cells == self.n_cells - 1
        D = np.zeros((cells.size, 1, 3, 1))
        D[:, 0, 0, 0] = np.where(cells > 0, dl_l, 0.0) / self.dx
        # the last cell's right neighbour is a copy of itself
        D[:, 0, 1, 0] = (dl_r - dr_l - np.where(last, dr_r, 0.0)) / self.dx
        D[:, 0, 2, 0] = np.where(last, 0.0, -dr_r) / self.dx
        return D


def burgers_model(n_cells=100) -> BurgersModel:
    return BurgersModel(n_cells)
