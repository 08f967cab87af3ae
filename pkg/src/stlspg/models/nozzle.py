"""Quasi-one-dimensional Euler flow in a converging-diverging nozzle.

Roe fluxes with a Harten entropy fix, a geometric pressure source on the
momentum equation, and ghost-state boundary conditions (fixed total inflow
conditions, fixed static exit pressure).  States are conservative variables
``(rho, rho*u, e)`` per cell expressed in reference units; see
:meth:`EulerNozzleModel.to_physical`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .base import FiniteVolumeModel, NonphysicalStateError

__all__ = [
    "NozzleGeometry",
    "nozzle_geometry",
    "EulerNozzleModel",
    "euler_nozzle_model",
    "euler_initial_condition",
    "roe_flux",
    "roe_averages",
    "physical_flux",
    "mach_from_area",
    "shock_quadratic_roots",
    "post_shock_state",
    "GAMMA",
    "GAS_CONSTANT",
    "TOTAL_TEMPERATURE",
    "TOTAL_PRESSURE",
]

GAMMA = 1.3
GAS_CONSTANT = 355.4
TOTAL_TEMPERATURE = 300.0
TOTAL_PRESSURE = 1.0e6
SHOCK_X = 0.85
THROAT_X = 0.5
EULER_DOMAIN = np.array([[1.7, 1.73], [1.7, 1.72]])

# piecewise cubic coefficients (c3, c2, c1, c0) about each knot
_KNOTS = np.array([0.0, 0.25, 0.5, 0.75])
_COEF = np.array([
    [-0.288, 0.4080, -0.1920, 0.2],
    [-0.288, 0.1920, -0.0420, 0.1730],
    [0.288, -0.0240, 0.0, 0.17],
    [0.288, 0.1920, 0.0420, 0.1730],
])


@dataclass(frozen=True)
class NozzleGeometry:
    """Four-piece cubic area law on [0, 1] m."""

    knots: np.ndarray = _KNOTS
    coef: np.ndarray = _COEF

    def _piece(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("nozzle coordinate outside [0, 1]")
        k = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, 3)
        return x - self.knots[k], self.coef[k]

    def area(self, x):
        s, c = self._piece(x)
        return ((c[..., 0] * s + c[..., 1]) * s + c[..., 2]) * s + c[..., 3]

    def darea(self, x):
        s, c = self._piece(x)
        return (3 * c[..., 0] * s + 2 * c[..., 1]) * s + c[..., 2]


def nozzle_geometry() -> NozzleGeometry:
    return NozzleGeometry()


def physical_flux(rho, u, p, gamma=GAMMA):
    e = p / (gamma - 1) + 0.5 * rho * u * u
    return np.array([rho * u, rho * u * u + p, (e + p) * u])


def roe_averages(rho_l, u_l, h_l, rho_r, u_r, h_r):
    """Roe-averaged velocity and total enthalpy."""
    sl, sr = np.sqrt(rho_l), np.sqrt(rho_r)
    u = (sl * u_l + sr * u_r) / (sl + sr)
    h = (sl * h_l + sr * h_r) / (sl + sr)
    return sl * sr, u, h


def roe_flux(rho_l, u_l, p_l, rho_r, u_r, p_r, gamma=GAMMA, fix=0.05):
    """Roe flux-difference splitting with a Harten fix on acoustic waves."""
    e_l = p_l / (gamma - 1) + 0.5 * rho_l * u_l**2
    e_r = p_r / (gamma - 1) + 0.5 * rho_r * u_r**2
    h_l = (e_l + p_l) / rho_l
    h_r = (e_r + p_r) / rho_r
    rho, u, h = roe_averages(rho_l, u_l, h_l, rho_r, u_r, h_r)
    c = np.sqrt((gamma - 1) * (h - 0.5 * u * u))
    dp, du, dr = p_r - p_l, u_r - u_l, rho_r - rho_l
    a1 = (dp - rho * c * du) / (2 * c * c)
    a2 = dr - dp / (c * c)
    a3 = (dp + rho * c * du) / (2 * c * c)
    delta = fix * c

    def harten(lam):
        lam = np.abs(lam)
        return np.where(lam < delta, (lam * lam + delta * delta) / (2 * delta), lam)

    l1, l2, l3 = harten(u - c), np.abs(u), harten(u + c)
    ones = np.ones_like(u)
    r1 = np.array([ones, u - c, h - u * c])
    r2 = np.array([ones, u, 0.5 * u * u])
    r3 = np.array([ones, u + c, h + u * c])
    diss = l1 * a1 * r1 + l2 * a2 * r2 + l3 * a3 * r3
    return 0.5 * (physical_flux(rho_l, u_l, p_l, gamma)
                  + physical_flux(rho_r, u_r, p_r, gamma)) - 0.5 * diss


def _mach_area_residual(M, ratio, Mm, gamma):
    g1 = 0.5 * (gamma - 1)
    ex = (gamma + 1) / (2 * (gamma - 1))
    return M - Mm / ratio * ((1 + g1 * M * M) / (1 + g1 * Mm * Mm)) ** ex


def mach_from_area(x, Mm, geometry=None, supersonic=None, gamma=GAMMA, tol=1e-12):
    """Mach number at ``x`` for an isentropic flow with throat Mach ``Mm``."""
    geo = geometry or nozzle_geometry()
    ratio = float(geo.area(x) / geo.area(THROAT_X))
    if supersonic is None:
        supersonic = x >= THROAT_X
    lo, hi = (1.0, 10.0) if supersonic else (1e-6, 1.0)
    g = lambda M: _mach_area_residual(M, ratio, Mm, gamma)
    if g(lo) * g(hi) > 0:
        raise ValueError(f"Mach relation not bracketed at x={x}")
    return brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def isentropic_state(M, gamma=GAMMA):
    """Static ``(rho, u, p)`` from the Mach number and total conditions."""
    k = 1 + 0.5 * (gamma - 1) * M * M
    T = TOTAL_TEMPERATURE / k
    p = TOTAL_PRESSURE * k ** (-gamma / (gamma - 1))
    rho = p / (GAS_CONSTANT * T)
    c = np.sqrt(gamma * p / rho)
    return rho, M * c, p


def shock_quadratic_roots(rho1, u1, p1, gamma=GAMMA):
    """Both roots in ``u`` of the stationary-shock quadratic and its invariants."""
    m = rho1 * u1
    n = rho1 * u1 * u1 + p1
    e1 = p1 / (gamma - 1) + 0.5 * rho1 * u1 * u1
    h = (e1 + p1) / rho1
    g = gamma / (gamma - 1)
    a, b, c = 0.5 - g, g * n / m, -h
    roots = np.roots([a, b, c]).real
    return roots, (m, n, h), (a, b, c)


def post_shock_state(rho1, u1, p1, gamma=GAMMA):
    """Downstream ``(rho, u, p)`` of a normal shock; picks the discontinuous root."""
    roots, (m, n, _), _ = shock_quadratic_roots(rho1, u1, p1, gamma)
    u2 = roots[np.argmax(np.abs(roots - u1))]
    return m / u2, u2, n - m * u2


def euler_initial_primitives(mu, n_cells=50, geometry=None, gamma=GAMMA):
    """Cell-centre ``(rho, u, p)`` arrays and the exit pressure for ``mu``."""
    geo = geometry or nozzle_geometry()
    p_factor, Mm = float(mu[0]), float(mu[1])
    x = (np.arange(n_cells) + 0.5) / n_cells
    down = x >= SHOCK_X - 1e-12
    M = np.array([mach_from_area(xi, Mm, geo, xi >= THROAT_X, gamma) for xi in x[~down]])
    rho, u, p = (np.empty(n_cells) for _ in range(3))
    rho[~down], u[~down], p[~down] = isentropic_state(M, gamma)
    M1 = mach_from_area(SHOCK_X, Mm, geo, True, gamma)
    r2, u2, p2 = post_shock_state(*isentropic_state(M1, gamma), gamma)
    rho[down], u[down], p[down] = r2, u2, p2
    p_exit = p_factor * p2
    p[-1] = p_factor * p[-1]
    return rho, u, p, p_exit


class EulerNozzleModel(FiniteVolumeModel):
    """Finite-volume quasi-1D Euler equations, 3 unknowns per cell."""

    label = "euler"
    n_vars = 3

    def __init__(self, n_cells=50, gamma=GAMMA, entropy_fix=0.05):
        if n_cells < 3:
            raise ValueError("need at least three cells")
        super().__init__(n_cells)
        self.gamma = gamma
        self.entropy_fix = entropy_fix
        self.geometry = nozzle_geometry()
        self.dx = 1.0 / self.n_cells
        self.x = (np.arange(self.n_cells) + 0.5) * self.dx
        faces = np.arange(self.n_cells + 1) * self.dx
        self.area_faces = self.geometry.area(faces)
        self.area = self.geometry.area(self.x)
        self.darea = self.geometry.darea(self.x)
        self.cp = gamma * GAS_CONSTANT / (gamma - 1)
        rho_ref = TOTAL_PRESSURE / (GAS_CONSTANT * TOTAL_TEMPERATURE)
        c_ref = np.sqrt(GAS_CONSTANT * TOTAL_TEMPERATURE)
        self.scale = np.array([rho_ref, rho_ref * c_ref, TOTAL_PRESSURE])
        self.param_bounds = EULER_DOMAIN.copy()
        self._exit_cache = {}

    # conversions ------------------------------------------------------
    def to_physical(self, w):
        """Dimensional ``(rho, rho*u, e)`` array of shape ``(n_cells, 3)``."""
        return self._as_cells(w) * self.scale

    def from_physical(self, U):
        return (np.asarray(U, dtype=float) / self.scale).ravel()

    def primitives(self, U, cells):
        """``(rho, u, p)`` at ``cells`` from scaled conservative variables."""
        rho = U[cells, 0] * self.scale[0]
        u = U[cells, 1] * self.scale[1] / rho
        e = U[cells, 2] * self.scale[2]
        p = (self.gamma - 1) * (e - 0.5 * rho * u * u)
        bad = ~((rho > 0) & (p > 0))
        if np.any(bad):
            c = int(np.asarray(cells)[np.flatnonzero(bad)[0]])
            raise NonphysicalStateError(f"nonphysical state in cell {c}", cell=c)
        return rho, u, p

    def exit_pressure(self, mu):
        key = (float(mu[0]), float(mu[1]))
        if key not in self._exit_cache:
            self._exit_cache[key] = euler_initial_primitives(
                mu, self.n_cells, self.geometry, self.gamma)[3]
        return self._exit_cache[key]

    def initial_state(self, mu):
        mu = self.check_parameters(mu)
        rho, u, p, p_exit = euler_initial_primitives(mu, self.n_cells, self.geometry,
                                                     self.gamma)
        self._exit_cache[(float(mu[0]), float(mu[1]))] = p_exit
        e = p / (self.gamma - 1) + 0.5 * rho * u * u
        return self.from_physical(np.column_stack([rho, rho * u, e]))

    # boundary ghost states ------------------------------------------
    def _inflow_ghost(self, u0):
        T = TOTAL_TEMPERATURE - u0 * u0 / (2 * self.cp)
        if np.any(T <= 0):
            raise NonphysicalStateError("inflow ghost temperature non-positive", cell=0)
        p = TOTAL_PRESSURE * (T / TOTAL_TEMPERATURE) ** (self.gamma / (self.gamma - 1))
        return p / (GAS_CONSTANT * T), u0, p

    def _outflow_ghost(self, rho, u, p, p_exit):
        c = np.sqrt(self.gamma * p / rho)
        return rho, u, np.where(u < c, p_exit, p)

    def _cell_rates(self, U, cells, t, mu):
        n = self.n_cells
        nb = self.neighbour_cells(cells)
        rho_a, u_a, p_a = (np.zeros(n) for _ in range(3))
        rho_a[nb], u_a[nb], p_a[nb] = self.primitives(U, nb)
        first, last = cells == 0, cells == n - 1
        left = np.maximum(cells - 1, 0)
        right = np.minimum(cells + 1, n - 1)
        rl, ul, pl = rho_a[left], u_a[left], p_a[left]
        rr, ur, pr = rho_a[right], u_a[right], p_a[right]
        if first.any():
            g = self._inflow_ghost(u_a[0])
            rl, ul, pl = (np.where(first, gi, si) for gi, si in zip(g, (rl, ul, pl)))
        if last.any():
            g = self._outflow_ghost(rho_a[n - 1], u_a[n - 1], p_a[n - 1],
                                    self.exit_pressure(mu))
            rr, ur, pr = (np.where(last, gi, si) for gi, si in zip(g, (rr, ur, pr)))
        rc, uc, pc = rho_a[cells], u_a[cells], p_a[cells]
        fl = roe_flux(rl, ul, pl, rc, uc, pc, self.gamma, self.entropy_fix)
        fr = roe_flux(rc, uc, pc, rr, ur, pr, self.gamma, self.entropy_fix)
        A = self.area[cells]
        rate = -(fr * self.area_faces[cells + 1] - fl * self.area_faces[cells]) / (A * self.dx)
        rate[1] += pc * self.darea[cells] / A
        return rate.T / self.scale


def euler_nozzle_model(n_cells=50) -> EulerNozzleModel:
    return EulerNozzleModel(n_cells)


def euler_initial_condition(mu, model=None):
    """Scaled conservative initial state for ``mu = (P_exit factor, M_m)``."""
    model = model or EulerNozzleModel()
    return model.initial_state(mu)
