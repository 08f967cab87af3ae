"""Computable constants of the space-time error bounds.

All constants derive from the scalar-block operators ``A_LM`` and ``B_LM`` of a
uniform-step linear multistep scheme and a velocity Lipschitz constant
``L_f``.  The small-time-step condition ``dt < sigma_min(A)/(L_f sigma_max(B))``
must hold for the inverse-Lipschitz constant to be positive.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .time_integration import assemble_lmm_operators, lmm_singular_values, multistep_scheme_table

__all__ = [
    "BoundInputs",
    "AssumptionViolation",
    "LebesgueResult",
    "operator_singular_values",
    "residual_lipschitz",
    "residual_inverse_lipschitz",
    "lebesgue_constant",
    "apriori_l2_constant",
    "aposteriori_bound",
    "effectivity",
    "estimate_lipschitz",
    "stability_curve",
    "loglog_slope",
    "write_stability_csv",
]


class AssumptionViolation(ValueError):
    """The time step is too large for the residual to be inverse-Lipschitz."""


@dataclass(frozen=True)
class BoundInputs:
    """Ingredients of the bounds.

    Parameters
    ----------
    lf : float
        Lipschitz constant of the velocity.
    dt : float
        Uniform time step.
    scheme : LinearMultistepScheme or str
    n_steps : int
    P : float
        Norm-equivalence constant of the weighting (1 for the identity).
    """

    lf: float
    dt: float
    scheme: object
    n_steps: int
    P: float = 1.0

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", multistep_scheme_table(self.scheme))
        if self.lf < 0 or self.dt <= 0 or self.n_steps < 1 or self.P <= 0:
            raise ValueError("invalid bound inputs")


@dataclass(frozen=True)
class LebesgueResult:
    lam: float
    l2_constant: float
    linf_constant: float
    sigma_min_A: float
    sigma_max_A: float
    sigma_max_B: float


_CACHE = {}


def operator_singular_values(scheme, n_steps):
    """``(sigma_min(A_LM), sigma_max(A_LM), sigma_max(B_LM))`` (cached)."""
    key = (scheme.name, int(n_steps))
    if key not in _CACHE:
        _CACHE[key] = lmm_singular_values(scheme, n_steps)
    return _CACHE[key]


def _weighted_smax(W, M, n_space):
    Mk = np.kron(M, np.eye(n_space)) if W.shape[1] != M.shape[0] else M
    return float(np.linalg.norm(W @ Mk, 2))


def residual_lipschitz(inputs: BoundInputs, weighting=None, n_space=1):
    """``L_r = sigma_max(W A_LM) + dt L_f sigma_max(W B_LM)``."""
    if weighting is None:
        _, smax_a, smax_b = operator_singular_values(inputs.scheme, inputs.n_steps)
    else:
        A, B = assemble_lmm_operators(inputs.scheme, None, inputs.n_steps)
        W = np.asarray(weighting, dtype=float)
        smax_a = _weighted_smax(W, A, n_space)
        smax_b = _weighted_smax(W, B, n_space)
    return smax_a + inputs.dt * inputs.lf * smax_b


def residual_inverse_lipschitz(inputs: BoundInputs):
    """``K_r = sigma_min(A_LM) - dt L_f sigma_max(B_LM)``; must be positive."""
    smin_a, _, smax_b = operator_singular_values(inputs.scheme, inputs.n_steps)
    K = smin_a - inputs.dt * inputs.lf * smax_b
    if K <= 0:
        raise AssumptionViolation(
            f"time step too large: dt*L_f*sigma_max(B)={inputs.dt * inputs.lf * smax_b:.3e} "
            f">= sigma_min(A)={smin_a:.3e}")
    return K


def lebesgue_constant(inputs: BoundInputs) -> LebesgueResult:
    smin_a, smax_a, smax_b = operator_singular_values(inputs.scheme, inputs.n_steps)
    K = residual_inverse_lipschitz(inputs)
    c = inputs.dt * inputs.lf * smax_b
    lam = (smax_a - smin_a + 2 * c) / K
    return LebesgueResult(lam, 1 + lam, np.sqrt(inputs.n_steps) * (1 + lam),
                          smin_a, smax_a, smax_b)


def apriori_l2_constant(inputs: BoundInputs, weighting=None, n_space=1):
    """Best-approximation multiplier ``L_r / (P K_r)`` of the weighted problem."""
    return residual_lipschitz(inputs, weighting, n_space) / (
        inputs.P * residual_inverse_lipschitz(inputs))


def aposteriori_bound(residual_norm, P, K_r):
    """Upper bound ``|r| / (P K_r)`` on the space-time state error."""
    if K_r <= 0 or P <= 0:
        raise AssumptionViolation("bound requires positive P and K_r")
    return float(residual_norm) / (P * K_r)


def effectivity(bound, error):
    return float(bound) / float(error) if error > 0 else np.inf


def estimate_lipschitz(model, lower, upper, mu, n_pairs=10_000, t=0.0, seed=0):
    """Largest difference quotient of the velocity over random state pairs.

    States are drawn uniformly in the box ``[lower, upper]`` (per component).
    This is an estimate; the supremum over all states is not available.
    """
    rng = np.random.default_rng(seed)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (model.n_dofs,))
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (model.n_dofs,))
    best = 0.0
    for _ in range(n_pairs):
        w = lo + (hi - lo) * rng.random(model.n_dofs)
        y = lo + (hi - lo) * rng.random(model.n_dofs)
        d = np.linalg.norm(w - y)
        if d == 0:
            continue
        q = np.linalg.norm(model.velocity(w, t, mu) - model.velocity(y, t, mu)) / d
        best = max(best, q)
    return best


def stability_curve(scheme, dt, lf, final_times):
    """Rows ``(T, N_t, 1 + Lambda, sqrt(N_t)(1 + Lambda))``."""
    if isinstance(scheme, str):
        scheme = multistep_scheme_table(scheme)
    rows = []
    for T in final_times:
        n = max(1, int(round(T / dt)))
        res = lebesgue_constant(BoundInputs(lf, dt, scheme, n))
        rows.append((n * dt, n, res.l2_constant, res.linf_constant))
    return rows


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def write_stability_csv(path, curves):
    """``curves`` maps scheme name to :func:`stability_curve` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "T", "N_t", "l2_constant", "linf_constant"])
        for name, rows in curves.items():
            for T, n, c2, cinf in rows:
                w.writerow([name, f"{T:.10g}", n, f"{c2:.12g}", f"{cinf:.12g}"])
