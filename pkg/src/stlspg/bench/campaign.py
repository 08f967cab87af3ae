"""Offline/online campaign over the six ROM variants."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..hyper_reduction import (
    DenseBasis,
    collect_residual_snapshots,
    greedy_spatial_samples,
    residual_basis,
    temporal_then_spatial_samples,
)
from ..models import make_model
from ..spatial_rom import SpatialGappyWeighting, SpatialIdentityWeighting, SpatialROM, lspg_solve
from ..st_rom import (
    GappyWeighting,
    IdentityWeighting,
    LinearRBFInterpolator,
    SpaceTimeROM,
    project_fom_solution,
)
from ..tensor_decomp import (
    SpaceTimeBasis,
    build_state_tensor,
    spatial_pod,
    temporal_basis_sthosvd,
    temporal_basis_tailored,
    truncated_svd,
)
from ..time_integration import TimeGrid, multistep_scheme_table, solve_fom
from .config import ExperimentConfig

__all__ = ["relative_error", "pareto_front", "RunRecord", "Campaign", "run_campaign"]

log = logging.getLogger(__name__)


def relative_error(rom, fom):
    """Space-time relative state error over ``n = 1..N_t``.

    Accepts :class:`Trajectory` objects or ``(N_s, N_t + 1)`` arrays.
    """
    a = np.asarray(getattr(rom, "states", rom), dtype=float)
    b = np.asarray(getattr(fom, "states", fom), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    den = np.linalg.norm(b[:, 1:])
    if den == 0:
        raise ValueError("reference trajectory is identically zero")
    return float(np.linalg.norm(a[:, 1:] - b[:, 1:]) / den)


def pareto_front(points):
    """Indices of the non-dominated rows of ``points`` (all objectives minimized)."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("pareto_front needs a nonempty (n, k) array")
    keep = []
    for i in range(P.shape[0]):
        le = np.all(P <= P[i], axis=1)
        lt = np.any(P < P[i], axis=1)
        if not np.any(le & lt):
            keep.append(i)
    return keep


@dataclass
class RunRecord:
    variant: str
    params: str
    online_index: int
    mu: tuple
    n_unknowns: int
    relative_error: float = float("nan")
    wall_time: float = float("nan")
    relative_wall_time: float = float("nan")
    offline_time: float = float("nan")
    status: str = "failed"
    converged: bool = False
    iterations: int = 0
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def speedup(self):
        r = self.relative_wall_time
        return 1.0 / r if r > 0 and np.isfinite(r) else float("nan")

    @property
    def run_id(self):
        return f"{self.variant}_{self.params.replace(';', '_').replace('=', '')}_mu{self.online_index + 1}"


class Campaign:
    """Holds the shared offline artifacts of one configuration."""

    def __init__(self, config: ExperimentConfig):
        self.cfg = config
        self.model = make_model(config.problem, **config.model)
        self.scheme = multistep_scheme_table(config.scheme)
        self.grid = TimeGrid.uniform(config.dt, config.n_steps)
        self.rng = np.random.default_rng(config.seed)
        self._cache = {}
        self.fom_train = None
        self.fom_online = None
        self.fom_times = None

    # offline ------------------------------------------------------------
    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def prepare(self):
        if self.fom_train is not None:
            return
        solve = lambda mu: solve_fom(self.model, self.scheme, self.grid, mu)
        self.fom_train = [solve(mu) for mu in self.cfg.training]
        self.fom_online, self.fom_times = [], []
        for mu in self.cfg.online:
            ts = []
            for _ in range(self.cfg.repetitions):
                t0 = time.perf_counter()
                tr = solve(mu)
                ts.append(time.perf_counter() - t0)
            self.fom_online.append(tr)
            self.fom_times.append(float(np.mean(ts)))
        self.tensor = build_state_tensor(self.fom_train)

    def spatial_basis(self, n_s):
        return self._memo(("phi", n_s), lambda: spatial_pod(self.tensor, n_s))

    def st_basis(self, n_s, fixed_n_t=None, tailored_n_t=None):
        def build():
            Phi = self.spatial_basis(n_s)
            if fixed_n_t is not None:
                return SpaceTimeBasis(Phi, temporal_basis_sthosvd(self.tensor, Phi, fixed_n_t))
            return SpaceTimeBasis(Phi, temporal_basis_tailored(self.tensor, Phi, tailored_n_t))
        return self._memo(("st", n_s, fixed_n_t, tailored_n_t), build)

    def rbf(self, key, basis):
        def build():
            Y = np.array([project_fom_solution(basis, tr) for tr in self.fom_train])
            return LinearRBFInterpolator(self.cfg.training, Y)
        return self._memo(("rbf",) + key, build)

    def st_residual_tensor(self, key, basis):
        def build():
            method = self.cfg.residual_snapshots
            setup = dict(model=self.model, scheme=self.scheme, grid=self.grid, basis=basis)
            if method == "rom_training":
                setup["params"] = self.cfg.training
            elif method == "fom_projection":
                setup["trajectories"] = self.fom_train
            else:
                Y = np.array([project_fom_solution(basis, tr) for tr in self.fom_train])
                lo, hi = Y.min(axis=0), Y.max(axis=0)
                pad = 0.1 * np.maximum(hi - lo, 1e-12)
                P = self.cfg.training
                setup.update(coord_bounds=np.column_stack([lo - pad, hi + pad]),
                             param_bounds=np.column_stack([P.min(axis=0), P.max(axis=0)]),
                             n_samples=len(P), seed=int(self.rng.integers(2**31)))
            return collect_residual_snapshots(method, **setup)
        return self._memo(("rt",) + key, build)

    def spatial_residuals(self, n_s):
        def build():
            Phi = self.spatial_basis(n_s)
            snaps = [lspg_solve(self.model, self.scheme, self.grid, Phi, SpatialIdentityWeighting(),
                                mu, record_residuals=True, reconstruct=False).residual_snapshots
                     for mu in self.cfg.training]
            return np.hstack(snaps)
        return self._memo(("sr", n_s), build)

    def build(self, spec):
        """Return an online solver ``mu -> (trajectory, history, status, iterations)``."""
        p, kind = spec.params, spec.kind
        if kind in ("lspg", "gnat"):
            Phi = self.spatial_basis(p["n_s"])
            if kind == "lspg":
                weighting = SpatialIdentityWeighting()
            else:
                U, _, _ = truncated_svd(self.spatial_residuals(p["n_s"]), p["n_r"])
                rows = greedy_spatial_samples(DenseBasis(U, U.shape[0], 1), p["n_z"], np.array([0]))
                weighting = SpatialGappyWeighting(rows, U)
            rom = SpatialROM(self.model, self.scheme, self.grid, Phi, weighting)

            def solve(mu):
                res = rom.solve(mu)
                hist = [dict(time_step=n + 1, iterations=k, grad_norm=g, status=st)
                        for n, (g, k, st) in enumerate(
                            zip(res.final_grad_norms, res.iterations, res.statuses))]
                status = "converged" if res.converged else "partial"
                return res.trajectory, hist, status, int(sum(res.iterations))
            return solve, rom.n_unknowns

        tailored = kind.endswith("-1")
        nt = p["n_t_i"] if tailored else p["n_t"]
        bkey = (p["n_s"], None if tailored else nt, nt if tailored else None)
        basis = self.st_basis(*bkey)
        guess = self.rbf(bkey, basis)
        if kind.startswith("st-lspg"):
            weighting = IdentityWeighting()
        else:
            RT = self.st_residual_tensor(bkey, basis)
            RB = residual_basis(RT, "tailored", p["n_rs"], p["n_rt_i"])
            S = temporal_then_spatial_samples(RB, p["ns_bar"], p["nt_bar"])
            weighting = GappyWeighting.from_basis(S, RB)
        rom = SpaceTimeROM(self.model, self.scheme, self.grid, basis, weighting, guess)

        def solve(mu):
            sol = rom.solve(mu)
            return sol.trajectory, sol.history, sol.status, sol.n_iterations
        return solve, rom.n_unknowns

    # online -------------------------------------------------------------
    def run_variant(self, spec):
        self.prepare()
        records = []
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                solve, n_unk = self.build(spec)
            offline = time.perf_counter() - t0
        except Exception as exc:  # recorded, campaign continues
            log.warning("offline build of %s %s failed: %s", spec.label, spec.key, exc)
            return [RunRecord(spec.label, spec.key, k, tuple(map(float, mu)), spec.n_unknowns(),
                              message=f"offline: {type(exc).__name__}: {exc}")
                    for k, mu in enumerate(self.cfg.online)]
        for k, mu in enumerate(self.cfg.online):
            rec = RunRecord(spec.label, spec.key, k, tuple(map(float, mu)), n_unk, offline_time=offline)
            try:
                ts = []
                for _ in range(self.cfg.repetitions):
                    t1 = time.perf_counter()
                    traj, hist, status, iters = solve(mu)
                    ts.append(time.perf_counter() - t1)
                rec.wall_time = float(np.mean(ts))
                rec.relative_wall_time = rec.wall_time / self.fom_times[k]
                rec.relative_error = relative_error(traj, self.fom_online[k])
                rec.status, rec.iterations, rec.history = status, iters, hist
                rec.converged = status == "converged"
            except Exception as exc:
                log.warning("online solve of %s %s at mu=%s failed: %s", spec.label, spec.key, mu, exc)
                rec.message = f"online: {type(exc).__name__}: {exc}"
            records.append(rec)
        return records

    def run(self):
        records = []
        for spec in self.cfg.variants:
            log.info("running %s %s", spec.label, spec.key)
            records.extend(self.run_variant(spec))
        return records


def run_campaign(config: ExperimentConfig):
    """Run every variant at every online point; returns ``(records, front)``.

    ``front`` holds indices (into ``records``) of the overall Pareto front
    under (relative error, relative wall time), successful runs only.
    """
    records = Campaign(config).run()
    ok = [i for i, r in enumerate(records) if r.status != "failed" and np.isfinite(r.relative_error)]
    front = []
    if ok:
        pts = [(records[i].relative_error, records[i].relative_wall_time) for i in ok]
        front = [ok[j] for j in pareto_front(pts)]
    return records, front
