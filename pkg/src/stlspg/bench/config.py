"""Campaign configuration: a TOML file with nested tables.

Schema (all keys except ``problem`` optional)::

    problem = "burgers"            # or "euler_nozzle"
    seed = 0
    output_dir = "runs/burgers"
    repetitions = 1                # online timings are averaged over this many solves
    residual_snapshots = "rom_training"   # | "fom_projection" | "random"

    [model]                        # forwarded to the model constructor
    n_cells = 100

    [time]
    scheme = "BE"
    dt = 2.5e-4
    n_steps = 2000

    [training]
    mu = [[1.2, 0.02], [1.2, 0.025]]     # explicit list, or
    grid = [[1.2, 1.3], [0.02, 0.025]]   # per-component values (Cartesian product)

    [online]
    mu = [[1.35, 0.0229]]

    [[variants]]
    kind = "st-gnat-1"             # lspg | gnat | st-lspg-1 | st-lspg-2 | st-gnat-1 | st-gnat-2
    n_s = [15]                     # every key takes a scalar or a list; lists are swept
    n_t_i = [2]
    ns_bar = [30]
    nt_bar = [120]
    n_rs = [100]
    n_rt_i = [3]
"""
from __future__ import annotations

import copy
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "VARIANT_KEYS",
    "DEFAULTS",
    "VariantSpec",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "apply_overrides",
    "satisfies_constraints",
]

VARIANT_KEYS = {
    "lspg": ("n_s",),
    "gnat": ("n_s", "n_z", "n_r"),
    "st-lspg-1": ("n_s", "n_t_i"),
    "st-lspg-2": ("n_s", "n_t"),
    "st-gnat-1": ("n_s", "n_t_i", "ns_bar", "nt_bar", "n_rs", "n_rt_i"),
    "st-gnat-2": ("n_s", "n_t", "ns_bar", "nt_bar", "n_rs", "n_rt_i"),
}

DEFAULTS = {
    "burgers": dict(model={"n_cells": 100}, time=dict(scheme="BE", dt=2.5e-4, n_steps=2000),
                    training=dict(grid=[[1.2, 1.3, 1.4, 1.5], [0.02, 0.025]]),
                    online=dict(mu=[[1.35, 0.0229], [1.45, 0.0201]])),
    "euler_nozzle": dict(model={"n_cells": 50}, time=dict(scheme="BE", dt=1e-3, n_steps=600),
                         training=dict(grid=[[1.7, 1.71, 1.72, 1.73], [1.7, 1.72]]),
                         online=dict(mu=[[1.7125, 1.71], [1.7225, 1.705]])),
}


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass(frozen=True)
class VariantSpec:
    kind: str
    params: dict

    @property
    def label(self):
        return self.kind.upper()

    @property
    def key(self):
        return ";".join(f"{k}={self.params[k]}" for k in VARIANT_KEYS[self.kind])

    def nominal_residual_dim(self):
        p = self.params
        if self.kind == "gnat":
            return p["n_r"]
        if self.kind.startswith("st-gnat"):
            return p["n_rs"] * p["n_rt_i"]
        return None

    def n_unknowns(self):
        p = self.params
        if self.kind in ("lspg", "gnat"):
            return p["n_s"]
        if self.kind in ("st-lspg-1", "st-gnat-1"):
            return p["n_s"] * p["n_t_i"]
        return p["n_s"] * p["n_t"]


def satisfies_constraints(spec: VariantSpec):
    """Sweep filters: ``1.5 n_s <= n_r <= n_z`` (GNAT) and
    ``1.5 n_st <= nbar_r <= nbar_s nbar_t`` (ST-GNAT, nominal ``nbar_r``)."""
    p = spec.params
    if spec.kind == "gnat":
        return 1.5 * p["n_s"] <= p["n_r"] <= p["n_z"]
    if spec.kind.startswith("st-gnat"):
        nr = spec.nominal_residual_dim()
        return 1.5 * spec.n_unknowns() <= nr <= p["ns_bar"] * p["nt_bar"]
    return True


@dataclass
class ExperimentConfig:
    problem: str
    model: dict
    scheme: str
    dt: float
    n_steps: int
    training: np.ndarray
    online: np.ndarray
    variants: list
    skipped: list = field(default_factory=list)
    seed: int = 0
    repetitions: int = 1
    output_dir: str = "runs"
    residual_snapshots: str = "rom_training"
    raw: dict = field(default_factory=dict)

    def echo(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _params(table, key):
    t = table.get(key, {})
    if "mu" in t:
        mu = np.atleast_2d(np.asarray(t["mu"], dtype=float))
    elif "grid" in t:
        mu = np.array(list(itertools.product(*t["grid"])), dtype=float)
    else:
        raise ValueError(f"[{key}] needs 'mu' or 'grid'")
    return mu


def _expand(vt):
    kind = str(vt.get("kind", "")).lower()
    if kind not in VARIANT_KEYS:
        raise ValueError(f"unknown variant kind {kind!r}")
    names = VARIANT_KEYS[kind]
    missing = [k for k in names if k not in vt]
    if missing:
        raise ValueError(f"variant {kind} missing keys {missing}")
    for combo in itertools.product(*[_as_list(vt[k]) for k in names]):
        yield VariantSpec(kind, {k: int(v) for k, v in zip(names, combo)})


def config_from_dict(raw) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    problem = str(raw.get("problem", "")).lower()
    if problem in ("euler", "nozzle"):
        problem = "euler_nozzle"
    if problem not in DEFAULTS:
        raise ValueError(f"unknown problem {raw.get('problem')!r}")
    merged = copy.deepcopy(DEFAULTS[problem])
    for sec in ("model", "time", "training", "online"):
        if sec in raw:
            if sec in ("training", "online"):
                merged[sec] = dict(raw[sec])
            else:
                merged[sec].update(raw[sec])
    merged.update({k: v for k, v in raw.items() if k not in merged})
    if not raw.get("variants"):
        raise ValueError("config defines no [[variants]]")
    keep, skipped = [], []
    for vt in raw["variants"]:
        for spec in _expand(vt):
            (keep if satisfies_constraints(spec) else skipped).append(spec)
    reps = int(merged.get("repetitions", 1))
    if reps < 1:
        raise ValueError("repetitions must be >= 1")
    t = merged["time"]
    return ExperimentConfig(
        problem=problem, model=dict(merged["model"]), scheme=str(t["scheme"]),
        dt=float(t["dt"]), n_steps=int(t["n_steps"]),
        training=_params(merged, "training"), online=_params(merged, "online"),
        variants=keep, skipped=skipped, seed=int(merged.get("seed", 0)), repetitions=reps,
        output_dir=str(merged.get("output_dir", "runs")),
        residual_snapshots=str(merged.get("residual_snapshots", "rom_training")),
        raw=merged)


def apply_overrides(raw, assignments):
    """Apply ``dotted.key=value`` strings; values parse as TOML scalars/arrays."""
    raw = copy.deepcopy(raw)
    for item in assignments or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        try:
            value = tomllib.loads(f"v = {val}")["v"]
        except tomllib.TOMLDecodeError:
            value = val
        node = raw
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return raw


def load_config(path, overrides=None) -> ExperimentConfig:
    with open(Path(path), "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(apply_overrides(raw, overrides))
