"""Experiment harness: configuration, campaigns, Pareto fronts and reports."""
from .campaign import Campaign, RunRecord, pareto_front, relative_error, run_campaign
from .config import (
    VARIANT_KEYS,
    ExperimentConfig,
    VariantSpec,
    apply_overrides,
    config_from_dict,
    load_config,
    satisfies_constraints,
)
from .report import emit_reports, pareto_rows, read_runs, write_pareto

__all__ = [
    "Campaign",
    "RunRecord",
    "pareto_front",
    "relative_error",
    "run_campaign",
    "VARIANT_KEYS",
    "ExperimentConfig",
    "VariantSpec",
    "apply_overrides",
    "config_from_dict",
    "load_config",
    "satisfies_constraints",
    "emit_reports",
    "pareto_rows",
    "read_runs",
    "write_pareto",
]
