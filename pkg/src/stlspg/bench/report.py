"""CSV reports for campaign records."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..io import convergence_to_csv
from .campaign import pareto_front

__all__ = ["RUN_COLUMNS", "TIMING_COLUMNS", "emit_reports", "read_runs", "pareto_rows", "write_pareto"]

RUN_COLUMNS = ["variant", "params", "online_index", "mu", "n_unknowns", "relative_error",
               "wall_time", "relative_wall_time", "speedup", "offline_time", "status",
               "converged", "iterations", "message"]
TIMING_COLUMNS = {"wall_time", "relative_wall_time", "speedup", "offline_time"}


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if not np.isfinite(v) else f"{v:.8e}"
    return str(v)


def _row(rec):
    return dict(variant=rec.variant, params=rec.params, online_index=rec.online_index + 1,
                mu=" ".join(f"{m:.10g}" for m in rec.mu), n_unknowns=rec.n_unknowns,
                relative_error=rec.relative_error, wall_time=rec.wall_time,
                relative_wall_time=rec.relative_wall_time, speedup=rec.speedup,
                offline_time=rec.offline_time, status=rec.status, converged=rec.converged,
                iterations=rec.iterations, message=rec.message)


def _sort_key(row):
    return (int(row["online_index"]), row["variant"], row["params"])


def pareto_rows(rows):
    """Per-method and overall fronts for each online point.

    ``rows`` are dicts with at least variant, params, online_index,
    relative_error and relative_wall_time; failed or untimed rows are ignored.
    """
    groups = defaultdict(list)
    for r in rows:
        e, t = float(r["relative_error"]), float(r["relative_wall_time"])
        if r.get("status", "") == "failed" or not (np.isfinite(e) and np.isfinite(t)):
            continue
        groups[(int(r["online_index"]), r["variant"])].append(r)
        groups[(int(r["online_index"]), "overall")].append(r)
    if not groups:
        raise ValueError("no successful timed runs to build a Pareto front from")
    out = []
    for (k, scope) in sorted(groups, key=lambda g: (g[0], g[1] == "overall", g[1])):
        members = sorted(groups[(k, scope)], key=_sort_key)
        pts = [(float(r["relative_error"]), float(r["relative_wall_time"])) for r in members]
        for i in sorted(pareto_front(pts), key=lambda i: pts[i]):
            r = members[i]
            out.append(dict(online_index=k, scope=scope, variant=r["variant"], params=r["params"],
                            relative_error=float(r["relative_error"]),
                            relative_wall_time=float(r["relative_wall_time"])))
    return out


def write_pareto(path, rows):
    cols = ["online_index", "scope", "variant", "params", "relative_error", "relative_wall_time"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in pareto_rows(rows):
            w.writerow([_fmt(r[c]) for c in cols])


def read_runs(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "relative_wall_time" not in rows[0]:
        raise ValueError(f"{path} has no timing columns")
    return rows


def emit_reports(records, out_dir, config=None, include_timing=True):
    """Write runs.csv, pareto.csv, config echo and per-run convergence CSVs.

    With ``include_timing=False`` the wall-time columns and pareto.csv are
    omitted so the output is reproducible byte for byte.
    """
    if not records:
        raise ValueError("no run records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = [c for c in RUN_COLUMNS if include_timing or c not in TIMING_COLUMNS]
    rows = sorted((_row(r) for r in records), key=_sort_key)
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])
    written = [out / "runs.csv"]
    if include_timing:
        try:
            write_pareto(out / "pareto.csv", rows)
            written.append(out / "pareto.csv")
        except ValueError:
            pass
    if config is not None:
        (out / "config.json").write_text(config.echo() + "\n")
        written.append(out / "config.json")
    conv = out / "convergence"
    conv.mkdir(exist_ok=True)
    for rec in sorted(records, key=lambda r: (r.online_index, r.variant, r.params)):
        if rec.history:
            p = conv / f"{rec.run_id}.csv"
            convergence_to_csv(p, rec.history)
            written.append(p)
    return written
