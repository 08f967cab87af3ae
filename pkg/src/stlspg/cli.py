"""Command line entry point ``stlspg``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("stlspg")


def _cmd_run(args):
    from .bench import emit_reports, load_config, run_campaign

    overrides = list(args.set or [])
    if args.output_dir:
        overrides.append(f'output_dir="{args.output_dir}"')
    if args.repetitions is not None:
        overrides.append(f"repetitions={args.repetitions}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, overrides)
    for spec in cfg.skipped:
        log.info("skipped by constraint filter: %s %s", spec.label, spec.key)
    records, front = run_campaign(cfg)
    files = emit_reports(records, cfg.output_dir, cfg, include_timing=not args.deterministic)
    n_fail = sum(r.status == "failed" for r in records)
    print(f"{len(records)} runs ({n_fail} failed), {len(front)} on the overall front")
    print(f"wrote {len(files)} files to {cfg.output_dir}")
    return 0


def _cmd_fom(args):
    from .io import save_trajectory, trajectory_to_csv
    from .models import make_model
    from .time_integration import TimeGrid, multistep_scheme_table, solve_fom

    model = make_model(args.problem, **({"n_cells": args.n_cells} if args.n_cells else {}))
    defaults = {"burgers": (2.5e-4, 2000), "euler": (1e-3, 600)}
    key = "burgers" if args.problem.lower() == "burgers" else "euler"
    dt = args.dt if args.dt is not None else defaults[key][0]
    n = args.n_steps if args.n_steps is not None else defaults[key][1]
    mu = np.asarray(args.mu, dtype=float)
    model.check_parameters(mu)
    traj = solve_fom(model, multistep_scheme_table(args.scheme), TimeGrid.uniform(dt, n), mu)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_trajectory(out, traj)
    if args.csv:
        trajectory_to_csv(args.csv, traj)
    print(f"{traj.states.shape[0]} dofs x {traj.states.shape[1]} time instances -> {out}")
    return 0


def _cmd_bounds(args):
    from .error_analysis import loglog_slope, stability_curve, write_stability_csv

    T = np.geomspace(args.T_min, args.T_max, args.points)
    curves = {}
    for name in args.scheme:
        curves[name] = stability_curve(name, args.dt, args.lf, T)
        rows = curves[name]
        x = [r[0] for r in rows]
        s1 = loglog_slope(x, [r[2] for r in rows])
        s2 = loglog_slope(x, [r[3] for r in rows])
        print(f"{name}: slope(1+Lambda)={s1:.4f} slope(sqrt(N_t)(1+Lambda))={s2:.4f}")
    write_stability_csv(args.output, curves)
    print(f"wrote {args.output}")
    return 0


def _cmd_pareto(args):
    from .bench import pareto_rows, read_runs, write_pareto

    rows = read_runs(args.runs)
    out = args.output or str(Path(args.runs).with_name("pareto.csv"))
    write_pareto(out, rows)
    for r in pareto_rows(rows):
        print(f"mu{r['online_index']} {r['scope']:>10} {r['variant']:>10} {r['params']:<40} "
              f"err={r['relative_error']:.3e} rel_time={r['relative_wall_time']:.3e}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="stlspg", description="Space-time LSPG model reduction toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a campaign from a TOML config")
    r.add_argument("config")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (dotted path, TOML value)")
    r.add_argument("--output-dir")
    r.add_argument("--repetitions", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--deterministic", action="store_true",
                   help="omit wall-time columns so runs.csv is reproducible")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fom", help="solve the full-order model")
    f.add_argument("problem", choices=["burgers", "euler", "euler_nozzle"])
    f.add_argument("--mu", type=float, nargs="+", required=True)
    f.add_argument("--scheme", default="BE")
    f.add_argument("--dt", type=float)
    f.add_argument("--n-steps", type=int)
    f.add_argument("--n-cells", type=int)
    f.add_argument("-o", "--output", default="fom.bin")
    f.add_argument("--csv")
    f.set_defaults(func=_cmd_fom)

    b = sub.add_parser("bounds", help="stability-constant growth curves")
    b.add_argument("--scheme", nargs="+", default=["BE"])
    b.add_argument("--dt", type=float, default=1e-4)
    b.add_argument("--lf", type=float, default=1.0)
    b.add_argument("--T-min", dest="T_min", type=float, default=1e-3)
    b.add_argument("--T-max", dest="T_max", type=float, default=1e-1)
    b.add_argument("--points", type=int, default=9)
    b.add_argument("-o", "--output", default="stability.csv")
    b.set_defaults(func=_cmd_bounds)

    q = sub.add_parser("pareto", help="Pareto fronts from a runs.csv")
    q.add_argument("runs")
    q.add_argument("-o", "--output")
    q.set_defaults(func=_cmd_pareto)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        print(f"stlspg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
