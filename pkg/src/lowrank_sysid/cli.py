"""Command-line front end.

Subcommands
-----------
run <config>        simulate -> estimate -> aggregate, writing runs.csv,
                    summary.json, bode CSVs and config.echo.json
preset <name>       print (or write) a built-in experiment configuration
simulate <config>   generate one dataset and write the combined series CSV
identify <config> --data <csv>
                    run the configured estimation steps on an external CSV

Exit codes: 0 ok, 1 numeric failure, 2 invalid configuration, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import estimate, scenarios, simulate
from .errors import ConfigError, LowRankError

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lowrank-sysid",
        description="Simulation and identification experiments for rank-one vector processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario end to end")
    run_p.add_argument("config", help="scenario JSON path")
    run_p.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_p.add_argument("--runs", type=int, default=None, help="override run count")
    run_p.add_argument("--out", default=None, help="override output directory")
    run_p.add_argument("--threads", type=int, default=1, help="worker count (0 = auto)")

    preset_p = sub.add_parser("preset", help="emit a built-in scenario configuration")
    preset_p.add_argument("name", choices=["example1", "example2", "example3"])
    preset_p.add_argument("--emit-config", default=None, metavar="PATH", help="write JSON here instead of stdout")

    sim_p = sub.add_parser("simulate", help="generate one dataset (no estimation)")
    sim_p.add_argument("config")
    sim_p.add_argument("--seed", type=int, default=None)
    sim_p.add_argument("--out", default=None)

    id_p = sub.add_parser("identify", help="estimate on an external combined CSV")
    id_p.add_argument("config")
    id_p.add_argument("--data", required=True, help="combined CSV (t,y1,y2[,u])")
    id_p.add_argument("--out", default=None)
    return parser


def _apply_overrides(scenario, args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        overrides["runs"] = args.runs
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    return scenario.with_overrides(**overrides) if overrides else scenario


def _cmd_run(args):
    scenario = _apply_overrides(scenarios.load_scenario(args.config), args)
    workers = args.threads if args.threads and args.threads > 0 else (os.cpu_count() or 1)
    summary, _ = scenarios.run_scenario(scenario, workers=workers)
    print(f"{scenario.scenario_id}: {summary.runs} runs, {summary.failures} failures -> {scenario.output_dir}")
    return EXIT_OK


def _cmd_preset(args):
    doc = scenarios.preset(args.name).to_json_dict()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.emit_config:
        with open(args.emit_config, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_simulate(args):
    scenario = _apply_overrides(scenarios.load_scenario(args.config), args)
    outdir = scenario.output_dir
    os.makedirs(outdir, exist_ok=True)
    if scenario.kind == "low_rank":
        y1, y2 = scenarios._simulate_low_rank(scenario, 0)
        series = [y1, y2]
    else:
        y1, y2, u = scenarios._simulate_with_input(scenario, 0)
        series = [y1, y2, u]
    path = os.path.join(outdir, "data.csv")
    simulate.write_series_csv(path, series)
    print(f"{scenario.scenario_id}: wrote {path}")
    return EXIT_OK


def _cmd_identify(args):
    scenario = _apply_overrides(scenarios.load_scenario(args.config), args)
    columns = simulate.read_series_csv(args.data)
    for needed in ("y1", "y2"):
        if needed not in columns:
            raise ConfigError([f"data: column {needed!r} missing from {args.data}"])
    plan = scenario.estimation
    reports = []
    y1, y2 = columns["y1"], columns["y2"]
    if scenario.kind == "with_input":
        if "u" not in columns:
            raise ConfigError([f"data: column 'u' missing from {args.data} (with_input scenario)"])
        orders = plan.stage1_orders
        model = estimate.InputModelEstimator(
            stage1_orders=orders,
            q_max=plan.stage1_scan[0],
            r_max=plan.stage1_scan[1],
            relation_orders=plan.relation_orders,
            k1_orders=plan.k1_orders,
            pin_b0=plan.pin_b0,
        ).fit(y1, y2, columns["u"])
        reports.append(model.to_report())
    else:
        if plan.ar_orders:
            for i, (y, order) in enumerate(zip((y1, y2), plan.ar_orders), start=1):
                rep = estimate.AREstimator(order=order).fit(y).to_report()
                rep["channel"] = i
                reports.append(rep)
        if plan.arma_orders:
            reports.append(estimate.ARMAEstimator(p=plan.arma_orders[0], q=plan.arma_orders[1]).fit(y1).to_report())
        if plan.relation_orders == "bic":
            table = estimate.scan_bic(y1, y2, *plan.relation_scan, pin_b0=plan.pin_b0)
            q, r = table.best
        elif isinstance(plan.relation_orders, tuple):
            q, r = plan.relation_orders
        else:
            q = None
        if q is not None:
            reports.append(estimate.RelationEstimator(q=q, r=r, pin_b0=plan.pin_b0).fit(y1, y2).to_report())
    outdir = scenario.output_dir
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{scenario.scenario_id}: wrote {path}")
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "preset": _cmd_preset,
        "simulate": _cmd_simulate,
        "identify": _cmd_identify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        report = {"error": "config", "fields": exc.fields}
        print(json.dumps(report, indent=2, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except LowRankError as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report, indent=2, sort_keys=True), file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}, indent=2), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
