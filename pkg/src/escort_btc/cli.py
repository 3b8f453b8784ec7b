"""Command-line front end: ``simulate``, ``compare`` and ``validate``.

Exit codes: 0 success, 1 validation failure (schema or pre-run checks),
2 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .controllers import KINDS
from .scenario import SchemaError, apply_overrides, build, controller_for, raw_scenario, read_document, run_checks
from .simulation import Scenario, ScenarioError, SimulationAborted, Trace, diagnostics, run

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2

PLOT_STUB = '''"""Render the plot-data CSVs in this directory (needs matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
for name in ("temperatures", "actuators", "payoffs"):
    with open(here / f"plot_{name}.csv") as fh:
        rows = list(csv.reader(fh))
    head, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
    time = [r[0] for r in data]
    fig, ax = plt.subplots()
    for c in range(1, len(head)):
        ax.plot(time, [r[c] for r in data], lw=0.6)
    ax.set_xlabel("time (h)")
    ax.set_title(name)
    fig.savefig(here / f"{name}.png", dpi=120)
'''


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    data = np.column_stack(columns) if columns else np.empty((0, 0))
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in data)
    path.write_text("\n".join(lines) + "\n")


def trace_columns(trace: Trace) -> tuple[list[str], list[np.ndarray]]:
    k = trace.n_rooms
    n_zones = trace.temperatures.shape[1]
    header = (["time"] + [f"t_{i}" for i in range(1, n_zones + 1)]
              + [f"tset_{i}" for i in range(1, k + 1)]
              + [f"u_{i}" for i in range(1, k + 1)] + ["u_slack"]
              + [f"f_{i}" for i in range(1, k + 1)] + ["residual", "objective"])
    cols = ([trace.time] + list(trace.temperatures.T) + list(trace.setpoints.T)
            + list(trace.allocations.T) + list(trace.room_payoffs.T)
            + [trace.residual, trace.objective])
    return header, cols


def write_trace(trace: Trace, out: Path) -> None:
    header, cols = trace_columns(trace)
    write_csv(out / "trace.csv", header, cols)


def write_plot_data(trace: Trace, out: Path) -> None:
    k = trace.n_rooms
    rooms = range(1, k + 1)
    write_csv(out / "plot_temperatures.csv",
              ["time"] + [f"t_{i}" for i in rooms] + [f"tset_{i}" for i in rooms],
              [trace.time] + list(trace.temperatures[:, :k].T) + list(trace.setpoints.T))
    write_csv(out / "plot_actuators.csv",
              ["time"] + [f"u_{i}" for i in rooms] + ["u_slack"],
              [trace.time] + list(trace.allocations.T))
    write_csv(out / "plot_payoffs.csv",
              ["time"] + [f"f_{i}" for i in rooms] + ["residual"],
              [trace.time] + list(trace.room_payoffs.T) + [trace.residual])
    (out / "plot.py").write_text(PLOT_STUB)


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def summarize(scenario: Scenario, trace: Trace) -> dict:
    report = metrics.build_report(trace, scenario.geometry, scenario.name, scenario.controller.kind)
    diag = diagnostics(trace, geometry=scenario.geometry)
    return {
        "scenario": scenario.name,
        "controller": {"kind": scenario.controller.kind, "gain": scenario.controller.gain,
                       "epsilon": scenario.controller.epsilon},
        "dt": scenario.dt,
        "horizon": scenario.horizon,
        "steps": scenario.n_steps,
        "substeps": scenario.substeps,
        "seed": scenario.seed,
        "aborted": None,
        "metrics": report.summary(),
        "rmse_per_room": list(report.rmse_per_room),
        "energy_per_room": list(report.energy_per_room),
        "rest_point": {
            "x_star": diag.x_star.tolist(),
            "f_star": diag.f_star.tolist(),
            "c3_ok": diag.c3_ok,
            "rest_implies_still": diag.rest_implies_still,
        },
        "clamp_events": len(trace.clamp_events),
    }


def simulate_into(scenario: Scenario, out: Path) -> tuple[int, Trace, dict]:
    """Run one scenario and write its artifacts; returns (exit code, trace, summary)."""
    out.mkdir(parents=True, exist_ok=True)
    try:
        trace = run(scenario)
    except SimulationAborted as exc:
        write_trace(exc.trace, out)
        summary = {"scenario": scenario.name, "controller": {"kind": scenario.controller.kind},
                   "seed": scenario.seed,
                   "aborted": {"step": exc.step,
                               "component": None if exc.component is None else exc.component + 1,
                               "message": str(exc)}}
        _dump(out / "summary.json", summary)
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT, exc.trace, summary
    write_trace(trace, out)
    write_plot_data(trace, out)
    summary = summarize(scenario, trace)
    _dump(out / "summary.json", summary)
    return EXIT_OK, trace, summary


def _prepare(args):
    """Read, override and check a scenario document; returns (doc, raw) or an exit code."""
    try:
        doc = read_document(args.scenario)
        doc = apply_overrides(doc, dt=getattr(args, "dt", None), horizon=getattr(args, "horizon", None),
                              controller=getattr(args, "controller", None), seed=getattr(args, "seed", None))
        raw = raw_scenario(doc)
    except SchemaError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    failed = [c for c in run_checks(raw) if not c.ok]
    if failed:
        for c in failed:
            print(f"check failed: {c.name}: {c.detail}", file=sys.stderr)
        return EXIT_INVALID
    return doc, raw


def cmd_simulate(args) -> int:
    prepared = _prepare(args)
    if isinstance(prepared, int):
        return prepared
    _, raw = prepared
    try:
        scenario = build(raw)
    except (ScenarioError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code, _, summary = simulate_into(scenario, Path(args.output))
    if code == EXIT_OK:
        m = summary["metrics"]
        print(f"{scenario.name} [{scenario.controller.kind}]: rmse={m['rmse']:.4g} "
              f"final_residual={m['final_residual']:.3g} violations={m['violations']}")
    return code


def cmd_compare(args) -> int:
    prepared = _prepare(args)
    if isinstance(prepared, int):
        return prepared
    doc, raw = prepared
    kinds = args.kinds
    out = Path(args.output)
    try:
        base = build(raw)
    except (ScenarioError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    reports, traces = [], []
    for idx, kind in enumerate(kinds):
        sc = base.with_controller(controller_for(doc, kind))
        sub = out / (kind if kinds.count(kind) == 1 else f"{kind}_{idx + 1}")
        code, trace, _ = simulate_into(sc, sub)
        if code != EXIT_OK:
            return code
        reports.append(metrics.build_report(trace, sc.geometry, sc.name, kind))
        traces.append(trace)
    table = metrics.compare(reports[0], reports[1])
    _dump(out / "comparison.json", table)
    header = ["metric", table["a"], table["b"], "delta"]
    lines = [",".join(header)]
    for name, row in table["metrics"].items():
        lines.append(",".join([name] + ["" if row[c] is None else _fmt(row[c]) for c in ("a", "b", "delta")]))
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")
    tags = [f"{k}_{i + 1}" if kinds.count(k) > 1 else k for i, k in enumerate(kinds)]
    write_csv(out / "paired_mean_payoff.csv",
              ["time"] + [f"mean_f_{t}" for t in tags] + [f"u_slack_{t}" for t in tags],
              [traces[0].time] + [tr.room_payoffs.mean(axis=1) for tr in traces]
              + [tr.allocations[:, -1] for tr in traces])
    for name, row in table["metrics"].items():
        print(f"{name:>18}  {row['a']!s:>22}  {row['b']!s:>22}  delta={row['delta']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        raw = raw_scenario(read_document(args.scenario))
    except SchemaError as exc:
        print(f"FAIL schema: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        print(f"FAIL read: {exc}")
        return EXIT_INVALID
    checks = run_checks(raw)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.name}: {c.detail}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_INVALID


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="escort-btc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp, with_controller=True):
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--output", "-o", default="out", help="output directory")
        sp.add_argument("--dt", type=float, help="time step (h)")
        sp.add_argument("--horizon", type=float, help="horizon (h)")
        sp.add_argument("--seed", type=int)
        if with_controller:
            sp.add_argument("--controller", choices=KINDS)

    sim = sub.add_parser("simulate", help="run one scenario and write artifacts")
    run_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="run a scenario under two controllers")
    run_flags(cmp_, with_controller=False)
    cmp_.add_argument("--kinds", nargs=2, choices=KINDS, default=["ded", "dip"], metavar="KIND")
    cmp_.set_defaults(func=cmd_compare)

    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("scenario")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
