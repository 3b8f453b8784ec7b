"""Run DED and DIP on a scenario (the 50-room building by default) and print the metric table."""

import argparse
import time
from pathlib import Path

from escort_btc import metrics
from escort_btc.scenario import load
from escort_btc.simulation import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", nargs="?", default=str(ROOT / "scenarios" / "reference_50room.json"))
    ap.add_argument("--kinds", nargs=2, default=["ded", "dip"])
    ap.add_argument("--horizon", type=float)
    args = ap.parse_args()

    reports = []
    for kind in args.kinds:
        sc = load(args.scenario, controller=kind, horizon=args.horizon)
        start = time.perf_counter()
        tr = run(sc)
        print(f"{kind}: gain {sc.controller.gain:g}, {sc.n_steps} steps in {time.perf_counter() - start:.1f} s")
        reports.append(metrics.build_report(tr, sc.geometry, sc.name, kind))

    table = metrics.compare(*reports)
    a, b = table["a"], table["b"]
    print(f"\n{'metric':<20}{a:>12}{b:>12}{'delta':>12}")
    for name, row in table["metrics"].items():
        cells = ["-" if v is None else f"{v:.4g}" for v in (row["a"], row["b"], row["delta"])]
        print(f"{name:<20}" + "".join(f"{c:>12}" for c in cells))


if __name__ == "__main__":
    main()
