"""Sweep DIP gain and integration substeps on a scenario and report which runs abort."""

import argparse
import dataclasses
from pathlib import Path

from escort_btc.scenario import load
from escort_btc.simulation import SimulationAborted, run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario", nargs="?", default=str(ROOT / "scenarios" / "dip_failure_5room.json"))
    ap.add_argument("--gains", type=float, nargs="+", default=[0.5, 1.0, 1.25, 2.5, 5.0, 10.0])
    ap.add_argument("--substeps", type=int, nargs="+", default=[1, 5, 20])
    ap.add_argument("--horizon", type=float, default=10.0)
    args = ap.parse_args()

    base = load(args.scenario, controller="dip", horizon=args.horizon)
    print(f"{'gain':>8}{'substeps':>10}  outcome")
    for gain in args.gains:
        for sub in args.substeps:
            spec = dataclasses.replace(base.controller, gain=gain)
            sc = dataclasses.replace(base.with_controller(spec), substeps=sub)
            try:
                tr = run(sc)
                outcome = f"ok, final residual {tr.residual[-1]:.3g}"
            except SimulationAborted as exc:
                outcome = f"aborted at step {exc.step}, component {exc.component + 1}"
            print(f"{gain:>8g}{sub:>10d}  {outcome}")


if __name__ == "__main__":
    main()
