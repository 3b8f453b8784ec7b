"""Post-processing of traces: tracking quality, transience, overshoot,
constraint compliance and energy accounting."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .population import CLAMP_TOL, BoundedSimplex
from .simulation import Trace

SETTLING_BAND = 0.5
STEADY_FRACTION = 0.25


def tracking_rmse(trace: Trace) -> tuple[np.ndarray, float]:
    f = trace.room_payoffs
    per_room = np.sqrt(np.mean(f**2, axis=0))
    return per_room, float(per_room.mean())


def overshoot(trace: Trace) -> np.ndarray:
    """Per-room peak of max(f, 0) from the first time f reaches zero onward."""
    f = trace.room_payoffs
    out = np.zeros(f.shape[1])
    for i in range(f.shape[1]):
        hit = np.flatnonzero(f[:, i] >= 0)
        if hit.size:
            out[i] = max(0.0, float(f[hit[0]:, i].max()))
    return out


def _settle_index(signal: np.ndarray, band: float) -> int | None:
    outside = np.flatnonzero(np.abs(signal) > band)
    if outside.size == 0:
        return 0
    last = int(outside[-1])
    return None if last == signal.size - 1 else last + 1


def _sign_changes(signal: np.ndarray) -> int:
    s = np.sign(signal)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def transience(trace: Trace, band: float = SETTLING_BAND) -> tuple[int, float | None]:
    """Sign changes of the room-mean payoff before it settles, and the settling time.

    Settling is the first entry into ``|mean f| <= band`` that lasts to the
    end of the trace. An unsettled trace returns ``None`` for the time and
    counts crossings over the whole horizon.
    """
    if not band > 0:
        raise ValueError("band must be > 0")
    mean_f = trace.room_payoffs.mean(axis=1)
    idx = _settle_index(mean_f, band)
    stop = mean_f.size if idx is None else idx + 1
    crossings = _sign_changes(mean_f[:stop])
    return crossings, (None if idx is None else float(trace.time[idx]))


def constraint_violations(trace: Trace, geometry: BoundedSimplex, tol: float = CLAMP_TOL) -> int:
    """(step, component) box breaches plus steps breaching the total, beyond tol*total."""
    x = trace.allocations
    slack = tol * geometry.total
    box = (x < geometry.lower - slack) | (x > geometry.upper + slack) | ~np.isfinite(x)
    mass = np.abs(x.sum(axis=1) - geometry.total) > slack
    return int(box.sum() + mass.sum())


def energy_used(trace: Trace) -> dict:
    """Left-Riemann integral of allocations over each dt interval (kWh)."""
    if len(trace) < 2:
        k = trace.n_rooms
        return {"per_room": np.zeros(k), "delivered": 0.0, "slack": 0.0}
    e = trace.allocations[:-1].sum(axis=0) * trace.dt
    k = trace.n_rooms
    return {"per_room": e[:k], "delivered": float(e[:k].sum()), "slack": float(e[k:].sum())}


def steady_state_mean_abs(trace: Trace, fraction: float = STEADY_FRACTION) -> float:
    w = max(1, int(np.ceil(fraction * len(trace))))
    return float(np.abs(trace.room_payoffs[-w:]).mean())


@dataclass(frozen=True)
class RunReport:
    scenario: str
    controller: str
    rmse_per_room: tuple[float, ...]
    rmse: float
    peak_overshoot: float
    mean_overshoot: float
    crossings: int
    settling_time: float | None
    violations: int
    energy_per_room: tuple[float, ...]
    energy_delivered: float
    energy_slack: float
    steady_mean_abs_f: float
    final_residual: float

    @property
    def settled(self) -> bool:
        return self.settling_time is not None

    def summary(self) -> dict:
        """Scalar fields only, keyed for JSON/CSV output."""
        d = dataclasses.asdict(self)
        d.pop("rmse_per_room")
        d.pop("energy_per_room")
        return d


def build_report(
    trace: Trace,
    geometry: BoundedSimplex,
    scenario: str = "scenario",
    controller: str = "ded",
    band: float = SETTLING_BAND,
    steady_fraction: float = STEADY_FRACTION,
) -> RunReport:
    per_room, agg = tracking_rmse(trace)
    peaks = overshoot(trace)
    crossings, settle = transience(trace, band)
    energy = energy_used(trace)
    return RunReport(
        scenario=scenario,
        controller=controller,
        rmse_per_room=tuple(float(v) for v in per_room),
        rmse=agg,
        peak_overshoot=float(peaks.max()),
        mean_overshoot=float(peaks.mean()),
        crossings=crossings,
        settling_time=settle,
        violations=constraint_violations(trace, geometry),
        energy_per_room=tuple(float(v) for v in energy["per_room"]),
        energy_delivered=energy["delivered"],
        energy_slack=energy["slack"],
        steady_mean_abs_f=steady_state_mean_abs(trace, steady_fraction),
        final_residual=float(trace.residual[-1]),
    )


COMPARED = (
    "rmse", "peak_overshoot", "mean_overshoot", "crossings", "settling_time",
    "violations", "energy_delivered", "energy_slack", "steady_mean_abs_f", "final_residual",
)


def compare(a: RunReport, b: RunReport) -> dict:
    """Side-by-side table {metric: {a, b, delta=b-a}} for two runs of one scenario."""
    if a.scenario != b.scenario:
        raise ValueError(f"reports come from different scenarios: {a.scenario!r} vs {b.scenario!r}")
    table = {}
    for name in COMPARED:
        va, vb = getattr(a, name), getattr(b, name)
        delta = None if va is None or vb is None else vb - va
        table[name] = {"a": va, "b": vb, "delta": delta}
    return {"scenario": a.scenario, "a": a.controller, "b": b.controller, "metrics": table}
