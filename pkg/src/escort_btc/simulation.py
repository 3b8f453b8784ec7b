"""Closed-loop plant/controller simulation and rest-point diagnostics."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .controllers import BarrierDomainError, ControllerSpec, controller_velocity
from .graph import CommGraph
from .population import (
    BoundedSimplex,
    BoundsViolationError,
    PopulationState,
    escort,
)
from .thermal import BuildingNetwork, EnvironmentProfiles, payoff, step_plant

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


class SimulationAborted(RuntimeError):
    """Raised when the state leaves the feasible set mid-run.

    ``trace`` holds every row recorded up to and including the offending one.
    """

    def __init__(self, msg: str, step: int, component: int | None, trace: "Trace"):
        super().__init__(msg)
        self.step = step
        self.component = component
        self.trace = trace


@dataclass(frozen=True, eq=False)
class Scenario:
    building: BuildingNetwork
    environment: EnvironmentProfiles
    geometry: BoundedSimplex
    graph: CommGraph
    controller: ControllerSpec
    horizon: float
    dt: float
    t0: np.ndarray
    x0: np.ndarray
    substeps: int = 1
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        k, n = self.building.n_rooms, self.geometry.n
        if n != k + 1:
            raise ScenarioError(f"geometry has {n} strategies; expected {k} rooms + 1 slack")
        if len(self.environment.setpoints) != k:
            raise ScenarioError(f"{len(self.environment.setpoints)} setpoint profiles for {k} rooms")
        dist = self.environment.disturbances
        if dist is not None and len(dist) != self.building.n_zones:
            raise ScenarioError("need one disturbance profile per zone")
        if self.graph.node_count != n:
            raise ScenarioError(f"graph has {self.graph.node_count} nodes, population has {n}")
        t0 = np.array(self.t0, dtype=float).ravel()
        x0 = np.array(self.x0, dtype=float).ravel()
        if t0.shape != (self.building.n_zones,):
            raise ScenarioError(f"initial temperatures need {self.building.n_zones} entries")
        if x0.shape != (n,):
            raise ScenarioError(f"initial allocation needs {n} entries")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "x0", x0)
        if not self.dt > 0 or self.horizon < 0:
            raise ScenarioError("need dt > 0 and horizon >= 0")
        if self.substeps < 1:
            raise ScenarioError("substeps must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_rooms(self) -> int:
        return self.building.n_rooms

    def with_controller(self, controller: ControllerSpec) -> "Scenario":
        return dataclasses.replace(self, controller=controller)


@dataclass(eq=False)
class Trace:
    """Per-step record. Row i is the state at time i*dt, before step i is applied."""

    time: np.ndarray
    temperatures: np.ndarray  # (T, N)
    setpoints: np.ndarray  # (T, k)
    allocations: np.ndarray  # (T, n), slack last
    payoffs: np.ndarray  # (T, n), slack last
    escort: np.ndarray  # (T, n)
    velocity: np.ndarray  # (T, n), the rate applied at row i
    residual: np.ndarray  # (T,)
    objective: np.ndarray  # (T,)
    dt: float
    total: float
    clamp_events: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.time.size

    @property
    def n_rooms(self) -> int:
        return self.setpoints.shape[1]

    @property
    def room_payoffs(self) -> np.ndarray:
        return self.payoffs[:, : self.n_rooms]

    @property
    def room_allocations(self) -> np.ndarray:
        return self.allocations[:, : self.n_rooms]

    @property
    def horizon(self) -> float:
        return float(self.time[-1]) if len(self) else 0.0


def consensus_residual(f) -> float:
    f = np.asarray(f, dtype=float)
    if f.size == 0:
        return 0.0
    return float(f.max() - f.min())


def run(scenario: Scenario) -> Trace:
    s = scenario
    k, n, N = s.n_rooms, s.geometry.n, s.building.n_zones
    steps = s.n_steps
    rows = steps + 1
    rec = {
        "temperatures": np.empty((rows, N)),
        "setpoints": np.empty((rows, k)),
        "allocations": np.empty((rows, n)),
        "payoffs": np.empty((rows, n)),
        "escort": np.empty((rows, n)),
        "velocity": np.zeros((rows, n)),
        "residual": np.empty(rows),
        "objective": np.empty(rows),
    }
    times = np.arange(rows) * s.dt
    clamps: list[tuple[int, int]] = []
    sub_dt = s.dt / s.substeps

    def partial(upto: int) -> Trace:
        return Trace(time=times[:upto], dt=s.dt, total=s.geometry.total, clamp_events=clamps,
                     **{key: val[:upto] for key, val in rec.items()})

    try:
        state = PopulationState.checked(s.x0, s.geometry)
    except BoundsViolationError as exc:
        raise ScenarioError(f"initial allocation infeasible: {exc}") from exc
    if not state.is_interior:
        raise ScenarioError("initial allocation must lie strictly inside the bounds")

    t = s.t0.copy()
    for i in range(rows):
        tau = times[i]
        t_set = s.environment.setpoints_at(tau)
        f_rooms = payoff(t[:k], t_set)
        f = np.append(f_rooms, s.controller.slack_payoff)
        rec["temperatures"][i] = t
        rec["setpoints"][i] = t_set
        rec["allocations"][i] = state.x
        rec["payoffs"][i] = f
        rec["escort"][i] = escort(state)
        rec["residual"][i] = f.max() - f.min()
        rec["objective"][i] = 0.5 * float(f_rooms @ f_rooms)
        if i == steps:
            break
        if not np.all(np.isfinite(t)):
            bad = int(np.flatnonzero(~np.isfinite(t))[0])
            raise SimulationAborted(f"step {i}: non-finite temperature in zone {bad + 1}",
                                    i, bad, partial(i + 1))

        u = state.x[:k]
        x = state.x
        applied = np.zeros(n)
        for _ in range(s.substeps):
            try:
                vel = controller_velocity(s.controller, state, f, s.graph)
            except BarrierDomainError as exc:
                raise SimulationAborted(f"step {i}: {exc}", i, None, partial(i + 1)) from exc
            applied += vel / s.substeps
            x = state.x + sub_dt * vel
            try:
                state = PopulationState.checked(x, s.geometry)
            except BoundsViolationError as exc:
                for key, val in rec.items():
                    val[i + 1] = np.nan
                rec["allocations"][i + 1] = x
                bad = partial(i + 2)
                raise SimulationAborted(f"step {i}: {exc}", i, exc.component, bad) from exc
            clamps.extend((i + 1, c) for c in state.clamped)
        rec["velocity"][i] = applied

        amb = s.environment.ambient_at(tau)
        d = s.environment.disturbances_at(tau, N)
        t = step_plant(s.building, t, amb, u, d, s.dt)

    if clamps:
        log.info("%s: clamped %d boundary grazes", s.name, len(clamps))
    return partial(rows)


@dataclass(frozen=True)
class EquilibriumDiagnostics:
    t_star: np.ndarray
    x_star: np.ndarray
    f_star: np.ndarray
    e_t: np.ndarray
    e_u: np.ndarray
    e_f: np.ndarray
    window_rows: int
    final_residual: float
    # rows where the plant is near rest and the controller is near rest too
    rest_implies_still: bool
    max_velocity_at_rest: float
    c3_sum_error: float
    c3_interior: bool

    @property
    def c3_ok(self) -> bool:
        return self.c3_interior and self.c3_sum_error <= 1e-9 * max(1.0, abs(float(self.x_star.sum())))


def diagnostics(
    trace: Trace,
    window: float = 0.1,
    geometry: BoundedSimplex | None = None,
    rest_tol: float = 1e-3,
    velocity_tol: float = 1e-3,
) -> EquilibriumDiagnostics:
    """Estimate the rest point from the trailing ``window`` fraction of the trace.

    The uniqueness check looks at every row whose temperature error to the
    estimated rest point is within ``rest_tol`` and asks whether the applied
    allocation rate there is within ``velocity_tol``.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not 0 < window <= 1:
        raise ValueError("window must be in (0, 1]")
    w = max(1, int(np.ceil(window * len(trace))))
    tail = slice(len(trace) - w, len(trace))
    t_star = trace.temperatures[tail].mean(axis=0)
    x_star = trace.allocations[tail].mean(axis=0)
    f_star = trace.payoffs[tail].mean(axis=0)
    e_t = trace.temperatures - t_star
    e_u = trace.allocations - x_star
    e_f = trace.payoffs - f_star
    near = np.linalg.norm(e_t, axis=1) <= rest_tol
    vel = np.linalg.norm(trace.velocity, axis=1)
    max_v = float(vel[near].max()) if near.any() else 0.0
    if geometry is not None:
        interior = bool(np.all(x_star > geometry.lower) and np.all(x_star < geometry.upper))
        sum_err = abs(float(x_star.sum()) - geometry.total)
    else:
        interior = True
        sum_err = abs(float(x_star.sum()) - trace.total)
    return EquilibriumDiagnostics(
        t_star=t_star, x_star=x_star, f_star=f_star, e_t=e_t, e_u=e_u, e_f=e_f,
        window_rows=w, final_residual=float(trace.residual[-1]),
        rest_implies_still=max_v <= velocity_tol, max_velocity_at_rest=max_v,
        c3_sum_error=sum_err, c3_interior=interior,
    )
