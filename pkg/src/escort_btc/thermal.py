"""Lumped-capacitance thermal network of a building (rooms + walls).

Each zone i obeys

    theta_i * dt_i/dtau = sum_j alpha_ij (t_j - t_i) + alpha_ia (t_amb - t_i) + v_i (u_i + d_i)

with v_i = 1 for rooms and 0 for walls. Rooms come first in zone order, so
the actuator vector u lines up with zones[:k]. Units: hours, kWh/degC, kW/degC.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import connected_components

ROOM = "room"
WALL = "wall"


class ThermalError(ValueError):
    pass


@dataclass(frozen=True)
class Zone:
    kind: str
    capacitance: float
    ambient_conductance: float = 0.0

    def __post_init__(self):
        if self.kind not in (ROOM, WALL):
            raise ThermalError(f"zone kind must be {ROOM!r} or {WALL!r}, got {self.kind!r}")
        if not self.capacitance > 0:
            raise ThermalError(f"zone capacitance must be > 0, got {self.capacitance}")
        if self.ambient_conductance < 0:
            raise ThermalError("ambient conductance must be >= 0")

    @property
    def actuated(self) -> bool:
        return self.kind == ROOM


@dataclass(frozen=True, eq=False)
class BuildingNetwork:
    zones: tuple[Zone, ...]
    conductance: np.ndarray

    def __post_init__(self):
        zones = tuple(self.zones)
        object.__setattr__(self, "zones", zones)
        kinds = [z.kind for z in zones]
        k = kinds.count(ROOM)
        if k == 0:
            raise ThermalError("building has no rooms")
        if kinds[:k] != [ROOM] * k:
            raise ThermalError("rooms must precede walls in zone order")
        a = np.array(self.conductance, dtype=float)
        n = len(zones)
        if a.shape != (n, n):
            raise ThermalError(f"conductance must be {n}x{n}, got {a.shape}")
        if not np.allclose(a, a.T, rtol=0, atol=0):
            raise ThermalError("conductance matrix is not symmetric")
        if np.any(np.diag(a) != 0) or np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ThermalError("conductance must be finite, nonnegative, with zero diagonal")
        # ambient acts as one extra node for the connectivity check
        amb = np.array([z.ambient_conductance for z in zones])
        ext = np.zeros((n + 1, n + 1), dtype=np.int8)
        ext[:n, :n] = a > 0
        ext[:n, n] = ext[n, :n] = amb > 0
        if not amb.any():
            ext = ext[:n, :n]
        if len(connected_components(ext)) > 1:
            raise ThermalError("zone adjacency structure is disconnected")
        a.setflags(write=False)
        object.__setattr__(self, "conductance", a)
        cap = np.array([z.capacitance for z in zones])
        act = np.array([z.actuated for z in zones], dtype=float)
        for arr in (cap, amb, act):
            arr.setflags(write=False)
        object.__setattr__(self, "_cap", cap)
        object.__setattr__(self, "_amb", amb)
        object.__setattr__(self, "_act", act)
        object.__setattr__(self, "_k", k)

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    @property
    def n_rooms(self) -> int:
        return self._k

    @property
    def capacitance(self) -> np.ndarray:
        return self._cap

    @property
    def ambient_conductance(self) -> np.ndarray:
        return self._amb

    @property
    def actuated(self) -> np.ndarray:
        return self._act


def corridor_building(
    n_rooms: int,
    room_capacitance: float = 2.5,
    wall_capacitance: float = 5.0,
    room_wall_conductance: float = 0.5,
    wall_ambient_conductance: float = 0.3,
) -> BuildingNetwork:
    """Rooms in a row: one interior wall between neighbours, one exterior wall each.

    Zone order is rooms 0..k-1, then interior walls 0..k-2 (wall w sits between
    rooms w and w+1), then exterior walls 0..k-1 (one per room, touching ambient).
    """
    if n_rooms < 1:
        raise ThermalError("need at least one room")
    k = n_rooms
    zones = [Zone(ROOM, room_capacitance) for _ in range(k)]
    zones += [Zone(WALL, wall_capacitance) for _ in range(k - 1)]
    zones += [Zone(WALL, wall_capacitance, wall_ambient_conductance) for _ in range(k)]
    n = len(zones)
    a = np.zeros((n, n))
    for w in range(k - 1):
        iw = k + w
        for r in (w, w + 1):
            a[r, iw] = a[iw, r] = room_wall_conductance
    for r in range(k):
        ie = k + (k - 1) + r
        a[r, ie] = a[ie, r] = room_wall_conductance
    return BuildingNetwork(tuple(zones), a)


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Breakpoint profile, linear between points and constant outside them."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if t.size == 0 or t.size != v.size:
            raise ThermalError("profile needs matching, nonempty times and values")
        if np.any(np.diff(t) <= 0):
            raise ThermalError("profile breakpoints must be strictly increasing in time")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ThermalError("profile breakpoints must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls([0.0], [value])

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "PiecewiseLinear":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ThermalError("profile points must be [time, value] pairs")
        return cls(pts[:, 0], pts[:, 1])

    def __call__(self, tau: float) -> float:
        return float(np.interp(tau, self.times, self.values))


@dataclass(frozen=True)
class EnvironmentProfiles:
    ambient: PiecewiseLinear
    setpoints: tuple[PiecewiseLinear, ...]
    disturbances: tuple[PiecewiseLinear, ...] | None = field(default=None)

    def ambient_at(self, tau: float) -> float:
        return self.ambient(tau)

    def setpoints_at(self, tau: float) -> np.ndarray:
        return np.array([p(tau) for p in self.setpoints])

    def disturbances_at(self, tau: float, n_zones: int) -> np.ndarray:
        if self.disturbances is None:
            return np.zeros(n_zones)
        return np.array([p(tau) for p in self.disturbances])


def zone_derivative(net: BuildingNetwork, t, ambient: float, u, d=None) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    n, k = net.n_zones, net.n_rooms
    d = np.zeros(n) if d is None else np.asarray(d, dtype=float)
    if t.shape != (n,) or u.shape != (k,) or d.shape != (n,):
        raise ThermalError(
            f"dimension mismatch: t{t.shape}, u{u.shape}, d{d.shape} for {n} zones / {k} rooms"
        )
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(u)) and np.all(np.isfinite(d))
            and np.isfinite(ambient)):
        raise ThermalError("non-finite input to zone_derivative")
    a = net.conductance
    # sum_j a_ij (t_j - t_i) written as A t - rowsum(A) t
    heat = a @ t - a.sum(axis=1) * t
    heat += net.ambient_conductance * (ambient - t)
    drive = d.copy()
    drive[:k] += u
    heat += net.actuated * drive
    return heat / net.capacitance


def step_plant(net: BuildingNetwork, t, ambient: float, u, d=None, dt: float = 0.01) -> np.ndarray:
    if not dt > 0:
        raise ThermalError(f"dt must be > 0, got {dt}")
    t = np.asarray(t, dtype=float)
    return t + dt * zone_derivative(net, t, ambient, u, d)


def payoff(t_rooms, t_set) -> np.ndarray:
    """Signed tracking error t - t_set per room; negative means too cold."""
    t_rooms, t_set = np.asarray(t_rooms, dtype=float), np.asarray(t_set, dtype=float)
    if t_rooms.shape != t_set.shape:
        raise ThermalError("temperature and setpoint vectors differ in length")
    return t_rooms - t_set


def objective_value(t_rooms, t_set) -> float:
    e = payoff(t_rooms, t_set)
    return float(0.5 * np.dot(e, e))
