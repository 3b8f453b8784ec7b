"""JSON scenario documents: schema, pre-run checks and construction.

Room, zone and graph-node ids are 1-based in documents. The slack strategy is
always appended after the rooms; its bounds default to [0, total].

Building either uses the corridor layout::

    "building": {"layout": "corridor", "rooms": 50, "room_capacitance": 2.5, ...}

or lists zones and 1-based conductance links explicitly::

    "building": {"zones": [{"kind": "room", "capacitance": 1.0, "ambient_conductance": 0.5}],
                 "conductances": [[1, 2, 0.2]]}

Profiles are breakpoint lists ``[[hour, value], ...]``. Setpoints are either one
list per room or groups ``{"rooms": [first, last], "points": [...]}`` covering
every room exactly once. Disturbances use the same grouping keyed by ``zones``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .controllers import KINDS, ControllerSpec
from .graph import TOPOLOGIES, CommGraph, GraphError, build_graph, connected_components, with_slack
from .population import BoundedSimplex, InfeasibleGeometryError
from .simulation import Scenario, ScenarioError
from .thermal import (
    ROOM,
    WALL,
    BuildingNetwork,
    EnvironmentProfiles,
    PiecewiseLinear,
    ThermalError,
    Zone,
    corridor_building,
)

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_points = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
}
_id_range = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}
_scalar_or_list = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]}


def _group(key: str) -> dict:
    return {
        "type": "object",
        "required": [key, "points"],
        "additionalProperties": False,
        "properties": {key: _id_range, "points": _points},
    }


SCHEMA = {
    "type": "object",
    "required": ["schema_version", "building", "profiles", "bounds", "graph", "controller", "run"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "building": {
            "type": "object",
            "oneOf": [
                {"required": ["layout", "rooms"]},
                {"required": ["zones", "conductances"]},
            ],
            "additionalProperties": False,
            "properties": {
                "layout": {"const": "corridor"},
                "rooms": {"type": "integer", "minimum": 1},
                "room_capacitance": _pos,
                "wall_capacitance": _pos,
                "room_wall_conductance": _nonneg,
                "wall_ambient_conductance": _nonneg,
                "zones": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["kind", "capacitance"],
                        "additionalProperties": False,
                        "properties": {
                            "kind": {"enum": [ROOM, WALL]},
                            "capacitance": _pos,
                            "ambient_conductance": _nonneg,
                        },
                    },
                },
                "conductances": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "minItems": 3,
                        "maxItems": 3,
                        "prefixItems": [{"type": "integer", "minimum": 1}, {"type": "integer", "minimum": 1}, _nonneg],
                    },
                },
            },
        },
        "profiles": {
            "type": "object",
            "required": ["ambient", "setpoints"],
            "additionalProperties": False,
            "properties": {
                "ambient": _points,
                "setpoints": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"oneOf": [_points, _group("rooms")]},
                },
                "disturbances": {"type": "array", "items": _group("zones")},
            },
        },
        "bounds": {
            "type": "object",
            "required": ["lower", "upper", "total"],
            "additionalProperties": False,
            "properties": {
                "lower": _scalar_or_list,
                "upper": _scalar_or_list,
                "total": _num,
                "slack": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            },
        },
        "graph": {
            "type": "object",
            "required": ["topology"],
            "additionalProperties": False,
            "properties": {
                "topology": {"enum": list(TOPOLOGIES)},
                "edges": {"type": "array", "items": _id_range},
                "slack_attach": {
                    "oneOf": [
                        {"type": "integer", "minimum": 1},
                        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                        {"const": "all"},
                    ]
                },
            },
        },
        "controller": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(KINDS)},
                "gain": _pos,
                "gains": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {k: _pos for k in KINDS},
                },
                "epsilon": _pos,
                "slack_payoff": _num,
            },
        },
        "run": {
            "type": "object",
            "required": ["horizon", "dt"],
            "additionalProperties": False,
            "properties": {
                "horizon": _nonneg,
                "dt": _pos,
                "initial_temperature": _scalar_or_list,
                "initial_allocation": _scalar_or_list,
                "seed": {"type": "integer"},
                "substeps": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class SchemaError(ValueError):
    """Document does not match the schema; ``field`` is the dotted location."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}" if field else msg)
        self.field = field


def _dotted(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    path = list(err.absolute_path)
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            return SchemaError(_dotted(path + [missing[0]]), "required field is missing")
    return SchemaError(_dotted(path), err.message)


def check_schema(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        raise _schema_error(errors[0])


def read_document(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"not valid JSON: {exc}") from exc
    check_schema(doc)
    return doc


def apply_overrides(doc: dict, *, dt=None, horizon=None, controller=None, seed=None) -> dict:
    """Copy of ``doc`` with command-line overrides applied (flags win over the file)."""
    doc = json.loads(json.dumps(doc))
    if dt is not None:
        doc["run"]["dt"] = dt
    if horizon is not None:
        doc["run"]["horizon"] = horizon
    if controller is not None:
        doc["controller"]["kind"] = controller
    if seed is not None:
        doc["run"]["seed"] = seed
    check_schema(doc)
    return doc


# ---------------------------------------------------------------------------
# raw arrays, built without the invariant checks so `validate` can report them


@dataclass
class RawScenario:
    name: str
    building: BuildingNetwork
    environment: EnvironmentProfiles
    lower: np.ndarray
    upper: np.ndarray
    total: float
    adjacency: np.ndarray
    controller: ControllerSpec
    horizon: float
    dt: float
    t0: np.ndarray
    x0: np.ndarray
    seed: int
    substeps: int
    notes: list[str] = field(default_factory=list)


def _expand(value, n: int, where: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise SchemaError(where, f"expected a scalar or {n} entries, got {arr.size}")
    return arr


def _building(doc: dict) -> BuildingNetwork:
    b = doc["building"]
    try:
        if "layout" in b:
            kw = {k: b[k] for k in ("room_capacitance", "wall_capacitance",
                                    "room_wall_conductance", "wall_ambient_conductance") if k in b}
            return corridor_building(b["rooms"], **kw)
        zones = tuple(Zone(z["kind"], z["capacitance"], z.get("ambient_conductance", 0.0)) for z in b["zones"])
        n = len(zones)
        a = np.zeros((n, n))
        for idx, (i, j, alpha) in enumerate(b["conductances"]):
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise SchemaError(f"building.conductances[{idx}]", f"bad zone pair ({i}, {j}) for {n} zones")
            a[i - 1, j - 1] = a[j - 1, i - 1] = alpha
        return BuildingNetwork(zones, a)
    except ThermalError as exc:
        raise SchemaError("building", str(exc)) from exc


def _grouped(items, count: int, key: str, where: str) -> list:
    out = [None] * count
    for idx, item in enumerate(items):
        if isinstance(item, dict):
            first, last = item[key]
            ids = range(first, last + 1)
            points = item["points"]
        else:
            ids, points = [idx + 1], item
        for r in ids:
            if not 1 <= r <= count:
                raise SchemaError(f"{where}[{idx}]", f"id {r} outside 1..{count}")
            if out[r - 1] is not None:
                raise SchemaError(f"{where}[{idx}]", f"id {r} assigned twice")
            try:
                out[r - 1] = PiecewiseLinear.from_points(points)
            except ValueError as exc:
                raise SchemaError(f"{where}[{idx}].points", str(exc)) from exc
    return out


def _profiles(doc: dict, net: BuildingNetwork) -> EnvironmentProfiles:
    p = doc["profiles"]
    try:
        ambient = PiecewiseLinear.from_points(p["ambient"])
    except ValueError as exc:
        raise SchemaError("profiles.ambient", str(exc)) from exc
    setpoints = _grouped(p["setpoints"], net.n_rooms, "rooms", "profiles.setpoints")
    missing = [i + 1 for i, s in enumerate(setpoints) if s is None]
    if missing:
        raise SchemaError("profiles.setpoints", f"no setpoint for room(s) {missing}")
    dist = None
    if p.get("disturbances"):
        dist = _grouped(p["disturbances"], net.n_zones, "zones", "profiles.disturbances")
        zero = PiecewiseLinear.constant(0.0)
        dist = tuple(zero if d is None else d for d in dist)
    return EnvironmentProfiles(ambient, tuple(setpoints), dist)


def _adjacency(doc: dict, k: int) -> np.ndarray:
    """Room graph plus slack node, as a raw 0/1 matrix (connectivity unchecked)."""
    g = doc["graph"]
    n = k + 1
    a = np.zeros((n, n), dtype=np.int8)
    topo = g["topology"]
    if topo == "custom":
        if "edges" not in g:
            raise SchemaError("graph.edges", "custom topology needs an edge list")
        pairs = [(i - 1, j - 1) for i, j in g["edges"]]
        for idx, (i, j) in enumerate(pairs):
            if not (0 <= i < k and 0 <= j < k) or i == j:
                raise SchemaError(f"graph.edges[{idx}]", f"bad room pair ({i + 1}, {j + 1}) for {k} rooms")
    else:
        if k < 2:
            pairs = []
        else:
            pairs = build_graph(topo, k).edges
    for i, j in pairs:
        a[i, j] = a[j, i] = 1
    attach = g.get("slack_attach", 1)
    targets = list(range(k)) if attach == "all" else [t - 1 for t in np.atleast_1d(attach).tolist()]
    for t in targets:
        if not 0 <= t < k:
            raise SchemaError("graph.slack_attach", f"room {t + 1} outside 1..{k}")
        a[k, t] = a[t, k] = 1
    return a


def _controller(doc: dict) -> ControllerSpec:
    c = doc["controller"]
    kind = c["kind"]
    gain = c.get("gains", {}).get(kind, c.get("gain", 1.0))
    return ControllerSpec(kind=kind, gain=gain, epsilon=c.get("epsilon", 0.05),
                          slack_payoff=c.get("slack_payoff", 0.0))


def raw_scenario(doc: dict) -> RawScenario:
    net = _building(doc)
    k = net.n_rooms
    env = _profiles(doc, net)
    bnd = doc["bounds"]
    total = float(bnd["total"])
    slack_lo, slack_hi = bnd.get("slack", [0.0, total])
    lower = np.r_[_expand(bnd["lower"], k, "bounds.lower"), slack_lo]
    upper = np.r_[_expand(bnd["upper"], k, "bounds.upper"), slack_hi]
    r = doc["run"]
    t0 = _expand(r.get("initial_temperature", 20.0), net.n_zones, "run.initial_temperature")
    if "initial_allocation" in r:
        xa = np.atleast_1d(np.asarray(r["initial_allocation"], dtype=float))
        if xa.size == k + 1:
            x0 = xa
        else:
            rooms = _expand(xa, k, "run.initial_allocation")
            x0 = np.r_[rooms, total - rooms.sum()]
    else:
        x0 = np.full(k + 1, total / (k + 1))
    return RawScenario(
        name=doc.get("name", "scenario"),
        building=net,
        environment=env,
        lower=lower,
        upper=upper,
        total=total,
        adjacency=_adjacency(doc, k),
        controller=_controller(doc),
        horizon=float(r["horizon"]),
        dt=float(r["dt"]),
        t0=t0,
        x0=x0,
        seed=int(r.get("seed", 0)),
        substeps=int(r.get("substeps", 1)),
    )


# ---------------------------------------------------------------------------
# pre-run checks


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


def stability_limit(net: BuildingNetwork) -> float:
    """Largest dt for which every zone's explicit Euler update stays monotone."""
    leak = net.conductance.sum(axis=1) + net.ambient_conductance
    rate = leak / net.capacitance
    return float("inf") if rate.max() == 0 else float(1.0 / rate.max())


def run_checks(raw: RawScenario) -> list[Check]:
    checks = []
    comps = connected_components(raw.adjacency)
    if len(comps) == 1:
        checks.append(Check("C1 connectivity", True, f"{raw.adjacency.shape[0]} nodes, connected"))
    else:
        stray = sorted(i + 1 for c in comps[1:] for i in c)
        checks.append(Check("C1 connectivity", False, f"node(s) {stray} unreachable from node {comps[0][0] + 1}"))

    s_lo = raw.total - raw.lower.sum()
    s_up = raw.total - raw.upper.sum()
    checks.append(Check("sigma_lo > 0", bool(s_lo > 0), f"sigma_lo = {s_lo:g}"))
    checks.append(Check("sigma_up < 0", bool(s_up < 0), f"sigma_up = {s_up:g}"))
    bad_box = [i + 1 for i in np.flatnonzero(raw.lower >= raw.upper)]
    checks.append(Check("lower < upper", not bad_box, f"violated for strategy {bad_box}" if bad_box else "ok"))

    err = abs(raw.x0.sum() - raw.total)
    checks.append(Check("C3 sum(x0) = total", bool(err <= 1e-9 * abs(raw.total)),
                        f"sum(x0) = {raw.x0.sum():g}, total = {raw.total:g}"))
    outside = [i + 1 for i in np.flatnonzero((raw.x0 <= raw.lower) | (raw.x0 >= raw.upper))]
    checks.append(Check("C3 x0 interior", not outside,
                        f"strategy {outside} on or outside its bounds" if outside else "ok"))

    limit = stability_limit(raw.building)
    checks.append(Check("dt stability", bool(raw.dt <= limit),
                        f"dt = {raw.dt:g} h, plant Euler limit {limit:.4g} h"))
    return checks


def build(raw: RawScenario) -> Scenario:
    """Construct the checked :class:`Scenario`; raises on any invariant failure."""
    try:
        geometry = BoundedSimplex(raw.lower, raw.upper, raw.total)
        graph = CommGraph(raw.adjacency)
    except (InfeasibleGeometryError, GraphError) as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(
        building=raw.building, environment=raw.environment, geometry=geometry, graph=graph,
        controller=raw.controller, horizon=raw.horizon, dt=raw.dt, t0=raw.t0, x0=raw.x0,
        substeps=raw.substeps, seed=raw.seed, name=raw.name,
    )


def load(path, **overrides) -> Scenario:
    doc = apply_overrides(read_document(path), **overrides)
    return build(raw_scenario(doc))


def controller_for(doc: dict, kind: str) -> ControllerSpec:
    """Controller section resolved for ``kind`` (per-kind gain if given)."""
    d = json.loads(json.dumps(doc))
    d["controller"]["kind"] = kind
    return _controller(d)
