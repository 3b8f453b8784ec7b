"""Box-constrained simplex geometry and the escort weights built on it.

The feasible set {x : sum(x) = total, lower <= x <= upper} is the intersection
of a "lower" simplex (vertices lower + sigma_lo * e_j) and an "upper" simplex
(vertices upper + sigma_up * e_j). Barycentric coordinates in those two
simplices give eta and xi; their product is the escort weight phi, which
vanishes exactly on the box faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# relative (to total) drift tolerated and clamped back onto the box
CLAMP_TOL = 1e-9


class InfeasibleGeometryError(ValueError):
    pass


class DegenerateStateError(ValueError):
    pass


class BoundsViolationError(ValueError):
    def __init__(self, msg: str, component: int | None = None):
        super().__init__(msg)
        self.component = component


@dataclass(frozen=True, eq=False)
class BoundedSimplex:
    lower: np.ndarray
    upper: np.ndarray
    total: float

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        up = np.array(self.upper, dtype=float).ravel()
        total = float(self.total)
        if lo.shape != up.shape:
            raise InfeasibleGeometryError("lower and upper bounds differ in length")
        if lo.size < 2:
            raise InfeasibleGeometryError(f"need at least 2 strategies, got {lo.size}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up)) and np.isfinite(total)):
            raise InfeasibleGeometryError("bounds and total must be finite")
        if np.any(lo < 0):
            raise InfeasibleGeometryError("lower bounds must be >= 0")
        bad = np.flatnonzero(lo >= up)
        if bad.size:
            raise InfeasibleGeometryError(
                f"lower < upper fails for component(s) {[int(i) + 1 for i in bad]}"
            )
        if not lo.sum() < total:
            raise InfeasibleGeometryError(
                f"sigma_lo = total - sum(lower) = {total - lo.sum():g} is not > 0"
            )
        if not total < up.sum():
            raise InfeasibleGeometryError(
                f"sigma_up = total - sum(upper) = {total - up.sum():g} is not < 0"
            )
        lo.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "total", total)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def sigma_lo(self) -> float:
        return self.total - float(self.lower.sum())

    @property
    def sigma_up(self) -> float:
        return self.total - float(self.upper.sum())


def escort_params(geometry: BoundedSimplex) -> tuple[float, float]:
    return geometry.sigma_lo, geometry.sigma_up


@dataclass(frozen=True, eq=False)
class PopulationState:
    """A point of the feasible set.

    Use :meth:`checked` to build one from a raw vector: it clamps drift of at
    most ``CLAMP_TOL * total`` back onto the box and records which components
    were clamped, and rejects anything larger.
    """

    x: np.ndarray
    geometry: BoundedSimplex
    clamped: tuple[int, ...] = field(default=())

    @classmethod
    def checked(cls, x, geometry: BoundedSimplex, tol: float = CLAMP_TOL) -> "PopulationState":
        x = np.array(x, dtype=float).ravel()
        if x.shape != (geometry.n,):
            raise ValueError(f"state has {x.size} components, geometry has {geometry.n}")
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise BoundsViolationError(f"non-finite state component {bad + 1}", bad)
        slack = tol * geometry.total
        below = x < geometry.lower
        above = x > geometry.upper
        out = below | above
        if out.any():
            gap = np.maximum(geometry.lower - x, x - geometry.upper)
            worst = int(np.argmax(np.where(out, gap, -np.inf)))
            if gap[worst] > slack:
                raise BoundsViolationError(
                    f"component {worst + 1} = {float(x[worst])!r} outside "
                    f"[{float(geometry.lower[worst])!r}, {float(geometry.upper[worst])!r}]",
                    worst,
                )
            x = np.clip(x, geometry.lower, geometry.upper)
        drift = abs(x.sum() - geometry.total)
        if drift > slack:
            raise BoundsViolationError(
                f"sum(x) = {float(x.sum())!r} differs from total {geometry.total!r} by {drift:.3g}"
            )
        return cls(x, geometry, tuple(int(i) for i in np.flatnonzero(out)))

    @property
    def is_interior(self) -> bool:
        g = self.geometry
        return bool(np.all(self.x > g.lower) and np.all(self.x < g.upper))


def eta(state: PopulationState) -> np.ndarray:
    g = state.geometry
    return (state.x - g.lower) / g.sigma_lo


def xi(state: PopulationState) -> np.ndarray:
    g = state.geometry
    return (state.x - g.upper) / g.sigma_up


def escort(state: PopulationState) -> np.ndarray:
    return eta(state) * xi(state)


def escort_distribution(state: PopulationState) -> np.ndarray:
    phi = escort(state)
    total = phi.sum()
    if not total > 0:
        raise DegenerateStateError("every component sits on a bound; escort weights are all zero")
    return phi / total


def vertex_matrices(geometry: BoundedSimplex) -> tuple[np.ndarray, np.ndarray]:
    """Columns are the vertices of the lower and upper simplices."""
    n = geometry.n
    s_lo = np.outer(geometry.lower, np.ones(n)) + geometry.sigma_lo * np.eye(n)
    s_up = np.outer(geometry.upper, np.ones(n)) + geometry.sigma_up * np.eye(n)
    return s_lo, s_up


def simplex_coordinates(state: PopulationState) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric coordinates by solving S_lo eta = x and S_up xi = x."""
    s_lo, s_up = vertex_matrices(state.geometry)
    try:
        return np.linalg.solve(s_lo, state.x), np.linalg.solve(s_up, state.x)
    except np.linalg.LinAlgError as exc:  # unreachable for a valid geometry
        raise RuntimeError("vertex matrix is singular") from exc
