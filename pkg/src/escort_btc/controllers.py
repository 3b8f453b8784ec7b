"""Allocation dynamics: centralized escort (ED), distributed escort (DED), and
the distributed interior-point (DIP) baseline.

Sign convention: in the building loop the payoff is a tracking error
t - t_set, so DED moves mass *toward lower payoff* (a cold room pulls power
from warmer neighbours). ED as written moves mass toward higher payoff; on a
complete graph the two are related by ded = -Phi * ed. The closed-loop
dispatcher :func:`controller_velocity` therefore feeds ED the negated error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CommGraph
from .population import BoundedSimplex, DegenerateStateError, PopulationState, escort

KINDS = ("ded", "ed", "dip")


class BarrierDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "ded"
    gain: float = 1.0
    epsilon: float = 0.05
    slack_payoff: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"controller kind must be one of {KINDS}, got {self.kind!r}")
        if not self.gain > 0:
            raise ValueError("controller gain must be > 0")
        if self.kind == "dip" and not self.epsilon > 0:
            raise ValueError("DIP barrier weight epsilon must be > 0")


def _check_f(f, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValueError(f"payoff vector has shape {f.shape}, expected ({n},)")
    if not np.all(np.isfinite(f)):
        raise ValueError("payoff vector has non-finite entries")
    return f


def weighted_average_payoff(state: PopulationState, f) -> float:
    phi = escort(state)
    f = _check_f(f, phi.size)
    total = phi.sum()
    if not total > 0:
        raise DegenerateStateError("escort weights sum to zero")
    return float(phi @ f / total)


def ed_velocity(state: PopulationState, f) -> np.ndarray:
    phi = escort(state)
    f = _check_f(f, phi.size)
    return phi * (f - weighted_average_payoff(state, f))


def ded_velocity(state: PopulationState, f, g: CommGraph) -> np.ndarray:
    """Neighbour-sum form: phi_i * sum_{j in N_i} phi_j (f_j - f_i)."""
    phi = escort(state)
    f = _check_f(f, phi.size)
    if g.node_count != phi.size:
        raise ValueError(f"graph has {g.node_count} nodes, state has {phi.size} components")
    pulls = g.adjacency * phi[None, :] * (f[None, :] - f[:, None])
    return phi * pulls.sum(axis=1)


def link_weights(state: PopulationState, g: CommGraph) -> np.ndarray:
    phi = escort(state)
    if g.node_count != phi.size:
        raise ValueError(f"graph has {g.node_count} nodes, state has {phi.size} components")
    return g.adjacency * np.outer(phi, phi)


def max_link_weight(geometry: BoundedSimplex) -> float:
    """Largest phi_i * phi_j attainable inside the box, over pairs i != j.

    phi_i peaks at the middle of its interval, (w_i / 2)^2 / (sigma_lo * |sigma_up|).
    """
    half = (geometry.upper - geometry.lower) / 2.0
    peaks = np.sort(half**2 / (geometry.sigma_lo * -geometry.sigma_up))
    return float(peaks[-1] * peaks[-2])


def matched_ded_gain(geometry: BoundedSimplex, dip_gain: float) -> float:
    """DED gain whose strongest possible link equals a DIP link of ``dip_gain``.

    DED is a diffusion with state-dependent link weights phi_i phi_j; DIP is the
    same diffusion with unit weights. With this gain DED is never locally
    faster than DIP anywhere in the box.
    """
    return dip_gain / max_link_weight(geometry)


def ded_velocity_weighted(f, rho) -> np.ndarray:
    """Link-weight form: sum_j rho_ij (f_j - f_i)."""
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("link-weight matrix must be square")
    if not np.array_equal(rho, rho.T):
        raise ValueError("link-weight matrix must be symmetric")
    if np.any(rho < 0) or np.any(np.diag(rho) != 0):
        raise ValueError("link weights must be nonnegative with zero diagonal")
    f = _check_f(f, rho.shape[0])
    return np.sum(rho * (f[None, :] - f[:, None]), axis=1)


def barrier_gradient(v, geometry: BoundedSimplex, epsilon: float) -> np.ndarray:
    """d/dv_i of -eps [ln(v_i - lo_i) + ln(up_i - v_i)]."""
    v = np.asarray(v, dtype=float)
    lo, up = geometry.lower, geometry.upper
    if np.any(v <= lo) or np.any(v >= up):
        bad = int(np.flatnonzero((v <= lo) | (v >= up))[0])
        raise BarrierDomainError(
            f"component {bad + 1} = {float(v[bad])!r} not strictly inside "
            f"({float(lo[bad])!r}, {float(up[bad])!r})"
        )
    return -epsilon * (1.0 / (v - lo) - 1.0 / (up - v))


def dip_payoff(f, v, geometry: BoundedSimplex, epsilon: float) -> np.ndarray:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    v = np.asarray(v, dtype=float)
    f = _check_f(f, geometry.n)
    if v.shape != (geometry.n,):
        raise ValueError(f"allocation has shape {v.shape}, expected ({geometry.n},)")
    return f + barrier_gradient(v, geometry, epsilon)


def dip_velocity(v, r, g: CommGraph) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.shape(v) != r.shape or r.shape != (g.node_count,):
        raise ValueError("allocation, modified payoff and graph sizes disagree")
    return np.sum(g.adjacency * (r[None, :] - r[:, None]), axis=1)


def controller_velocity(
    spec: ControllerSpec, state: PopulationState, f, g: CommGraph
) -> np.ndarray:
    """Closed-loop allocation rate for the selected controller, gain included.

    ``f`` is the full payoff vector (rooms then slack) in error units.
    """
    if spec.kind == "ded":
        vel = ded_velocity(state, f, g)
    elif spec.kind == "ed":
        vel = ed_velocity(state, -np.asarray(f, dtype=float))
    else:
        r = dip_payoff(f, state.x, state.geometry, spec.epsilon)
        vel = dip_velocity(state.x, r, g)
    return spec.gain * vel
