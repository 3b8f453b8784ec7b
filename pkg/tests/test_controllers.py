import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from escort_btc.controllers import (
    BarrierDomainError,
    ControllerSpec,
    barrier_gradient,
    controller_velocity,
    ded_velocity,
    ded_velocity_weighted,
    dip_payoff,
    dip_velocity,
    ed_velocity,
    link_weights,
    matched_ded_gain,
    max_link_weight,
    weighted_average_payoff,
)
from escort_btc.graph import build_graph
from escort_btc.population import BoundedSimplex, PopulationState, escort

from _gen import complete_graph, connected_graph, geometry_and_state, payoffs

UNIT3 = BoundedSimplex(np.zeros(3), np.ones(3), 1.0)
X3 = PopulationState.checked([0.5, 0.3, 0.2], UNIT3)
F3 = np.array([1.0, 0.0, -1.0])


def ded_loop(phi, f, adjacency):
    """Neighbour sums written out one term at a time."""
    n = len(phi)
    out = []
    for i in range(n):
        s = 0.0
        for j in range(n):
            if adjacency[i][j]:
                s += phi[j] * (f[j] - f[i])
        out.append(phi[i] * s)
    return out


def test_weighted_average_examples():
    assert weighted_average_payoff(X3, [2.5, 2.5, 2.5]) == pytest.approx(2.5, abs=1e-15)
    sym = PopulationState.checked(np.full(3, 1 / 3), UNIT3)
    assert weighted_average_payoff(sym, F3) == pytest.approx(0.0, abs=1e-16)
    assert weighted_average_payoff(X3, F3) == pytest.approx((0.125 - 0.08) / 0.31, rel=1e-14)


def test_ed_examples():
    np.testing.assert_array_equal(ed_velocity(X3, [3.0, 3.0, 3.0]), 0.0)
    f_phi = 0.045 / 0.31
    oracle = [0.125 * (1 - f_phi), 0.105 * (0 - f_phi), 0.08 * (-1 - f_phi)]
    v = ed_velocity(X3, F3)
    np.testing.assert_allclose(v, oracle, rtol=1e-13)
    np.testing.assert_allclose(v, [0.10685, -0.01524, -0.09161], atol=1e-5)
    assert abs(v.sum()) < 1e-16


def test_ed_pinned_component():
    x = PopulationState.checked([0.0, 0.6, 0.4], UNIT3)
    assert ed_velocity(x, [10.0, -3.0, 2.0])[0] == 0.0


def test_ded_two_node_example():
    geo = BoundedSimplex([0.0, 0.0], [1.0, 1.0], 1.0)
    x = PopulationState.checked([0.6, 0.4], geo)
    np.testing.assert_allclose(escort(x), [0.24, 0.24], rtol=1e-15)
    v = ded_velocity(x, [2.0, 0.0], build_graph("path", 2))
    np.testing.assert_allclose(v, [-0.1152, 0.1152], rtol=1e-14)
    assert link_weights(x, build_graph("path", 2))[0, 1] == pytest.approx(0.0576, rel=1e-14)


def test_ded_three_node_path_example():
    path = build_graph("path", 3)
    phi = [0.125, 0.105, 0.08]
    oracle = ded_loop(phi, F3, path.adjacency)
    np.testing.assert_allclose(oracle, [-0.013125, 0.004725, 0.0084], atol=1e-17)
    v = ded_velocity(X3, F3, path)
    np.testing.assert_allclose(v, [-0.013125, 0.004725, 0.0084], atol=1e-15, rtol=0)
    assert abs(v.sum()) <= 1e-17
    w = ded_velocity_weighted(F3, link_weights(X3, path))
    np.testing.assert_allclose(w, [-0.013125, 0.004725, 0.0084], atol=1e-15, rtol=0)


def test_ded_equal_payoffs_zero():
    g = build_graph("ring", 3)
    np.testing.assert_array_equal(ded_velocity(X3, [4.0, 4.0, 4.0], g), 0.0)
    np.testing.assert_array_equal(ded_velocity_weighted([4.0, 4.0, 4.0], link_weights(X3, g)), 0.0)
    np.testing.assert_array_equal(ded_velocity_weighted(F3, np.zeros((3, 3))), 0.0)


def test_link_weights_structure():
    x = PopulationState.checked([0.0, 0.6, 0.4], UNIT3)
    path = build_graph("path", 3)
    rho = link_weights(x, path)
    np.testing.assert_array_equal(rho[0], 0.0)
    assert link_weights(X3, path)[0, 2] == 0.0
    assert np.array_equal(rho, rho.T)


def test_weighted_form_rejects_bad_matrices():
    with pytest.raises(ValueError, match="symmetric"):
        ded_velocity_weighted([0, 1], [[0, 1], [0.5, 0]])
    with pytest.raises(ValueError):
        ded_velocity_weighted([0, 1], [[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        ded_velocity_weighted([0, 1], [[0, -1], [-1, 0]])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        ded_velocity(X3, [1.0, 2.0], build_graph("path", 3))
    with pytest.raises(ValueError):
        ded_velocity(X3, F3, build_graph("path", 4))
    with pytest.raises(ValueError):
        dip_velocity([1.0, 2.0], [1.0, 2.0, 3.0], build_graph("path", 3))


def test_dip_payoff_examples():
    geo = BoundedSimplex([0.0, 0.0], [2.0, 2.0], 1.0)
    mid = dip_payoff([0.3, -0.2], [1.0, 1.0], BoundedSimplex([0.0, 0.0], [2.0, 2.0], 2.0), 0.1)
    np.testing.assert_allclose(mid, [0.3, -0.2], atol=1e-16)
    b = barrier_gradient([0.5, 0.5], geo, 0.1)
    np.testing.assert_allclose(b, -0.1 * (1 / 0.5 - 1 / 1.5), rtol=1e-15)
    np.testing.assert_allclose(b, -0.1333333333333, rtol=1e-12)
    np.testing.assert_array_equal(dip_payoff([0.3, -0.2], [0.5, 0.5], geo, 0.0), [0.3, -0.2])


def test_dip_payoff_domain():
    geo = BoundedSimplex([0.0, 0.0], [2.0, 2.0], 1.0)
    with pytest.raises(BarrierDomainError, match="component 1"):
        dip_payoff([0.0, 0.0], [0.0, 1.0], geo, 0.05)
    with pytest.raises(BarrierDomainError, match="component 2"):
        dip_payoff([0.0, 0.0], [0.5, 2.0], geo, 0.05)


def test_dip_velocity_examples():
    np.testing.assert_array_equal(dip_velocity([0, 0], [2.0, 0.0], build_graph("path", 2)), [-2.0, 2.0])
    np.testing.assert_array_equal(dip_velocity([0, 0, 0], F3, build_graph("path", 3)), [-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(dip_velocity([0, 0, 0], [5.0] * 3, build_graph("ring", 3)), 0.0)


def test_barrier_tends_to_infinity():
    geo = BoundedSimplex([0.0, 0.0], [2.0, 2.0], 1.0)
    near_lo = dip_payoff([0.0, 0.0], [1e-9, 1.0], geo, 0.05)[0]
    near_up = dip_payoff([0.0, 0.0], [1.0, 2.0 - 1e-9], geo, 0.05)[1]
    assert near_lo < -1e7 and near_up > 1e7


def test_controller_spec_validation():
    with pytest.raises(ValueError):
        ControllerSpec("pid")
    with pytest.raises(ValueError):
        ControllerSpec("ded", gain=0.0)
    with pytest.raises(ValueError):
        ControllerSpec("dip", epsilon=0.0)


def test_closed_loop_dispatch_signs():
    # room 1 cold, room 2 warm: every controller moves power toward room 1
    geo = BoundedSimplex(np.zeros(3), np.full(3, 2.0), 3.0)
    x = PopulationState.checked([1.0, 1.0, 1.0], geo)
    f = np.array([-2.0, 1.0, 0.0])
    g = build_graph("complete", 3)
    for kind in ("ded", "ed", "dip"):
        v = controller_velocity(ControllerSpec(kind, gain=2.0), x, f, g)
        assert v[0] > 0 and v[1] < 0, kind
    # on the complete graph the DED rate is Phi times the ED rate fed the error
    ded = controller_velocity(ControllerSpec("ded"), x, f, g)
    ed = controller_velocity(ControllerSpec("ed"), x, f, g)
    np.testing.assert_allclose(ded, escort(x).sum() * ed, atol=1e-15)


def test_matched_gain():
    geo = BoundedSimplex(np.zeros(51), np.r_[np.full(50, 3.25), 130.0], 130.0)
    assert max_link_weight(geo) == pytest.approx(0.2 * 1.25e-4, rel=1e-12)
    assert matched_ded_gain(geo, 0.3) == pytest.approx(12000.0, rel=1e-12)
    # no reachable state has a link heavier than the bound
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = rng.dirichlet(np.ones(51))
        x = geo.lower + w * 0.999 * (geo.upper - geo.lower)
        x[-1] = 130.0 - x[:-1].sum()
        if not 0 < x[-1] < 130.0:
            continue
        rho = link_weights(PopulationState.checked(x, geo), complete_graph(51))
        assert rho.max() <= max_link_weight(geo)


# ---------------------------------------------------------------------------
# properties over random states, payoffs and connected graphs


cases = st.tuples(st.integers(0, 2**32 - 1), st.integers(2, 20))


@settings(max_examples=300, deadline=None)
@given(cases)
def test_conservation_all_forms(case):
    seed, n = case
    rng = np.random.default_rng(seed)
    geo, x = geometry_and_state(rng, n)
    g = connected_graph(rng, n)
    f = payoffs(rng, n)
    tol = 1e-12 * geo.total
    assert abs(ed_velocity(x, f).sum()) <= tol
    assert abs(ded_velocity(x, f, g).sum()) <= tol
    assert abs(ded_velocity_weighted(f, link_weights(x, g)).sum()) <= tol
    r = dip_payoff(f, x.x, geo, 0.05)
    assert abs(dip_velocity(x.x, r, g).sum()) <= 1e-12 * max(1.0, np.abs(r).sum())


@settings(max_examples=300, deadline=None)
@given(cases)
def test_matches_term_by_term_oracle(case):
    seed, n = case
    rng = np.random.default_rng(seed)
    geo, x = geometry_and_state(rng, n)
    g = connected_graph(rng, n)
    f = payoffs(rng, n)
    oracle = ded_loop(list(escort(x)), list(f), g.adjacency.tolist())
    np.testing.assert_allclose(ded_velocity(x, f, g), oracle, rtol=1e-12, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(cases)
def test_form_equivalence(case):
    seed, n = case
    rng = np.random.default_rng(seed)
    geo, x = geometry_and_state(rng, n)
    g = connected_graph(rng, n)
    f = payoffs(rng, n)
    a = ded_velocity(x, f, g)
    b = ded_velocity_weighted(f, link_weights(x, g))
    np.testing.assert_allclose(a, b, atol=1e-14, rtol=0)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 10))
def test_complete_graph_bridge(seed, n):
    rng = np.random.default_rng(seed)
    geo, x = geometry_and_state(rng, n)
    f = payoffs(rng, n)
    phi_total = escort(x).sum()
    np.testing.assert_allclose(ded_velocity(x, f, complete_graph(n)), -phi_total * ed_velocity(x, f),
                               atol=1e-12, rtol=0)


@settings(max_examples=200, deadline=None)
@given(cases, st.floats(-100, 100))
def test_payoff_shift_invariance(case, c):
    seed, n = case
    rng = np.random.default_rng(seed)
    geo, x = geometry_and_state(rng, n)
    g = connected_graph(rng, n)
    f = payoffs(rng, n)
    np.testing.assert_allclose(ded_velocity(x, f + c, g), ded_velocity(x, f, g), atol=1e-12)
    np.testing.assert_allclose(ed_velocity(x, f + c), ed_velocity(x, f), atol=1e-12)
    r = dip_payoff(f, x.x, geo, 0.05)
    np.testing.assert_allclose(dip_velocity(x.x, r + c, g), dip_velocity(x.x, r, g), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(cases, st.integers(0, 1))
def test_boundary_pinning(case, which):
    seed, n = case
    rng = np.random.default_rng(seed)
    geo, s = geometry_and_state(rng, n)
    x = s.x.copy()
    target = geo.lower[0] if which == 0 else geo.upper[0]
    delta = x[0] - target
    room = (geo.upper[1:] - x[1:]) if delta > 0 else (x[1:] - geo.lower[1:])
    if room.sum() <= abs(delta):
        return
    x[0] = target
    x[1:] += np.sign(delta) * room * abs(delta) / room.sum()
    pinned = PopulationState(x, geo)
    g = connected_graph(rng, n)
    f = payoffs(rng, n)
    assert ded_velocity(pinned, f, g)[0] == 0.0
    assert ed_velocity(pinned, f)[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.integers(0, 1))
def test_dip_barrier_repels(seed, n, which):
    """A component within delta of a bound is pushed back inside."""
    rng = np.random.default_rng(seed)
    lo = rng.uniform(0, 1, n)
    up = lo + rng.uniform(1, 2, n)
    delta = 1e-6
    v = lo + rng.uniform(0.3, 0.7, n) * (up - lo)
    v[0] = lo[0] + delta if which == 0 else up[0] - delta
    geo = BoundedSimplex(lo, up, float(v.sum()))
    f = rng.uniform(-3, 3, n)
    g = connected_graph(rng, n)
    rate = dip_velocity(v, dip_payoff(f, v, geo, 0.05), g)
    assert rate[0] > 0 if which == 0 else rate[0] < 0
