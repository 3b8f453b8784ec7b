from pathlib import Path

import numpy as np
import pytest

from escort_btc import metrics
from escort_btc.population import BoundedSimplex
from escort_btc.scenario import load
from escort_btc.simulation import SimulationAborted, Trace, run

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def hand_trace(f_rooms, x=None, dt=1.0, total=2.0):
    """Trace with given room payoffs and a constant two-strategy split."""
    f_rooms = np.asarray(f_rooms, dtype=float)
    if f_rooms.ndim == 1:
        f_rooms = f_rooms[:, None]
    T, k = f_rooms.shape
    if x is None:
        x = np.tile(np.r_[np.full(k, total / (k + 1)), total / (k + 1)], (T, 1))
    f = np.c_[f_rooms, np.zeros(T)]
    return Trace(
        time=np.arange(T) * dt,
        temperatures=20.0 + f_rooms,
        setpoints=np.full((T, k), 20.0),
        allocations=np.asarray(x, dtype=float),
        payoffs=f,
        escort=np.zeros((T, k + 1)),
        velocity=np.zeros((T, k + 1)),
        residual=f.max(axis=1) - f.min(axis=1),
        objective=0.5 * (f_rooms**2).sum(axis=1),
        dt=dt,
        total=total,
    )


def test_rmse_examples():
    assert metrics.tracking_rmse(hand_trace(np.zeros(10)))[1] == 0.0
    assert metrics.tracking_rmse(hand_trace(np.full(10, 2.0)))[1] == 2.0
    per_room, agg = metrics.tracking_rmse(hand_trace(np.tile([1.0, -1.0], 5)))
    assert agg == 1.0 and per_room.tolist() == [1.0]


def test_overshoot_examples():
    assert metrics.overshoot(hand_trace(-np.linspace(3, 0.01, 50)))[0] == 0.0
    bump = np.r_[np.linspace(-3, 2, 20), np.linspace(2, 0, 20)[1:]]
    assert metrics.overshoot(hand_trace(bump))[0] == 2.0
    # warm before the first upward crossing does not count
    assert metrics.overshoot(hand_trace([0.0, 5.0, 0.0, 1.0]))[0] == 5.0


def test_transience_examples():
    crossings, settle = metrics.transience(hand_trace(-np.geomspace(3, 1e-3, 40)), band=0.5)
    assert crossings == 0 and settle is not None
    crossings, settle = metrics.transience(hand_trace(np.tile([2.0, -2.0], 20)), band=0.5)
    assert settle is None and crossings == 39
    ring = np.r_[-3, -1, 1.5, 0.8, -1.2, -0.3, 0.2, 0.1, 0.05, 0.0]
    crossings, settle = metrics.transience(hand_trace(ring), band=0.5)
    assert (crossings, settle) == (2, 5.0)
    with pytest.raises(ValueError):
        metrics.transience(hand_trace(ring), band=0.0)


def test_constraint_violations_examples():
    geo = BoundedSimplex([0.0, 0.0], [1.5, 1.5], 2.0)
    ok = hand_trace(np.zeros(5))
    assert metrics.constraint_violations(ok, geo) == 0
    x = np.tile([1.0, 1.0], (5, 1))
    x[3] = [1.6, 0.4]
    assert metrics.constraint_violations(hand_trace(np.zeros(5), x=x), geo) == 1
    x[3] = [1.0, 1.5]
    assert metrics.constraint_violations(hand_trace(np.zeros(5), x=x), geo) == 1


def test_energy_examples():
    x = np.tile([0.0, 2.0], (11, 1))
    e = metrics.energy_used(hand_trace(np.zeros(11), x=x, dt=0.5))
    assert e["delivered"] == 0.0 and e["slack"] == 10.0
    x = np.tile([0.75, 1.25], (11, 1))
    e = metrics.energy_used(hand_trace(np.zeros(11), x=x, dt=0.5))
    assert e["per_room"][0] == pytest.approx(0.75 * 5.0, rel=1e-15)


def test_compare_examples():
    sc = load(SCENARIOS / "desk_2room.json", horizon=5.0)
    tr = run(sc)
    a = metrics.build_report(tr, sc.geometry, "desk", "ded")
    table = metrics.compare(a, a)
    assert all(row["delta"] in (0, 0.0, None) for row in table["metrics"].values())
    # reordering rows (rooms) does not change aggregate metrics
    flipped = Trace(
        time=tr.time, temperatures=tr.temperatures[:, ::-1], setpoints=tr.setpoints[:, ::-1],
        allocations=np.c_[tr.allocations[:, 1::-1], tr.allocations[:, 2]],
        payoffs=np.c_[tr.payoffs[:, 1::-1], tr.payoffs[:, 2]], escort=tr.escort,
        velocity=tr.velocity, residual=tr.residual, objective=tr.objective, dt=tr.dt, total=tr.total,
    )
    b = metrics.build_report(flipped, sc.geometry, "desk", "ded")
    for name in ("rmse", "peak_overshoot", "crossings", "energy_delivered", "steady_mean_abs_f"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-12)
    with pytest.raises(ValueError, match="different scenarios"):
        metrics.compare(a, metrics.build_report(tr, sc.geometry, "other", "dip"))


@pytest.mark.parametrize("name", ["desk_2room", "desk_5room", "reference_50room"])
def test_energy_accounting_closes(name):
    horizon = 6.0 if name == "reference_50room" else None
    sc = load(SCENARIOS / f"{name}.json", horizon=horizon)
    tr = run(sc)
    e = metrics.energy_used(tr)
    expected = sc.geometry.total * tr.horizon
    assert abs(e["delivered"] + e["slack"] - expected) <= 1e-6 * expected


def test_report_fields_nonnegative():
    sc = load(SCENARIOS / "desk_5room.json", horizon=10.0)
    r = metrics.build_report(run(sc), sc.geometry, sc.name, "ded")
    for name, value in r.summary().items():
        if isinstance(value, float):
            assert value >= 0, name
    assert r.settling_time is None or r.settling_time <= 10.0


# ---------------------------------------------------------------------------
# comparative runs on the two-room desk fixture, gains matched by link weight


@pytest.fixture(scope="module")
def desk_pair():
    out = {}
    for kind in ("ded", "dip"):
        sc = load(SCENARIOS / "desk_2room.json", controller=kind)
        out[kind] = metrics.build_report(run(sc), sc.geometry, sc.name, kind)
    return out


def test_desk_ded_crossings_not_above_dip(desk_pair):
    assert desk_pair["ded"].crossings <= desk_pair["dip"].crossings


def test_desk_ded_lower_steady_error(desk_pair):
    # DIP settles off the setpoints by the barrier bias; DED does not
    assert desk_pair["ded"].steady_mean_abs_f < desk_pair["dip"].steady_mean_abs_f
    assert desk_pair["dip"].steady_mean_abs_f > 0.05
    assert desk_pair["ded"].steady_mean_abs_f < 1e-3


@pytest.mark.xfail(strict=True, reason="with matched gains DED overshoots more than DIP on this fixture")
def test_desk_ded_peak_below_dip(desk_pair):
    assert desk_pair["ded"].peak_overshoot < desk_pair["dip"].peak_overshoot


def test_warm_interval_draws_less_power():
    sc = load(SCENARIOS / "desk_2room_daycycle.json")
    tr = run(sc)
    u = tr.room_allocations.sum(axis=1)
    cold = u[(tr.time >= 10) & (tr.time < 20)].mean()
    warm = u[(tr.time >= 24) & (tr.time < 30)].mean()
    assert warm < cold - 0.5


def test_dip_failure_fixture_breaches_bounds():
    sc = load(SCENARIOS / "dip_failure_5room.json")
    with pytest.raises(SimulationAborted) as info:
        run(sc)
    assert metrics.constraint_violations(info.value.trace, sc.geometry) > 0


def test_rmse_stable_under_dt_halving():
    coarse = load(SCENARIOS / "desk_2room.json", horizon=20.0)
    fine = load(SCENARIOS / "desk_2room.json", horizon=20.0, dt=0.005)
    a = metrics.tracking_rmse(run(coarse))[1]
    b = metrics.tracking_rmse(run(fine))[1]
    assert abs(a - b) / a < 0.05
