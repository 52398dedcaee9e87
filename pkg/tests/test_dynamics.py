import math

import numpy as np
import pytest

from fastshed.dynamics import (
    GovernorParams,
    GovernorState,
    ScriptedEvent,
    SimScenario,
    governor_step,
    integrate,
    nadir,
    run_scenario,
    swing_rocof,
)
from fastshed.edsa import FlsParams
from fastshed.errors import BlackoutError, NotFoundError
from fastshed.grid_model import Busbar, EventKind, Generator, GridConfig, Load


def run(plant, scenario, **kw):
    return run_scenario(plant.config, scenario, plant.fls, governors=plant.governors, **kw)


@pytest.fixture(scope="module")
def reference_runs(plant, scenario):
    return run(plant, scenario), run(plant, scenario, shedding=False)


def two_unit_plant(sheddable=(True, False)):
    gens = (Generator("G1", "A", "K1", 10.0, 12.5, 3.0), Generator("G2", "A", "K2", 10.0, 12.5, 3.0))
    loads = (Load("L1", "A", 1, sheddable[0]), Load("L2", "A", 2, sheddable[1]))
    return GridConfig((Busbar("A"),), (), gens, loads)


def trip_g1(**kw):
    base = dict(dispatch={"G1": 5.0, "G2": 5.0}, loads={"L1": 5.0, "L2": 5.0},
                events=(ScriptedEvent(1.0, EventKind.GEN_TRIP, "G1"),), duration=4.0, sr_parameter=0.0)
    base.update(kw)
    return SimScenario(**base)


# --------------------------------------------------------------------------
# numerics


def test_rk4_matches_exponential():
    a = -0.7
    times, ys = integrate(lambda _t, y: [a * y[0]], [50.0], 0.0, 10.0, 1e-3)
    exact = 50.0 * np.exp(a * times)
    assert len(times) == 10001 and times[-1] == pytest.approx(10.0)
    assert np.max(np.abs(ys[:, 0] - exact) / exact) < 1e-6


def test_swing_rocof_examples():
    assert swing_rocof(50.0, [(2.0, 30.0), (2.0, 30.0)], 40.0, 40.0) == 0.0
    assert swing_rocof(50.0, [(2.0, 30.0), (2.0, 30.0)], 28.0, 40.0) == pytest.approx(-2.5)
    assert swing_rocof(50.0, [(4.0, 30.0), (4.0, 30.0)], 28.0, 40.0) == pytest.approx(-1.25)
    with pytest.raises(BlackoutError):
        swing_rocof(50.0, [], 0.0, 1.0)


def test_governor_steady_state():
    p = GovernorParams()
    state = GovernorState.steady(12.0)
    for _ in range(100):
        state, out = governor_step(p, state, 0.0, 1e-3, f0=50.0, rated_power=25.0)
    assert out == 12.0


def test_governor_step_response_is_the_cascaded_lag_solution():
    p = GovernorParams(droop=0.04, t_gov=0.2, t_turb=0.8)
    df, rated, sp, dt = -0.5, 25.0, 10.0, 1e-3
    final = sp + abs(df) / (p.droop * 50.0) * rated  # 16.25 MW, below the 25 MW limit
    state, outs = GovernorState.steady(sp), []
    for _ in range(5000):
        state, out = governor_step(p, state, df, dt, f0=50.0, rated_power=rated)
        outs.append(out)
    t = dt * np.arange(1, 5001)
    t1, t2 = p.t_gov, p.t_turb
    exact = final + (sp - final) * (t2 * np.exp(-t / t2) - t1 * np.exp(-t / t1)) / (t2 - t1)
    assert np.max(np.abs(np.array(outs) - exact)) < 1e-6
    assert np.all(np.diff(outs) > 0)


def test_governor_clamps_at_p_max():
    p = GovernorParams(p_max=14.0)
    state = GovernorState.steady(12.0)
    outs = []
    for _ in range(20000):
        state, out = governor_step(p, state, -2.0, 1e-3, f0=50.0, rated_power=25.0)
        outs.append(out)
    assert max(outs) <= 14.0 and out == pytest.approx(14.0, abs=1e-9)
    # once saturated, a deeper dip changes nothing
    a = governor_step(p, state, -2.0, 1e-3, f0=50.0, rated_power=25.0)
    b = governor_step(p, state, -5.0, 1e-3, f0=50.0, rated_power=25.0)
    assert a == b


@pytest.mark.parametrize("kwargs", [dict(droop=0.0), dict(t_gov=0.0), dict(t_turb=-1.0),
                                    dict(p_min=5.0, p_max=4.0)])
def test_governor_params_reject(kwargs):
    with pytest.raises(ValueError):
        GovernorParams(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(duration=0.0), dict(total_delay=-0.1),
                                    dict(events=(ScriptedEvent(9.0, EventKind.GEN_TRIP, "G1"),))])
def test_scenario_rejects(kwargs):
    with pytest.raises(ValueError):
        trip_g1(**kwargs)


# --------------------------------------------------------------------------
# closed loop


def test_equilibrium_without_events(plant, scenario):
    tr = run(plant, scenario.with_(events=(), duration=2.0))
    assert np.max(np.abs(tr.frequency - 50.0)) < 1e-9
    assert not tr.relay_tripped and not tr.commands
    assert len(tr.time) == 2001 and tr.frequency[0] == 50.0


def test_shedding_raises_the_nadir(reference_runs):
    shed, plain = reference_runs
    assert nadir(shed) > nadir(plain)
    assert plain.relay_tripped and not shed.relay_tripped
    assert nadir(shed) > 48.0 > nadir(plain)


def test_runs_differ_only_by_shedding(reference_runs):
    shed, plain = reference_runs
    assert plain.commands == [] and plain.actuations == []
    k = int(round(2.0 / 1e-3))
    assert np.array_equal(shed.frequency[:k + 1], plain.frequency[:k + 1])
    assert shed.events == plain.events


def test_actuation_latency(reference_runs, scenario):
    shed, _ = reference_runs
    (event_t, label), = shed.events
    assert label == "trip:G2"
    assert shed.actuations
    delay = scenario.total_delay
    for t, _ in shed.actuations:
        assert delay - 1e-12 <= t - event_t <= delay + scenario.dt + 1e-12
    assert {lid for _, lid in shed.actuations} == {c.load_id for c in shed.commands}


def test_frequency_falls_while_generation_is_short(reference_runs):
    _, plain = reference_runs
    start = int(round(2.0 / 1e-3)) + 1
    gen = plain.generator_power.sum(axis=1)
    short = gen < plain.total_load
    end = start
    while end < len(short) and short[end]:
        end += 1
    assert end - start > 100
    # steps k -> k+1 with generation short at both ends
    assert np.all(np.diff(plain.frequency[start:end]) < 0)


def test_frequency_recovers_after_shedding(reference_runs):
    shed, _ = reference_runs
    k = int(np.argmin(shed.frequency))
    assert shed.frequency[-1] > shed.frequency[k]
    assert np.all(np.diff(shed.frequency[k:k + 500]) >= 0)


def test_nadir_is_the_sample_minimum(reference_runs):
    for tr in reference_runs:
        assert nadir(tr) == min(float(v) for v in tr.frequency)


def test_nadir_of_flat_trace(plant, scenario):
    assert nadir(run(plant, scenario.with_(events=(), duration=0.5))) == 50.0


def test_determinism(plant, scenario):
    s = scenario.with_(duration=4.0)
    assert run(plant, s) == run(plant, s)


def test_exact_shed_with_zero_delay_holds_frequency():
    cfg = two_unit_plant()
    tr = run_scenario(cfg, trip_g1(total_delay=0.0))
    assert [c.load_id for c in tr.commands] == ["L1"]
    assert tr.actuations == [(1.0, "L1")]
    assert abs(nadir(tr) - 50.0) < 1e-9


def test_unshed_unit_loss_drops_frequency():
    cfg = two_unit_plant(sheddable=(False, False))
    tr = run_scenario(cfg, trip_g1(total_delay=0.0))
    assert tr.commands == [] and nadir(tr) < 49.0


def test_losing_every_generator_is_a_blackout():
    cfg = GridConfig((Busbar("A"),), (), (Generator("G1", "A", "K1", 10.0, 12.5, 3.0),), (Load("L1", "A", 1),))
    tr = run_scenario(cfg, SimScenario({"G1": 5.0}, {"L1": 5.0},
                                       (ScriptedEvent(0.5, EventKind.GEN_TRIP, "G1"),), duration=2.0))
    assert tr.blackout and tr.blackout_time == 0.5
    assert len(tr.time) == len(tr.frequency) == 501


def test_relay_pickup_delay(plant, scenario):
    s = scenario.with_(duration=5.0)
    instant = run(plant, s, shedding=False)
    delayed = run(plant, s.with_(relay_pickup=0.3), shedding=False)
    assert instant.relay_tripped and delayed.relay_tripped
    assert delayed.relay_time == pytest.approx(instant.relay_time + 0.3)
    first_below = float(instant.time[np.argmax(instant.frequency < 48.0)])
    assert instant.relay_time == first_below


def test_unknown_target(plant, scenario):
    with pytest.raises(NotFoundError):
        run(plant, scenario.with_(events=(ScriptedEvent(1.0, EventKind.GEN_TRIP, "G9"),)))


def test_bigger_delay_never_raises_nadir(plant, scenario):
    s = scenario.with_(duration=5.0)
    values = [nadir(run(plant, s.with_(total_delay=d))) for d in (0.0, 0.1, 0.2, 0.3)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_bigger_sr_never_raises_nadir(plant, scenario):
    s = scenario.with_(duration=5.0)
    values = [nadir(run(plant, s.with_(sr_parameter=v))) for v in (0.0, 4.0, 8.0, 12.0)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_fls_threshold_default(plant, scenario):
    s = scenario.with_(duration=5.0)
    tr = run_scenario(plant.config, s, FlsParams(uf_threshold=46.0), governors=plant.governors, shedding=False)
    assert not tr.relay_tripped
    assert not math.isnan(nadir(tr))
