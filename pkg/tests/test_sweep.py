import numpy as np
import pytest

from fastshed.dynamics import ScriptedEvent, SimScenario, nadir, run_scenario
from fastshed.errors import InfeasibleMarginError
from fastshed.grid_model import Busbar, EventKind, Generator, GridConfig, Load
from fastshed.sweep import (
    BLACKOUT_NADIR,
    bisection_steps,
    evaluate_cell,
    max_sr_for_margin,
    sweep_surface,
)


@pytest.fixture(scope="module")
def short(scenario):
    return scenario.with_(duration=4.5)


def test_single_cell_equals_direct_run(plant, short):
    surf = sweep_surface(plant.config, short, [6.0], [0.2], fls=plant.fls, governors=plant.governors)
    direct = run_scenario(plant.config, short.with_(sr_parameter=6.0, total_delay=0.2), plant.fls,
                          governors=plant.governors)
    assert surf.nadir.shape == (1, 1)
    assert surf.nadir[0, 0] == nadir(direct)
    assert not surf.blackout[0, 0]


@pytest.mark.parametrize("sr, delay", [([], [0.2]), ([1.0], []), ([2.0, 1.0], [0.2]), ([1.0], [0.2, 0.2])])
def test_axes_must_be_non_empty_and_increasing(plant, short, sr, delay):
    with pytest.raises(ValueError):
        sweep_surface(plant.config, short, sr, delay)


def test_parallel_equals_serial_and_slices(plant, short):
    kw = dict(fls=plant.fls, governors=plant.governors)
    a = sweep_surface(plant.config, short, [2.0, 10.0], [0.1, 0.3], workers=1, **kw)
    b = sweep_surface(plant.config, short, [2.0, 10.0], [0.1, 0.3], workers=2, **kw)
    assert np.array_equal(a.nadir, b.nadir) and np.array_equal(a.blackout, b.blackout)
    assert np.array_equal(a.at_delay(0.3), a.nadir[:, 1])
    assert np.array_equal(a.at_sr(10.0), a.nadir[1, :])
    assert a.nadir[0, 0] >= a.nadir[0, 1] and a.nadir[0, 0] >= a.nadir[1, 0]


def test_blackout_cell_holds_sentinel():
    cfg = GridConfig((Busbar("A"),), (), (Generator("G1", "A", "K1", 10.0, 12.5, 3.0),), (Load("L1", "A", 1),))
    sc = SimScenario({"G1": 5.0}, {"L1": 5.0}, (ScriptedEvent(0.5, EventKind.GEN_TRIP, "G1"),), duration=1.0)
    assert evaluate_cell(cfg, sc, 0.0, 0.2) == (BLACKOUT_NADIR, True)
    surf = sweep_surface(cfg, sc, [0.0], [0.2])
    assert surf.blackout[0, 0] and surf.nadir[0, 0] == 0.0


@pytest.mark.parametrize("span, tol, steps", [(12.0, 0.1, 7), (1.0, 1.0, 0), (1.0, 0.5, 1), (0.0, 0.1, 0),
                                              (10.0, 0.1, 7), (12.8, 0.1, 7)])
def test_bisection_steps(span, tol, steps):
    assert bisection_steps(span, tol) == steps


def test_selection_counts_runs_and_meets_target(plant, short):
    sel = max_sr_for_margin(plant.config, short, 48.0, 0.5, (0.0, 12.0), 0.1,
                            fls=plant.fls, governors=plant.governors)
    assert sel.simulations == 1 + bisection_steps(12.0, 0.1)
    assert sel.target == 48.5 and sel.nadir >= 48.5
    value, _ = evaluate_cell(plant.config, short, sel.sr + 0.1, 0.2, plant.fls, plant.governors)
    assert value < 48.5


def test_infeasible_margin(plant, short):
    with pytest.raises(InfeasibleMarginError) as info:
        max_sr_for_margin(plant.config, short, 48.0, 1.95, (0.0, 12.0), 0.1,
                          fls=plant.fls, governors=plant.governors)
    assert info.value.sr == 0.0 and info.value.target == 49.95
    assert info.value.nadir < 49.95


@pytest.mark.parametrize("rng, tol", [((5.0, 1.0), 0.1), ((0.0, 1.0), 0.0)])
def test_selection_rejects_bad_arguments(plant, short, rng, tol):
    with pytest.raises(ValueError):
        max_sr_for_margin(plant.config, short, 48.0, 0.5, rng, tol)
