"""Fixed-step closed-loop frequency simulation.

Each island of the plant (busbars joined by closed busties) has one
frequency driven by the aggregate swing equation.  Every running generator
carries a droop governor followed by two first-order lags (governor, then
turbine) with the output clamped to its power limits.  Loads are constant
power.  The fast load shedding loop observes a snapshot at every step,
refreshes its matrix at the LSE period and opens load breakers
``total_delay`` seconds after the event instant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .edsa import FlsController, FlsParams, TripCommand
from .errors import BlackoutError, NotFoundError
from .grid_model import EventKind, GridConfig, NetworkSnapshot, make_snapshot
from .lse import InfeasibleShedWarning

_EPS = 1e-9


# --------------------------------------------------------------------------
# integration


def rk4_step(fun: Callable, t: float, y: Sequence[float], dt: float) -> list[float]:
    """One classical Runge-Kutta step for ``dy/dt = fun(t, y)`` on plain lists."""
    k1 = fun(t, y)
    k2 = fun(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k1)])
    k3 = fun(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k2)])
    k4 = fun(t + dt, [a + dt * b for a, b in zip(y, k3)])
    return [a + dt / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def integrate(fun: Callable, y0: Sequence[float], t0: float, t1: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 from ``t0`` to ``t1``; returns (times, states)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(math.ceil((t1 - t0) / dt - _EPS))
    times = t0 + dt * np.arange(n + 1)
    out = np.empty((n + 1, len(y0)))
    y = [float(v) for v in y0]
    out[0] = y
    for k in range(n):
        y = rk4_step(fun, times[k], y, dt)
        out[k + 1] = y
    return times, out


# --------------------------------------------------------------------------
# swing equation


def swing_rocof(f0: float, inertia: Sequence[tuple[float, float]], p_gen: float, p_load: float) -> float:
    """df/dt in Hz/s for a set of connected machines given as ``(H [s], S_n [MVA])``."""
    hs = sum(h * s for h, s in inertia)
    if not inertia or hs <= 0:
        raise BlackoutError("no connected generator")
    return f0 * (p_gen - p_load) / (2.0 * hs)


def config_rocof(config: GridConfig, gen_ids: Sequence[str], p_gen: float, p_load: float) -> float:
    gens = [config.generator(g) for g in gen_ids]
    return swing_rocof(config.nominal_frequency,
                       [(g.inertia_constant, g.rated_apparent_power) for g in gens], p_gen, p_load)


# --------------------------------------------------------------------------
# governor


@dataclass(frozen=True)
class GovernorParams:
    """Droop governor and turbine lags.  ``p_max=None`` means the generator's rated power."""

    droop: float = 0.04
    t_gov: float = 0.2
    t_turb: float = 0.8
    p_max: Optional[float] = None
    p_min: float = 0.0

    def __post_init__(self):
        if not self.droop > 0:
            raise ValueError(f"droop must be > 0, got {self.droop}")
        if not (self.t_gov > 0 and self.t_turb > 0):
            raise ValueError("governor and turbine time constants must be > 0")
        if self.p_max is not None and self.p_min > self.p_max:
            raise ValueError(f"p_min {self.p_min} exceeds p_max {self.p_max}")

    def limits(self, rated_power: float) -> tuple[float, float]:
        return self.p_min, (self.p_max if self.p_max is not None else rated_power)


@dataclass(frozen=True)
class GovernorState:
    setpoint: float
    x_gov: float
    x_turb: float

    @classmethod
    def steady(cls, setpoint: float) -> "GovernorState":
        return cls(setpoint, setpoint, setpoint)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def governor_step(params: GovernorParams, state: GovernorState, delta_f: float, dt: float, *,
                  f0: float, rated_power: float) -> tuple[GovernorState, float]:
    """Advance the governor by ``dt`` under a constant frequency deviation; returns (state, P_mech)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_min, p_max = params.limits(rated_power)
    ref = _clamp(state.setpoint - delta_f / (params.droop * f0) * rated_power, p_min, p_max)

    def rhs(_t, y):
        return [(ref - y[0]) / params.t_gov, (y[0] - y[1]) / params.t_turb]

    xg, xt = rk4_step(rhs, 0.0, [state.x_gov, state.x_turb], dt)
    return GovernorState(state.setpoint, xg, xt), _clamp(xt, p_min, p_max)


# --------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class ScriptedEvent:
    time: float
    kind: EventKind
    target: str = ""


@dataclass(frozen=True)
class SimScenario:
    """One closed-loop run.

    ``dispatch`` lists the running generators and their initial output;
    ``loads`` the connected loads.  ``total_delay`` and ``uf_threshold`` fall
    back to the FLS parameters when left as ``None``.  ``sr_parameter``
    replaces the SR curves as the FLS input (MW per generator, or a map).
    """

    dispatch: Mapping[str, float]
    loads: Mapping[str, float]
    events: tuple[ScriptedEvent, ...] = ()
    duration: float = 8.0
    dt: float = 1e-3
    total_delay: Optional[float] = None
    sr_parameter: "float | Mapping[str, float] | None" = None
    uf_threshold: Optional[float] = None
    relay_pickup: float = 0.0
    imported_power: float = 0.0
    tie_closed: bool = False
    bustie_closed: Optional[Mapping[str, bool]] = None
    collapse_fraction: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.time)))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.total_delay is not None and self.total_delay < 0:
            raise ValueError("total_delay must be >= 0")
        for ev in self.events:
            if not 0 <= ev.time <= self.duration:
                raise ValueError(f"event at t = {ev.time} s lies outside [0, {self.duration}] s")

    def with_(self, **changes) -> "SimScenario":
        return replace(self, **changes)


_FLOAT_SERIES = {"time", "frequency", "busbar_frequency", "generator_power", "total_load"}


@dataclass(eq=False)
class SimTrace:
    time: np.ndarray
    frequency: np.ndarray
    busbar_frequency: np.ndarray
    generator_power: np.ndarray
    total_load: np.ndarray
    generator_closed: np.ndarray
    load_closed: np.ndarray
    generator_ids: tuple[str, ...]
    load_ids: tuple[str, ...]
    busbar_ids: tuple[str, ...]
    f0: float
    commands: list[TripCommand] = field(default_factory=list)
    actuations: list[tuple[float, str]] = field(default_factory=list)
    events: list[tuple[float, str]] = field(default_factory=list)
    relay_tripped: bool = False
    relay_time: Optional[float] = None
    blackout: bool = False
    blackout_time: Optional[float] = None
    shedding: bool = True

    def __eq__(self, other):
        if not isinstance(other, SimTrace):
            return NotImplemented
        arrays = ("time", "frequency", "busbar_frequency", "generator_power", "total_load",
                  "generator_closed", "load_closed")
        same = all(np.array_equal(getattr(self, a), getattr(other, a), equal_nan=a in _FLOAT_SERIES)
                   for a in arrays)
        return same and (
            self.generator_ids, self.load_ids, self.busbar_ids, self.commands, self.actuations,
            self.events, self.relay_tripped, self.relay_time, self.blackout, self.blackout_time,
        ) == (
            other.generator_ids, other.load_ids, other.busbar_ids, other.commands, other.actuations,
            other.events, other.relay_tripped, other.relay_time, other.blackout, other.blackout_time,
        )

    __hash__ = None

    @property
    def shed_power(self) -> float:
        return float(self.total_load[0] - self.total_load[-1]) if len(self.total_load) else 0.0


def nadir(trace: SimTrace) -> float:
    """Lowest frequency sample of the trace."""
    if len(trace.frequency) == 0:
        raise ValueError("empty trace")
    return float(np.nanmin(trace.frequency))


def _step_index(t: float, dt: float) -> int:
    return int(math.ceil(t / dt - _EPS))


class _Plant:
    """Mutable breaker/measurement state for one run."""

    def __init__(self, config: GridConfig, scenario: SimScenario, governors: Mapping[str, GovernorParams]):
        self.config = config
        self.gen_ids = tuple(g.id for g in config.generators)
        self.load_ids = tuple(ld.id for ld in config.loads)
        self.bus_ids = tuple(b.id for b in config.busbars)
        for gid in scenario.dispatch:
            config.generator(gid)
        for lid in scenario.loads:
            if lid not in config.load_by_id:
                raise NotFoundError(f"unknown load {lid!r}")
        self.gen_on = [g in scenario.dispatch for g in self.gen_ids]
        self.load_on = [ld in scenario.loads for ld in self.load_ids]
        self.load_p = [float(scenario.loads.get(ld, 0.0)) for ld in self.load_ids]
        ties = scenario.bustie_closed or {}
        self.tie_on = {t.id: bool(ties.get(t.id, True)) for t in config.busties}
        self.grid_on = bool(scenario.tie_closed and config.has_tie)
        self.imported = float(scenario.imported_power) if self.grid_on else 0.0
        self.gov = []
        for g in config.generators:
            params = governors.get(g.id, GovernorParams())
            p_min, p_max = params.limits(g.rated_power)
            self.gov.append((params, p_min, p_max))
        self.setpoint = [float(scenario.dispatch.get(g, 0.0)) for g in self.gen_ids]
        self.version = 0

    def apply(self, kind: EventKind, target: str) -> None:
        cfg = self.config
        if kind is EventKind.GEN_TRIP:
            self.gen_on[self.gen_ids.index(cfg.generator(target).id)] = False
        elif kind is EventKind.BUSTIE_OPEN:
            if target not in self.tie_on:
                raise NotFoundError(f"unknown bustie {target!r}")
            self.tie_on[target] = False
        elif kind is EventKind.BUILDING_LOSS:
            if target not in cfg.buildings:
                raise NotFoundError(f"unknown building {target!r}")
            for gid in cfg.buildings[target]:
                self.gen_on[self.gen_ids.index(gid)] = False
        else:
            self.grid_on = False
            self.imported = 0.0
        self.version += 1

    def open_load(self, load_id: str) -> bool:
        i = self.load_ids.index(load_id)
        if not self.load_on[i]:
            return False
        self.load_on[i] = False
        self.version += 1
        return True

    def islands(self) -> list[list[int]]:
        parent = list(range(len(self.bus_ids)))

        def root(i):
            while parent[i] != i:
                i = parent[i]
            return i

        index = {b: i for i, b in enumerate(self.bus_ids)}
        for t in self.config.busties:
            if self.tie_on[t.id]:
                a, b = root(index[t.endpoints[0]]), root(index[t.endpoints[1]])
                if a != b:
                    parent[max(a, b)] = min(a, b)
        groups: dict[int, list[int]] = {}
        for i in range(len(self.bus_ids)):
            groups.setdefault(root(i), []).append(i)
        return [groups[k] for k in sorted(groups)]

    def snapshot(self, t: float, mech: Sequence[float], sr_parameter) -> NetworkSnapshot:
        gp = {g: mech[i] for i, g in enumerate(self.gen_ids) if self.gen_on[i]}
        lp = {ld: self.load_p[i] for i, ld in enumerate(self.load_ids) if self.load_on[i]}
        return make_snapshot(
            self.config,
            timestamp=t,
            generator_power=gp,
            load_power=lp,
            bustie_closed=self.tie_on,
            tie_closed=self.grid_on,
            imported_power=self.imported,
            sr_override=sr_parameter,
        )


def _make_rhs(units, groups, f0):
    m = len(groups)
    base = [g[3] for g in groups]
    coef = [g[2] for g in groups]

    def rhs(_t, y):
        d = [0.0] * len(y)
        bal = list(base)
        pos = m
        for j, sp, kk, pmin, pmax, itg, itt in units:
            xg_, xt_ = y[pos], y[pos + 1]
            bal[j] += pmin if xt_ < pmin else pmax if xt_ > pmax else xt_
            ref = sp - (y[j] - f0) * kk
            ref = pmin if ref < pmin else pmax if ref > pmax else ref
            d[pos] = (ref - xg_) * itg
            d[pos + 1] = (xg_ - xt_) * itt
            pos += 2
        for j in range(m):
            d[j] = coef[j] * bal[j]
        return d

    return rhs


def run_scenario(config: GridConfig, scenario: SimScenario, fls: Optional[FlsParams] = None, *,
                 governors: Optional[Mapping[str, GovernorParams]] = None,
                 shedding: bool = True) -> SimTrace:
    """Integrate the plant with fast load shedding in the loop (RK4, fixed step).

    ``shedding=False`` disconnects ED-SA; everything else is unchanged.
    Blackout (no running generator left, or frequency below
    ``collapse_fraction * f0``) and relay operation are reported on the
    trace, never raised.
    """
    # infeasible columns are expected while the plant is short of candidates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InfeasibleShedWarning)
        return _run(config, scenario, fls or FlsParams(), governors or {}, shedding)


def _run(config, scenario, fls, governors, shedding):
    f0 = config.nominal_frequency
    dt = scenario.dt
    delay = fls.total_delay if scenario.total_delay is None else scenario.total_delay
    threshold = fls.uf_threshold if scenario.uf_threshold is None else scenario.uf_threshold
    collapse = scenario.collapse_fraction * f0

    plant = _Plant(config, scenario, governors)
    n_gen, n_bus = len(plant.gen_ids), len(plant.bus_ids)
    gen_bus = [plant.bus_ids.index(g.busbar) for g in config.generators]
    load_bus = [plant.bus_ids.index(ld.busbar) for ld in config.loads]
    tie_bus = plant.bus_ids.index(config.external_tie.busbar) if config.has_tie else -1
    inertia = [g.inertia_constant * g.rated_apparent_power for g in config.generators]
    gain = [g.rated_power / (plant.gov[i][0].droop * f0) for i, g in enumerate(config.generators)]
    inv_tg = [1.0 / p[0].t_gov for p in plant.gov]
    inv_tt = [1.0 / p[0].t_turb for p in plant.gov]
    lo = [p[1] for p in plant.gov]
    hi = [p[2] for p in plant.gov]

    n_steps = _step_index(scenario.duration, dt)
    times = dt * np.arange(n_steps + 1)
    freq_rec = np.full(n_steps + 1, np.nan)
    bus_rec = np.full((n_steps + 1, n_bus), np.nan)
    pow_rec = np.zeros((n_steps + 1, n_gen))
    load_rec = np.zeros(n_steps + 1)
    gclosed = np.zeros((n_steps + 1, n_gen), dtype=bool)
    lclosed = np.zeros((n_steps + 1, len(plant.load_ids)), dtype=bool)

    # state: frequency per busbar, governor and turbine stage per generator
    fbus = [f0] * n_bus
    xg = list(plant.setpoint)
    xt = list(plant.setpoint)

    controller = FlsController(config, fls, sr_override=scenario.sr_parameter) if shedding else None
    pending: dict[int, list[str]] = {}
    trace = SimTrace(times, freq_rec, bus_rec, pow_rec, load_rec, gclosed, lclosed,
                     plant.gen_ids, plant.load_ids, plant.bus_ids, f0, shedding=shedding)
    events = list(scenario.events)
    below_since: Optional[float] = None
    topo_version = -1
    seen_version = -1
    live: list[tuple[list[int], list[int], float, bool]] = []
    groups: list = []
    active: list[int] = []
    rhs = None
    last_k = n_steps

    def mech(i: int) -> float:
        return _clamp(xt[i], lo[i], hi[i])

    def actuate(k: int) -> None:
        for lid in pending.pop(k, []):
            if plant.open_load(lid):
                trace.actuations.append((float(times[k]), lid))

    for k in range(n_steps + 1):
        t = float(times[k])
        while events and _step_index(events[0].time, dt) <= k:
            ev = events.pop(0)
            plant.apply(ev.kind, ev.target)
            trace.events.append((t, f"{ev.kind.value}:{ev.target}"))
        actuate(k)

        if controller is not None:
            inhibited_due = controller.state.mode.value == "inhibited" and t >= controller.state.until
            if plant.version != seen_version or controller.lse_due(t) or inhibited_due:
                seen_version = plant.version
                snap = plant.snapshot(t, [mech(i) for i in range(n_gen)], scenario.sr_parameter)
                for cmd in controller.step(snap):
                    trace.commands.append(cmd)
                    event_t = t
                    pending.setdefault(_step_index(event_t + delay, dt), []).append(cmd.load_id)
                actuate(k)

        if plant.version != topo_version:
            topo_version = plant.version
            live = []
            for members in plant.islands():
                gens = [i for i in range(n_gen) if plant.gen_on[i] and gen_bus[i] in members]
                grid = plant.grid_on and tie_bus in members
                hs = sum(inertia[i] for i in gens)
                live.append((members, gens, hs, grid))
                if not gens:
                    for b in members:
                        fbus[b] = f0 if grid else math.nan
            groups = []
            for members, gens, hs, grid in live:
                if not gens:
                    continue
                pl = sum(plant.load_p[j] for j in range(len(plant.load_ids))
                         if plant.load_on[j] and load_bus[j] in members)
                imp = plant.imported if grid else 0.0
                groups.append((members, gens, f0 / (2.0 * hs), imp - pl))
            active = [i for _, gens, _, _ in groups for i in gens]
            gi_of = {i: j for j, (_, gens, _, _) in enumerate(groups) for i in gens}
            units = [(gi_of[i], plant.setpoint[i], gain[i], lo[i], hi[i], inv_tg[i], inv_tt[i])
                    for i in active]
            rhs = _make_rhs(units, groups, f0)

        energized = [b for members, gens, _, grid in live if gens or grid for b in members]
        f_now = min((fbus[b] for b in energized), default=math.nan)
        freq_rec[k] = f_now
        bus_rec[k] = fbus
        for i in range(n_gen):
            pow_rec[k, i] = mech(i) if plant.gen_on[i] else 0.0
        load_rec[k] = sum(plant.load_p[j] for j in range(len(plant.load_ids))
                          if plant.load_on[j] and load_bus[j] in energized)
        gclosed[k] = plant.gen_on
        lclosed[k] = plant.load_on

        if not energized or f_now < collapse:
            trace.blackout = True
            trace.blackout_time = t
            last_k = k
            break

        if f_now < threshold:
            if below_since is None:
                below_since = t
            if not trace.relay_tripped and t - below_since >= scenario.relay_pickup - _EPS:
                trace.relay_tripped = True
                trace.relay_time = t
        else:
            below_since = None

        if k == n_steps:
            break

        # y layout: island frequencies, then (x_gov, x_turb) per active generator
        y0 = [fbus[g[0][0]] for g in groups]
        for i in active:
            y0.append(xg[i])
            y0.append(xt[i])
        y1 = rk4_step(rhs, t, y0, dt)
        for j, (members, _, _, _) in enumerate(groups):
            for b in members:
                fbus[b] = y1[j]
        pos = len(groups)
        for i in active:
            xg[i], xt[i] = y1[pos], y1[pos + 1]
            pos += 2

    if last_k < n_steps:
        n = last_k + 1
        trace.time = times[:n]
        trace.frequency = freq_rec[:n]
        trace.busbar_frequency = bus_rec[:n]
        trace.generator_power = pow_rec[:n]
        trace.total_load = load_rec[:n]
        trace.generator_closed = gclosed[:n]
        trace.load_closed = lclosed[:n]
    return trace
