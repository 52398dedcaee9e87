"""Load-selection engine: power mismatch per foreseen event and the shedding matrix.

All sums run over elements in configuration order so that the generated
Structured Text, which loops in the same order, reproduces every
floating-point comparison bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleShedError, NotFoundError, PreconditionError
from .grid_model import (
    Event,
    EventCatalog,
    EventKind,
    GridConfig,
    NetworkSnapshot,
    SubNetwork,
    enumerate_events,
    partition,
    subnetwork_of_busbar,
)

LSE_PERIOD_RANGE = (0.5, 2.0)


class InfeasibleShedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PowerMismatch:
    """PM per sub-network for one event.

    ``values`` pairs each sub-network with its PM in MW, or ``None`` when the
    event does not affect that sub-network (no action).
    """

    event_index: int
    values: tuple[tuple[SubNetwork, Optional[float]], ...]

    def deficits(self) -> list[tuple[SubNetwork, float]]:
        return [(sn, pm) for sn, pm in self.values if pm is not None and pm > 0]

    @property
    def requires_action(self) -> bool:
        return bool(self.deficits())

    def as_dict(self) -> dict[str, Optional[float]]:
        return {sn.id: pm for sn, pm in self.values}


def _no_action_except(subnets, affected: dict[str, float], event_index: int) -> PowerMismatch:
    return PowerMismatch(event_index, tuple((sn, affected.get(sn.id)) for sn in subnets))


def compute_pm_generator_trip(config: GridConfig, snapshot: NetworkSnapshot, gen_id: str,
                              event_index: int = -1) -> PowerMismatch:
    gen = config.generator(gen_id)
    subnets = partition(config, snapshot)
    sub = subnetwork_of_busbar(subnets, gen.busbar)
    sr_tot = 0.0
    for gid in sub.generators:
        if snapshot.gen_on(gid):
            sr_tot += snapshot.gen_sr(gid)
    pm = snapshot.gen_power(gen_id) - (sr_tot - snapshot.gen_sr(gen_id))
    return _no_action_except(subnets, {sub.id: pm}, event_index)


def _supply(config, snapshot, sub: SubNetwork) -> tuple[float, float, float]:
    load = 0.0
    for lid in sub.loads:
        if snapshot.load_on(lid):
            load += snapshot.load_pw(lid)
    gen = 0.0
    sr = 0.0
    for gid in sub.generators:
        if snapshot.gen_on(gid):
            gen += snapshot.gen_power(gid)
            sr += snapshot.gen_sr(gid)
    if sub.tie is not None and snapshot.tie_closed:
        gen += snapshot.imported_power
    return load, gen, sr


def compute_pm_bustie_open(config: GridConfig, snapshot: NetworkSnapshot, bustie_id: str,
                           event_index: int = -1) -> PowerMismatch:
    """PM of every sub-network created by opening ``bustie_id``.

    Each new island must cover its pre-event net import (load minus local
    generation, the external tie counted as generation) from its own reserve.
    If opening the tie leaves the component connected nothing is affected.
    """
    if bustie_id not in config.bustie_by_id:
        raise NotFoundError(f"unknown bustie {bustie_id!r}")
    if not snapshot.bustie_closed.get(bustie_id, False):
        raise PreconditionError(f"bustie {bustie_id!r} is already open")
    tie = config.bustie_by_id[bustie_id]
    before = subnetwork_of_busbar(partition(config, snapshot), tie.endpoints[0])
    after = partition(config, snapshot.with_bustie(bustie_id, False))
    affected = {}
    for sn in after:
        if set(sn.busbars) < set(before.busbars):
            load, gen, sr = _supply(config, snapshot, sn)
            affected[sn.id] = load - gen - sr
    return _no_action_except(after, affected, event_index)


def compute_pm_building_loss(config: GridConfig, snapshot: NetworkSnapshot, building_id: str,
                             event_index: int = -1) -> PowerMismatch:
    members = config.buildings.get(building_id)
    if not members:
        raise NotFoundError(f"unknown building {building_id!r}")
    lost_set = set(members)
    subnets = partition(config, snapshot)
    affected = {}
    for sn in subnets:
        if not lost_set.intersection(sn.generators):
            continue
        lost = 0.0
        surviving_sr = 0.0
        for gid in sn.generators:
            if not snapshot.gen_on(gid):
                continue
            if gid in lost_set:
                lost += snapshot.gen_power(gid)
            else:
                surviving_sr += snapshot.gen_sr(gid)
        affected[sn.id] = lost - surviving_sr
    return _no_action_except(subnets, affected, event_index)


def compute_pm_grid_blackout(config: GridConfig, snapshot: NetworkSnapshot,
                             event_index: int = -1) -> PowerMismatch:
    if not config.has_tie:
        raise NotFoundError("no external tie configured")
    if not snapshot.tie_closed:
        raise PreconditionError(f"external tie {config.external_tie.id!r} is already open")
    subnets = partition(config, snapshot)
    sub = subnetwork_of_busbar(subnets, config.external_tie.busbar)
    sr = 0.0
    for gid in sub.generators:
        if snapshot.gen_on(gid):
            sr += snapshot.gen_sr(gid)
    return _no_action_except(subnets, {sub.id: snapshot.imported_power - sr}, event_index)


def compute_pm(config: GridConfig, snapshot: NetworkSnapshot, event: Event) -> PowerMismatch:
    if event.kind is EventKind.GEN_TRIP:
        return compute_pm_generator_trip(config, snapshot, event.target, event.index)
    if event.kind is EventKind.BUSTIE_OPEN:
        return compute_pm_bustie_open(config, snapshot, event.target, event.index)
    if event.kind is EventKind.BUILDING_LOSS:
        return compute_pm_building_loss(config, snapshot, event.target, event.index)
    return compute_pm_grid_blackout(config, snapshot, event.index)


# --------------------------------------------------------------------------
# load selection


@dataclass(frozen=True)
class LoadSelection:
    """Loads to shed for one event, in selection order, with PS per sub-network."""

    marked: tuple[str, ...] = ()
    power_shed: tuple[tuple[str, float], ...] = ()
    last_marked: tuple[tuple[str, str], ...] = ()

    @property
    def ps(self) -> float:
        return sum(v for _, v in self.power_shed)


def candidate_order(config: GridConfig, snapshot: NetworkSnapshot, sub: SubNetwork) -> list[str]:
    """Sheddable, closed loads of ``sub``: ascending priority, then descending power, then id."""
    cands = [config.load_by_id[lid] for lid in sub.loads]
    cands = [ld for ld in cands if ld.sheddable and snapshot.load_on(ld.id)]
    cands.sort(key=lambda ld: (snapshot.priority(ld), -snapshot.load_pw(ld.id), ld.id))
    return [ld.id for ld in cands]


def select_loads(pm: PowerMismatch, config: GridConfig, snapshot: NetworkSnapshot) -> LoadSelection:
    """Greedy priority scan until the shed power strictly exceeds PM in every deficit sub-network.

    Raises :class:`InfeasibleShedError` (carrying the all-candidates selection)
    when some sub-network runs out of candidates first.
    """
    marked: list[str] = []
    shed: list[tuple[str, float]] = []
    last: list[tuple[str, str]] = []
    shortfall: dict[str, float] = {}
    for sub, need in pm.deficits():
        ps = 0.0
        picked = []
        for lid in candidate_order(config, snapshot, sub):
            picked.append(lid)
            ps += snapshot.load_pw(lid)
            if ps > need:
                break
        marked.extend(picked)
        shed.append((sub.id, ps))
        if ps > need:
            last.append((sub.id, picked[-1]))
        else:
            shortfall[sub.id] = need - ps
    selection = LoadSelection(tuple(marked), tuple(shed), tuple(last))
    if shortfall:
        raise InfeasibleShedError(selection, shortfall)
    return selection


# --------------------------------------------------------------------------
# shedding matrix


@dataclass(frozen=True, eq=False)
class SheddingMatrix:
    """Loads x events binary matrix; ``entries[r, c] == 1`` sheds load r on event c."""

    load_ids: tuple[str, ...]
    catalog: EventCatalog
    entries: np.ndarray
    timestamp: float = 0.0
    infeasible: tuple[bool, ...] = ()
    mismatches: tuple[Optional[PowerMismatch], ...] = ()

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.uint8).reshape(len(self.load_ids), len(self.catalog))
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if not self.infeasible:
            object.__setattr__(self, "infeasible", (False,) * len(self.catalog))

    def column(self, event: "int | str") -> list[str]:
        if isinstance(event, str):
            event = self.catalog.by_label(event).index
        return [lid for lid, v in zip(self.load_ids, self.entries[:, event]) if v]

    def __eq__(self, other):
        if not isinstance(other, SheddingMatrix):
            return NotImplemented
        return (
            self.load_ids == other.load_ids
            and self.catalog.labels == other.catalog.labels
            and np.array_equal(self.entries, other.entries)
            and self.infeasible == other.infeasible
        )

    __hash__ = None


def _target_open(config: GridConfig, snapshot: NetworkSnapshot, event: Event) -> bool:
    if event.kind is EventKind.GEN_TRIP:
        return not snapshot.gen_on(event.target)
    if event.kind is EventKind.BUSTIE_OPEN:
        return not snapshot.bustie_closed.get(event.target, False)
    if event.kind is EventKind.BUILDING_LOSS:
        return not any(snapshot.gen_on(g) for g in config.buildings[event.target])
    return not snapshot.tie_closed


def build_shedding_matrix(config: GridConfig, snapshot: NetworkSnapshot,
                          catalog: Optional[EventCatalog] = None) -> SheddingMatrix:
    catalog = catalog if catalog is not None else enumerate_events(config)
    load_ids = tuple(ld.id for ld in config.loads)
    row = {lid: r for r, lid in enumerate(load_ids)}
    entries = np.zeros((len(load_ids), len(catalog)), dtype=np.uint8)
    infeasible = [False] * len(catalog)
    mismatches: list[Optional[PowerMismatch]] = [None] * len(catalog)
    for event in catalog:
        if _target_open(config, snapshot, event):
            continue
        pm = compute_pm(config, snapshot, event)
        mismatches[event.index] = pm
        try:
            selection = select_loads(pm, config, snapshot)
        except InfeasibleShedError as exc:
            selection = exc.selection
            infeasible[event.index] = True
            warnings.warn(f"{event.label}: {exc}", InfeasibleShedWarning, stacklevel=2)
        for lid in selection.marked:
            entries[row[lid], event.index] = 1
    return SheddingMatrix(load_ids, catalog, entries, snapshot.timestamp,
                          tuple(infeasible), tuple(mismatches))


def check_lse_period(period: float) -> float:
    lo, hi = LSE_PERIOD_RANGE
    if not lo <= period <= hi:
        raise ValueError(f"LSE period {period} s outside [{lo}, {hi}] s")
    return period

