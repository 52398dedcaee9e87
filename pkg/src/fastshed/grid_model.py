"""Plant topology, live snapshots, sub-network partitioning and the event catalog."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import networkx as nx

from .errors import IncompleteSnapshotError, NotFoundError

MAX_BUSBARS = 3


@dataclass(frozen=True)
class Busbar:
    id: str
    name: str = ""


@dataclass(frozen=True)
class Bustie:
    id: str
    endpoints: tuple[str, str]


@dataclass(frozen=True)
class Generator:
    """A gas-turbine generator set.

    ``sr_curve`` lists ``(output_mw, sr_mw)`` breakpoints; see :func:`evaluate_sr`.
    """

    id: str
    busbar: str
    building: str
    rated_power: float
    rated_apparent_power: float
    inertia_constant: float
    sr_curve: tuple[tuple[float, float], ...] = ()

    def sr_at(self, power: float) -> float:
        return evaluate_sr(self.sr_curve, power)


@dataclass(frozen=True)
class Load:
    id: str
    busbar: str
    priority: int
    sheddable: bool = True


@dataclass(frozen=True)
class ExternalTie:
    id: str
    busbar: str
    present: bool = True


@dataclass(frozen=True)
class GridConfig:
    busbars: tuple[Busbar, ...]
    busties: tuple[Bustie, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    external_tie: Optional[ExternalTie] = None
    nominal_frequency: float = 50.0

    def __post_init__(self):
        for name in ("busbars", "busties", "generators", "loads"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @cached_property
    def generator_by_id(self) -> dict[str, Generator]:
        return {g.id: g for g in self.generators}

    @cached_property
    def load_by_id(self) -> dict[str, Load]:
        return {ld.id: ld for ld in self.loads}

    @cached_property
    def bustie_by_id(self) -> dict[str, Bustie]:
        return {t.id: t for t in self.busties}

    @cached_property
    def buildings(self) -> dict[str, tuple[str, ...]]:
        """Building id -> generator ids (config order), buildings sorted by id."""
        out: dict[str, list[str]] = {}
        for g in self.generators:
            out.setdefault(g.building, []).append(g.id)
        return {b: tuple(out[b]) for b in sorted(out)}

    @property
    def has_tie(self) -> bool:
        return self.external_tie is not None and self.external_tie.present

    def generator(self, gen_id: str) -> Generator:
        try:
            return self.generator_by_id[gen_id]
        except KeyError:
            raise NotFoundError(f"unknown generator {gen_id!r}") from None


def evaluate_sr(curve: Sequence[tuple[float, float]], power: float) -> float:
    """Spinning reserve at ``power`` as a left-continuous step function.

    Between breakpoints the value of the nearest breakpoint at or below
    ``power`` applies; below the first breakpoint the reserve is 0.
    A breakpoint with value 0 therefore opens a zero band (the DLE
    combustion-change range) that lasts until the next breakpoint.
    """
    if not curve:
        return 0.0
    points = sorted(curve)
    idx = bisect.bisect_right([p for p, _ in points], power) - 1
    if idx < 0:
        return 0.0
    return float(points[idx][1])


# --------------------------------------------------------------------------
# snapshots


@dataclass(frozen=True)
class NetworkSnapshot:
    """Breaker statuses and measurements at one acquisition instant.

    ``load_priority`` holds dynamic priority overrides; loads not listed keep
    their configured priority.
    """

    timestamp: float
    generator_closed: Mapping[str, bool]
    load_closed: Mapping[str, bool]
    bustie_closed: Mapping[str, bool]
    tie_closed: bool = False
    generator_power: Mapping[str, float] = field(default_factory=dict)
    load_power: Mapping[str, float] = field(default_factory=dict)
    imported_power: float = 0.0
    generator_sr: Mapping[str, float] = field(default_factory=dict)
    load_priority: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in (
            "generator_closed",
            "load_closed",
            "bustie_closed",
            "generator_power",
            "load_power",
            "generator_sr",
            "load_priority",
        ):
            object.__setattr__(self, name, dict(getattr(self, name)))
        for kind, closed, power in (
            ("generator", self.generator_closed, self.generator_power),
            ("load", self.load_closed, self.load_power),
        ):
            for eid, p in power.items():
                if p != 0.0 and not closed.get(eid, False):
                    raise ValueError(f"{kind} {eid!r} is open but carries {p} MW")
        for gid, sr in self.generator_sr.items():
            if sr < 0:
                raise ValueError(f"negative SR {sr} for generator {gid!r}")
        if not self.tie_closed and self.imported_power != 0.0:
            raise ValueError("external tie is open but imported power is non-zero")

    def gen_on(self, gen_id: str) -> bool:
        return self.generator_closed.get(gen_id, False)

    def load_on(self, load_id: str) -> bool:
        return self.load_closed.get(load_id, False)

    def gen_power(self, gen_id: str) -> float:
        return self.generator_power.get(gen_id, 0.0) if self.gen_on(gen_id) else 0.0

    def gen_sr(self, gen_id: str) -> float:
        return self.generator_sr.get(gen_id, 0.0) if self.gen_on(gen_id) else 0.0

    def load_pw(self, load_id: str) -> float:
        return self.load_power.get(load_id, 0.0) if self.load_on(load_id) else 0.0

    def priority(self, load: Load) -> int:
        return self.load_priority.get(load.id, load.priority)

    def with_bustie(self, bustie_id: str, closed: bool) -> "NetworkSnapshot":
        statuses = dict(self.bustie_closed)
        statuses[bustie_id] = closed
        return replace(self, bustie_closed=statuses)


def make_snapshot(
    config: GridConfig,
    *,
    generator_power: Mapping[str, float],
    load_power: Mapping[str, float],
    timestamp: float = 0.0,
    generator_closed: Optional[Mapping[str, bool]] = None,
    load_closed: Optional[Mapping[str, bool]] = None,
    bustie_closed: Optional[Mapping[str, bool]] = None,
    tie_closed: bool = False,
    imported_power: float = 0.0,
    sr_override: "float | Mapping[str, float] | None" = None,
    load_priority: Optional[Mapping[str, int]] = None,
) -> NetworkSnapshot:
    """Assemble a snapshot, evaluating each generator's SR from its curve.

    Breakers default to closed for every element with a power entry and open
    otherwise; busties default to closed.  ``sr_override`` replaces the curve
    with a fixed value (one number for all generators, or a per-generator map).
    """
    if generator_closed is None:
        generator_closed = {g.id: g.id in generator_power for g in config.generators}
    if load_closed is None:
        load_closed = {ld.id: ld.id in load_power for ld in config.loads}
    if bustie_closed is None:
        bustie_closed = {t.id: True for t in config.busties}

    gp = {g.id: (float(generator_power.get(g.id, 0.0)) if generator_closed.get(g.id) else 0.0)
          for g in config.generators}
    lp = {ld.id: (float(load_power.get(ld.id, 0.0)) if load_closed.get(ld.id) else 0.0)
          for ld in config.loads}
    sr = {}
    for g in config.generators:
        if not generator_closed.get(g.id):
            sr[g.id] = 0.0
        elif sr_override is None:
            sr[g.id] = g.sr_at(gp[g.id])
        elif isinstance(sr_override, Mapping):
            sr[g.id] = float(sr_override[g.id]) if g.id in sr_override else g.sr_at(gp[g.id])
        else:
            sr[g.id] = float(sr_override)
    return NetworkSnapshot(
        timestamp=timestamp,
        generator_closed={g.id: bool(generator_closed.get(g.id, False)) for g in config.generators},
        load_closed={ld.id: bool(load_closed.get(ld.id, False)) for ld in config.loads},
        bustie_closed={t.id: bool(bustie_closed[t.id]) for t in config.busties if t.id in bustie_closed},
        tie_closed=bool(tie_closed and config.has_tie),
        generator_power=gp,
        load_power=lp,
        imported_power=float(imported_power) if (tie_closed and config.has_tie) else 0.0,
        generator_sr=sr,
        load_priority=dict(load_priority or {}),
    )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message} [{self.code}]"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def __iter__(self) -> Iterator[Finding]:
        return iter(self.findings)

    def __len__(self):
        return len(self.findings)

    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


def _duplicates(ids: Iterable[str]) -> list[str]:
    seen, dups = set(), []
    for i in ids:
        if i in seen and i not in dups:
            dups.append(i)
        seen.add(i)
    return dups


def validate_config(config: GridConfig) -> ValidationReport:
    """Collect every invariant violation; an empty report means the config is usable."""
    out: list[Finding] = []
    add = lambda code, path, msg: out.append(Finding(code, path, msg))  # noqa: E731

    n_bus = len(config.busbars)
    if not 1 <= n_bus <= MAX_BUSBARS:
        add("busbar-count", "busbars", f"{n_bus} busbars declared, supported range is 1..{MAX_BUSBARS}")
    if not config.nominal_frequency > 0:
        add("frequency", "nominal_frequency", f"must be > 0, got {config.nominal_frequency}")

    for kind, items in (
        ("busbars", config.busbars),
        ("busties", config.busties),
        ("generators", config.generators),
        ("loads", config.loads),
    ):
        for dup in _duplicates(x.id for x in items):
            add("duplicate-id", kind, f"id {dup!r} used more than once")

    bus_ids = {b.id for b in config.busbars}

    def ref(path: str, busbar: str) -> None:
        if busbar not in bus_ids:
            add("dangling-reference", path, f"references unknown busbar {busbar!r}")

    pairs = set()
    for i, t in enumerate(config.busties):
        path = f"busties[{i}]"
        a, b = t.endpoints
        ref(path + ".endpoints[0]", a)
        ref(path + ".endpoints[1]", b)
        if a == b:
            add("bustie-loop", path, f"endpoints must be distinct, got {a!r} twice")
            continue
        key = frozenset((a, b))
        if key in pairs:
            add("duplicate-bustie", path, f"another bustie already joins {a!r} and {b!r}")
        pairs.add(key)

    for i, g in enumerate(config.generators):
        path = f"generators[{i}]"
        ref(path + ".busbar", g.busbar)
        if not g.rated_power > 0:
            add("rating", path + ".rated_power", f"must be > 0, got {g.rated_power}")
        if not g.rated_apparent_power >= g.rated_power:
            add("rating", path + ".rated_apparent_power",
                f"{g.rated_apparent_power} MVA is below rated power {g.rated_power} MW")
        if not g.inertia_constant > 0:
            add("inertia", path + ".inertia_constant", f"must be > 0, got {g.inertia_constant}")
        for j, (_, sr) in enumerate(g.sr_curve):
            if sr < 0:
                add("sr-curve", f"{path}.sr_curve[{j}]", f"SR must be >= 0, got {sr}")

    for i, ld in enumerate(config.loads):
        path = f"loads[{i}]"
        ref(path + ".busbar", ld.busbar)
        if isinstance(ld.priority, bool) or not isinstance(ld.priority, int) or ld.priority < 1:
            add("priority", path + ".priority", f"must be a positive integer, got {ld.priority!r}")

    if config.external_tie is not None:
        ref("external_tie.busbar", config.external_tie.busbar)

    if 1 <= n_bus and all(b in bus_ids for t in config.busties for b in t.endpoints):
        graph = nx.Graph()
        graph.add_nodes_from(bus_ids)
        graph.add_edges_from(t.endpoints for t in config.busties if t.endpoints[0] != t.endpoints[1])
        if not nx.is_connected(graph):
            add("disconnected", "busties", "the busbars are not connected through the declared busties")

    return ValidationReport(tuple(out))


# --------------------------------------------------------------------------
# partitioning


@dataclass(frozen=True)
class SubNetwork:
    """Busbars joined through closed busties, plus the elements attached to them."""

    busbars: tuple[str, ...]
    generators: tuple[str, ...]
    loads: tuple[str, ...]
    tie: Optional[str] = None

    @property
    def id(self) -> str:
        return self.busbars[0]


def partition(config: GridConfig, snapshot: NetworkSnapshot) -> list[SubNetwork]:
    """Split the plant into the connected components of the closed-bustie graph."""
    missing = [t.id for t in config.busties if t.id not in snapshot.bustie_closed]
    if missing:
        raise IncompleteSnapshotError(f"snapshot has no status for bustie(s) {', '.join(missing)}")
    graph = nx.Graph()
    graph.add_nodes_from(b.id for b in config.busbars)
    graph.add_edges_from(t.endpoints for t in config.busties if snapshot.bustie_closed[t.id])
    components = sorted(tuple(sorted(c)) for c in nx.connected_components(graph))
    tie = config.external_tie if config.has_tie else None
    out = []
    for comp in components:
        members = set(comp)
        out.append(SubNetwork(
            busbars=comp,
            generators=tuple(g.id for g in config.generators if g.busbar in members),
            loads=tuple(ld.id for ld in config.loads if ld.busbar in members),
            tie=tie.id if tie is not None and tie.busbar in members else None,
        ))
    return out


def subnetwork_of_busbar(subnets: Sequence[SubNetwork], busbar: str) -> SubNetwork:
    for sn in subnets:
        if busbar in sn.busbars:
            return sn
    raise NotFoundError(f"unknown busbar {busbar!r}")


# --------------------------------------------------------------------------
# events


class EventKind(str, enum.Enum):
    GEN_TRIP = "trip"
    BUSTIE_OPEN = "open"
    BUILDING_LOSS = "building"
    GRID_BLACKOUT = "blackout"


@dataclass(frozen=True)
class Event:
    index: int
    kind: EventKind
    target: str

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.target}"


@dataclass(frozen=True)
class EventCatalog:
    events: tuple[Event, ...]

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i: int) -> Event:
        return self.events[i]

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.events]

    def find(self, kind: EventKind, target: str) -> Event:
        for e in self.events:
            if e.kind == kind and e.target == target:
                return e
        raise NotFoundError(f"no {kind.value} event for {target!r}")

    def by_label(self, label: str) -> Event:
        for e in self.events:
            if e.label == label:
                return e
        raise NotFoundError(f"no event labelled {label!r}")


def enumerate_events(config: GridConfig) -> EventCatalog:
    """Canonical catalog: generator trips, bustie openings, building losses, grid blackout."""
    targets: list[tuple[EventKind, str]] = []
    targets += [(EventKind.GEN_TRIP, g) for g in sorted(g.id for g in config.generators)]
    targets += [(EventKind.BUSTIE_OPEN, t) for t in sorted(t.id for t in config.busties)]
    targets += [(EventKind.BUILDING_LOSS, b) for b in config.buildings]
    if config.has_tie:
        targets.append((EventKind.GRID_BLACKOUT, config.external_tie.id))
    return EventCatalog(tuple(Event(i, k, t) for i, (k, t) in enumerate(targets)))
