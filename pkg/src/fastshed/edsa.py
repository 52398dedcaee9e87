"""Event detection and shedding action (the fast loop)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from .grid_model import EventCatalog, EventKind, GridConfig, NetworkSnapshot, enumerate_events
from .lse import SheddingMatrix, build_shedding_matrix, check_lse_period

DEFAULT_SETTLE_TIME = 3.0


@dataclass(frozen=True)
class FlsParams:
    """Tuning of the fast load shedding loop.

    ``total_delay`` spans event instant to load breaker open (detection,
    processing, communication and breaking time).
    """

    lse_period: float = 1.0
    total_delay: float = 0.2
    settle_time: float = DEFAULT_SETTLE_TIME
    uf_threshold: float = 48.0

    def __post_init__(self):
        check_lse_period(self.lse_period)
        if self.total_delay < 0:
            raise ValueError(f"total_delay must be >= 0, got {self.total_delay}")
        if self.settle_time < 0:
            raise ValueError(f"settle_time must be >= 0, got {self.settle_time}")


@dataclass(frozen=True)
class DetectedEvent:
    event_index: int
    timestamp: float


@dataclass(frozen=True)
class TripCommand:
    load_id: str
    timestamp: float
    event_label: str = ""


class Mode(str, enum.Enum):
    ARMED = "armed"
    INHIBITED = "inhibited"


@dataclass(frozen=True)
class EngineState:
    mode: Mode = Mode.ARMED
    until: float = 0.0
    matrix: Optional[SheddingMatrix] = None
    second_events: tuple[DetectedEvent, ...] = ()


def detect(prev: NetworkSnapshot, next: NetworkSnapshot, catalog: EventCatalog,
           config: GridConfig) -> list[DetectedEvent]:
    """Events whose breakers went closed -> open between two snapshots, in catalog order.

    A building loss replaces the individual trips of its generators when at
    least one of them was closed in ``prev`` and all are open in ``next``.
    """
    fired_buildings = set()
    absorbed = set()
    for building, gens in config.buildings.items():
        closed_before = [g for g in gens if prev.gen_on(g)]
        if closed_before and not any(next.gen_on(g) for g in gens):
            fired_buildings.add(building)
            absorbed.update(closed_before)

    out = []
    for ev in catalog:
        if ev.kind is EventKind.GEN_TRIP:
            hit = prev.gen_on(ev.target) and not next.gen_on(ev.target) and ev.target not in absorbed
        elif ev.kind is EventKind.BUSTIE_OPEN:
            hit = prev.bustie_closed.get(ev.target, False) and not next.bustie_closed.get(ev.target, False)
        elif ev.kind is EventKind.BUILDING_LOSS:
            hit = ev.target in fired_buildings
        else:
            hit = prev.tie_closed and not next.tie_closed
        if hit:
            out.append(DetectedEvent(ev.index, next.timestamp))
    return out


def act(state: EngineState, event: DetectedEvent, matrix: SheddingMatrix, *,
        settle_time: float = DEFAULT_SETTLE_TIME,
        snapshot: Optional[NetworkSnapshot] = None) -> tuple[list[TripCommand], EngineState]:
    """Fire the event's matrix column and start the settle window.

    While inhibited, the event is only recorded for the backup (UFLS) path.
    With ``snapshot`` given, loads already open there are skipped.
    """
    if state.mode is Mode.INHIBITED:
        return [], replace(state, second_events=state.second_events + (event,))
    label = matrix.catalog[event.event_index].label
    cmds = [
        TripCommand(lid, event.timestamp, label)
        for lid in matrix.column(event.event_index)
        if snapshot is None or snapshot.load_on(lid)
    ]
    new_state = replace(state, mode=Mode.INHIBITED, until=event.timestamp + settle_time, matrix=matrix)
    return cmds, new_state


def tick(state: EngineState, now: float,
         recompute: Optional[Callable[[], SheddingMatrix]] = None) -> EngineState:
    """Re-arm once the settle window has elapsed, pulling a fresh matrix if possible."""
    if state.mode is Mode.INHIBITED and now >= state.until:
        matrix = recompute() if recompute is not None else state.matrix
        return replace(state, mode=Mode.ARMED, matrix=matrix)
    return state


@dataclass
class FlsController:
    """Drives LSE and ED-SA over a time-ordered stream of snapshots.

    The matrix used by ED-SA is always the last one published as a whole;
    a new one is computed when the LSE period has elapsed and the engine is
    armed.  ``log`` accumulates every command issued.
    """

    config: GridConfig
    params: FlsParams = field(default_factory=FlsParams)
    catalog: Optional[EventCatalog] = None
    sr_override: "float | dict | None" = None
    state: EngineState = field(default_factory=EngineState)
    log: list = field(default_factory=list)
    detected: list = field(default_factory=list)
    _prev: Optional[NetworkSnapshot] = None
    _last_lse: Optional[float] = None

    def __post_init__(self):
        if self.catalog is None:
            self.catalog = enumerate_events(self.config)

    @property
    def matrix(self) -> Optional[SheddingMatrix]:
        return self.state.matrix

    def publish(self, snapshot: NetworkSnapshot) -> SheddingMatrix:
        matrix = build_shedding_matrix(self.config, snapshot, self.catalog)
        self.state = replace(self.state, matrix=matrix)
        self._last_lse = snapshot.timestamp
        return matrix

    def lse_due(self, now: float) -> bool:
        # small slack so float time bases do not skip a period
        return self._last_lse is None or now - self._last_lse >= self.params.lse_period - 1e-9

    def step(self, snapshot: NetworkSnapshot, *, run_lse: bool = True) -> list[TripCommand]:
        """Process one acquisition; returns the commands issued at this instant."""
        now = snapshot.timestamp
        self.state = tick(self.state, now, recompute=lambda: self._fresh(snapshot))
        issued: list[TripCommand] = []
        if self._prev is not None:
            for ev in detect(self._prev, snapshot, self.catalog, self.config):
                self.detected.append(ev)
                if self.state.matrix is None:
                    continue
                cmds, self.state = act(self.state, ev, self.state.matrix,
                                       settle_time=self.params.settle_time, snapshot=snapshot)
                issued.extend(cmds)
        if run_lse and self.state.mode is Mode.ARMED and self.lse_due(now):
            self.publish(snapshot)
        self._prev = snapshot
        self.log.extend(issued)
        return issued

    def _fresh(self, snapshot: NetworkSnapshot) -> SheddingMatrix:
        self._last_lse = snapshot.timestamp
        return build_shedding_matrix(self.config, snapshot, self.catalog)

    def run(self, snapshots: Iterable[NetworkSnapshot]) -> list[TripCommand]:
        for snap in snapshots:
            self.step(snap)
        return list(self.log)
