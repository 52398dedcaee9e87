"""IEC 61131-3 Structured Text generation for the LSE and ED-SA blocks.

The plant topology is baked in as global constants (busbar membership,
buildings, event catalog).  Runtime quantities arrive as block inputs.
Every loop runs in configuration order and every sum is accumulated in the
same order as :mod:`fastshed.lse`, so the generated code makes the same
floating-point decisions as the native engine.

Array bounds are ``1..max(N, 1)`` so an empty element class still yields a
valid declaration; loops are bounded by the ``N_*`` constants instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from ..grid_model import EventCatalog, EventKind, GridConfig, NetworkSnapshot, enumerate_events
from ..lse import SheddingMatrix
from .interp import Program, parse, run_block

KIND_CODE = {
    EventKind.GEN_TRIP: 1,
    EventKind.BUSTIE_OPEN: 2,
    EventKind.BUILDING_LOSS: 3,
    EventKind.GRID_BLACKOUT: 4,
}
INDENT = "    "


@dataclass(frozen=True)
class EmitOptions:
    lse_block: str = "FB_LSE"
    edsa_block: str = "FB_EDSA"
    real_type: str = "LREAL"
    index_type: str = "DINT"

    def __post_init__(self):
        if self.real_type not in ("LREAL", "REAL"):
            raise ValueError(f"real_type must be LREAL or REAL, got {self.real_type!r}")
        if self.index_type not in ("INT", "DINT"):
            raise ValueError(f"index_type must be INT or DINT, got {self.index_type!r}")


@dataclass(frozen=True, eq=False)
class StProgram:
    source: str
    constants: Mapping[str, int]
    lse_block: str
    edsa_block: str
    config: GridConfig = field(repr=False)
    catalog: EventCatalog = field(repr=False)

    @cached_property
    def parsed(self) -> Program:
        return parse(self.source)

    def write(self, path: "str | Path") -> None:
        Path(path).write_bytes(self.source.encode("utf-8"))


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    return str(value)


def _array_init(values: list, pad: Any) -> str:
    values = values or [pad]
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def _bound(n: int) -> int:
    return max(n, 1)


class _Writer:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def __call__(self, text: str = "") -> None:
        self.lines.append(INDENT * self.depth + text if text else "")

    def open(self, text: str) -> None:
        self(text)
        self.depth += 1

    def close(self, text: str) -> None:
        self.depth -= 1
        self(text)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _model(config: GridConfig, catalog: EventCatalog) -> dict:
    bus_index = {b.id: i + 1 for i, b in enumerate(config.busbars)}
    gen_index = {g.id: i + 1 for i, g in enumerate(config.generators)}
    tie_index = {t.id: i + 1 for i, t in enumerate(config.busties)}
    building_index = {b: i + 1 for i, b in enumerate(config.buildings)}
    rank = {lid: r + 1 for r, lid in enumerate(sorted(ld.id for ld in config.loads))}
    targets = []
    for ev in catalog:
        if ev.kind is EventKind.GEN_TRIP:
            targets.append(gen_index[ev.target])
        elif ev.kind is EventKind.BUSTIE_OPEN:
            targets.append(tie_index[ev.target])
        elif ev.kind is EventKind.BUILDING_LOSS:
            targets.append(building_index[ev.target])
        else:
            targets.append(0)
    tie = config.external_tie if config.has_tie else None
    return {
        "N_BUSBARS": len(config.busbars),
        "N_TIES": len(config.busties),
        "N_GENS": len(config.generators),
        "N_LOADS": len(config.loads),
        "N_BUILDINGS": len(building_index),
        "N_EVENTS": len(catalog),
        "HAS_EXT": tie is not None,
        "EXT_BUS": bus_index[tie.busbar] if tie is not None else 1,
        "TIE_A": [bus_index[t.endpoints[0]] for t in config.busties],
        "TIE_B": [bus_index[t.endpoints[1]] for t in config.busties],
        "GEN_BUS": [bus_index[g.busbar] for g in config.generators],
        "GEN_BLDG": [building_index[g.building] for g in config.generators],
        "LOAD_BUS": [bus_index[ld.busbar] for ld in config.loads],
        "LOAD_SHEDDABLE": [ld.sheddable for ld in config.loads],
        "LOAD_RANK": [rank[ld.id] for ld in config.loads],
        "LOAD_PRIO": [ld.priority for ld in config.loads],
        "EV_KIND": [KIND_CODE[ev.kind] for ev in catalog],
        "EV_TARGET": targets,
    }


def _emit_globals(w: _Writer, m: dict, it: str) -> None:
    nt, ng = _bound(m["N_TIES"]), _bound(m["N_GENS"])
    nl, ne = _bound(m["N_LOADS"]), _bound(m["N_EVENTS"])
    w.open("VAR_GLOBAL CONSTANT")
    for name in ("N_BUSBARS", "N_TIES", "N_GENS", "N_LOADS", "N_BUILDINGS", "N_EVENTS"):
        w(f"{name} : {it} := {m[name]};")
    w(f"HAS_EXT : BOOL := {_fmt(m['HAS_EXT'])};")
    w(f"EXT_BUS : {it} := {m['EXT_BUS']};")
    arrays = [
        ("TIE_A", nt, it, 0), ("TIE_B", nt, it, 0),
        ("GEN_BUS", ng, it, 0), ("GEN_BLDG", ng, it, 0),
        ("LOAD_BUS", nl, it, 0), ("LOAD_SHEDDABLE", nl, "BOOL", False), ("LOAD_RANK", nl, it, 0),
        ("EV_KIND", ne, it, 0), ("EV_TARGET", ne, it, 0),
    ]
    for name, n, typ, pad in arrays:
        w(f"{name} : ARRAY[1..{n}] OF {typ} := {_array_init(m[name], pad)};")
    w.close("END_VAR")


def _emit_label_pass(w: _Writer, lab: str, skip: Optional[str]) -> None:
    """Min-label propagation over closed busties; N_BUSBARS passes reach a fixpoint."""
    w.open("FOR b := 1 TO N_BUSBARS DO")
    w(f"{lab}[b] := b;")
    w.close("END_FOR;")
    w.open("FOR j := 1 TO N_BUSBARS DO")
    w.open("FOR t := 1 TO N_TIES DO")
    cond = "TIE_CLOSED[t]" if skip is None else f"TIE_CLOSED[t] AND t <> {skip}"
    w.open(f"IF {cond} THEN")
    w.open(f"IF {lab}[TIE_A[t]] < {lab}[TIE_B[t]] THEN")
    w(f"{lab}[TIE_B[t]] := {lab}[TIE_A[t]];")
    w.depth -= 1
    w.open(f"ELSIF {lab}[TIE_B[t]] < {lab}[TIE_A[t]] THEN")
    w(f"{lab}[TIE_A[t]] := {lab}[TIE_B[t]];")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.close("END_FOR;")


def _emit_lse(w: _Writer, m: dict, name: str, rt: str, it: str) -> None:
    nb, nt, ng = _bound(m["N_BUSBARS"]), _bound(m["N_TIES"]), _bound(m["N_GENS"])
    nl, ne = _bound(m["N_LOADS"]), _bound(m["N_EVENTS"])
    w.open(f"FUNCTION_BLOCK {name}")
    w.open("VAR_INPUT")
    w(f"GEN_CLOSED : ARRAY[1..{ng}] OF BOOL;")
    w(f"GEN_P : ARRAY[1..{ng}] OF {rt};")
    w(f"GEN_SR : ARRAY[1..{ng}] OF {rt};")
    w(f"LOAD_CLOSED : ARRAY[1..{nl}] OF BOOL;")
    w(f"LOAD_P : ARRAY[1..{nl}] OF {rt};")
    w(f"LOAD_PRIO : ARRAY[1..{nl}] OF DINT := {_array_init(m['LOAD_PRIO'], 1)};")
    w(f"TIE_CLOSED : ARRAY[1..{nt}] OF BOOL;")
    w("EXT_CLOSED : BOOL;")
    w(f"EXT_P : {rt};")
    w.close("END_VAR")
    w.open("VAR_OUTPUT")
    w(f"SM : ARRAY[1..{nl}, 1..{ne}] OF BOOL;")
    w(f"INFEASIBLE : ARRAY[1..{ne}] OF BOOL;")
    w.close("END_VAR")
    w.open("VAR")
    w(f"b, c, e, g, j, k, l, s, t, best : {it};")
    w(f"COMP : ARRAY[1..{nb}] OF {it};")
    w(f"LAB : ARRAY[1..{nb}] OF {it};")
    w(f"PM : ARRAY[1..{nb}] OF {rt};")
    w(f"PMSET : ARRAY[1..{nb}] OF BOOL;")
    w(f"MARK : ARRAY[1..{nl}] OF BOOL;")
    w(f"acc, gen, load, ps : {rt};")
    w("hit, done : BOOL;")
    w.close("END_VAR")
    w()
    w("(* sub-networks under the present bustie statuses *)")
    _emit_label_pass(w, "COMP", None)
    w()
    w.open("FOR e := 1 TO N_EVENTS DO")
    w("INFEASIBLE[e] := FALSE;")
    w.open("FOR l := 1 TO N_LOADS DO")
    w("SM[l, e] := FALSE;")
    w("MARK[l] := FALSE;")
    w.close("END_FOR;")
    w.open("FOR b := 1 TO N_BUSBARS DO")
    w("PMSET[b] := FALSE;")
    w("PM[b] := 0.0;")
    w("LAB[b] := COMP[b];")
    w.close("END_FOR;")
    w("k := EV_TARGET[e];")

    w("(* generator trip *)")
    w.open("IF EV_KIND[e] = 1 THEN")
    w.open("IF GEN_CLOSED[k] THEN")
    w("c := COMP[GEN_BUS[k]];")
    w("acc := 0.0;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_CLOSED[g] AND COMP[GEN_BUS[g]] = c THEN")
    w("acc := acc + GEN_SR[g];")
    w.close("END_IF;")
    w.close("END_FOR;")
    w("PM[c] := GEN_P[k] - (acc - GEN_SR[k]);")
    w("PMSET[c] := TRUE;")
    w.close("END_IF;")

    w.depth -= 1
    w("(* bustie opening: each new island covers its import from its own reserve *)")
    w.open("ELSIF EV_KIND[e] = 2 THEN")
    w.open("IF TIE_CLOSED[k] THEN")
    _emit_label_pass(w, "LAB", "k")
    w.open("IF LAB[TIE_A[k]] <> LAB[TIE_B[k]] THEN")
    w.open("FOR s := 1 TO 2 DO")
    w.open("IF s = 1 THEN")
    w("c := LAB[TIE_A[k]];")
    w.depth -= 1
    w.open("ELSE")
    w("c := LAB[TIE_B[k]];")
    w.close("END_IF;")
    w("load := 0.0;")
    w("gen := 0.0;")
    w("acc := 0.0;")
    w.open("FOR l := 1 TO N_LOADS DO")
    w.open("IF LOAD_CLOSED[l] AND LAB[LOAD_BUS[l]] = c THEN")
    w("load := load + LOAD_P[l];")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_CLOSED[g] AND LAB[GEN_BUS[g]] = c THEN")
    w("gen := gen + GEN_P[g];")
    w("acc := acc + GEN_SR[g];")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("IF HAS_EXT AND EXT_CLOSED AND LAB[EXT_BUS] = c THEN")
    w("gen := gen + EXT_P;")
    w.close("END_IF;")
    w("PM[c] := load - gen - acc;")
    w("PMSET[c] := TRUE;")
    w.close("END_FOR;")
    w.close("END_IF;")
    w.close("END_IF;")

    w.depth -= 1
    w("(* building loss *)")
    w.open("ELSIF EV_KIND[e] = 3 THEN")
    w("hit := FALSE;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_BLDG[g] = k AND GEN_CLOSED[g] THEN")
    w("hit := TRUE;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("IF hit THEN")
    w.open("FOR c := 1 TO N_BUSBARS DO")
    w("hit := FALSE;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_BLDG[g] = k AND COMP[GEN_BUS[g]] = c THEN")
    w("hit := TRUE;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("IF hit THEN")
    w("gen := 0.0;")
    w("acc := 0.0;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_CLOSED[g] AND COMP[GEN_BUS[g]] = c THEN")
    w.open("IF GEN_BLDG[g] = k THEN")
    w("gen := gen + GEN_P[g];")
    w.depth -= 1
    w.open("ELSE")
    w("acc := acc + GEN_SR[g];")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w("PM[c] := gen - acc;")
    w("PMSET[c] := TRUE;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.close("END_IF;")

    w.depth -= 1
    w("(* loss of the external grid *)")
    w.open("ELSIF EV_KIND[e] = 4 THEN")
    w.open("IF EXT_CLOSED THEN")
    w("c := COMP[EXT_BUS];")
    w("acc := 0.0;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_CLOSED[g] AND COMP[GEN_BUS[g]] = c THEN")
    w("acc := acc + GEN_SR[g];")
    w.close("END_IF;")
    w.close("END_FOR;")
    w("PM[c] := EXT_P - acc;")
    w("PMSET[c] := TRUE;")
    w.close("END_IF;")
    w.close("END_IF;")
    w()
    w("(* greedy selection: lowest priority, then largest power, then load id *)")
    w.open("FOR c := 1 TO N_BUSBARS DO")
    w.open("IF PMSET[c] THEN")
    w.open("IF PM[c] > 0.0 THEN")
    w("ps := 0.0;")
    w("done := FALSE;")
    w.open("FOR j := 1 TO N_LOADS DO")
    w.open("IF NOT done THEN")
    w("best := 0;")
    w.open("FOR l := 1 TO N_LOADS DO")
    w.open("IF NOT MARK[l] AND LOAD_SHEDDABLE[l] AND LOAD_CLOSED[l] AND LAB[LOAD_BUS[l]] = c THEN")
    w.open("IF best = 0 THEN")
    w("best := l;")
    w.depth -= 1
    w.open("ELSIF LOAD_PRIO[l] < LOAD_PRIO[best] THEN")
    w("best := l;")
    w.depth -= 1
    w.open("ELSIF LOAD_PRIO[l] = LOAD_PRIO[best] AND LOAD_P[l] > LOAD_P[best] THEN")
    w("best := l;")
    w.depth -= 1
    w.open("ELSIF LOAD_PRIO[l] = LOAD_PRIO[best] AND LOAD_P[l] = LOAD_P[best] "
           "AND LOAD_RANK[l] < LOAD_RANK[best] THEN")
    w("best := l;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("IF best = 0 THEN")
    w("done := TRUE;")
    w.depth -= 1
    w.open("ELSE")
    w("MARK[best] := TRUE;")
    w("SM[best, e] := TRUE;")
    w("ps := ps + LOAD_P[best];")
    w.open("IF ps > PM[c] THEN")
    w("done := TRUE;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.open("IF NOT (ps > PM[c]) THEN")
    w("INFEASIBLE[e] := TRUE;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w.close("END_FOR;")
    w.close("END_FUNCTION_BLOCK")


def _emit_edsa(w: _Writer, m: dict, name: str, it: str) -> None:
    nt, ng = _bound(m["N_TIES"]), _bound(m["N_GENS"])
    nl, ne, nk = _bound(m["N_LOADS"]), _bound(m["N_EVENTS"]), _bound(m["N_BUILDINGS"])
    w.open(f"FUNCTION_BLOCK {name}")
    w.open("VAR_INPUT")
    w(f"PREV_GEN_CLOSED, GEN_CLOSED : ARRAY[1..{ng}] OF BOOL;")
    w(f"PREV_TIE_CLOSED, TIE_CLOSED : ARRAY[1..{nt}] OF BOOL;")
    w("PREV_EXT_CLOSED, EXT_CLOSED : BOOL;")
    w(f"LOAD_CLOSED : ARRAY[1..{nl}] OF BOOL;")
    w(f"SM : ARRAY[1..{nl}, 1..{ne}] OF BOOL;")
    w("INHIBITED : BOOL;")
    w.close("END_VAR")
    w.open("VAR_OUTPUT")
    w(f"DETECTED : ARRAY[1..{ne}] OF BOOL;")
    w(f"TRIP : ARRAY[1..{nl}] OF BOOL;")
    w(f"FIRED : {it};")
    w("START_SETTLE : BOOL;")
    w.close("END_VAR")
    w.open("VAR")
    w(f"e, g, k, l, cnt : {it};")
    w(f"BFIRE : ARRAY[1..{nk}] OF BOOL;")
    w("anyon : BOOL;")
    w.close("END_VAR")
    w()
    w("(* a building is lost when every one of its running units drops out *)")
    w.open("FOR k := 1 TO N_BUILDINGS DO")
    w("cnt := 0;")
    w("anyon := FALSE;")
    w.open("FOR g := 1 TO N_GENS DO")
    w.open("IF GEN_BLDG[g] = k THEN")
    w.open("IF PREV_GEN_CLOSED[g] THEN")
    w("cnt := cnt + 1;")
    w.close("END_IF;")
    w.open("IF GEN_CLOSED[g] THEN")
    w("anyon := TRUE;")
    w.close("END_IF;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w("BFIRE[k] := cnt >= 1 AND NOT anyon;")
    w.close("END_FOR;")
    w()
    w("FIRED := 0;")
    w("START_SETTLE := FALSE;")
    w.open("FOR e := 1 TO N_EVENTS DO")
    w("k := EV_TARGET[e];")
    w.open("IF EV_KIND[e] = 1 THEN")
    w("DETECTED[e] := PREV_GEN_CLOSED[k] AND NOT GEN_CLOSED[k] AND NOT BFIRE[GEN_BLDG[k]];")
    w.depth -= 1
    w.open("ELSIF EV_KIND[e] = 2 THEN")
    w("DETECTED[e] := PREV_TIE_CLOSED[k] AND NOT TIE_CLOSED[k];")
    w.depth -= 1
    w.open("ELSIF EV_KIND[e] = 3 THEN")
    w("DETECTED[e] := BFIRE[k];")
    w.depth -= 1
    w.open("ELSIF EV_KIND[e] = 4 THEN")
    w("DETECTED[e] := PREV_EXT_CLOSED AND NOT EXT_CLOSED;")
    w.depth -= 1
    w.open("ELSE")
    w("DETECTED[e] := FALSE;")
    w.close("END_IF;")
    w.open("IF DETECTED[e] AND FIRED = 0 THEN")
    w("FIRED := e;")
    w.close("END_IF;")
    w.close("END_FOR;")
    w()
    w.open("FOR l := 1 TO N_LOADS DO")
    w("TRIP[l] := FALSE;")
    w.close("END_FOR;")
    w("(* only the first detected event acts; later ones fall to the backup path *)")
    w.open("IF FIRED > 0 AND NOT INHIBITED THEN")
    w("START_SETTLE := TRUE;")
    w.open("FOR l := 1 TO N_LOADS DO")
    w("TRIP[l] := SM[l, FIRED] AND LOAD_CLOSED[l];")
    w.close("END_FOR;")
    w.close("END_IF;")
    w.close("END_FUNCTION_BLOCK")


def emit_st(config: GridConfig, options: Optional[EmitOptions] = None,
            catalog: Optional[EventCatalog] = None) -> StProgram:
    """Generate the ST source for ``config``; output is byte-stable for equal inputs."""
    options = options or EmitOptions()
    catalog = catalog if catalog is not None else enumerate_events(config)
    m = _model(config, catalog)
    it, rt = options.index_type, options.real_type
    w = _Writer()
    w("(* Fast load shedding: load selection and event detection blocks *)")
    w(f"(* busbars: {', '.join(b.id for b in config.busbars) or '-'} *)")
    w(f"(* loads, row order: {', '.join(ld.id for ld in config.loads) or '-'} *)")
    w(f"(* events, column order: {', '.join(catalog.labels) or '-'} *)")
    w()
    _emit_globals(w, m, it)
    w()
    _emit_lse(w, m, options.lse_block, rt, it)
    w()
    _emit_edsa(w, m, options.edsa_block, it)
    constants = {k: m[k] for k in ("N_BUSBARS", "N_TIES", "N_GENS", "N_LOADS", "N_BUILDINGS", "N_EVENTS")}
    return StProgram(w.text(), constants, options.lse_block, options.edsa_block, config, catalog)


# --------------------------------------------------------------------------
# bridging to the native data model


def _pad(values: list, pad: Any) -> list:
    return values or [pad]


def lse_inputs(config: GridConfig, snapshot: NetworkSnapshot, *, with_priorities: bool = True) -> dict:
    """FB_LSE inputs for ``snapshot``; open elements contribute zero power and reserve."""
    gens, loads = config.generators, config.loads
    out = {
        "GEN_CLOSED": _pad([snapshot.gen_on(g.id) for g in gens], False),
        "GEN_P": _pad([float(snapshot.gen_power(g.id)) for g in gens], 0.0),
        "GEN_SR": _pad([float(snapshot.gen_sr(g.id)) for g in gens], 0.0),
        "LOAD_CLOSED": _pad([snapshot.load_on(ld.id) for ld in loads], False),
        "LOAD_P": _pad([float(snapshot.load_pw(ld.id)) for ld in loads], 0.0),
        "TIE_CLOSED": _pad([bool(snapshot.bustie_closed[t.id]) for t in config.busties], False),
        "EXT_CLOSED": bool(snapshot.tie_closed) and config.has_tie,
        "EXT_P": float(snapshot.imported_power) if config.has_tie else 0.0,
    }
    if with_priorities:
        out["LOAD_PRIO"] = _pad([snapshot.priority(ld) for ld in loads], 1)
    return out


def run_lse_st(program: StProgram, snapshot: NetworkSnapshot) -> SheddingMatrix:
    """Execute the generated LSE block and repackage its outputs as a matrix."""
    config, catalog = program.config, program.catalog
    out = run_block(program.parsed, program.lse_block, lse_inputs(config, snapshot))
    n_l, n_e = len(config.loads), len(catalog)
    entries = np.array([[bool(v) for v in row[:n_e]] for row in out["SM"][:n_l]], dtype=np.uint8)
    return SheddingMatrix(
        tuple(ld.id for ld in config.loads), catalog, entries.reshape(n_l, n_e), snapshot.timestamp,
        tuple(bool(v) for v in out["INFEASIBLE"][:n_e]),
    )


def edsa_inputs(config: GridConfig, prev: NetworkSnapshot, next: NetworkSnapshot,
                matrix: SheddingMatrix, inhibited: bool) -> dict:
    gens, ties = config.generators, config.busties
    n_l, n_e = len(config.loads), len(matrix.catalog)
    sm = [[bool(matrix.entries[r, c]) for c in range(n_e)] or [False] for r in range(n_l)]
    if not sm:
        sm = [[False] * max(n_e, 1)]
    return {
        "PREV_GEN_CLOSED": _pad([prev.gen_on(g.id) for g in gens], False),
        "GEN_CLOSED": _pad([next.gen_on(g.id) for g in gens], False),
        "PREV_TIE_CLOSED": _pad([bool(prev.bustie_closed.get(t.id, False)) for t in ties], False),
        "TIE_CLOSED": _pad([bool(next.bustie_closed.get(t.id, False)) for t in ties], False),
        "PREV_EXT_CLOSED": bool(prev.tie_closed),
        "EXT_CLOSED": bool(next.tie_closed),
        "LOAD_CLOSED": _pad([next.load_on(ld.id) for ld in config.loads], False),
        "SM": sm,
        "INHIBITED": bool(inhibited),
    }


def run_edsa_st(program: StProgram, prev: NetworkSnapshot, next: NetworkSnapshot,
                matrix: SheddingMatrix, inhibited: bool = False) -> dict:
    """Execute the generated ED-SA block; returns detected event indices and tripped load ids."""
    config, catalog = program.config, program.catalog
    out = run_block(program.parsed, program.edsa_block, edsa_inputs(config, prev, next, matrix, inhibited))
    n_e = len(catalog)
    return {
        "detected": [i for i, v in enumerate(out["DETECTED"][:n_e]) if v],
        "trip": [ld.id for ld, v in zip(config.loads, out["TRIP"]) if v],
        "fired": out["FIRED"] - 1 if out["FIRED"] > 0 else None,
        "start_settle": out["START_SETTLE"],
    }


def interpret_st(program: "StProgram | str", inputs: Mapping[str, Any], block: Optional[str] = None) -> dict:
    """Run one call of a function block; ``block`` defaults to the LSE block (or the only block)."""
    if isinstance(program, StProgram):
        return run_block(program.parsed, block or program.lse_block, inputs)
    parsed = parse(program)
    if block is None:
        if len(parsed.blocks) != 1:
            raise ValueError("source declares several function blocks; name one")
        block = next(iter(parsed.blocks))
    return run_block(parsed, block, inputs)
