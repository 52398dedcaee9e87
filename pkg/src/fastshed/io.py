"""Plant, scenario and snapshot documents (TOML or JSON) and the CSV outputs.

Every document carries ``format_version = 1``.  Unknown keys are rejected
and every problem is reported with its field path (``generators[2].busbar``).
Units are listed next to each key in the schemas below.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import GovernorParams, ScriptedEvent, SimScenario, SimTrace
from .edsa import FlsParams, TripCommand
from .errors import ConfigError
from .grid_model import (
    Busbar,
    Bustie,
    EventKind,
    ExternalTie,
    Finding,
    Generator,
    GridConfig,
    Load,
    NetworkSnapshot,
    make_snapshot,
    validate_config,
)
from .lse import SheddingMatrix

FORMAT_VERSION = 1

# key -> (python type(s), unit, required)
NUM = (int, float)
PLANT_SCHEMA = {
    "format_version": (int, "", True),
    "nominal_frequency": (NUM, "Hz", False),
    "fls": (dict, "", False),
    "governor_defaults": (dict, "", False),
    "busbars": (list, "", True),
    "busties": (list, "", False),
    "generators": (list, "", False),
    "loads": (list, "", False),
    "external_tie": (dict, "", False),
}
FLS_SCHEMA = {
    "lse_period": (NUM, "s", False),
    "total_delay": (NUM, "s", False),
    "settle_time": (NUM, "s", False),
    "uf_threshold": (NUM, "Hz", False),
}
GOVERNOR_SCHEMA = {
    "droop": (NUM, "pu", False),
    "t_gov": (NUM, "s", False),
    "t_turb": (NUM, "s", False),
    "p_max": (NUM, "MW", False),
    "p_min": (NUM, "MW", False),
}
BUSBAR_SCHEMA = {"id": (str, "", True), "name": (str, "", False)}
BUSTIE_SCHEMA = {"id": (str, "", True), "endpoints": (list, "", True)}
GENERATOR_SCHEMA = {
    "id": (str, "", True),
    "busbar": (str, "", True),
    "building": (str, "", True),
    "rated_power": (NUM, "MW", True),
    "rated_apparent_power": (NUM, "MVA", True),
    "inertia_constant": (NUM, "s", True),
    "sr_curve": (list, "[MW, MW] pairs", False),
    "governor": (dict, "", False),
}
LOAD_SCHEMA = {
    "id": (str, "", True),
    "busbar": (str, "", True),
    "priority": (int, "", True),
    "sheddable": (bool, "", False),
}
TIE_SCHEMA = {"id": (str, "", True), "busbar": (str, "", True), "present": (bool, "", False)}
SCENARIO_SCHEMA = {
    "format_version": (int, "", True),
    "duration": (NUM, "s", False),
    "dt": (NUM, "s", False),
    "total_delay": (NUM, "s", False),
    "sr_parameter": ((int, float, dict), "MW", False),
    "uf_threshold": (NUM, "Hz", False),
    "relay_pickup": (NUM, "s", False),
    "imported_power": (NUM, "MW", False),
    "tie_closed": (bool, "", False),
    "dispatch": (dict, "MW per generator", True),
    "loads": (dict, "MW per load", True),
    "busties": (dict, "closed flag per bustie", False),
    "events": (list, "", False),
}
EVENT_SCHEMA = {"time": (NUM, "s", True), "kind": (str, "", True), "target": (str, "", False)}
SNAPSHOT_SCHEMA = {
    "format_version": (int, "", True),
    "timestamp": (NUM, "s", False),
    "imported_power": (NUM, "MW", False),
    "tie_closed": (bool, "", False),
    "sr_override": ((int, float, dict), "MW", False),
    "generators": (dict, "", True),
    "loads": (dict, "", True),
    "busties": (dict, "", False),
}
SNAP_GEN_SCHEMA = {"closed": (bool, "", False), "power": (NUM, "MW", False), "sr": (NUM, "MW", False)}
SNAP_LOAD_SCHEMA = {"closed": (bool, "", False), "power": (NUM, "MW", False), "priority": (int, "", False)}


class _Reader:
    """Collects findings while walking a parsed document."""

    def __init__(self, source: str):
        self.source = source
        self.findings: list[Finding] = []

    def error(self, path: str, msg: str, code: str = "schema") -> None:
        self.findings.append(Finding(code, path, msg))

    def table(self, data: Any, schema: Mapping, path: str) -> dict:
        if not isinstance(data, dict):
            self.error(path or "<root>", f"expected a table, got {type(data).__name__}")
            return {}
        out = {}
        for key in data:
            if key not in schema:
                self.error(_join(path, key), "unknown key")
        for key, (types, unit, required) in schema.items():
            if key not in data:
                if required:
                    self.error(_join(path, key), "missing required key")
                continue
            value = data[key]
            if isinstance(value, bool) and bool not in _as_tuple(types):
                self.error(_join(path, key), f"expected {_type_name(types)}, got bool")
            elif not isinstance(value, types):
                self.error(_join(path, key), f"expected {_type_name(types)}, got {type(value).__name__}")
            else:
                out[key] = value
        return out

    def raise_if_any(self, what: str) -> None:
        if self.findings:
            lines = "\n".join(f"  {f}" for f in self.findings)
            raise ConfigError(f"{self.source}: invalid {what}:\n{lines}", self.findings)


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _type_name(t) -> str:
    names = {int: "integer", float: "number", str: "string", bool: "boolean", list: "array", dict: "table"}
    return " or ".join(dict.fromkeys(names.get(x, x.__name__) for x in _as_tuple(t)))


def _join(path: str, key: Any) -> str:
    return f"{path}.{key}" if path else str(key)


def parse_document(text: str, source: str = "<string>", fmt: Optional[str] = None) -> dict:
    """Parse TOML (default) or JSON text; raises ConfigError with line information."""
    if not text.strip():
        raise ConfigError(f"{source}: empty document")
    fmt = fmt or ("json" if source.endswith(".json") else "toml")
    try:
        if fmt == "json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a table")
    return data


def read_document(path: "str | Path") -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_document(text, str(path))


def _check_version(r: _Reader, doc: dict) -> None:
    v = doc.get("format_version")
    if isinstance(v, int) and v != FORMAT_VERSION:
        r.error("format_version", f"unsupported version {v}, expected {FORMAT_VERSION}")


# --------------------------------------------------------------------------
# plant


@dataclass(frozen=True)
class PlantFile:
    config: GridConfig
    fls: FlsParams = field(default_factory=FlsParams)
    governors: Mapping[str, GovernorParams] = field(default_factory=dict)


def _governor(r: _Reader, data, path: str, base: Optional[dict] = None) -> Optional[dict]:
    fields = dict(base or {})
    fields.update(r.table(data, GOVERNOR_SCHEMA, path))
    return fields


def plant_from_dict(doc: dict, source: str = "<plant>", validate: bool = True) -> PlantFile:
    r = _Reader(source)
    top = r.table(doc, PLANT_SCHEMA, "")
    _check_version(r, top)

    busbars = []
    for i, item in enumerate(top.get("busbars", [])):
        d = r.table(item, BUSBAR_SCHEMA, f"busbars[{i}]")
        if "id" in d:
            busbars.append(Busbar(d["id"], d.get("name", "")))
    busties = []
    for i, item in enumerate(top.get("busties", [])):
        path = f"busties[{i}]"
        d = r.table(item, BUSTIE_SCHEMA, path)
        ends = d.get("endpoints")
        if ends is not None and (len(ends) != 2 or not all(isinstance(e, str) for e in ends)):
            r.error(path + ".endpoints", "expected two busbar ids")
            continue
        if len(d) == 2:
            busties.append(Bustie(d["id"], (ends[0], ends[1])))

    defaults = _governor(r, top.get("governor_defaults", {}), "governor_defaults")
    generators, governors = [], {}
    for i, item in enumerate(top.get("generators", [])):
        path = f"generators[{i}]"
        d = r.table(item, GENERATOR_SCHEMA, path)
        curve = []
        for j, pt in enumerate(d.get("sr_curve", [])):
            if (not isinstance(pt, list) or len(pt) != 2
                    or not all(isinstance(v, NUM) and not isinstance(v, bool) for v in pt)):
                r.error(f"{path}.sr_curve[{j}]", "expected [output MW, SR MW]")
            else:
                curve.append((float(pt[0]), float(pt[1])))
        gov = _governor(r, d.get("governor", {}), path + ".governor", defaults)
        if all(k in d for k in ("id", "busbar", "building", "rated_power", "rated_apparent_power",
                                "inertia_constant")):
            generators.append(Generator(d["id"], d["busbar"], d["building"], float(d["rated_power"]),
                                        float(d["rated_apparent_power"]), float(d["inertia_constant"]),
                                        tuple(curve)))
            try:
                governors[d["id"]] = GovernorParams(**gov)
            except ValueError as exc:
                r.error(path + ".governor", str(exc))
    loads = []
    for i, item in enumerate(top.get("loads", [])):
        d = r.table(item, LOAD_SCHEMA, f"loads[{i}]")
        if all(k in d for k in ("id", "busbar", "priority")):
            loads.append(Load(d["id"], d["busbar"], d["priority"], d.get("sheddable", True)))
    tie = None
    if "external_tie" in top:
        d = r.table(top["external_tie"], TIE_SCHEMA, "external_tie")
        if "id" in d and "busbar" in d:
            tie = ExternalTie(d["id"], d["busbar"], d.get("present", True))

    fls_fields = r.table(top.get("fls", {}), FLS_SCHEMA, "fls")
    try:
        fls = FlsParams(**{k: float(v) for k, v in fls_fields.items()})
    except ValueError as exc:
        r.error("fls", str(exc))
        fls = FlsParams()
    r.raise_if_any("plant file")

    config = GridConfig(tuple(busbars), tuple(busties), tuple(generators), tuple(loads), tie,
                        float(top.get("nominal_frequency", 50.0)))
    if validate:
        report = validate_config(config)
        if not report.ok:
            r.findings.extend(report.findings)
            r.raise_if_any("plant configuration")
    return PlantFile(config, fls, governors)


def load_config(path: "str | Path", validate: bool = True) -> PlantFile:
    """Read and validate a plant file."""
    return plant_from_dict(read_document(path), str(path), validate)


def _num(v) -> str:
    return repr(float(v))


def plant_to_toml(plant: PlantFile) -> str:
    """Serialize a plant back to the TOML notation ``load_config`` reads."""
    cfg = plant.config
    out = [f"format_version = {FORMAT_VERSION}", f"nominal_frequency = {_num(cfg.nominal_frequency)}  # Hz", ""]
    f = plant.fls
    out += ["[fls]", f"lse_period = {_num(f.lse_period)}  # s", f"total_delay = {_num(f.total_delay)}  # s",
            f"settle_time = {_num(f.settle_time)}  # s", f"uf_threshold = {_num(f.uf_threshold)}  # Hz", ""]
    for b in cfg.busbars:
        out += ["[[busbars]]", f"id = {json.dumps(b.id)}", f"name = {json.dumps(b.name)}", ""]
    for t in cfg.busties:
        out += ["[[busties]]", f"id = {json.dumps(t.id)}", f"endpoints = {json.dumps(list(t.endpoints))}", ""]
    for g in cfg.generators:
        curve = ", ".join(f"[{_num(p)}, {_num(s)}]" for p, s in g.sr_curve)
        out += ["[[generators]]", f"id = {json.dumps(g.id)}", f"busbar = {json.dumps(g.busbar)}",
                f"building = {json.dumps(g.building)}", f"rated_power = {_num(g.rated_power)}  # MW",
                f"rated_apparent_power = {_num(g.rated_apparent_power)}  # MVA",
                f"inertia_constant = {_num(g.inertia_constant)}  # s", f"sr_curve = [{curve}]"]
        gov = plant.governors.get(g.id)
        if gov is not None:
            parts = [f"droop = {_num(gov.droop)}", f"t_gov = {_num(gov.t_gov)}", f"t_turb = {_num(gov.t_turb)}",
                     f"p_min = {_num(gov.p_min)}"]
            if gov.p_max is not None:
                parts.append(f"p_max = {_num(gov.p_max)}")
            out.append("governor = { " + ", ".join(parts) + " }")
        out.append("")
    for ld in cfg.loads:
        out += ["[[loads]]", f"id = {json.dumps(ld.id)}", f"busbar = {json.dumps(ld.busbar)}",
                f"priority = {ld.priority}", f"sheddable = {'true' if ld.sheddable else 'false'}", ""]
    if cfg.external_tie is not None:
        t = cfg.external_tie
        out += ["[external_tie]", f"id = {json.dumps(t.id)}", f"busbar = {json.dumps(t.busbar)}",
                f"present = {'true' if t.present else 'false'}", ""]
    return "\n".join(out)


# --------------------------------------------------------------------------
# scenario


def scenario_from_dict(doc: dict, source: str = "<scenario>") -> SimScenario:
    r = _Reader(source)
    top = r.table(doc, SCENARIO_SCHEMA, "")
    _check_version(r, top)
    events = []
    kinds = {k.value: k for k in EventKind}
    for i, item in enumerate(top.get("events", [])):
        path = f"events[{i}]"
        d = r.table(item, EVENT_SCHEMA, path)
        if "kind" in d and d["kind"] not in kinds:
            r.error(path + ".kind", f"unknown event kind {d['kind']!r}, expected one of {sorted(kinds)}")
        elif "time" in d and "kind" in d:
            events.append(ScriptedEvent(float(d["time"]), kinds[d["kind"]], d.get("target", "")))
    for key in ("dispatch", "loads"):
        for k, v in top.get(key, {}).items():
            if isinstance(v, bool) or not isinstance(v, NUM):
                r.error(f"{key}.{k}", "expected a number (MW)")
    for k, v in top.get("busties", {}).items():
        if not isinstance(v, bool):
            r.error(f"busties.{k}", "expected a boolean")
    sr = top.get("sr_parameter")
    if isinstance(sr, dict):
        sr = {k: float(v) for k, v in sr.items()}
    elif sr is not None:
        sr = float(sr)
    r.raise_if_any("scenario file")
    kw = {k: float(top[k]) for k in ("duration", "dt", "total_delay", "uf_threshold", "relay_pickup",
                                      "imported_power") if k in top}
    try:
        return SimScenario(
            dispatch={k: float(v) for k, v in top["dispatch"].items()},
            loads={k: float(v) for k, v in top["loads"].items()},
            events=tuple(events),
            sr_parameter=sr,
            tie_closed=top.get("tie_closed", False),
            bustie_closed=dict(top["busties"]) if "busties" in top else None,
            **kw,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: invalid scenario: {exc}") from None


def load_scenario(path: "str | Path", plant: Optional[PlantFile] = None) -> SimScenario:
    scenario = scenario_from_dict(read_document(path), str(path))
    if plant is not None:
        check_scenario(plant.config, scenario, str(path))
    return scenario


def check_scenario(config: GridConfig, scenario: SimScenario, source: str = "<scenario>") -> None:
    """Cross-check scenario references and the initial power balance against the plant."""
    r = _Reader(source)
    for gid in scenario.dispatch:
        if gid not in config.generator_by_id:
            r.error(f"dispatch.{gid}", "unknown generator", "dangling-reference")
    for lid in scenario.loads:
        if lid not in config.load_by_id:
            r.error(f"loads.{lid}", "unknown load", "dangling-reference")
    for tid in scenario.bustie_closed or {}:
        if tid not in config.bustie_by_id:
            r.error(f"busties.{tid}", "unknown bustie", "dangling-reference")
    for i, ev in enumerate(scenario.events):
        known = {
            EventKind.GEN_TRIP: config.generator_by_id,
            EventKind.BUSTIE_OPEN: config.bustie_by_id,
            EventKind.BUILDING_LOSS: config.buildings,
            EventKind.GRID_BLACKOUT: {config.external_tie.id: 1} if config.has_tie else {},
        }[ev.kind]
        if ev.target not in known:
            r.error(f"events[{i}].target", f"unknown {ev.kind.value} target {ev.target!r}", "dangling-reference")
    if not r.findings:
        supply = sum(scenario.dispatch.values()) + (scenario.imported_power if scenario.tie_closed else 0.0)
        demand = sum(scenario.loads.values())
        if abs(supply - demand) > 1e-6 * max(1.0, demand):
            r.error("dispatch", f"initial dispatch {supply:.6g} MW does not match connected load "
                                f"{demand:.6g} MW", "balance")
    r.raise_if_any("scenario")


# --------------------------------------------------------------------------
# snapshot


def snapshot_from_dict(doc: dict, config: GridConfig, source: str = "<snapshot>") -> NetworkSnapshot:
    r = _Reader(source)
    top = r.table(doc, SNAPSHOT_SCHEMA, "")
    _check_version(r, top)
    g_closed, g_power, g_sr = {}, {}, {}
    for gid, item in top.get("generators", {}).items():
        path = f"generators.{gid}"
        if gid not in config.generator_by_id:
            r.error(path, "unknown generator", "dangling-reference")
        d = r.table(item, SNAP_GEN_SCHEMA, path)
        g_closed[gid] = d.get("closed", True)
        g_power[gid] = float(d.get("power", 0.0))
        if "sr" in d:
            g_sr[gid] = float(d["sr"])
    l_closed, l_power, prio = {}, {}, {}
    for lid, item in top.get("loads", {}).items():
        path = f"loads.{lid}"
        if lid not in config.load_by_id:
            r.error(path, "unknown load", "dangling-reference")
        d = r.table(item, SNAP_LOAD_SCHEMA, path)
        l_closed[lid] = d.get("closed", True)
        l_power[lid] = float(d.get("power", 0.0))
        if "priority" in d:
            prio[lid] = d["priority"]
    ties = top.get("busties", {})
    for tid, v in ties.items():
        if tid not in config.bustie_by_id:
            r.error(f"busties.{tid}", "unknown bustie", "dangling-reference")
        elif not isinstance(v, bool):
            r.error(f"busties.{tid}", "expected a boolean")
    for t in config.busties:
        if t.id not in ties:
            r.error(f"busties.{t.id}", "missing bustie status", "incomplete")
    r.raise_if_any("snapshot")

    sr = top.get("sr_override")
    if isinstance(sr, dict):
        sr = {k: float(v) for k, v in sr.items()}
    elif sr is not None:
        sr = float(sr)
    if g_sr:
        base = sr if isinstance(sr, dict) else ({} if sr is None else {g.id: sr for g in config.generators})
        sr = {**base, **g_sr}
    try:
        return make_snapshot(
            config,
            timestamp=float(top.get("timestamp", 0.0)),
            generator_power=g_power,
            load_power=l_power,
            generator_closed={g.id: g_closed.get(g.id, False) for g in config.generators},
            load_closed={ld.id: l_closed.get(ld.id, False) for ld in config.loads},
            bustie_closed=ties,
            tie_closed=top.get("tie_closed", False),
            imported_power=float(top.get("imported_power", 0.0)),
            sr_override=sr,
            load_priority=prio,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: invalid snapshot: {exc}") from None


def load_snapshot(path: "str | Path", config: GridConfig) -> NetworkSnapshot:
    return snapshot_from_dict(read_document(path), config, str(path))


# --------------------------------------------------------------------------
# CSV


def _csv_text(header: list[str], rows: Iterable[list]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def matrix_to_csv(matrix: SheddingMatrix) -> str:
    header = ["load_id"] + matrix.catalog.labels
    return _csv_text(header, ([lid] + [int(v) for v in row] for lid, row in zip(matrix.load_ids, matrix.entries)))


def read_matrix_csv(text: str) -> tuple[list[str], list[str], np.ndarray]:
    """Returns (load ids, event labels, entries)."""
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or rows[0][:1] != ["load_id"]:
        raise ConfigError("shedding matrix CSV must start with a 'load_id' header")
    labels = rows[0][1:]
    ids = [row[0] for row in rows[1:]]
    entries = np.array([[int(v) for v in row[1:]] for row in rows[1:]], dtype=np.uint8)
    return ids, labels, entries.reshape(len(ids), len(labels))


def trace_to_csv(trace: SimTrace) -> str:
    header = ["time", "frequency"] + [f"f_{b}" for b in trace.busbar_ids]
    header += [f"p_{g}" for g in trace.generator_ids] + ["total_load"]
    rows = []
    for k in range(len(trace.time)):
        row = [_fmt(trace.time[k]), _fmt(trace.frequency[k])]
        row += [_fmt(v) for v in trace.busbar_frequency[k]]
        row += [_fmt(v) for v in trace.generator_power[k]]
        row.append(_fmt(trace.total_load[k]))
        rows.append(row)
    return _csv_text(header, rows)


def read_csv_table(text: str) -> tuple[list[str], np.ndarray]:
    """Generic numeric CSV reader: returns (header, float matrix); empty cells become NaN."""
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise ConfigError("empty CSV")
    data = [[float(v) if v != "" else math.nan for v in row] for row in rows[1:]]
    return rows[0], np.array(data, dtype=float).reshape(len(data), len(rows[0]))


def commands_to_csv(commands: Iterable[TripCommand]) -> str:
    return _csv_text(["timestamp", "load_id", "event"], ([_fmt(c.timestamp), c.load_id, c.event_label]
                                                         for c in commands))


def read_commands_csv(text: str) -> list[TripCommand]:
    rows = list(csv.DictReader(_io.StringIO(text)))
    return [TripCommand(r["load_id"], float(r["timestamp"]), r["event"]) for r in rows]


def surface_to_csv(surface) -> str:
    rows = []
    for i, sr in enumerate(surface.sr_values):
        for j, delay in enumerate(surface.delay_values):
            rows.append([_fmt(sr), _fmt(delay), _fmt(surface.nadir[i, j]), int(surface.blackout[i, j])])
    return _csv_text(["sr", "delay", "nadir", "blackout_flag"], rows)


def read_surface_csv(text: str) -> list[tuple[float, float, float, bool]]:
    rows = list(csv.DictReader(_io.StringIO(text)))
    return [(float(r["sr"]), float(r["delay"]), float(r["nadir"]), r["blackout_flag"] == "1") for r in rows]
