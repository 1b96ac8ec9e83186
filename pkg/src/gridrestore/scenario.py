"""Scenario file model: parsing, validation, serialization, participation draw.

A scenario is one JSON document with sections ``pdn``, ``cn``, ``utn``,
``fleets``, ``couplings``, ``params``, and ``damage``.  The ``couplings``
section is authoritative for facility-to-supply-bus links; the in-memory
objects carry the resolved ``supply_bus`` fields after loading.
"""

from __future__ import annotations

import dataclasses
import json
import random
from pathlib import Path
from typing import Any

from .model import (
    EV,
    MESS,
    CnNode,
    DamageSet,
    Params,
    PdnBus,
    PdnLine,
    Scenario,
    TrafficJunction,
    TrafficLane,
    Uav,
    Vehicle,
    Warehouse,
    sorted_by_id,
)

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be loaded or fails validation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

    def report(self) -> str:
        return "\n".join(self.violations)


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    return loads_scenario(text)


def loads_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"parse error: {exc.msg} at line {exc.lineno} column {exc.colno}"]) from exc
    scenario = _from_dict(raw)
    violations = validate(scenario)
    if violations:
        raise ScenarioError(violations)
    _draw_participation(scenario)
    return scenario


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


def dumps_scenario(scenario: Scenario) -> str:
    return json.dumps(to_dict(scenario), indent=2, sort_keys=True) + "\n"


def _field_dict(obj, skip: tuple[str, ...] = ()) -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(obj):
        if f.name in skip:
            continue
        out[f.name] = getattr(obj, f.name)
    return out


def to_dict(scenario: Scenario) -> dict[str, Any]:
    couplings = {
        "cn_nodes": {n.id: n.supply_bus for n in scenario.fixed_cn_nodes()},
        "junctions": {j.id: j.supply_bus for j in sorted_by_id(scenario.junctions.values())},
        "lanes": {l.id: l.supply_bus for l in sorted_by_id(scenario.lanes.values())},
    }
    return {
        "schema_version": scenario.params.schema_version,
        "params": _field_dict(scenario.params, skip=("schema_version",)),
        "pdn": {
            "buses": [_field_dict(b) for b in sorted_by_id(scenario.buses.values())],
            "lines": [_field_dict(l) for l in sorted_by_id(scenario.lines.values())],
        },
        "cn": {
            "nodes": [_field_dict(n, skip=("supply_bus",)) for n in scenario.fixed_cn_nodes()],
        },
        "utn": {
            "junctions": [_field_dict(j, skip=("supply_bus",)) for j in sorted_by_id(scenario.junctions.values())],
            "lanes": [_field_dict(l, skip=("supply_bus",)) for l in sorted_by_id(scenario.lanes.values())],
        },
        "fleets": {
            "vehicles": [_field_dict(v) for v in sorted_by_id(scenario.vehicles.values())],
            "uavs": [_field_dict(u) for u in sorted_by_id(scenario.uavs.values())],
            "warehouses": [_field_dict(w) for w in sorted_by_id(scenario.warehouses.values())],
        },
        "couplings": couplings,
        "damage": {
            "lines": sorted(scenario.damage.failed_lines),
            "buses": sorted(scenario.damage.failed_buses),
        },
    }


def _build(cls, record: dict, where: str, violations: list[str]):
    try:
        return cls(**record)
    except TypeError as exc:
        violations.append(f"{where}: {exc}")
        return None


def _from_dict(raw: dict) -> Scenario:
    violations: list[str] = []
    if not isinstance(raw, dict):
        raise ScenarioError(["parse error: top-level document must be an object"])
    if "schema_version" not in raw:
        raise ScenarioError(["missing mandatory field schema_version"])
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError([f"unsupported schema_version {raw['schema_version']} (expected {SCHEMA_VERSION})"])

    params = _build(Params, dict(raw.get("params", {}), schema_version=raw["schema_version"]), "params", violations)
    if params is None:
        raise ScenarioError(violations)

    def section(*keys, default=None):
        node = raw
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                return default if default is not None else []
            node = node[key]
        return node

    buses, lines = {}, {}
    for rec in section("pdn", "buses"):
        bus = _build(PdnBus, rec, f"pdn.buses[{rec.get('id', '?')}]", violations)
        if bus:
            buses[bus.id] = bus
    for rec in section("pdn", "lines"):
        line = _build(PdnLine, rec, f"pdn.lines[{rec.get('id', '?')}]", violations)
        if line:
            lines[line.id] = line

    cn_nodes = {}
    for rec in section("cn", "nodes"):
        node = _build(CnNode, rec, f"cn.nodes[{rec.get('id', '?')}]", violations)
        if node:
            cn_nodes[node.id] = node

    junctions, lanes = {}, {}
    for rec in section("utn", "junctions"):
        junction = _build(TrafficJunction, rec, f"utn.junctions[{rec.get('id', '?')}]", violations)
        if junction:
            junctions[junction.id] = junction
    for rec in section("utn", "lanes"):
        lane = _build(TrafficLane, rec, f"utn.lanes[{rec.get('id', '?')}]", violations)
        if lane:
            lanes[lane.id] = lane

    vehicles, uavs, warehouses = {}, {}, {}
    for rec in section("fleets", "vehicles"):
        vehicle = _build(Vehicle, rec, f"fleets.vehicles[{rec.get('id', '?')}]", violations)
        if vehicle:
            vehicles[vehicle.id] = vehicle
    for rec in section("fleets", "uavs"):
        uav = _build(Uav, rec, f"fleets.uavs[{rec.get('id', '?')}]", violations)
        if uav:
            uavs[uav.id] = uav
    for rec in section("fleets", "warehouses"):
        warehouse = _build(Warehouse, rec, f"fleets.warehouses[{rec.get('id', '?')}]", violations)
        if warehouse:
            warehouses[warehouse.id] = warehouse

    couplings = raw.get("couplings", {})
    for node_id, bus_id in couplings.get("cn_nodes", {}).items():
        if node_id in cn_nodes:
            cn_nodes[node_id].supply_bus = bus_id
    for junction_id, bus_id in couplings.get("junctions", {}).items():
        if junction_id in junctions:
            junctions[junction_id].supply_bus = bus_id
    for lane_id, bus_id in couplings.get("lanes", {}).items():
        if lane_id in lanes:
            lanes[lane_id].supply_bus = bus_id

    damage_raw = raw.get("damage", {})
    damage = DamageSet(
        failed_lines=list(damage_raw.get("lines", [])),
        failed_buses=list(damage_raw.get("buses", [])),
    )

    if violations:
        raise ScenarioError(violations)
    return Scenario(
        params=params,
        buses=buses,
        lines=lines,
        cn_nodes=cn_nodes,
        junctions=junctions,
        lanes=lanes,
        vehicles=vehicles,
        uavs=uavs,
        warehouses=warehouses,
        damage=damage,
    )


def validate(scenario: Scenario) -> list[str]:
    """Check every cross-reference and type invariant; return violation strings."""
    v: list[str] = []
    buses = scenario.buses

    for line in sorted_by_id(scenario.lines.values()):
        for end in line.endpoints():
            if end not in buses:
                v.append(f"line {line.id} references missing bus {end}")
        if not (line.control_from or line.control_to):
            v.append(f"line {line.id} has no controlling FTU side")
        if line.switch_closed and not line.equipment_ok:
            v.append(f"line {line.id} is closed but its equipment is faulted")

    for bus in sorted_by_id(buses.values()):
        if bus.cn_utn_load_kw > bus.load_kw + 1e-9:
            v.append(f"bus {bus.id}: cn_utn_load_kw {bus.cn_utn_load_kw} exceeds load_kw {bus.load_kw}")
        if bus.load_switch_closed and not bus.energized:
            v.append(f"bus {bus.id}: load switch closed while de-energized")
        if bus.station_demand_kw is not None and not bus.is_v2gs:
            v.append(f"bus {bus.id}: station_demand_kw set on a non-station bus")
        if bus.is_v2gs and bus.station_demand_kw is None:
            bus.station_demand_kw = 0.0

    for node in sorted_by_id(scenario.cn_nodes.values()):
        if node.is_uav_backed:
            v.append(f"cn node {node.id}: scenario files may not declare UAV-backed nodes")
            continue
        if node.supply_bus is None:
            v.append(f"cn node {node.id} has no supply-bus coupling")
        elif node.supply_bus not in buses:
            v.append(f"cn node {node.id} references missing bus {node.supply_bus}")
        if node.comm and not node.energized:
            v.append(f"cn node {node.id}: comm flag set while de-energized")
        if node.range_km <= 0:
            v.append(f"cn node {node.id}: nonpositive coverage range")

    for junction in sorted_by_id(scenario.junctions.values()):
        if not junction.supply_bus:
            v.append(f"junction {junction.id} has no supply-bus coupling")
        elif junction.supply_bus not in buses:
            v.append(f"junction {junction.id} references missing bus {junction.supply_bus}")

    for lane in sorted_by_id(scenario.lanes.values()):
        if not lane.supply_bus:
            v.append(f"lane {lane.id} has no supply-bus coupling")
        elif lane.supply_bus not in buses:
            v.append(f"lane {lane.id} references missing bus {lane.supply_bus}")
        for end in (lane.from_junction, lane.to_junction):
            if end not in scenario.junctions:
                v.append(f"lane {lane.id} references missing junction {end}")
        if lane.section_lengths_km and min(lane.section_lengths_km) <= 0:
            v.append(f"lane {lane.id}: nonpositive section length")

    for vehicle in sorted_by_id(scenario.vehicles.values()):
        if vehicle.kind not in (EV, MESS):
            v.append(f"vehicle {vehicle.id}: unknown kind {vehicle.kind!r}")
        if vehicle.output_kw < 0:
            v.append(f"vehicle {vehicle.id}: negative output power")
        if vehicle.kind == EV and not vehicle.comm and vehicle.assigned_station is not None:
            v.append(f"vehicle {vehicle.id}: EV assigned to a station while out of coverage")

    for uav in sorted_by_id(scenario.uavs.values()):
        if uav.home and uav.home not in scenario.warehouses:
            v.append(f"uav {uav.id} references missing warehouse {uav.home}")
        if uav.range_budget_km <= 0 or uav.speed_kmh <= 0:
            v.append(f"uav {uav.id}: nonpositive speed or range budget")

    for line_id in scenario.damage.failed_lines:
        if line_id not in scenario.lines:
            v.append(f"damage references missing line {line_id}")
    for bus_id in scenario.damage.failed_buses:
        if bus_id not in buses:
            v.append(f"damage references missing bus {bus_id}")

    p = scenario.params
    if not 0.0 <= p.eta <= 1.0:
        v.append(f"params.eta {p.eta} outside [0, 1]")
    if p.participation_mode not in ("deterministic", "bernoulli"):
        v.append(f"params.participation_mode {p.participation_mode!r} unknown")
    if min(p.lane_limit_kmh, p.junction_limit_kmh, p.lane_degraded_kmh, p.junction_degraded_kmh) <= 0:
        v.append("params: traffic speed limits must be positive")
    return v


def redraw_participation(scenario: Scenario, seed: int) -> None:
    """Reset the willingness draw and redo it under a new seed."""
    scenario.params.seed = seed
    for veh in scenario.vehicles.values():
        if veh.kind == EV:
            veh.participates = None
    _draw_participation(scenario)


def _draw_participation(scenario: Scenario) -> None:
    """Realize the EV willingness coefficient as per-vehicle flags.

    Flags already present in the file are respected, so a serialized scenario
    reloads to the identical participant set regardless of seed.
    """
    evs = [veh for veh in sorted_by_id(scenario.vehicles.values()) if veh.kind == EV]
    undrawn = [veh for veh in evs if veh.participates is None]
    for veh in sorted_by_id(scenario.vehicles.values()):
        if veh.kind == MESS:
            veh.participates = True
    if not undrawn:
        return
    p = scenario.params
    rng = random.Random(p.seed)
    if p.participation_mode == "deterministic":
        ids = [veh.id for veh in undrawn]
        rng.shuffle(ids)
        count = int(p.eta * len(ids))
        chosen = set(ids[:count])
        for veh in undrawn:
            veh.participates = veh.id in chosen
    else:
        for veh in undrawn:
            veh.participates = rng.random() < p.eta
