"""Scenario loading, validation, round-trips, damage, and dispatchability."""

import json

import pytest

from gridrestore.cases import build_case37, bundled_case_path
from gridrestore.interdep import apply_damage, dispatchable_evs, recompute_coupled_state
from gridrestore.model import DamageSet, Params, PdnBus, CnNode, Scenario, within_range
from gridrestore.scenario import (
    ScenarioError,
    dumps_scenario,
    load_scenario,
    loads_scenario,
    redraw_participation,
)


def minimal_scenario() -> Scenario:
    bus = PdnBus(id="b1", x=0.0, y=0.0, load_kw=0.0, is_v2gs=True, station_demand_kw=0.0)
    node = CnNode(id="c1", x=0.0, y=0.0, range_km=3.0, is_central=True, supply_bus="b1")
    return Scenario(
        params=Params(), buses={"b1": bus}, lines={}, cn_nodes={"c1": node},
        junctions={}, lanes={}, vehicles={}, uavs={}, warehouses={},
    )


def test_bundled_case_counts():
    s = load_scenario(bundled_case_path())
    assert len(s.buses) == 37
    assert len(s.junctions) == 24
    assert len(s.cn_nodes) == 42
    assert sum(1 for b in s.buses.values() if b.is_v2gs) == 3
    assert sum(1 for n in s.cn_nodes.values() if n.is_central) == 3


def test_bundled_file_matches_builder():
    assert bundled_case_path().read_text() == dumps_scenario(build_case37())


def test_minimal_scenario_roundtrip():
    text = dumps_scenario(minimal_scenario())
    s = loads_scenario(text)
    assert list(s.cn_nodes) == ["c1"]


def test_roundtrip_identity():
    s1 = load_scenario(bundled_case_path())
    text = dumps_scenario(s1)
    s2 = loads_scenario(text)
    assert dumps_scenario(s2) == text
    assert s2 == s1


def test_dangling_reference_names_offender():
    raw = json.loads(bundled_case_path().read_text())
    raw["couplings"]["lanes"]["n01-n02"] = "b99"
    with pytest.raises(ScenarioError) as err:
        loads_scenario(json.dumps(raw))
    assert "n01-n02" in str(err.value) and "b99" in str(err.value)


def test_parse_error_reports_location():
    with pytest.raises(ScenarioError) as err:
        loads_scenario('{"schema_version": 1,\n  "params": {bad}\n}')
    assert "line 2" in str(err.value)


def test_schema_version_mandatory():
    with pytest.raises(ScenarioError) as err:
        loads_scenario('{"params": {}}')
    assert "schema_version" in str(err.value)


def test_participation_is_seed_stable():
    text = bundled_case_path().read_text()
    first = loads_scenario(text)
    second = loads_scenario(text)
    flags = lambda s: [(v.id, v.participates) for v in s.vehicles.values()]
    assert flags(first) == flags(second)
    evs = [v for v in first.vehicles.values() if v.kind == "ev"]
    chosen = [v for v in evs if v.participates]
    assert len(chosen) == int(first.params.eta * len(evs))


def test_bernoulli_mode_draws_per_vehicle():
    s = build_case37()
    s.params.participation_mode = "bernoulli"
    text = dumps_scenario(s)
    loaded = loads_scenario(text)
    again = loads_scenario(text)
    assert [v.participates for v in loaded.vehicles.values()] == [
        v.participates for v in again.vehicles.values()
    ]


def test_redraw_changes_with_seed():
    s = load_scenario(bundled_case_path())
    baseline = {v.id for v in s.vehicles.values() if v.kind == "ev" and v.participates}
    redraw_participation(s, 18)
    redrawn = {v.id for v in s.vehicles.values() if v.kind == "ev" and v.participates}
    assert baseline != redrawn


def test_apply_damage_is_idempotent():
    s = load_scenario(bundled_case_path())
    once = apply_damage(s)
    twice = apply_damage(once)
    assert dumps_scenario(twice) == dumps_scenario(once)


def test_apply_damage_empty_set_keeps_scenario():
    s = minimal_scenario()
    out = apply_damage(s, DamageSet())
    assert dumps_scenario(out) == dumps_scenario(s)


def test_apply_damage_unknown_element():
    s = minimal_scenario()
    with pytest.raises(ScenarioError) as err:
        apply_damage(s, DamageSet(failed_lines=["nope"]))
    assert "nope" in str(err.value)


def test_damage_darkens_downstream_and_couplings():
    # pre-damage: stations active, the pre-event tree closed, ties open
    s = load_scenario(bundled_case_path())
    ties = {"b13-b19", "b10-b06", "b32-b19", "b24-b21"}
    for line in s.lines.values():
        line.switch_closed = line.equipment_ok and line.id not in ties
    for bus in s.buses.values():
        bus.energized = True
        bus.load_switch_closed = True
    recompute_coupled_state(s, [b.id for b in s.stations()])
    lit_before = {n.id for n in s.cn_nodes.values() if n.energized}
    assert lit_before

    damaged = apply_damage(s)
    for line_id in damaged.damage.failed_lines:
        assert not damaged.lines[line_id].equipment_ok
        assert not damaged.lines[line_id].switch_closed
    # the pocket hangs off faulted b16-b21 with the tie open: must go dark
    for bus_id in ("b21", "b22", "b23"):
        assert not damaged.buses[bus_id].energized
    for node in damaged.cn_nodes.values():
        if node.supply_bus in ("b21", "b22", "b23"):
            assert not node.energized and not node.comm
    for lane in damaged.lanes.values():
        if lane.supply_bus == "b21":
            assert lane.v_lmax_kmh < damaged.params.lane_limit_kmh


def test_dispatchable_evs_rules():
    s = load_scenario(bundled_case_path())
    damaged = apply_damage(s)  # no station active: every CN node is down
    available = dispatchable_evs(damaged)
    mess = {v.id for v in damaged.vehicles.values() if v.kind == "mess"}
    assert available == mess


def test_dispatchable_evs_monotone_in_comm():
    s = apply_damage(load_scenario(bundled_case_path()))

    def count_with_comm(nodes_up):
        for node in s.cn_nodes.values():
            node.comm = node.id in nodes_up
        for veh in s.vehicles.values():
            if veh.kind == "ev":
                veh.comm = any(
                    s.cn_nodes[n].comm
                    and within_range(veh.x, veh.y, s.cn_nodes[n].x, s.cn_nodes[n].y, s.cn_nodes[n].range_km)
                    for n in nodes_up
                )
        return len(dispatchable_evs(s))

    small = count_with_comm({"c01"})
    bigger = count_with_comm({"c01", "c09", "c30"})
    assert bigger >= small
