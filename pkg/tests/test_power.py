"""Radiality, switch-control gating, energization, and station balances."""

import random

import pytest

from gridrestore.cases import build_case37
from gridrestore.model import Params, PdnBus, PdnLine, Scenario
from gridrestore.oracles import radial_by_union_find, random_switch_pattern
from gridrestore.power import (
    CLOSE,
    OPEN,
    InsufficientResidual,
    StationBalance,
    check_radiality,
    control_feasible,
    energization_sweep,
)


def grid(buses, lines, energized=()):
    bus_map = {
        b: PdnBus(id=b, x=float(i), y=0.0, energized=(b in energized))
        for i, b in enumerate(buses)
    }
    line_map = {}
    for a, b in lines:
        line_map[f"{a}-{b}"] = PdnLine(id=f"{a}-{b}", from_bus=a, to_bus=b)
    return Scenario(
        params=Params(), buses=bus_map, lines=line_map, cn_nodes={},
        junctions={}, lanes={}, vehicles={}, uavs={}, warehouses={},
    )


def test_tree_is_radial():
    s = grid("abcdef", [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "f")], energized="abcdef")
    assert check_radiality(s).radial


def test_cycle_yields_witness():
    s = grid("abc", [("a", "b"), ("b", "c"), ("c", "a")], energized="abc")
    result = check_radiality(s)
    assert not result.radial
    assert sorted(result.cycle) == ["a-b", "b-c", "c-a"] or len(result.cycle) == 3


def test_dark_cycle_is_tolerated():
    s = grid("abcde", [("a", "b"), ("c", "d"), ("d", "e"), ("e", "c")], energized="ab")
    assert check_radiality(s).radial


def test_radiality_matches_union_find_oracle():
    base = build_case37()
    slim = grid([], [])
    slim.buses = base.buses
    slim.lines = base.lines
    rng = random.Random(3)
    for _ in range(200):
        pattern = random_switch_pattern(slim, rng)
        assert check_radiality(pattern).radial == radial_by_union_find(pattern)


def test_control_feasibility_gates():
    line = PdnLine(id="k", from_bus="i", to_bus="j", switch_closed=False)
    ok, _ = control_feasible(line, CLOSE, {"i": True, "j": True})
    assert ok
    ok, reason = control_feasible(line, CLOSE, {"i": True, "j": False})
    assert not ok and "both" in reason

    closed = PdnLine(id="k", from_bus="i", to_bus="j", switch_closed=True,
                     control_from=True, control_to=False)
    ok, _ = control_feasible(closed, OPEN, {"i": True, "j": False})
    assert ok
    ok, _ = control_feasible(closed, OPEN, {"i": False, "j": True})
    assert not ok

    faulted = PdnLine(id="k", from_bus="i", to_bus="j", equipment_ok=False, switch_closed=False)
    ok, reason = control_feasible(faulted, CLOSE, {"i": True, "j": True})
    assert not ok and "fault" in reason


def test_energization_single_station_all_open():
    s = grid("ab", [("a", "b")])
    s.lines["a-b"].switch_closed = False
    energization_sweep(s, ["a"])
    assert s.buses["a"].energized and not s.buses["b"].energized


def test_energization_stops_at_open_switch():
    s = grid("sab", [("s", "a"), ("a", "b")])
    s.lines["s-a"].switch_closed = True
    s.lines["a-b"].switch_closed = False
    energization_sweep(s, ["s"])
    assert s.buses["a"].energized and not s.buses["b"].energized


def test_energization_matches_bfs_oracle():
    base = build_case37()
    slim = grid([], [])
    slim.buses = base.buses
    slim.lines = base.lines
    rng = random.Random(11)
    sources = [b.id for b in base.stations()]
    for _ in range(100):
        pattern = random_switch_pattern(slim, rng)
        energization_sweep(pattern, sources)

        # independent reachability check
        adj = {b: [] for b in pattern.buses}
        for line in pattern.lines.values():
            ok = (line.switch_closed and line.equipment_ok
                  and pattern.buses[line.from_bus].equipment_ok
                  and pattern.buses[line.to_bus].equipment_ok)
            if ok:
                adj[line.from_bus].append(line.to_bus)
                adj[line.to_bus].append(line.from_bus)
        seen = set(sources)
        queue = list(sources)
        while queue:
            here = queue.pop()
            for nxt in adj[here]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        assert {b for b, bus in pattern.buses.items() if bus.energized} == seen
        # load switches never stay closed on a dark bus
        assert all(bus.energized or not bus.load_switch_closed for bus in pattern.buses.values())


def test_energization_monotone_in_closed_lines():
    base = build_case37()
    rng = random.Random(5)
    sources = [b.id for b in base.stations()]
    for _ in range(30):
        pattern = random_switch_pattern(base, rng)
        energization_sweep(pattern, sources)
        before = {b for b, bus in pattern.buses.items() if bus.energized}
        open_lines = [l for l in pattern.lines.values() if not l.switch_closed and l.equipment_ok]
        if not open_lines:
            continue
        open_lines[0].switch_closed = True
        energization_sweep(pattern, sources)
        after = {b for b, bus in pattern.buses.items() if bus.energized}
        assert before <= after


def test_station_balance_arithmetic():
    sb = StationBalance(station="s")
    sb.vehicle_arrived(1000.0)
    sb.commit(300.0)
    assert sb.residual_kw == pytest.approx(700.0)

    single = StationBalance(station="s2")
    single.vehicle_arrived(500.0)  # one MESS
    assert not single.can_commit(600.0)
    with pytest.raises(InsufficientResidual):
        single.commit(600.0)
    assert single.picked_up_kw == 0.0

    evs = StationBalance(station="s3")
    for _ in range(3):
        evs.vehicle_arrived(50.0)  # three EVs
    evs.commit(150.0)
    assert evs.residual_kw == pytest.approx(0.0)
