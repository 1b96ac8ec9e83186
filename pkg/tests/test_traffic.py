"""Speed limits, travel times, fastest paths, background flow."""

import itertools
import random

import pytest

from gridrestore.cases import build_case37
from gridrestore.interdep import apply_damage
from gridrestore.model import EV, MESS, Params, Scenario, TrafficJunction, TrafficLane
from gridrestore.traffic import (
    TravelQuery,
    advance_traffic,
    congested_speed_kmh,
    crossing_time_s,
    fastest_path,
    lane_travel_time,
    total_background_vehicles,
    update_speed_limits,
)


def utn(junctions, lanes, energized_lanes=(), energized_junctions=()):
    params = Params()
    j_map = {
        j: TrafficJunction(id=j, x=float(i), y=0.0, supply_bus="b",
                           energized=(j in energized_junctions),
                           crossing_len_km=0.1,
                           degraded_factor=params.degraded_junction_factor())
        for i, (j, _) in enumerate(junctions.items())
    }
    for j, (x, y) in junctions.items():
        j_map[j].x, j_map[j].y = x, y
    l_map = {}
    for (a, b), sections in lanes.items():
        lane_id = f"{a}-{b}"
        l_map[lane_id] = TrafficLane(
            id=lane_id, from_junction=a, to_junction=b, section_lengths_km=list(sections),
            supply_bus="b", energized=(lane_id in energized_lanes),
            degraded_factor=params.degraded_lane_factor(),
        )
    s = Scenario(params=params, buses={}, lines={}, cn_nodes={}, junctions=j_map,
                 lanes=l_map, vehicles={}, uavs={}, warehouses={})
    update_speed_limits(s)
    return s


def test_limits_follow_energization():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0]},
            energized_lanes=["a-b"], energized_junctions=["a"])
    assert s.lanes["a-b"].v_lmax_kmh == pytest.approx(60.0)
    assert s.junctions["a"].v_jmax_kmh == pytest.approx(30.0)
    assert s.junctions["b"].v_jmax_kmh == pytest.approx(3.3)

    s.lanes["a-b"].energized = False
    update_speed_limits(s)
    assert s.lanes["a-b"].v_lmax_kmh == pytest.approx(25.0)


def test_reenergizing_never_lowers_speeds():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0]})
    degraded = s.lanes["a-b"].v_lmax_kmh
    s.lanes["a-b"].energized = True
    s.junctions["b"].energized = True
    update_speed_limits(s)
    assert s.lanes["a-b"].v_lmax_kmh >= degraded
    assert s.junctions["b"].v_jmax_kmh >= 3.3


def test_lane_travel_times():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0]}, energized_lanes=["a-b"])
    lane = s.lanes["a-b"]
    assert lane_travel_time(lane, s.params, EV) == pytest.approx(60.0)

    lane.energized = False
    update_speed_limits(s)
    assert lane_travel_time(lane, s.params, EV) == pytest.approx(144.0, rel=1e-9)
    # police escort at 40% on the degraded lane, capped at the posted limit
    expected = 3600.0 * 1.0 / (25.0 * 1.4)
    assert lane_travel_time(lane, s.params, MESS, rightofway=0.4) == pytest.approx(expected, rel=1e-6)

    empty = TrafficLane(id="z", from_junction="a", to_junction="b", section_lengths_km=[])
    assert lane_travel_time(empty, s.params, EV) == 0.0


def test_mess_never_exceeds_prescribed_limit():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0]}, energized_lanes=["a-b"])
    lane = s.lanes["a-b"]
    t_mess = lane_travel_time(lane, s.params, MESS, rightofway=0.4)
    assert t_mess == pytest.approx(60.0)  # (1.4 * 60) capped at 60 km/h


def test_single_edge_path_includes_crossing():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0]},
            energized_lanes=["a-b"], energized_junctions=["b"])
    result = fastest_path(s, TravelQuery("a", "b", EV))
    expected = 60.0 + crossing_time_s(s.junctions["b"], s.params, EV)
    assert result.reachable and result.path == ["a", "b"]
    assert result.time_s == pytest.approx(expected)


def test_unreachable_destination():
    s = utn({"a": (0, 0), "b": (1, 0), "c": (9, 9)}, {("a", "b"): [1.0]})
    result = fastest_path(s, TravelQuery("a", "c", EV))
    assert not result.reachable


def test_diamond_prefers_energized_route():
    # two parallel routes a->b: via u (energized) and via v (dark junction)
    junctions = {"a": (0, 0), "u": (1, 0.5), "v": (1, -0.5), "b": (2, 0)}
    lanes = {("a", "u"): [1.2], ("u", "b"): [1.2], ("a", "v"): [1.0], ("v", "b"): [1.0]}
    s = utn(junctions, lanes,
            energized_lanes=["a-u", "u-b", "a-v", "v-b"],
            energized_junctions=["a", "u", "b"])
    result = fastest_path(s, TravelQuery("a", "b", EV))

    # exhaustive enumeration over both simple routes
    def route_time(mids):
        total = 0.0
        here = "a"
        for nxt in mids + ["b"]:
            total += lane_travel_time(s.lanes[f"{here}-{nxt}"], s.params, EV)
            total += crossing_time_s(s.junctions[nxt], s.params, EV)
            here = nxt
        return total

    best = min(route_time(["u"]), route_time(["v"]))
    assert result.time_s == pytest.approx(best)
    assert result.path == ["a", "u", "b"]  # the dark junction v is slower


def test_fastest_path_matches_enumeration_on_small_networks():
    rng = random.Random(2)
    for _ in range(22):
        n = rng.randint(3, 7)
        names = [f"j{i}" for i in range(n)]
        junctions = {j: (rng.uniform(0, 5), rng.uniform(0, 5)) for j in names}
        lanes = {}
        for a, b in itertools.permutations(names, 2):
            if rng.random() < 0.4:
                lanes[(a, b)] = [round(rng.uniform(0.5, 2.0), 3)]
        s = utn(junctions, lanes,
                energized_lanes=[f"{a}-{b}" for (a, b) in lanes if rng.random() < 0.5],
                energized_junctions=[j for j in names if rng.random() < 0.5])
        result = fastest_path(s, TravelQuery("j0", names[-1], EV))

        best = None
        for k in range(1, n):
            for mids in itertools.permutations([j for j in names if j not in ("j0", names[-1])], k - 1):
                path = ["j0", *mids, names[-1]]
                total = 0.0
                ok = True
                for a, b in zip(path, path[1:]):
                    if f"{a}-{b}" not in s.lanes:
                        ok = False
                        break
                    total += lane_travel_time(s.lanes[f"{a}-{b}"], s.params, EV)
                    total += crossing_time_s(s.junctions[b], s.params, EV)
                if ok and (best is None or total < best):
                    best = total
        if best is None:
            assert not result.reachable
        else:
            assert result.reachable and result.time_s == pytest.approx(best)


def test_mess_time_never_worse_than_ev():
    s = apply_damage(build_case37())
    for origin, goal in (("n01", "n13"), ("n07", "n24"), ("n02", "n21")):
        ev = fastest_path(s, TravelQuery(origin, goal, EV))
        mess = fastest_path(s, TravelQuery(origin, goal, MESS))
        assert mess.time_s <= ev.time_s + 1e-9


def test_background_flow():
    s = utn({"a": (0, 0), "b": (1, 0)}, {("a", "b"): [1.0], ("b", "a"): [1.0]},
            energized_lanes=["a-b", "b-a"])
    lane = s.lanes["a-b"]
    assert congested_speed_kmh(lane, s.params) == pytest.approx(60.0)  # empty lane

    lane.background_vehicles = s.params.jam_density_veh_per_km * lane.length_km
    assert congested_speed_kmh(lane, s.params) == pytest.approx(s.params.speed_floor_kmh)


def test_background_count_is_conserved():
    s = apply_damage(build_case37())
    start = total_background_vehicles(s)
    assert start == pytest.approx(2600.0, abs=1e-3)
    for _ in range(1000):
        advance_traffic(s, 1.0)
    assert total_background_vehicles(s) == pytest.approx(start, abs=1e-6)


def test_restoring_facilities_never_increases_travel_times():
    s = apply_damage(build_case37())
    pairs = [("n01", "n24"), ("n07", "n13")]
    before = [fastest_path(s, TravelQuery(a, b, EV)).time_s for a, b in pairs]
    for lane in s.lanes.values():
        lane.energized = True
    for junction in s.junctions.values():
        junction.energized = True
    update_speed_limits(s)
    after = [fastest_path(s, TravelQuery(a, b, EV)).time_s for a, b in pairs]
    assert all(y <= x + 1e-9 for x, y in zip(before, after))
