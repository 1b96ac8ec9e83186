"""Mesoscopic traffic state: limits, section speeds, travel times, fastest paths.

Background congestion uses a linear speed-density relation per lane with a
floor speed; vehicle classes differ only in the right-of-way factor granted
to MESS trucks, whose escorted speed is capped at the prescribed
(non-degraded) limit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .model import EV, MESS, Params, Scenario, TrafficJunction, TrafficLane, sorted_by_id


@dataclass
class TravelQuery:
    origin: str
    destination: str
    kind: str = EV
    depart_s: float = 0.0


@dataclass
class PathResult:
    reachable: bool
    path: list[str] = field(default_factory=list)  # junction ids, origin first
    time_s: float = math.inf


def update_speed_limits(scenario: Scenario) -> None:
    """Refresh per-facility limits from energization (lamps and signal lights)."""
    p = scenario.params
    for lane in scenario.lanes.values():
        lane.v_lmax_kmh = p.lane_limit_kmh if lane.energized else lane.degraded_factor * p.lane_limit_kmh
    for junction in scenario.junctions.values():
        junction.v_jmax_kmh = (
            p.junction_limit_kmh if junction.energized else junction.degraded_factor * p.junction_limit_kmh
        )


def congested_speed_kmh(lane: TrafficLane, params: Params) -> float:
    """Section speed under the current limit and background density."""
    limit = lane.v_lmax_kmh
    length = lane.length_km
    if length <= 0:
        return limit
    density = lane.background_vehicles / length
    v = limit * (1.0 - density / params.jam_density_veh_per_km)
    return min(limit, max(params.speed_floor_kmh, v))


def section_speeds_kmh(lane: TrafficLane, params: Params, kind: str = EV, rightofway: float = 0.0) -> list[float]:
    base = congested_speed_kmh(lane, params)
    if kind == MESS:
        base = min((1.0 + rightofway) * base, params.lane_limit_kmh)
    return [base for _ in lane.section_lengths_km]


def lane_travel_time(lane: TrafficLane, params: Params, kind: str = EV, rightofway: float = 0.0) -> float:
    """Driving time along a lane in seconds, summed over its sections."""
    if lane.length_km <= 0:
        return 0.0
    speeds = section_speeds_kmh(lane, params, kind, rightofway)
    return sum(
        3600.0 * beta / v for beta, v in zip(lane.section_lengths_km, speeds)
    )


def crossing_time_s(junction: TrafficJunction, params: Params, kind: str = EV, rightofway: float = 0.0) -> float:
    v = junction.v_jmax_kmh
    if kind == MESS:
        v = min((1.0 + rightofway) * v, params.junction_limit_kmh)
    if junction.crossing_len_km <= 0 or v <= 0:
        return 0.0
    return 3600.0 * junction.crossing_len_km / v


def _class_rightofway(scenario: Scenario, kind: str) -> tuple[float, float]:
    if kind == MESS:
        return scenario.params.mess_rightofway_lane, scenario.params.mess_rightofway_junction
    return 0.0, 0.0


def fastest_path(scenario: Scenario, query: TravelQuery) -> PathResult:
    """Time-minimal junction path under current per-class speeds.

    Crossing time is charged at the junction each lane enters.  Ties in total
    time resolve to the lexicographically smallest junction sequence.
    """
    junctions = scenario.junctions
    if query.origin not in junctions or query.destination not in junctions:
        return PathResult(reachable=False)
    if query.origin == query.destination:
        return PathResult(reachable=True, path=[query.origin], time_s=0.0)

    ro_lane, ro_junction = _class_rightofway(scenario, query.kind)
    outgoing: dict[str, list[TrafficLane]] = {j: [] for j in junctions}
    for lane in sorted_by_id(scenario.lanes.values()):
        outgoing[lane.from_junction].append(lane)

    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (query.origin,))]
    settled: set[str] = set()
    while heap:
        time_s, path = heapq.heappop(heap)
        here = path[-1]
        if here in settled:
            continue
        settled.add(here)
        if here == query.destination:
            return PathResult(reachable=True, path=list(path), time_s=time_s)
        for lane in outgoing[here]:
            nxt = lane.to_junction
            if nxt in settled:
                continue
            hop = lane_travel_time(lane, scenario.params, query.kind, ro_lane)
            hop += crossing_time_s(junctions[nxt], scenario.params, query.kind, ro_junction)
            heapq.heappush(heap, (time_s + hop, path + (nxt,)))
    return PathResult(reachable=False)


def advance_traffic(scenario: Scenario, dt_s: float = 1.0) -> None:
    """Evolve background vehicle counts one step under flow conservation.

    Outflow of a lane is density * speed * dt, split evenly over the lanes
    leaving its end junction; a dead-end junction holds its vehicles.  The
    final split share takes the arithmetic remainder so the total count is
    conserved exactly.
    """
    lanes = sorted_by_id(scenario.lanes.values())
    outgoing: dict[str, list[TrafficLane]] = {}
    for lane in lanes:
        outgoing.setdefault(lane.from_junction, []).append(lane)

    transfers: list[tuple[TrafficLane, float, list[TrafficLane]]] = []
    for lane in lanes:
        if lane.background_vehicles <= 0 or lane.length_km <= 0:
            continue
        receivers = outgoing.get(lane.to_junction, [])
        if not receivers:
            continue
        v = congested_speed_kmh(lane, scenario.params)
        out = lane.background_vehicles * v * dt_s / (3600.0 * lane.length_km)
        out = min(out, lane.background_vehicles)
        transfers.append((lane, out, receivers))

    for lane, out, receivers in transfers:
        lane.background_vehicles -= out
        share = out / len(receivers)
        moved = 0.0
        for receiver in receivers[:-1]:
            receiver.background_vehicles += share
            moved += share
        receivers[-1].background_vehicles += out - moved


def total_background_vehicles(scenario: Scenario) -> float:
    return math.fsum(lane.background_vehicles for lane in scenario.lanes.values())
