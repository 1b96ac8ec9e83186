"""Exact min-max dispatch of mobile storage to V2G stations.

The objective is the smallest threshold T such that every station's power
requirement can be met by vehicles whose travel time to it is at most T,
each vehicle serving one station.  The solver binary-searches T over the
distinct travel times and decides each threshold exactly with a depth-first
cover search over vehicle groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .model import EV


@dataclass(frozen=True)
class DispatchVehicle:
    id: str
    kind: str
    output_kw: float


@dataclass(frozen=True)
class DispatchStation:
    id: str
    requirement_kw: float


@dataclass
class DispatchInstance:
    vehicles: list[DispatchVehicle]
    stations: list[DispatchStation]  # listed in priority order
    travel_s: dict[tuple[str, str], float]  # (vehicle, station) -> seconds
    eta: float = 1.0

    def time(self, vehicle_id: str, station_id: str) -> float:
        return self.travel_s.get((vehicle_id, station_id), math.inf)


@dataclass
class DispatchSolution:
    assignment: dict[str, str]  # vehicle -> station
    objective_s: float
    delivered_kw: dict[str, float]
    feasible: bool = True
    covered_stations: list[str] = field(default_factory=list)
    shortfall_kw: dict[str, float] = field(default_factory=dict)


def _effective_output(inst: DispatchInstance, vehicle: DispatchVehicle, expected_capacity: bool) -> float:
    if expected_capacity and vehicle.kind == EV:
        return vehicle.output_kw * inst.eta
    return vehicle.output_kw


def _cover_search(
    stations: list[DispatchStation],
    eligible: dict[str, list[tuple[str, float]]],
    budget: Optional[int] = None,
) -> Optional[dict[str, str]]:
    """Assign vehicles so each station's requirement is met; None when impossible.

    ``eligible[s]`` lists (vehicle, output) usable for station s, strongest
    first.  ``budget`` bounds the total number of assigned vehicles.
    """
    order = sorted(stations, key=lambda s: (-s.requirement_kw, s.id))
    assignment: dict[str, str] = {}

    def assign_station(idx: int, remaining_budget: Optional[int]) -> bool:
        if idx == len(order):
            return True
        station = order[idx]
        need = station.requirement_kw
        if need <= 1e-9:
            return assign_station(idx + 1, remaining_budget)
        options = [(veh, out) for veh, out in eligible[station.id] if veh not in assignment]
        suffix = [0.0] * (len(options) + 1)
        for i in range(len(options) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + options[i][1]

        def pick(i: int, got: float, used: int) -> bool:
            if got >= need - 1e-9:
                if remaining_budget is not None and used > remaining_budget:
                    return False
                nxt = None if remaining_budget is None else remaining_budget - used
                if assign_station(idx + 1, nxt):
                    return True
                return False
            if i == len(options) or got + suffix[i] < need - 1e-9:
                return False
            if remaining_budget is not None:
                if used >= remaining_budget:
                    return False
                # options are strongest-first, so this is a valid count bound
                min_more = math.ceil((need - got - 1e-9) / options[i][1])
                if used + min_more > remaining_budget:
                    return False
            veh, out = options[i]
            if veh not in assignment:
                assignment[veh] = station.id
                if pick(i + 1, got + out, used + 1):
                    return True
                del assignment[veh]
            return pick(i + 1, got, used)

        return pick(0, 0.0, 0)

    if assign_station(0, budget):
        return dict(assignment)
    return None


def _eligibility(
    inst: DispatchInstance, threshold_s: float, expected_capacity: bool
) -> dict[str, list[tuple[str, float]]]:
    eligible: dict[str, list[tuple[str, float]]] = {s.id: [] for s in inst.stations}
    for veh in inst.vehicles:
        out = _effective_output(inst, veh, expected_capacity)
        if out <= 0:
            continue
        for st in inst.stations:
            if inst.time(veh.id, st.id) <= threshold_s:
                eligible[st.id].append((veh.id, out))
    for st in inst.stations:
        eligible[st.id].sort(key=lambda e: (-e[1], e[0]))
    return eligible


def solve(inst: DispatchInstance, expected_capacity: bool = False) -> DispatchSolution:
    """Optimal min-max arrival-time assignment, or a proportional partial cover."""
    outputs = {v.id: _effective_output(inst, v, expected_capacity) for v in inst.vehicles}
    demanded = [s for s in inst.stations if s.requirement_kw > 1e-9]
    if not demanded:
        return DispatchSolution(
            assignment={}, objective_s=0.0,
            delivered_kw={s.id: 0.0 for s in inst.stations},
            covered_stations=[s.id for s in inst.stations],
        )

    thresholds = sorted(
        {inst.time(v.id, s.id) for v in inst.vehicles for s in demanded if math.isfinite(inst.time(v.id, s.id))}
    )
    feasible_at = lambda t: _cover_search(demanded, _eligibility(inst, t, expected_capacity)) is not None

    if not thresholds or not feasible_at(thresholds[-1]):
        return _partial_solution(inst, outputs)

    lo, hi = 0, len(thresholds) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible_at(thresholds[mid]):
            hi = mid
        else:
            lo = mid + 1
    best_t = thresholds[lo]

    # tie-break: fewest assigned vehicles, explored in (output desc, id asc) order
    eligible = _eligibility(inst, best_t, expected_capacity)
    max_out = max(out for v, out in outputs.items() if out > 0)
    min_budget = max(
        len(demanded), sum(math.ceil((s.requirement_kw - 1e-9) / max_out) for s in demanded)
    )
    assignment = None
    for budget in range(min_budget, len(inst.vehicles) + 1):
        assignment = _cover_search(demanded, eligible, budget=budget)
        if assignment is not None:
            break
    assert assignment is not None
    assignment = {veh: assignment[veh] for veh in sorted(assignment)}

    delivered = {s.id: 0.0 for s in inst.stations}
    for veh, st in assignment.items():
        delivered[st] += outputs[veh]
    objective = max((inst.time(veh, st) for veh, st in assignment.items()), default=0.0)
    return DispatchSolution(
        assignment=assignment,
        objective_s=objective,
        delivered_kw=delivered,
        covered_stations=[s.id for s in inst.stations],
    )


def _partial_solution(inst: DispatchInstance, outputs: dict[str, float]) -> DispatchSolution:
    """Insufficient capacity: cover the longest station prefix, split the rest by demand."""
    covered_ids: list[str] = []
    assignment: dict[str, str] = {}
    for idx in range(len(inst.stations) - 1, 0, -1):
        prefix = [s for s in inst.stations[:idx] if s.requirement_kw > 1e-9]
        trial = _cover_search(prefix, _eligibility_prefix(inst, outputs, prefix))
        if trial is not None:
            covered_ids = [s.id for s in inst.stations[:idx]]
            assignment = trial
            break

    delivered = {s.id: 0.0 for s in inst.stations}
    for veh, st in assignment.items():
        delivered[st] += outputs[veh]

    remaining = [s for s in inst.stations if s.id not in covered_ids and s.requirement_kw > 1e-9]
    shortfall = {s.id: s.requirement_kw for s in remaining}
    leftovers = [v for v in inst.vehicles if v.id not in assignment and outputs[v.id] > 0]
    leftovers.sort(key=lambda v: (-outputs[v.id], v.id))
    for veh in leftovers:
        reachable = [s for s in remaining if math.isfinite(inst.time(veh.id, s.id)) and shortfall[s.id] > 1e-9]
        if not reachable:
            continue
        target = max(reachable, key=lambda s: (shortfall[s.id], s.id))
        assignment[veh.id] = target.id
        delivered[target.id] += outputs[veh.id]
        shortfall[target.id] = max(0.0, shortfall[target.id] - outputs[veh.id])

    assignment = {veh: assignment[veh] for veh in sorted(assignment)}
    objective = max((inst.time(veh, st) for veh, st in assignment.items()), default=0.0)
    return DispatchSolution(
        assignment=assignment,
        objective_s=objective,
        delivered_kw=delivered,
        feasible=False,
        covered_stations=covered_ids,
        shortfall_kw={k: v for k, v in shortfall.items() if v > 1e-9},
    )


def _eligibility_prefix(
    inst: DispatchInstance, outputs: dict[str, float], prefix: list[DispatchStation]
) -> dict[str, list[tuple[str, float]]]:
    eligible: dict[str, list[tuple[str, float]]] = {s.id: [] for s in prefix}
    for veh in inst.vehicles:
        if outputs[veh.id] <= 0:
            continue
        for st in prefix:
            if math.isfinite(inst.time(veh.id, st.id)):
                eligible[st.id].append((veh.id, outputs[veh.id]))
    for st in prefix:
        eligible[st.id].sort(key=lambda e: (-e[1], e[0]))
    return eligible


def validate(inst: DispatchInstance, sol: DispatchSolution, expected_capacity: bool = False) -> list[str]:
    """Re-check the assignment constraints arithmetically, independent of the solver."""
    v: list[str] = []
    seen_vehicles = set()
    for veh_id, st_id in sol.assignment.items():
        if veh_id in seen_vehicles:
            v.append(f"vehicle {veh_id} assigned more than once")
        seen_vehicles.add(veh_id)
        if st_id not in {s.id for s in inst.stations}:
            v.append(f"vehicle {veh_id} assigned to unknown station {st_id}")
        if not math.isfinite(inst.time(veh_id, st_id)):
            v.append(f"vehicle {veh_id} cannot reach station {st_id}")

    outputs = {x.id: _effective_output(inst, x, expected_capacity) for x in inst.vehicles}
    covered = set(sol.covered_stations)
    for st in inst.stations:
        got = sum(outputs[veh] for veh, s in sol.assignment.items() if s == st.id)
        if abs(got - sol.delivered_kw.get(st.id, 0.0)) > 1e-6:
            v.append(f"station {st.id}: reported delivery {sol.delivered_kw.get(st.id)} != {got}")
        if sol.feasible and st.id in covered and got < st.requirement_kw - 1e-9:
            v.append(f"station {st.id}: delivered {got} kW < requirement {st.requirement_kw} kW")

    worst = max((inst.time(veh, st) for veh, st in sol.assignment.items()), default=0.0)
    if abs(worst - sol.objective_s) > 1e-9:
        v.append(f"objective {sol.objective_s} != max assigned travel time {worst}")
    return v
