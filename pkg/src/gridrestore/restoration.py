"""Two-stage coordinated restoration: planning algorithms and the event engine.

Stage one prioritizes buses feeding communication and traffic facilities so
that controllability, EV dispatchability, and road speeds recover first;
stage two picks up the remaining load with the improved network.  Three
strategies share the machinery:

* A1 - proximity-ordered pickup (hop count from each station), every load
  switch closed on the way, all three resources.
* A2 - facility-priority order, MESS trucks only, no airborne base stations.
* A3 - facility-priority order with EVs, MESSs, and UAVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from . import mesr, uav
from .interdep import apply_damage, dispatchable_evs, recompute_coupled_state
from .model import EV, MESS, Scenario, distance_km, sorted_by_id
from .power import StationBalance, check_radiality, served_load_kw
from .traffic import (
    TravelQuery,
    advance_traffic,
    congested_speed_kmh,
    crossing_time_s,
    fastest_path,
)

CLOSE_LINE = "close-line"
CLOSE_LOAD_SWITCH = "close-load-switch"
OPEN_LINE = "open-line"
STATION_STARTUP = "station-startup"

PRIORITY_FACILITY = "cn-utn-first"
PRIORITY_PROXIMITY = "upstream-first"


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    use_evs: bool
    use_uavs: bool
    priority: str
    close_every_switch: bool


STRATEGIES = {
    "A1": StrategyConfig("A1", use_evs=True, use_uavs=True,
                         priority=PRIORITY_PROXIMITY, close_every_switch=True),
    "A2": StrategyConfig("A2", use_evs=False, use_uavs=False,
                         priority=PRIORITY_FACILITY, close_every_switch=False),
    "A3": StrategyConfig("A3", use_evs=True, use_uavs=True,
                         priority=PRIORITY_FACILITY, close_every_switch=False),
}


@dataclass
class RecoveryStep:
    index: int
    stage: int
    action: str
    target: str  # line id or bus id
    station: str
    demand_kw: float = 0.0
    cn_utn_kw: float = 0.0
    uav_sites: list[tuple[float, float]] = field(default_factory=list)
    ready_s: Optional[float] = None  # planned station-ready time for the UAV group
    uav_complete_s: Optional[float] = None


@dataclass
class StagePlan:
    stage: int
    steps: list[RecoveryStep]
    dispatch_instance: Optional[mesr.DispatchInstance] = None
    dispatch: Optional[mesr.DispatchSolution] = None
    routing_instance: Optional[uav.RoutingInstance] = None
    routing: Optional[uav.RouteSolution] = None
    unrecoverable: list[str] = field(default_factory=list)


@dataclass
class TimelineEvent:
    t_s: float
    kind: str
    element: str
    detail: dict = field(default_factory=dict)


@dataclass
class Timeline:
    strategy: str
    events: list[TimelineEvent]
    curve_kw: list[float]  # served load sampled once per second
    final_kw: float
    total_load_kw: float
    cn_utn_total_kw: float
    stage1_end_s: Optional[float]
    executed_steps: int
    dead_steps: list[tuple[int, str]]
    monotonicity_violations: list[str]
    dispatchable_ev_trace: list[tuple[float, int]]
    stage_plans: list[StagePlan]
    final_lane_density: dict[str, float] = field(default_factory=dict)

    def time_to_fraction(self, fraction: float) -> Optional[float]:
        target = fraction * self.final_kw
        for t, value in enumerate(self.curve_kw):
            if value >= target - 1e-9:
                return float(t)
        return None

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "final_restored_kw": round(self.final_kw, 3),
            "total_load_kw": round(self.total_load_kw, 3),
            "restored_fraction": round(self.final_kw / self.total_load_kw, 4) if self.total_load_kw else 0.0,
            "time_to_50pct_s": self.time_to_fraction(0.5),
            "time_to_90pct_s": self.time_to_fraction(0.9),
            "stage1_end_s": self.stage1_end_s,
            "executed_steps": self.executed_steps,
            "dead_steps": [{"index": i, "reason": r} for i, r in self.dead_steps],
            "monotonicity_violations": self.monotonicity_violations,
        }


def healthy_stations(scenario: Scenario) -> list[str]:
    return [b.id for b in scenario.stations() if b.equipment_ok]


def nearest_junction(scenario: Scenario, x: float, y: float) -> str:
    best = None
    for j in sorted_by_id(scenario.junctions.values()):
        d = distance_km(x, y, j.x, j.y)
        if best is None or d < best[0] - 1e-12:
            best = (d, j.id)
    assert best is not None
    return best[1]


# ---------------------------------------------------------------------------
# stage planning


def plan_stage1(scenario: Scenario, cfg: StrategyConfig) -> StagePlan:
    """Ordered restoration steps for stage one on a planning copy of the state.

    The copy assumes every healthy station operates as an energization root,
    which execution later realizes once storage vehicles arrive.
    """
    w = scenario.clone()
    sources = healthy_stations(w)
    sweep = recompute_coupled_state(w, sources)
    plan = StagePlan(stage=1, steps=[])
    steps = plan.steps
    roots: dict[str, str] = {s: s for s in sources}
    hops: dict[str, int] = {s: 0 for s in sources}

    def add_step(action, target, station, demand, cn_utn=0.0, sites=None):
        steps.append(
            RecoveryStep(
                index=len(steps), stage=1, action=action, target=target, station=station,
                demand_kw=demand, cn_utn_kw=cn_utn, uav_sites=list(sites or []),
            )
        )

    for station in sources:
        bus = w.buses[station]
        add_step(STATION_STARTUP, station, station, bus.load_kw, bus.cn_utn_load_kw)
        bus.load_switch_closed = True
        sweep = recompute_coupled_state(w, sources)

    while True:
        admissible = []
        for line in sorted_by_id(w.lines.values()):
            if line.switch_closed or not line.equipment_ok:
                continue
            e_from = w.buses[line.from_bus].energized
            e_to = w.buses[line.to_bus].energized
            if int(e_from) + int(e_to) != 1:
                continue
            live, dark = (line.from_bus, line.to_bus) if e_from else (line.to_bus, line.from_bus)
            if not w.buses[dark].equipment_ok:
                continue
            line.switch_closed = True
            radial = check_radiality(w).radial
            line.switch_closed = False
            if not radial:
                continue
            if w.buses[line.from_bus].comm and w.buses[line.to_bus].comm:
                admissible.append((line, live, dark, None))
            elif cfg.use_uavs:
                inst = uav.UdssfInstance(
                    targets=[uav.line_close_target(line)],
                    candidates=uav.default_candidates(
                        w, [uav.line_close_target(line)],
                        _uav_range(w), w.params.udssf_grid_cap,
                    ),
                )
                sites = uav.solve_udssf(w, sweep.coverage, inst, _uav_range(w), w.params.udssf_max_sites)
                if sites:
                    admissible.append((line, live, dark, sites))
        if not admissible:
            break

        if cfg.priority == PRIORITY_FACILITY:
            admissible.sort(
                key=lambda entry: (
                    -w.buses[entry[2]].cn_utn_load_kw,
                    -w.buses[entry[2]].load_kw,
                    entry[2],
                    entry[0].id,
                )
            )
        else:
            admissible.sort(key=lambda entry: (hops[entry[1]] + 1, entry[2], entry[0].id))
        line, live, dark, sites = admissible[0]

        station = roots.get(live, live)
        roots[dark] = station
        hops[dark] = hops[live] + 1
        add_step(CLOSE_LINE, line.id, station, 0.0,
                 w.buses[dark].cn_utn_load_kw, sites)
        line.switch_closed = True
        sweep = recompute_coupled_state(w, sources)

        dark_bus = w.buses[dark]
        wants_switch = dark_bus.cn_utn_load_kw > 0 or (cfg.close_every_switch and dark_bus.load_kw > 0)
        if wants_switch and not dark_bus.load_switch_closed:
            add_step(CLOSE_LOAD_SWITCH, dark, station, dark_bus.load_kw, dark_bus.cn_utn_load_kw)
            dark_bus.load_switch_closed = True
            sweep = recompute_coupled_state(w, sources)
    return plan


def plan_stage2(scenario: Scenario, cfg: StrategyConfig) -> StagePlan:
    """Load pickup for energized buses whose switches stayed open after stage one."""
    w = scenario.clone()
    sweep = recompute_coupled_state(w, [b.id for b in w.stations() if b.energized])
    plan = StagePlan(stage=2, steps=[])
    roots = _roots_by_component(w)

    candidates = [
        bus for bus in sorted_by_id(w.buses.values())
        if bus.energized and not bus.load_switch_closed and bus.load_kw > 0 and bus.equipment_ok
    ]
    candidates.sort(key=lambda b: (-b.load_kw, b.id))
    for bus in candidates:
        station = roots.get(bus.id)
        if station is None:
            plan.unrecoverable.append(f"bus {bus.id}: not rooted at any station")
            continue
        sites: Optional[list] = []
        if not bus.comm:
            if not cfg.use_uavs:
                plan.unrecoverable.append(f"bus {bus.id}: no communication and UAVs not in use")
                continue
            target = uav.bus_comm_target(bus.id)
            inst = uav.UdssfInstance(
                targets=[target],
                candidates=uav.default_candidates(w, [target], _uav_range(w), w.params.udssf_grid_cap),
            )
            sites = uav.solve_udssf(w, sweep.coverage, inst, _uav_range(w), w.params.udssf_max_sites)
            if sites is None:
                plan.unrecoverable.append(f"bus {bus.id}: no UAV deployment can restore control")
                continue
        plan.steps.append(
            RecoveryStep(
                index=len(plan.steps), stage=2, action=CLOSE_LOAD_SWITCH, target=bus.id,
                station=station, demand_kw=bus.load_kw, cn_utn_kw=bus.cn_utn_load_kw,
                uav_sites=list(sites or []),
            )
        )
    return plan


def _roots_by_component(scenario: Scenario) -> dict[str, str]:
    """Map each bus to the station of its closed-line component, if any."""
    adj: dict[str, list[str]] = {b: [] for b in scenario.buses}
    for line in scenario.lines.values():
        if line.switch_closed and line.equipment_ok:
            adj[line.from_bus].append(line.to_bus)
            adj[line.to_bus].append(line.from_bus)
    roots: dict[str, str] = {}
    for station in healthy_stations(scenario):
        if station in roots:
            continue
        stack = [station]
        seen = {station}
        while stack:
            here = stack.pop()
            roots[here] = station
            for nbr in adj[here]:
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
    return roots


def _uav_range(scenario: Scenario) -> float:
    uavs = sorted_by_id(scenario.uavs.values())
    return uavs[0].cn_range_km if uavs else 1.0


# ---------------------------------------------------------------------------
# dispatch and routing preparation


def _travel_time(scenario: Scenario, origin: tuple[float, float], station_bus: str, kind: str) -> float:
    start = nearest_junction(scenario, origin[0], origin[1])
    bus = scenario.buses[station_bus]
    goal = nearest_junction(scenario, bus.x, bus.y)
    result = fastest_path(scenario, TravelQuery(origin=start, destination=goal, kind=kind))
    return result.time_s if result.reachable else math.inf


def build_dispatch_instance(
    scenario: Scenario, cfg: StrategyConfig, requirements: dict[str, float],
    exclude: set[str],
) -> mesr.DispatchInstance:
    available = dispatchable_evs(scenario)
    vehicles = []
    travel: dict[tuple[str, str], float] = {}
    stations = [
        mesr.DispatchStation(id=s, requirement_kw=round(req, 6))
        for s, req in sorted(requirements.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    for veh in sorted_by_id(scenario.vehicles.values()):
        if veh.id in exclude or veh.id not in available:
            continue
        if veh.kind == EV and not cfg.use_evs:
            continue
        vehicles.append(mesr.DispatchVehicle(id=veh.id, kind=veh.kind, output_kw=veh.output_kw))
        for st in stations:
            travel[(veh.id, st.id)] = _travel_time(scenario, (veh.x, veh.y), st.id, veh.kind)
    return mesr.DispatchInstance(
        vehicles=vehicles, stations=stations, travel_s=travel, eta=scenario.params.eta
    )


def build_routing_instance(
    scenario: Scenario, plan: StagePlan, t0: float
) -> Optional[uav.RoutingInstance]:
    warehouse = sorted_by_id(scenario.warehouses.values())[0]
    home = uav.RouteSite(id=warehouse.id, x=warehouse.x, y=warehouse.y, kind=uav.SET_OFF)
    groups: list[uav.RouteGroup] = []
    deployment: list[uav.RouteSite] = []
    params = scenario.params
    fleet = sorted_by_id(scenario.uavs.values())
    if not fleet:
        return None
    hover_draw_per_s = fleet[0].per_km_draw * params.uav_hover_equiv_kmh / 3600.0
    work_draw = round(params.da_work_s * hover_draw_per_s, 9)
    for step in plan.steps:
        if not step.uav_sites:
            continue
        if step.ready_s is None:
            continue  # unfunded step: no point routing its workgroup
        groups.append(
            uav.RouteGroup(index=step.index, ready_s=max(0.0, step.ready_s - t0), work_s=params.da_work_s)
        )
        for k, (x, y) in enumerate(step.uav_sites):
            deployment.append(
                uav.RouteSite(
                    id=f"g{step.index:03d}s{k}", x=x, y=y, kind=uav.DEPLOYMENT,
                    group=step.index, work_draw=work_draw,
                )
            )
    if not groups:
        return None
    swaps = [
        uav.RouteSite(
            id=f"{warehouse.id}~swap{k}", x=warehouse.x, y=warehouse.y, kind=uav.SWAP,
            swap_s=warehouse.swap_duration_s,
        )
        for k in range(warehouse.swap_slots)
    ]
    return uav.RoutingInstance(set_off=home, deployment=deployment, swaps=swaps, groups=groups, fleet=fleet)


def attach_uav_schedule(plan: StagePlan, solution: Optional[uav.RouteSolution], t0: float) -> None:
    """Record each workgroup's completion time (last departure after shared work)."""
    if solution is None:
        return
    departs: dict[int, float] = {}
    site_group = {}
    if plan.routing_instance is not None:
        site_group = {s.id: s.group for s in plan.routing_instance.deployment}
    for visits in solution.routes.values():
        for visit in visits:
            grp = site_group.get(visit.site)
            if grp is None:
                continue
            departs[grp] = max(departs.get(grp, 0.0), visit.depart_s)
    for step in plan.steps:
        if step.uav_sites and step.index in departs:
            step.uav_complete_s = t0 + departs[step.index]


def prepare_stage(
    scenario: Scenario, cfg: StrategyConfig, plan: StagePlan, t0: float,
    already_assigned: set[str], residuals: dict[str, float],
) -> None:
    """Solve dispatch and routing for one stage plan, filling in gate times."""
    requirements: dict[str, float] = {s: 0.0 for s in healthy_stations(scenario)}
    for step in plan.steps:
        requirements[step.station] = requirements.get(step.station, 0.0) + step.demand_kw
    for station, resid in residuals.items():
        if station in requirements:
            requirements[station] = max(0.0, requirements[station] - resid)

    inst = build_dispatch_instance(scenario, cfg, requirements, exclude=already_assigned)
    total_need = sum(s.requirement_kw for s in inst.stations)
    total_cap = sum(v.output_kw for v in inst.vehicles)
    if plan.stage == 2 and total_cap < total_need - 1e-9:
        solution = _proportional_dispatch(inst)
    else:
        solution = mesr.solve(inst)
    plan.dispatch_instance = inst
    plan.dispatch = solution
    _station_ready_times_with_residual(plan, solution, inst, t0, residuals)

    if cfg.use_uavs:
        routing_inst = build_routing_instance(scenario, plan, t0)
        plan.routing_instance = routing_inst
        if routing_inst is not None:
            try:
                plan.routing = uav.solve_routing(routing_inst, scenario.params.routing_node_budget)
            except uav.RoutingInfeasible as exc:
                plan.routing = None
                plan.unrecoverable.append(f"uav routing infeasible: {exc}")
            attach_uav_schedule(plan, plan.routing, t0)


def _proportional_dispatch(inst: mesr.DispatchInstance) -> mesr.DispatchSolution:
    """Capacity-short stage-two split: station targets scale with their demand."""
    total_need = sum(s.requirement_kw for s in inst.stations)
    total_cap = sum(v.output_kw for v in inst.vehicles)
    scale = total_cap / total_need if total_need > 0 else 0.0
    deficit = {s.id: s.requirement_kw * scale for s in inst.stations}
    assignment: dict[str, str] = {}
    delivered = {s.id: 0.0 for s in inst.stations}
    for veh in sorted(inst.vehicles, key=lambda v: (-v.output_kw, v.id)):
        reachable = [
            s for s in inst.stations
            if math.isfinite(inst.time(veh.id, s.id)) and deficit[s.id] > 1e-9
        ]
        if not reachable:
            continue
        target = max(reachable, key=lambda s: (deficit[s.id], s.id))
        assignment[veh.id] = target.id
        delivered[target.id] += veh.output_kw
        deficit[target.id] = max(0.0, deficit[target.id] - veh.output_kw)
    assignment = {veh: assignment[veh] for veh in sorted(assignment)}
    objective = max((inst.time(veh, st) for veh, st in assignment.items()), default=0.0)
    shortfall = {
        s.id: round(s.requirement_kw - delivered[s.id], 6)
        for s in inst.stations
        if delivered[s.id] < s.requirement_kw - 1e-9
    }
    return mesr.DispatchSolution(
        assignment=assignment, objective_s=objective, delivered_kw=delivered,
        feasible=False, covered_stations=[], shortfall_kw=shortfall,
    )


def _station_ready_times_with_residual(
    plan: StagePlan, dispatch: mesr.DispatchSolution, inst: mesr.DispatchInstance,
    t0: float, residuals: dict[str, float],
) -> None:
    arrivals: dict[str, list[tuple[float, float]]] = {}
    outputs = {v.id: v.output_kw for v in inst.vehicles}
    for veh, st in dispatch.assignment.items():
        arrivals.setdefault(st, []).append((t0 + inst.time(veh, st), outputs[veh]))
    for st in arrivals:
        arrivals[st].sort()
    cumulative: dict[str, float] = {}
    for step in plan.steps:
        need = cumulative.get(step.station, 0.0) + step.demand_kw
        cumulative[step.station] = need
        got = residuals.get(step.station, 0.0)
        ready: Optional[float] = t0 if got >= need - 1e-9 else None
        if ready is None:
            for when, out in arrivals.get(step.station, []):
                got += out
                if got >= need - 1e-9:
                    ready = when
                    break
        step.ready_s = ready


# ---------------------------------------------------------------------------
# execution engine


class _UavExecutor:
    """Plays a routing solution out on the engine clock.

    The solver fixes the structure (who serves which site, swap stopovers,
    group order); actual launch times follow the live station-readiness
    signal, so work never starts before the V2GS really covers the step.
    Waiting happens on the ground, which leaves the planned battery profile
    valid.
    """

    def __init__(self, inst: uav.RoutingInstance, sol: uav.RouteSolution):
        self.inst = inst
        self.groups = [g.index for g in inst.groups]
        self.group_info = {g.index: g for g in inst.groups}
        sites = {s.id: s for s in inst.deployment}
        swaps = {s.id: s for s in inst.swaps}
        # per group: list of (uav_id, site, via_swap_site_or_None)
        self.members: dict[int, list[tuple[str, uav.RouteSite, uav.RouteSite | None]]] = {
            g: [] for g in self.groups
        }
        for uav_id, visits in sorted(sol.routes.items()):
            pending_swap = None
            for visit in visits:
                if visit.site in swaps:
                    pending_swap = swaps[visit.site]
                elif visit.site in sites:
                    site = sites[visit.site]
                    self.members[site.group].append((uav_id, site, pending_swap))
                    pending_swap = None
        self.uav_by_id = {u.id: u for u in inst.fleet}
        self.position: dict[str, tuple[float, float]] = {
            u.id: (inst.set_off.x, inst.set_off.y) for u in inst.fleet
        }
        self.free_t: dict[str, float] = {u.id: 0.0 for u in inst.fleet}
        self.battery: dict[str, float] = {u.id: 1.0 for u in inst.fleet}
        self.cursor = 0
        self.prev_work_end = 0.0
        self.launched: list[tuple[int, float]] = []  # (group, work end), ascending
        self.completed: set[int] = set()
        self.cancelled: set[int] = set()
        self.returned = False

    def known_group(self, index: int) -> bool:
        return index in self.members

    def _fly(self, uav_id: str, a: tuple[float, float], b: tuple[float, float]) -> float:
        u = self.uav_by_id[uav_id]
        leg = distance_km(a[0], a[1], b[0], b[1])
        self.battery[uav_id] -= leg * u.per_km_draw
        return 3600.0 * leg / u.speed_kmh

    def tick(self, t: float, capacity_ready, step_dead, events) -> None:
        """Launch what can launch, then retire work that has finished.

        A group launches once the station's live residual covers its step and
        the previous group is at least in flight; arrivals are floored at the
        previous group's work end, so the inter-group precedence holds while
        long ferry legs overlap earlier work.  Waiting is on the ground.
        """
        while self.cursor < len(self.groups):
            gi = self.groups[self.cursor]
            if step_dead(gi):
                self.cancelled.add(gi)
                self.cursor += 1
                continue
            if not capacity_ready(gi):
                break
            floor = self.prev_work_end
            latest = floor
            for uav_id, site, via in sorted(self.members[gi]):
                start = max(t, self.free_t[uav_id])
                pos = self.position[uav_id]
                if via is not None:
                    hop = self._fly(uav_id, pos, (via.x, via.y))
                    events("uav-swap", uav_id, t_s=start + hop, site=via.id)
                    start = start + hop + via.swap_s
                    self.battery[uav_id] = 1.0
                    pos = (via.x, via.y)
                arrive = max(start + self._fly(uav_id, pos, (site.x, site.y)), floor)
                self.position[uav_id] = (site.x, site.y)
                self.free_t[uav_id] = arrive
                events("uav-arrive", uav_id, t_s=arrive, site=site.id, group=gi,
                       battery=round(self.battery[uav_id], 4))
                latest = max(latest, arrive)
            work_end = latest + self.group_info[gi].work_s
            for uav_id, site, _via in self.members[gi]:
                self.battery[uav_id] -= site.work_draw
                self.free_t[uav_id] = work_end
                events("uav-work-done", uav_id, t_s=work_end, site=site.id, group=gi,
                       battery=round(self.battery[uav_id], 4))
            self.prev_work_end = work_end
            self.launched.append((gi, work_end))
            self.cursor += 1

        while self.launched and self.launched[0][1] <= t:
            self.completed.add(self.launched.pop(0)[0])
        if self.cursor >= len(self.groups) and not self.launched and not self.returned:
            self.returned = True
            home = (self.inst.set_off.x, self.inst.set_off.y)
            for uav_id in sorted(self.position):
                if self.position[uav_id] != home:
                    back = self.free_t[uav_id] + self._fly(uav_id, self.position[uav_id], home)
                    self.position[uav_id] = home
                    self.free_t[uav_id] = back
                    events("uav-return", uav_id, t_s=back, battery=round(self.battery[uav_id], 4))


@dataclass
class _Motion:
    vehicle_id: str
    kind: str
    station: str
    path: list[str]
    leg: int = 0
    lane_progress_km: float = 0.0
    crossing_remaining_s: float = 0.0
    in_crossing: bool = False
    arrived: bool = False


class Engine:
    """Single-clock executor: traffic, vehicle motion, step firing, state sweeps."""

    def __init__(self, scenario: Scenario, cfg: StrategyConfig, horizon_s: int):
        self.w = scenario.clone()
        self.cfg = cfg
        self.horizon = int(horizon_s)
        self.t = 0
        self.events: list[TimelineEvent] = []
        self.curve: list[float] = []
        self.balances: dict[str, StationBalance] = {
            s: StationBalance(station=s) for s in healthy_stations(self.w)
        }
        self.motions: list[_Motion] = []
        self.assigned: set[str] = set()
        # each station executes its own step sequence; order within a queue
        # follows the plan, and queues are scanned in station-id order
        self.queues: dict[str, list[RecoveryStep]] = {s: [] for s in self.balances}
        self.cursors: dict[str, int] = {s: 0 for s in self.balances}
        self.stage_plans: list[StagePlan] = []
        self.stage = 0
        self.stage1_end: Optional[float] = None
        self.dead: list[tuple[int, str]] = []
        self.executed = 0
        self.monotonicity_violations: list[str] = []
        self.ev_trace: list[tuple[float, int]] = []
        self._last_limits: dict[str, float] = {}
        self._last_ev_count = -1
        self.uav_exec: Optional[_UavExecutor] = None
        self.steps_by_index: dict[int, RecoveryStep] = {}
        self.dead_indexes: set[int] = set()
        recompute_coupled_state(self.w, self._sources())
        self._record_monotonicity()

    # -- helpers

    def _sources(self) -> list[str]:
        return [s for s, b in self.balances.items() if b.fleet_capacity_kw > 0 and self.w.buses[s].equipment_ok]

    def _event(self, kind: str, element: str, **detail) -> None:
        self.events.append(TimelineEvent(t_s=float(self.t), kind=kind, element=element, detail=detail))

    def _sweep(self) -> None:
        recompute_coupled_state(self.w, self._sources())
        if self.stage == 1:
            self._record_monotonicity()

    def _record_monotonicity(self) -> None:
        for lane in sorted_by_id(self.w.lanes.values()):
            prev = self._last_limits.get(lane.id)
            if prev is not None and lane.v_lmax_kmh < prev - 1e-9:
                self.monotonicity_violations.append(
                    f"t={self.t}: lane {lane.id} limit fell {prev} -> {lane.v_lmax_kmh}"
                )
            self._last_limits[lane.id] = lane.v_lmax_kmh
        count = len([v for v in dispatchable_evs(self.w) if self.w.vehicles[v].kind == EV])
        if self._last_ev_count >= 0 and count < self._last_ev_count:
            self.monotonicity_violations.append(
                f"t={self.t}: dispatchable EV count fell {self._last_ev_count} -> {count}"
            )
        self._last_ev_count = count
        self.ev_trace.append((float(self.t), count))

    # -- staging

    def start_stage(self, stage: int) -> None:
        self.stage = stage
        residuals = {s: b.residual_kw for s, b in self.balances.items()}
        if stage == 1:
            plan = plan_stage1(self.w, self.cfg)
        else:
            plan = plan_stage2(self.w, self.cfg)
        prepare_stage(self.w, self.cfg, plan, float(self.t), self.assigned, residuals)
        self.stage_plans.append(plan)
        self.steps_by_index = {}
        self.dead_indexes = set()
        for step in plan.steps:
            if step.station in self.queues:
                self.queues[step.station].append(step)
                self.steps_by_index[step.index] = step
            else:
                self._kill(step, "station unavailable")
        self.uav_exec = None
        if plan.routing is not None and plan.routing_instance is not None:
            self.uav_exec = _UavExecutor(plan.routing_instance, plan.routing)
        self._event("stage-start", f"stage{stage}", steps=len(plan.steps))
        if plan.dispatch is not None:
            for veh_id, station in sorted(plan.dispatch.assignment.items()):
                self._dispatch_vehicle(veh_id, station)
        if plan.routing is not None:
            for uav_id, visits in sorted(plan.routing.routes.items()):
                if len(visits) > 1:
                    self._event("uav-route", uav_id, visits=len(visits),
                                return_s=self.t + visits[-1].arrive_s)

    def _dispatch_vehicle(self, veh_id: str, station: str) -> None:
        veh = self.w.vehicles[veh_id]
        origin = nearest_junction(self.w, veh.x, veh.y)
        bus = self.w.buses[station]
        goal = nearest_junction(self.w, bus.x, bus.y)
        result = fastest_path(self.w, TravelQuery(origin=origin, destination=goal, kind=veh.kind))
        if not result.reachable:
            self._event("dispatch-failed", veh_id, station=station)
            return
        veh.assigned_station = station
        self.assigned.add(veh_id)
        self.motions.append(_Motion(vehicle_id=veh_id, kind=veh.kind, station=station, path=result.path))
        self._event("vehicle-dispatch", veh_id, station=station,
                    planned_travel_s=round(result.time_s, 1))

    # -- per-tick dynamics

    def _rightofway(self, kind: str) -> tuple[float, float]:
        if kind == MESS:
            return self.w.params.mess_rightofway_lane, self.w.params.mess_rightofway_junction
        return 0.0, 0.0

    def _move_vehicles(self) -> bool:
        any_arrival = False
        for motion in self.motions:
            if motion.arrived:
                continue
            if len(motion.path) < 2:
                self._arrive(motion)
                any_arrival = True
                continue
            ro_lane, ro_junction = self._rightofway(motion.kind)
            remaining = 1.0
            while remaining > 0 and not motion.arrived:
                if motion.in_crossing:
                    used = min(remaining, motion.crossing_remaining_s)
                    motion.crossing_remaining_s -= used
                    remaining -= used
                    if motion.crossing_remaining_s <= 1e-9:
                        motion.in_crossing = False
                        motion.leg += 1
                        motion.lane_progress_km = 0.0
                        if motion.leg >= len(motion.path) - 1:
                            self._arrive(motion)
                            any_arrival = True
                    continue
                lane = self.w.lanes[f"{motion.path[motion.leg]}-{motion.path[motion.leg + 1]}"]
                v = congested_speed_kmh(lane, self.w.params)
                if motion.kind == MESS:
                    v = min((1.0 + ro_lane) * v, self.w.params.lane_limit_kmh)
                step_km = v * remaining / 3600.0
                room = lane.length_km - motion.lane_progress_km
                if step_km < room - 1e-12:
                    motion.lane_progress_km += step_km
                    remaining = 0.0
                else:
                    used = 3600.0 * room / v if v > 0 else remaining
                    remaining -= min(remaining, used)
                    junction = self.w.junctions[motion.path[motion.leg + 1]]
                    motion.in_crossing = True
                    motion.crossing_remaining_s = crossing_time_s(
                        junction, self.w.params, motion.kind, ro_junction
                    )
        return any_arrival

    def _arrive(self, motion: _Motion) -> None:
        motion.arrived = True
        veh = self.w.vehicles[motion.vehicle_id]
        bus = self.w.buses[motion.station]
        veh.x, veh.y = bus.x, bus.y
        self.balances[motion.station].vehicle_arrived(veh.output_kw)
        self._event("vehicle-arrive", motion.vehicle_id, station=motion.station,
                    output_kw=veh.output_kw)

    def _replan_motions(self) -> None:
        for motion in self.motions:
            if motion.arrived or len(motion.path) < 2:
                continue
            resume_at = motion.path[motion.leg + 1]
            result = fastest_path(
                self.w, TravelQuery(origin=resume_at, destination=motion.path[-1], kind=motion.kind)
            )
            if result.reachable:
                motion.path = motion.path[: motion.leg + 2] + result.path[1:]

    def _max_possible_residual(self, station: str) -> float:
        balance = self.balances[station]
        en_route = sum(
            self.w.vehicles[m.vehicle_id].output_kw
            for m in self.motions
            if not m.arrived and m.station == station
        )
        return balance.residual_kw + en_route

    def _run_uav_missions(self) -> None:
        if self.uav_exec is None:
            return

        def capacity_ready(group_index: int) -> bool:
            step = self.steps_by_index.get(group_index)
            if step is None:
                return False
            return self.balances[step.station].can_commit(step.demand_kw)

        def step_dead(group_index: int) -> bool:
            return group_index in self.dead_indexes

        def emit(kind: str, element: str, t_s: float, **detail) -> None:
            self.events.append(TimelineEvent(t_s=t_s, kind=kind, element=element, detail=detail))

        self.uav_exec.tick(float(self.t), capacity_ready, step_dead, emit)

    def _fire_ready_steps(self) -> None:
        for station in sorted(self.queues):
            queue = self.queues[station]
            balance = self.balances[station]
            while self.cursors[station] < len(queue):
                step = queue[self.cursors[station]]
                if step.uav_sites:
                    if self.uav_exec is None or not self.uav_exec.known_group(step.index):
                        self._kill(step, "UAV workgroup could not be scheduled")
                        continue
                    if step.index not in self.uav_exec.completed:
                        break
                if step.action == STATION_STARTUP and balance.fleet_capacity_kw <= 0:
                    # the station bus only energizes once storage is on site
                    if self._max_possible_residual(step.station) <= 0:
                        self._kill(step, "no storage vehicle will reach this station")
                        while self.cursors[station] < len(queue):
                            self._kill(queue[self.cursors[station]], "station never energized")
                        break
                    break
                if not balance.can_commit(step.demand_kw):
                    if self._max_possible_residual(step.station) < step.demand_kw - 1e-9:
                        self._kill(step, "insufficient station capacity")
                        continue
                    break
                self._execute(step, balance)
                self.cursors[station] += 1

    def _all_steps_settled(self) -> bool:
        return all(self.cursors[s] >= len(self.queues[s]) for s in self.queues)

    def _kill(self, step: RecoveryStep, reason: str) -> None:
        self.dead.append((step.index, f"stage{step.stage}: {reason}"))
        self.dead_indexes.add(step.index)
        self._event("step-dead", step.target, index=step.index, stage=step.stage, reason=reason)
        if step.station in self.cursors:
            self.cursors[step.station] += 1

    def _execute(self, step: RecoveryStep, balance: StationBalance) -> None:
        if step.demand_kw > 0:
            balance.commit(step.demand_kw)
        if step.action in (STATION_STARTUP, CLOSE_LOAD_SWITCH):
            self.w.buses[step.target].load_switch_closed = True
        elif step.action == CLOSE_LINE:
            self.w.lines[step.target].switch_closed = True
        elif step.action == OPEN_LINE:
            self.w.lines[step.target].switch_closed = False
        self._sweep()
        radial = check_radiality(self.w)
        if not radial.radial:
            raise AssertionError(f"radiality violated after step {step.index}: cycle {radial.cycle}")
        for bus in self.w.buses.values():
            if bus.load_switch_closed and not bus.energized:
                raise AssertionError(f"load switch closed on de-energized bus {bus.id}")
        self.executed += 1
        self._event("step-fired", step.target, index=step.index, stage=step.stage,
                    action=step.action, demand_kw=step.demand_kw, station=step.station)

    # -- main loop

    def run(self) -> Timeline:
        self.start_stage(1)
        self.curve.append(served_load_kw(self.w))
        while self.t < self.horizon:
            self.t += 1
            advance_traffic(self.w, 1.0)
            arrivals = self._move_vehicles()
            if arrivals:
                self._sweep()
            self._run_uav_missions()
            fired_before = self.executed
            self._fire_ready_steps()
            if self.executed != fired_before:
                self._replan_motions()
            if self.stage == 1 and self._all_steps_settled():
                self.stage1_end = float(self.t)
                self._event("stage-complete", "stage1")
                self.start_stage(2)
                self._run_uav_missions()
                self._fire_ready_steps()
            self.curve.append(served_load_kw(self.w))
        for station in sorted(self.queues):
            for step in self.queues[station][self.cursors[station]:]:
                self._event("step-unexecuted", step.target, index=step.index, stage=step.stage,
                            reason="horizon reached")
        total = sum(b.load_kw for b in self.w.buses.values() if b.equipment_ok)
        cn_utn_total = sum(b.cn_utn_load_kw for b in self.w.buses.values() if b.equipment_ok)
        self.events.sort(key=lambda e: e.t_s)  # UAV legs are committed ahead of the clock
        return Timeline(
            strategy=self.cfg.name,
            events=self.events,
            curve_kw=self.curve,
            final_kw=self.curve[-1],
            total_load_kw=total,
            cn_utn_total_kw=cn_utn_total,
            stage1_end_s=self.stage1_end,
            executed_steps=self.executed,
            dead_steps=self.dead,
            monotonicity_violations=self.monotonicity_violations,
            dispatchable_ev_trace=self.ev_trace,
            stage_plans=self.stage_plans,
            final_lane_density={
                lane_id: round(lane.background_vehicles / lane.length_km, 6)
                for lane_id, lane in sorted(self.w.lanes.items())
                if lane.length_km > 0
            },
        )


def run(scenario: Scenario, strategy: str, horizon_s: int = 14400) -> Timeline:
    """Execute one strategy on a damage-applied copy of the scenario."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r} (expected one of {sorted(STRATEGIES)})")
    from .scenario import _draw_participation

    prepared = apply_damage(scenario)
    _draw_participation(prepared)  # no-op when the willingness flags came from the file
    engine = Engine(prepared, STRATEGIES[strategy], horizon_s)
    return engine.run()
