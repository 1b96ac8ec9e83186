"""Independent brute-force checkers for the solver equivalence suites.

Everything here is deliberately written against the problem statement rather
than the production code paths: union-find instead of component counting,
plain breadth-first search instead of forest extraction, and full
enumeration instead of branch-and-bound.  The instance generators are seeded
so suites reproduce exactly.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .mesr import DispatchInstance, DispatchStation, DispatchVehicle
from .model import EV, MESS, Scenario, Uav, distance_km, within_range
from .uav import (
    DEPLOYMENT,
    SET_OFF,
    SWAP,
    RouteGroup,
    RouteSite,
    RoutingInstance,
    UdssfInstance,
    UdssfTarget,
)

# ---------------------------------------------------------------------------
# radiality: union-find cycle detection


def radial_by_union_find(scenario: Scenario) -> bool:
    parent: dict[str, str] = {b: b for b in scenario.buses}
    cyclic: dict[str, bool] = {b: False for b in scenario.buses}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for line in scenario.lines.values():
        if not (line.switch_closed and line.equipment_ok):
            continue
        if not (scenario.buses[line.from_bus].equipment_ok and scenario.buses[line.to_bus].equipment_ok):
            continue
        ra, rb = find(line.from_bus), find(line.to_bus)
        if ra == rb:
            cyclic[ra] = True
        else:
            parent[ra] = rb
            cyclic[rb] = cyclic[rb] or cyclic[ra]

    for bus in scenario.buses.values():
        if bus.energized and cyclic[find(bus.id)]:
            return False
    return True


# ---------------------------------------------------------------------------
# communication reachability


def comm_by_reachability(scenario: Scenario) -> dict[str, bool]:
    """Comm flags by plain BFS from energized central nodes over eligible hops."""
    nodes = sorted(scenario.cn_nodes.values(), key=lambda n: n.id)
    capable = [n for n in nodes if n.energized or n.is_uav_backed]
    reached = {n.id for n in nodes if n.is_central and n.energized}
    frontier = sorted(reached)
    while frontier:
        nxt = []
        for node_id in frontier:
            a = scenario.cn_nodes[node_id]
            for b in capable:
                if b.id in reached:
                    continue
                if within_range(a.x, a.y, b.x, b.y, max(a.range_km, b.range_km)):
                    reached.add(b.id)
                    nxt.append(b.id)
        frontier = sorted(nxt)
    return {n.id: n.id in reached for n in nodes}


def bus_comm_by_pairs(scenario: Scenario, comm: dict[str, bool]) -> dict[str, bool]:
    out = {}
    for bus in scenario.buses.values():
        out[bus.id] = any(
            comm.get(n.id, False) and within_range(bus.x, bus.y, n.x, n.y, n.range_km)
            for n in scenario.cn_nodes.values()
        )
    return out


def ev_comm_by_pairs(scenario: Scenario, comm: dict[str, bool]) -> dict[str, bool]:
    out = {}
    for veh in scenario.vehicles.values():
        if veh.kind != EV:
            continue
        out[veh.id] = any(
            comm.get(n.id, False) and within_range(veh.x, veh.y, n.x, n.y, n.range_km)
            for n in scenario.cn_nodes.values()
        )
    return out


# ---------------------------------------------------------------------------
# dispatch: exhaustive assignment enumeration


def dispatch_by_enumeration(inst: DispatchInstance, expected_capacity: bool = False) -> Optional[float]:
    """Optimal min-max arrival time over every possible assignment, or None."""
    stations = [s for s in inst.stations if s.requirement_kw > 1e-9]
    if not stations:
        return 0.0
    outputs = {}
    for veh in inst.vehicles:
        out = veh.output_kw
        if expected_capacity and veh.kind == EV:
            out *= inst.eta
        outputs[veh.id] = out
    choices = [None] + [s.id for s in stations]
    best = None
    for combo in itertools.product(choices, repeat=len(inst.vehicles)):
        got = {s.id: 0.0 for s in stations}
        worst = 0.0
        ok = True
        for veh, choice in zip(inst.vehicles, combo):
            if choice is None:
                continue
            t = inst.time(veh.id, choice)
            if not math.isfinite(t):
                ok = False
                break
            got[choice] += outputs[veh.id]
            worst = max(worst, t)
        if not ok:
            continue
        if all(got[s.id] >= s.requirement_kw - 1e-9 for s in stations):
            if best is None or worst < best:
                best = worst
    return best


# ---------------------------------------------------------------------------
# routing: exhaustive plan enumeration


def routing_by_enumeration(inst: RoutingInstance) -> Optional[float]:
    """Minimum makespan by generating every assignment/swap plan and simulating it."""
    fleet = sorted(inst.fleet, key=lambda u: u.id)
    groups = list(inst.groups)
    site_lists = [inst.group_sites(g.index) for g in groups]

    assignment_spaces = []
    for sites in site_lists:
        assignment_spaces.append(list(itertools.permutations(range(len(fleet)), len(sites))))

    swap_ids = list(range(len(inst.swaps)))
    leg_spaces = []
    for sites in site_lists:
        leg_spaces.append(list(itertools.product([None] + swap_ids, repeat=len(sites))))

    best = None
    for assign_combo in itertools.product(*assignment_spaces):
        for leg_combo in itertools.product(*leg_spaces):
            used = [s for legs in leg_combo for s in legs if s is not None]
            if len(set(used)) != len(used):
                continue
            makespan = _simulate_plan(inst, fleet, groups, site_lists, assign_combo, leg_combo)
            if makespan is not None and (best is None or makespan < best):
                best = makespan
    return best


def _simulate_plan(inst, fleet, groups, site_lists, assign_combo, leg_combo) -> Optional[float]:
    home = inst.set_off
    pos: list = [home] * len(fleet)
    batt = [1.0] * len(fleet)
    free = [0.0] * len(fleet)
    prev_depart = 0.0
    for group, sites, uav_ids, legs in zip(groups, site_lists, assign_combo, leg_combo):
        floor_time = max(prev_depart, group.ready_s)
        arrivals = []
        for site, uidx, via in zip(sites, uav_ids, legs):
            uav = fleet[uidx]
            if via is None:
                leg = distance_km(pos[uidx].x, pos[uidx].y, site.x, site.y)
                batt[uidx] -= leg * uav.per_km_draw
                if batt[uidx] < -1e-12:
                    return None
                arrive = max(free[uidx] + 3600.0 * leg / uav.speed_kmh, floor_time)
            else:
                if pos[uidx].kind != DEPLOYMENT:
                    return None
                swap = inst.swaps[via]
                leg1 = distance_km(pos[uidx].x, pos[uidx].y, swap.x, swap.y)
                if batt[uidx] - leg1 * uav.per_km_draw < -1e-12:
                    return None
                leg2 = distance_km(swap.x, swap.y, site.x, site.y)
                batt[uidx] = 1.0 - leg2 * uav.per_km_draw
                if batt[uidx] < -1e-12:
                    return None
                arrive = max(
                    free[uidx] + 3600.0 * leg1 / uav.speed_kmh + swap.swap_s + 3600.0 * leg2 / uav.speed_kmh,
                    floor_time,
                )
            arrivals.append(arrive)
            pos[uidx] = site
            free[uidx] = arrive
        depart = (max(arrivals) if arrivals else floor_time) + group.work_s
        for site, uidx in zip(sites, uav_ids):
            batt[uidx] -= site.work_draw
            if batt[uidx] < -1e-12:
                return None
            free[uidx] = depart
        prev_depart = depart
    makespan = 0.0
    for uidx, uav in enumerate(fleet):
        if pos[uidx] is home:
            continue
        leg = distance_km(pos[uidx].x, pos[uidx].y, home.x, home.y)
        if batt[uidx] - leg * uav.per_km_draw < -1e-12:
            return None
        makespan = max(makespan, free[uidx] + 3600.0 * leg / uav.speed_kmh)
    return makespan


# ---------------------------------------------------------------------------
# UDSSF feasibility for exhaustive subset verification


def udssf_feasible_bruteforce(
    scenario: Scenario,
    targets: Sequence[UdssfTarget],
    sites: Sequence[tuple[float, float]],
    uav_range_km: float,
) -> bool:
    """Would UAV base stations at ``sites`` satisfy every target's clauses?"""
    entries: list[tuple[str, float, float, float, bool, bool, bool]] = []
    for n in scenario.fixed_cn_nodes():
        entries.append((n.id, n.x, n.y, n.range_km, n.is_central, n.energized, False))
    for idx, (x, y) in enumerate(sites):
        entries.append((f"#uav{idx}", x, y, uav_range_km, False, False, True))

    reached = {e[0] for e in entries if e[4] and e[5]}
    capable = [e for e in entries if e[5] or e[6]]
    changed = True
    while changed:
        changed = False
        for a in entries:
            if a[0] not in reached:
                continue
            for b in capable:
                if b[0] in reached:
                    continue
                if within_range(a[1], a[2], b[1], b[2], max(a[3], b[3])):
                    reached.add(b[0])
                    changed = True

    def bus_ok(bus_id: str) -> bool:
        bus = scenario.buses[bus_id]
        return any(
            e[0] in reached and within_range(bus.x, bus.y, e[1], e[2], e[3]) for e in entries
        )

    return all(any(bus_ok(b) for b in clause) for t in targets for clause in t.clauses)


# ---------------------------------------------------------------------------
# seeded instance generators


def random_dispatch_instance(rng: random.Random, max_vehicles: int = 6, max_stations: int = 3) -> DispatchInstance:
    n_veh = rng.randint(1, max_vehicles)
    n_st = rng.randint(1, max_stations)
    vehicles = []
    for i in range(n_veh):
        kind = MESS if rng.random() < 0.3 else EV
        out = rng.randint(1, 10) * 50
        vehicles.append(DispatchVehicle(id=f"v{i:02d}", kind=kind, output_kw=float(out)))
    stations = []
    for j in range(n_st):
        stations.append(DispatchStation(id=f"s{j}", requirement_kw=float(rng.randint(0, 12) * 50)))
    travel = {}
    for veh in vehicles:
        for st in stations:
            if rng.random() < 0.9:
                travel[(veh.id, st.id)] = float(rng.randint(10, 600))
    return DispatchInstance(vehicles=vehicles, stations=stations, travel_s=travel, eta=0.3)


def random_routing_instance(
    rng: random.Random, max_uavs: int = 2, max_sites: int = 4, max_swaps: int = 1
) -> RoutingInstance:
    n_uav = rng.randint(1, max_uavs)
    n_sites = rng.randint(1, max_sites)
    fleet = [
        Uav(id=f"u{i}", speed_kmh=180.0, range_budget_km=float(rng.choice([12, 20, 50])), home="w0")
        for i in range(n_uav)
    ]
    home = RouteSite(id="w0", x=0.0, y=0.0, kind=SET_OFF)
    groups: list[RouteGroup] = []
    deployment: list[RouteSite] = []
    remaining = n_sites
    gi = 0
    while remaining > 0:
        size = rng.randint(1, min(remaining, n_uav))
        groups.append(
            RouteGroup(index=gi, ready_s=float(rng.randint(0, 4) * 60), work_s=float(rng.randint(1, 4) * 30))
        )
        for k in range(size):
            deployment.append(
                RouteSite(
                    id=f"d{gi}{k}",
                    x=float(rng.randint(-6, 6)),
                    y=float(rng.randint(-6, 6)),
                    kind=DEPLOYMENT,
                    group=gi,
                    work_draw=rng.randint(0, 3) * 0.02,
                )
            )
        remaining -= size
        gi += 1
    swaps = []
    for s in range(rng.randint(0, max_swaps)):
        swaps.append(
            RouteSite(
                id=f"x{s}", x=float(rng.randint(-4, 4)), y=float(rng.randint(-4, 4)),
                kind=SWAP, swap_s=float(rng.randint(1, 3) * 30),
            )
        )
    return RoutingInstance(set_off=home, deployment=deployment, swaps=swaps, groups=groups, fleet=fleet)


def random_switch_pattern(scenario: Scenario, rng: random.Random) -> Scenario:
    """Random closed/open pattern over healthy lines, with stations energizable."""
    out = scenario.clone()
    for line in out.lines.values():
        if line.equipment_ok:
            line.switch_closed = rng.random() < 0.5
    for bus in out.buses.values():
        bus.energized = rng.random() < 0.5
    return out


def random_energization_pattern(scenario: Scenario, rng: random.Random) -> Scenario:
    out = scenario.clone()
    for node in out.cn_nodes.values():
        node.energized = rng.random() < 0.5
        node.comm = False
    return out


def random_udssf_instance(
    scenario: Scenario, rng: random.Random, max_candidates: int = 8
) -> UdssfInstance:
    lines = sorted(scenario.lines.values(), key=lambda l: l.id)
    line = lines[rng.randrange(len(lines))]
    if rng.random() < 0.7:
        target = UdssfTarget(clauses=[[line.from_bus], [line.to_bus]])
    else:
        sides = [b for b, q in ((line.from_bus, line.control_from), (line.to_bus, line.control_to)) if q]
        target = UdssfTarget(clauses=[sides])
    a = scenario.buses[line.from_bus]
    b = scenario.buses[line.to_bus]
    n_cand = rng.randint(2, max_candidates)
    candidates = []
    for _ in range(n_cand):
        base = a if rng.random() < 0.5 else b
        candidates.append(
            (round(base.x + rng.uniform(-1.5, 1.5), 3), round(base.y + rng.uniform(-1.5, 1.5), 3))
        )
    return UdssfInstance(targets=[target], candidates=sorted(set(candidates)))


# ---------------------------------------------------------------------------
# suite runners shared by the CLI and the acceptance tests


@dataclass
class SuiteResult:
    name: str
    passed: int
    total: int
    failures: list[str]

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def dispatch_suite(count: int, seed: int) -> SuiteResult:
    from . import mesr

    rng = random.Random(seed)
    failures: list[str] = []
    for i in range(count):
        inst = random_dispatch_instance(rng)
        expected = dispatch_by_enumeration(inst)
        sol = mesr.solve(inst)
        if expected is None:
            if sol.feasible:
                failures.append(f"instance {i}: solver claims feasible, enumeration says not")
        elif not sol.feasible:
            failures.append(f"instance {i}: solver claims infeasible, enumeration found {expected}")
        elif abs(sol.objective_s - expected) > 1e-9:
            failures.append(f"instance {i}: objective {sol.objective_s} != {expected}")
        elif mesr.validate(inst, sol):
            failures.append(f"instance {i}: solution fails validation")
    return SuiteResult("dispatch", count - len(failures), count, failures[:5])


def routing_suite(count: int, seed: int) -> SuiteResult:
    from . import uav as uav_mod

    rng = random.Random(seed)
    failures: list[str] = []
    for i in range(count):
        inst = random_routing_instance(rng)
        expected = routing_by_enumeration(inst)
        try:
            sol = uav_mod.solve_routing(inst, node_budget=2_000_000)
        except uav_mod.RoutingInfeasible:
            sol = None
        if expected is None:
            if sol is not None:
                failures.append(f"instance {i}: solver found {sol.objective_s}, enumeration says infeasible")
            continue
        if sol is None:
            failures.append(f"instance {i}: solver infeasible, enumeration found {expected}")
        elif abs(sol.objective_s - expected) > 1e-6:
            failures.append(f"instance {i}: objective {sol.objective_s:.3f} != {expected:.3f}")
        else:
            issues = uav_mod.validate_route(inst, sol) + uav_mod.per_uav_one_site_per_group(sol, inst)
            if issues:
                failures.append(f"instance {i}: solution fails validation: {issues[0]}")
    return SuiteResult("routing", count - len(failures), count, failures[:5])


def connectivity_suite(count: int, seed: int, scenario: Optional[Scenario] = None) -> SuiteResult:
    from .cases import build_case37
    from .comm import coverage_pairs, solve_connectivity, validate_certificate
    from .model import sorted_by_id

    base = scenario if scenario is not None else build_case37()
    rng = random.Random(seed)
    failures: list[str] = []
    for i in range(count):
        pattern = random_energization_pattern(base, rng)
        nodes = sorted_by_id(pattern.cn_nodes.values())
        cov = coverage_pairs(nodes)
        cert = solve_connectivity(nodes, cov)
        expected = comm_by_reachability(pattern)
        if cert.comm != expected:
            failures.append(f"pattern {i}: comm flags differ from reachability oracle")
            continue
        issues = validate_certificate(nodes, cov, cert)
        if issues:
            failures.append(f"pattern {i}: certificate invalid: {issues[0]}")
    return SuiteResult("connectivity", count - len(failures), count, failures[:5])


def radiality_suite(count: int, seed: int, scenario: Optional[Scenario] = None) -> SuiteResult:
    from .cases import build_case37
    from .power import check_radiality

    base = scenario if scenario is not None else build_case37()
    rng = random.Random(seed)
    failures: list[str] = []
    for i in range(count):
        pattern = random_switch_pattern(base, rng)
        got = check_radiality(pattern).radial
        expected = radial_by_union_find(pattern)
        if got != expected:
            failures.append(f"pattern {i}: flow-count check {got} != union-find {expected}")
    return SuiteResult("radiality", count - len(failures), count, failures[:5])


def udssf_suite(count: int, seed: int, scenario: Optional[Scenario] = None) -> SuiteResult:
    from .cases import build_case37
    from .comm import coverage_pairs, solve_connectivity
    from .model import sorted_by_id
    from .uav import solve_udssf

    base = scenario if scenario is not None else build_case37()
    rng = random.Random(seed)
    failures: list[str] = []
    uav_range = sorted_by_id(base.uavs.values())[0].cn_range_km if base.uavs else 1.0
    for i in range(count):
        pattern = random_energization_pattern(base, rng)
        nodes = sorted_by_id(pattern.cn_nodes.values())
        cov = coverage_pairs(nodes, sorted_by_id(pattern.buses.values()))
        solve_connectivity(nodes, cov)
        inst = random_udssf_instance(pattern, rng)

        got = solve_udssf(pattern, cov, inst, uav_range, max_sites=len(inst.candidates))
        if not udssf_feasible_bruteforce(pattern, inst.targets, [], uav_range):
            if udssf_feasible_bruteforce(pattern, inst.targets, inst.candidates, uav_range):
                best = None
                for size in range(1, len(inst.candidates) + 1):
                    for subset in itertools.combinations(inst.candidates, size):
                        if udssf_feasible_bruteforce(pattern, inst.targets, subset, uav_range):
                            best = size
                            break
                    if best is not None:
                        break
                if got is None:
                    failures.append(f"instance {i}: solver found nothing, minimum is {best}")
                elif len(got) != best:
                    failures.append(f"instance {i}: solver used {len(got)} sites, minimum is {best}")
                elif not udssf_feasible_bruteforce(pattern, inst.targets, got, uav_range):
                    failures.append(f"instance {i}: solver answer is not actually feasible")
            else:
                if got is not None:
                    failures.append(f"instance {i}: solver found sites but no subset is feasible")
        else:
            if got != []:
                failures.append(f"instance {i}: coverage already sufficient, solver returned {got}")
    return SuiteResult("udssf", count - len(failures), count, failures[:5])
