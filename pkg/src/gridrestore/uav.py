"""UAV dispatch: minimum deployment-site selection and min-makespan routing.

Site selection searches candidate subsets in increasing size, so the first
feasible subset is cardinality-minimal and lexicographically pinned.
Routing is a branch-and-bound over per-workgroup site-to-UAV assignments
with optional battery-swap stopovers; workgroups are served strictly in
step order, which the restoration algorithms guarantee by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .comm import CoverageMatrix
from .model import CnNode, PdnLine, Scenario, Uav, distance_km, snap, within_range

SET_OFF = "set_off"
DEPLOYMENT = "deployment"
SWAP = "battery_swap"


# ---------------------------------------------------------------------------
# deployment-site selection


@dataclass
class UdssfTarget:
    """Communication requirement of one switch action as clauses over buses.

    Each clause is a list of bus ids of which at least one must communicate.
    A close needs both end buses (two unit clauses); an open needs any one
    controlling FTU side (one clause).
    """

    clauses: list[list[str]]

    def buses(self) -> list[str]:
        return sorted({b for clause in self.clauses for b in clause})


def line_close_target(line: PdnLine) -> UdssfTarget:
    return UdssfTarget(clauses=[[line.from_bus], [line.to_bus]])


def line_open_target(line: PdnLine) -> UdssfTarget:
    sides = [b for b, q in ((line.from_bus, line.control_from), (line.to_bus, line.control_to)) if q]
    return UdssfTarget(clauses=[sides])


def bus_comm_target(bus_id: str) -> UdssfTarget:
    return UdssfTarget(clauses=[[bus_id]])


@dataclass
class UdssfInstance:
    targets: list[UdssfTarget]
    candidates: list[tuple[float, float]]


def default_candidates(
    scenario: Scenario, targets: Sequence[UdssfTarget], uav_range_km: float, grid_cap: int = 24
) -> list[tuple[float, float]]:
    """Endpoint and midpoint candidates plus a bounding-box grid at range/sqrt(2)."""
    points: list[tuple[float, float]] = []
    anchors: list[tuple[float, float]] = []
    for target in targets:
        coords = [(scenario.buses[b].x, scenario.buses[b].y) for b in target.buses() if b in scenario.buses]
        anchors.extend(coords)
        points.extend(coords)
        if len(coords) == 2:
            (x1, y1), (x2, y2) = coords
            points.append(((x1 + x2) / 2.0, (y1 + y2) / 2.0))
    if anchors:
        xs = [p[0] for p in anchors]
        ys = [p[1] for p in anchors]
        step = uav_range_km / math.sqrt(2.0)
        grid: list[tuple[float, float]] = []
        y = min(ys)
        while y <= max(ys) + 1e-9:
            x = min(xs)
            while x <= max(xs) + 1e-9:
                grid.append((x, y))
                x += step
            y += step
        points.extend(grid[:grid_cap])
    return sorted({(snap(x), snap(y)) for x, y in points})


def solve_udssf(
    scenario: Scenario,
    cov: CoverageMatrix,
    inst: UdssfInstance,
    uav_range_km: float,
    max_sites: int = 4,
) -> Optional[list[tuple[float, float]]]:
    """Smallest candidate subset whose UAV base stations satisfy every target.

    Returns site coordinates, the empty list when current coverage already
    suffices, or None when even the full candidate set cannot help.
    """
    fixed = scenario.fixed_cn_nodes()
    comm_seed = sorted(n.id for n in fixed if n.comm)
    capable = {n.id for n in fixed if n.energized}
    fixed_by_id = {n.id: n for n in fixed}

    fixed_adj: dict[str, list[str]] = {n.id: [] for n in fixed}
    for a, b in sorted(cov.node_pairs):
        if a in capable and b in capable:
            fixed_adj[a].append(b)
            fixed_adj[b].append(a)

    candidates = inst.candidates
    cand_fixed: list[list[str]] = []
    for x, y in candidates:
        cand_fixed.append(
            [
                n.id
                for n in fixed
                if n.id in capable and within_range(x, y, n.x, n.y, max(n.range_km, uav_range_km))
            ]
        )
    cand_cand = {
        (i, j): within_range(
            candidates[i][0], candidates[i][1], candidates[j][0], candidates[j][1], uav_range_km
        )
        for i in range(len(candidates))
        for j in range(i + 1, len(candidates))
    }

    required_buses = sorted({b for t in inst.targets for b in t.buses()})
    cand_buses: list[set[str]] = []
    for x, y in candidates:
        cand_buses.append(
            {
                b
                for b in required_buses
                if b in scenario.buses
                and within_range(scenario.buses[b].x, scenario.buses[b].y, x, y, uav_range_km)
            }
        )

    base_comm = set(comm_seed)

    def clause_satisfied_already(clause: list[str]) -> bool:
        return any(
            node_id in base_comm for b in clause for node_id in cov.bus_cover.get(b, ())
        )

    open_clauses = [
        clause for target in inst.targets for clause in target.clauses
        if not clause_satisfied_already(clause)
    ]
    if not open_clauses:
        return []

    # buses coverable by energized-but-disconnected fixed nodes; a UAV bridge
    # can pull those islands back in, so they count for the subset prescreen
    island_cover = {
        b
        for b in required_buses
        for node_id in cov.bus_cover.get(b, ())
        if node_id in capable and node_id not in base_comm
    }

    def eval_subset(subset: tuple[int, ...]) -> bool:
        fixed_comm = set(base_comm)
        queue = list(base_comm)
        uav_comm: set[int] = set()
        pending = set(subset)
        progress = True
        while progress:
            progress = False
            while queue:
                node_id = queue.pop()
                for nbr in fixed_adj[node_id]:
                    if nbr not in fixed_comm:
                        fixed_comm.add(nbr)
                        queue.append(nbr)
            for i in sorted(pending):
                reached = any(n in fixed_comm for n in cand_fixed[i]) or any(
                    cand_cand[(min(i, j), max(i, j))] for j in uav_comm
                )
                if not reached:
                    continue
                uav_comm.add(i)
                pending.discard(i)
                progress = True
                # a UAV can bridge a dark-but-capable fixed island back in
                x, y = candidates[i]
                for node_id in sorted(capable - fixed_comm):
                    n = fixed_by_id[node_id]
                    if within_range(x, y, n.x, n.y, max(n.range_km, uav_range_km)):
                        fixed_comm.add(node_id)
                        queue.append(node_id)

        def bus_has_comm(bus_id: str) -> bool:
            if any(node_id in fixed_comm for node_id in cov.bus_cover.get(bus_id, ())):
                return True
            bus = scenario.buses[bus_id]
            return any(
                within_range(bus.x, bus.y, candidates[i][0], candidates[i][1], uav_range_km)
                for i in uav_comm
            )

        return all(any(bus_has_comm(b) for b in clause) for clause in open_clauses)

    limit = min(max_sites, len(candidates))
    for size in range(1, limit + 1):
        for subset in itertools.combinations(range(len(candidates)), size):
            union_cover = set(island_cover)
            for i in subset:
                union_cover |= cand_buses[i]
            if any(not (set(clause) & union_cover) for clause in open_clauses):
                continue
            if eval_subset(subset):
                return [candidates[i] for i in subset]
    return None


def uav_backed_node(node_id: str, x: float, y: float, range_km: float) -> CnNode:
    return CnNode(id=node_id, x=x, y=y, range_km=range_km, is_uav_backed=True)


# ---------------------------------------------------------------------------
# routing


@dataclass
class RouteSite:
    id: str
    x: float
    y: float
    kind: str  # SET_OFF, DEPLOYMENT, or SWAP
    group: Optional[int] = None
    work_draw: float = 0.0
    swap_s: float = 0.0


@dataclass
class RouteGroup:
    index: int
    ready_s: float = 0.0
    work_s: float = 0.0


@dataclass
class RoutingInstance:
    set_off: RouteSite
    deployment: list[RouteSite]
    swaps: list[RouteSite]
    groups: list[RouteGroup]  # served strictly in list order
    fleet: list[Uav]

    def __post_init__(self) -> None:
        sizes: dict[int, int] = {}
        for site in self.deployment:
            if site.group is None:
                raise ValueError(f"deployment site {site.id} has no workgroup")
            sizes[site.group] = sizes.get(site.group, 0) + 1
        known = {g.index for g in self.groups}
        for grp, count in sorted(sizes.items()):
            if grp not in known:
                raise ValueError(f"workgroup {grp} has sites but no group record")
            if count > len(self.fleet):
                raise ValueError(f"workgroup {grp} needs {count} UAVs, fleet has {len(self.fleet)}")

    def group_sites(self, index: int) -> list[RouteSite]:
        return sorted((s for s in self.deployment if s.group == index), key=lambda s: s.id)


class RoutingInfeasible(RuntimeError):
    def __init__(self, message: str, site: Optional[str] = None):
        super().__init__(message)
        self.site = site


@dataclass
class Visit:
    site: str
    arrive_s: float
    depart_s: float
    battery_arrive: float
    battery_depart: float


@dataclass
class RouteSolution:
    routes: dict[str, list[Visit]]  # uav id -> ordered visits, warehouse first and last
    objective_s: float
    optimal: bool = True
    nodes_explored: int = 0


def _dist(a: RouteSite, b: RouteSite) -> float:
    return distance_km(a.x, a.y, b.x, b.y)


def solve_routing(inst: RoutingInstance, node_budget: int = 200_000) -> RouteSolution:
    """Minimize the last warehouse-return time over all feasible route plans.

    Waiting (for a workgroup's ready time or for fellow UAVs) happens on the
    ground at the previous stop by delaying the departure, so flight legs
    always satisfy arrival = departure + distance / speed exactly.
    """
    fleet = sorted(inst.fleet, key=lambda u: u.id)
    if not fleet:
        raise RoutingInfeasible("no UAVs in fleet")
    n = len(fleet)
    home = inst.set_off
    groups = list(inst.groups)
    min_draw = min(u.per_km_draw for u in fleet)

    for site in inst.deployment:
        # a visit must arrive from and leave towards some warehouse on one
        # charge (no swap happens at the site itself), so the round trip via
        # the best warehouses bounds the battery need from below
        origins = [home] + list(inst.swaps)
        inbound = min(_dist(o, site) for o in origins)
        outbound = min(_dist(site, o) for o in origins)
        if (inbound + outbound) * min_draw > 1.0 + 1e-12:
            raise RoutingInfeasible(
                f"site {site.id} cannot be visited and left within one battery of flight",
                site=site.id,
            )

    best: dict = {"objective": math.inf, "routes": None}
    counter = {"nodes": 0, "exhausted": False}

    def finish(positions, batteries, free, routes) -> Optional[tuple[float, dict]]:
        makespan = 0.0
        final: dict[str, list[Visit]] = {}
        for idx, uav in enumerate(fleet):
            visits = [Visit(**v) for v in routes[idx]]
            if positions[idx] is not home:
                leg = _dist(positions[idx], home)
                batt = batteries[idx] - leg * uav.per_km_draw
                if batt < -1e-12:
                    return None
                arrive = free[idx] + 3600.0 * leg / uav.speed_kmh
                visits.append(Visit(home.id, arrive, arrive, batt, batt))
                makespan = max(makespan, arrive)
            final[uav.id] = visits
        return makespan, final

    def descend(gi: int, prev_depart: float, positions, batteries, free, swap_used, routes) -> None:
        counter["nodes"] += 1
        if counter["nodes"] > node_budget:
            counter["exhausted"] = True
            return
        lower = prev_depart
        for rest in groups[gi:]:
            lower = max(lower, rest.ready_s) + rest.work_s
        if lower >= best["objective"] - 1e-12:
            return
        if gi == len(groups):
            finished = finish(positions, batteries, free, routes)
            if finished is not None and finished[0] < best["objective"] - 1e-12:
                best["objective"], best["routes"] = finished
            return

        group = groups[gi]
        sites = inst.group_sites(group.index)
        floor_time = max(prev_depart, group.ready_s)
        swap_options: list[Optional[int]] = [None] + [
            si for si in range(len(inst.swaps)) if not swap_used[si]
        ]

        for uav_ids in itertools.permutations(range(n), len(sites)):
            for combo in itertools.product(swap_options, repeat=len(sites)):
                chosen = [c for c in combo if c is not None]
                if len(set(chosen)) != len(chosen):
                    continue
                _branch(gi, group, sites, uav_ids, combo, floor_time,
                        positions, batteries, free, swap_used, routes)

    def _branch(gi, group, sites, uav_ids, combo, floor_time,
                positions, batteries, free, swap_used, routes) -> None:
        new_pos = list(positions)
        new_batt = list(batteries)
        new_free = list(free)
        new_swap = list(swap_used)
        new_routes = [list(r) for r in routes]
        arrivals: list[float] = []

        for site, uidx, via in zip(sites, uav_ids, combo):
            uav = fleet[uidx]
            batt = new_batt[uidx]
            t_free = new_free[uidx]
            pos = new_pos[uidx]
            prev_visit = dict(new_routes[uidx][-1])
            new_routes[uidx][-1] = prev_visit
            if via is None:
                leg = _dist(pos, site)
                batt_arrive = batt - leg * uav.per_km_draw
                if batt_arrive < -1e-12:
                    return
                fly = 3600.0 * leg / uav.speed_kmh
                arrive = max(t_free + fly, floor_time)
                prev_visit["depart_s"] = arrive - fly
            else:
                if pos.kind != DEPLOYMENT:
                    return  # a warehouse-to-warehouse leg is not allowed
                swap = inst.swaps[via]
                leg1 = _dist(pos, swap)
                batt_at_swap = batt - leg1 * uav.per_km_draw
                if batt_at_swap < -1e-12:
                    return
                leg2 = _dist(swap, site)
                batt_arrive = 1.0 - leg2 * uav.per_km_draw
                if batt_arrive < -1e-12:
                    return
                fly1 = 3600.0 * leg1 / uav.speed_kmh
                fly2 = 3600.0 * leg2 / uav.speed_kmh
                swap_arrive = t_free + fly1
                earliest = swap_arrive + swap.swap_s + fly2
                arrive = max(earliest, floor_time)
                prev_visit["depart_s"] = t_free
                new_swap[via] = True
                new_routes[uidx].append(
                    dict(site=swap.id, arrive_s=swap_arrive, depart_s=arrive - fly2,
                         battery_arrive=batt_at_swap, battery_depart=1.0)
                )
            arrivals.append(arrive)
            new_pos[uidx] = site
            new_batt[uidx] = batt_arrive
            new_routes[uidx].append(
                dict(site=site.id, arrive_s=arrive, depart_s=arrive,
                     battery_arrive=batt_arrive, battery_depart=batt_arrive)
            )

        work_start = max(arrivals) if arrivals else floor_time
        depart = work_start + group.work_s
        if depart >= best["objective"] - 1e-12:
            return
        for site, uidx in zip(sites, uav_ids):
            batt = new_batt[uidx] - site.work_draw
            if batt < -1e-12:
                return
            new_batt[uidx] = batt
            new_free[uidx] = depart
            new_routes[uidx][-1]["depart_s"] = depart
            new_routes[uidx][-1]["battery_depart"] = batt

        descend(gi + 1, depart, new_pos, new_batt, new_free, new_swap, new_routes)

    start_routes = [
        [dict(site=home.id, arrive_s=0.0, depart_s=0.0, battery_arrive=1.0, battery_depart=1.0)]
        for _ in fleet
    ]
    descend(0, 0.0, [home] * n, [1.0] * n, [0.0] * n, [False] * len(inst.swaps), start_routes)

    if best["routes"] is None:
        if counter["exhausted"]:
            raise RoutingInfeasible("node budget exhausted before any feasible plan was found")
        raise RoutingInfeasible("no feasible route plan (battery cannot cover some required leg)")
    return RouteSolution(
        routes=best["routes"],
        objective_s=best["objective"],
        optimal=not counter["exhausted"],
        nodes_explored=counter["nodes"],
    )


def validate_route(inst: RoutingInstance, sol: RouteSolution) -> list[str]:
    """Re-check every routing constraint arithmetically from the solution alone."""
    v: list[str] = []
    sites = {inst.set_off.id: inst.set_off}
    for s in inst.deployment:
        sites[s.id] = s
    for s in inst.swaps:
        sites[s.id] = s
    groups = {g.index: g for g in inst.groups}
    fleet = {u.id: u for u in inst.fleet}
    eps = 1e-6

    visit_count: dict[str, int] = {}
    group_arrivals: dict[int, list[float]] = {g.index: [] for g in inst.groups}
    group_departs: dict[int, list[float]] = {g.index: [] for g in inst.groups}

    for uav_id, visits in sorted(sol.routes.items()):
        uav = fleet.get(uav_id)
        if uav is None:
            v.append(f"route for unknown UAV {uav_id}")
            continue
        if not visits:
            v.append(f"UAV {uav_id}: empty route")
            continue
        if visits[0].site != inst.set_off.id or visits[-1].site != inst.set_off.id:
            v.append(f"UAV {uav_id}: route must start and end at the set-off site")
        if abs(visits[0].battery_depart - 1.0) > eps:
            v.append(f"UAV {uav_id}: battery not full when leaving the warehouse")
        for prev, nxt in zip(visits, visits[1:]):
            a, b = sites.get(prev.site), sites.get(nxt.site)
            if a is None or b is None:
                v.append(f"UAV {uav_id}: visit to unknown site")
                continue
            if a.kind != DEPLOYMENT and b.kind != DEPLOYMENT:
                v.append(f"UAV {uav_id}: warehouse-to-warehouse leg {a.id}->{b.id}")
            leg = _dist(a, b)
            fly = 3600.0 * leg / uav.speed_kmh
            if abs(nxt.arrive_s - prev.depart_s - fly) > eps:
                v.append(f"UAV {uav_id}: leg {a.id}->{b.id} timing off by "
                         f"{nxt.arrive_s - prev.depart_s - fly:.3f} s")
            drop = prev.battery_depart - nxt.battery_arrive
            if abs(drop - leg * uav.per_km_draw) > eps:
                v.append(f"UAV {uav_id}: leg {a.id}->{b.id} battery drop {drop:.4f} != "
                         f"{leg * uav.per_km_draw:.4f}")
        for visit in visits:
            site = sites.get(visit.site)
            if site is None:
                continue
            for value in (visit.battery_arrive, visit.battery_depart):
                if value < -eps or value > 1.0 + eps:
                    v.append(f"UAV {uav_id}: battery {value:.4f} outside [0, 1] at {site.id}")
            if visit.depart_s < visit.arrive_s - eps:
                v.append(f"UAV {uav_id}: departs {site.id} before arriving")
            if site.kind == DEPLOYMENT:
                visit_count[site.id] = visit_count.get(site.id, 0) + 1
                grp = groups[site.group]
                group_arrivals[site.group].append(visit.arrive_s)
                group_departs[site.group].append(visit.depart_s)
                if visit.arrive_s < grp.ready_s - eps:
                    v.append(f"site {site.id}: arrival {visit.arrive_s:.1f} s precedes station-ready "
                             f"{grp.ready_s:.1f} s by {grp.ready_s - visit.arrive_s:.1f} s")
                drop = visit.battery_arrive - visit.battery_depart
                if abs(drop - site.work_draw) > eps:
                    v.append(f"site {site.id}: work battery draw {drop:.4f} != {site.work_draw:.4f}")
            elif site.kind == SWAP:
                visit_count[site.id] = visit_count.get(site.id, 0) + 1
                if visit.depart_s - visit.arrive_s < site.swap_s - eps:
                    v.append(f"swap site {site.id}: dwell below replacement time")
                if abs(visit.battery_depart - 1.0) > eps:
                    v.append(f"swap site {site.id}: battery not full on departure")

    for site in inst.deployment:
        count = visit_count.get(site.id, 0)
        if count != 1:
            v.append(f"deployment site {site.id} visited {count} times (expected 1)")
    for site in inst.swaps:
        if visit_count.get(site.id, 0) > 1:
            v.append(f"swap site {site.id} visited more than once")

    for grp, arrivals in group_arrivals.items():
        if not arrivals:
            continue
        work_start = max(arrivals)
        g = groups[grp]
        for depart in group_departs[grp]:
            if depart < work_start + g.work_s - eps:
                v.append(f"workgroup {grp}: departure {depart:.1f} s before shared work window closes")
    # precedence reference is the shared work completion; a UAV may stay
    # parked on a finished site longer without holding the next group back
    ordered = [g.index for g in inst.groups if group_arrivals[g.index]]
    for earlier, later in zip(ordered, ordered[1:]):
        work_end = max(group_arrivals[earlier]) + groups[earlier].work_s
        if min(group_arrivals[later]) < work_end - eps:
            v.append(f"workgroup {later} starts before workgroup {earlier} finishes")

    makespan = 0.0
    for uav_id, visits in sol.routes.items():
        if len(visits) > 1:
            makespan = max(makespan, visits[-1].arrive_s)
    if abs(makespan - sol.objective_s) > eps:
        v.append(f"objective {sol.objective_s:.3f} != last warehouse return {makespan:.3f}")
    return v


def per_uav_one_site_per_group(sol: RouteSolution, inst: RoutingInstance) -> list[str]:
    """Extra check: a UAV must not serve two sites of the same workgroup."""
    v = []
    site_group = {s.id: s.group for s in inst.deployment}
    for uav_id, visits in sorted(sol.routes.items()):
        seen: set[int] = set()
        for visit in visits:
            grp = site_group.get(visit.site)
            if grp is None:
                continue
            if grp in seen:
                v.append(f"UAV {uav_id} works twice in group {grp}")
            seen.add(grp)
    return v
