"""PDN topology state: radiality, switch control gating, energization, station balances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .model import PdnLine, Scenario, sorted_by_id

CLOSE = "close"
OPEN = "open"


@dataclass
class RadialityResult:
    radial: bool
    cycle: list[str] = field(default_factory=list)  # line ids forming a loop

    def __bool__(self) -> bool:
        return self.radial


def _closed_adjacency(scenario: Scenario) -> dict[str, list[tuple[str, str]]]:
    adj: dict[str, list[tuple[str, str]]] = {bus_id: [] for bus_id in scenario.buses}
    for line in sorted_by_id(scenario.lines.values()):
        if not line.switch_closed or not line.equipment_ok:
            continue
        if not (scenario.buses[line.from_bus].equipment_ok and scenario.buses[line.to_bus].equipment_ok):
            continue
        adj[line.from_bus].append((line.to_bus, line.id))
        adj[line.to_bus].append((line.from_bus, line.id))
    return adj


def check_radiality(scenario: Scenario) -> RadialityResult:
    """Acyclicity of the closed-line subgraph on components holding energized buses.

    The check counts edges against nodes per component (the identity a
    commodity-flow radiality formulation enforces) and extracts a concrete
    cycle as the witness when the count fails.
    """
    adj = _closed_adjacency(scenario)
    seen: set[str] = set()
    for root in sorted(scenario.buses):
        if root in seen:
            continue
        component: list[str] = []
        edge_ids: set[str] = set()
        stack = [root]
        seen.add(root)
        while stack:
            bus_id = stack.pop()
            component.append(bus_id)
            for nbr, line_id in adj[bus_id]:
                edge_ids.add(line_id)
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        if not any(scenario.buses[b].energized for b in component):
            continue
        if len(edge_ids) != len(component) - 1:
            return RadialityResult(radial=False, cycle=_find_cycle(adj, root))
    return RadialityResult(radial=True)


def _find_cycle(adj: dict[str, list[tuple[str, str]]], root: str) -> list[str]:
    parent_edge: dict[str, Optional[str]] = {root: None}
    parent: dict[str, Optional[str]] = {root: None}
    stack = [root]
    while stack:
        bus_id = stack.pop()
        for nbr, line_id in sorted(adj[bus_id], key=lambda e: e[1]):
            if nbr not in parent:
                parent[nbr] = bus_id
                parent_edge[nbr] = line_id
                stack.append(nbr)
            elif parent_edge.get(bus_id) != line_id:
                # back edge: walk both endpoints up to their common ancestor
                path_a = _root_path(parent, bus_id)
                path_b = _root_path(parent, nbr)
                common = None
                in_a = set(path_a)
                for node in path_b:
                    if node in in_a:
                        common = node
                        break
                cycle_edges = [line_id]
                for node in path_a:
                    if node == common:
                        break
                    cycle_edges.append(parent_edge[node])
                for node in path_b:
                    if node == common:
                        break
                    cycle_edges.append(parent_edge[node])
                return sorted(e for e in cycle_edges if e)
    return []


def _root_path(parent: dict[str, Optional[str]], start: str) -> list[str]:
    path = [start]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path


def control_feasible(
    line: PdnLine,
    action: str,
    comm: Mapping[str, bool],
) -> tuple[bool, str]:
    """DA gate for actuating a line switch.

    Closing requires communication at both end buses; opening requires it at
    a controlling FTU side (either one when both ends own the switch).
    Faulted lines are never controllable.
    """
    if not line.equipment_ok:
        return False, f"line {line.id} equipment is faulted"
    c_from = bool(comm.get(line.from_bus, False))
    c_to = bool(comm.get(line.to_bus, False))
    if action == CLOSE:
        if line.switch_closed:
            return False, f"line {line.id} is already closed"
        if c_from and c_to:
            return True, ""
        return False, f"close of {line.id} needs communication at both {line.from_bus} and {line.to_bus}"
    if action == OPEN:
        if not line.switch_closed:
            return False, f"line {line.id} is already open"
        if (line.control_from and c_from) or (line.control_to and c_to):
            return True, ""
        return False, f"open of {line.id} needs communication at a controlling FTU side"
    return False, f"unknown action {action!r}"


def energization_sweep(scenario: Scenario, sources: Iterable[str]) -> None:
    """Set bus energized flags from reachability over closed healthy lines.

    ``sources`` are the active V2GS buses.  Load switches of buses that end
    up de-energized are forced open (they disconnect automatically).
    """
    adj = _closed_adjacency(scenario)
    reachable: set[str] = set()
    stack = [s for s in sorted(sources) if s in scenario.buses and scenario.buses[s].equipment_ok]
    reachable.update(stack)
    while stack:
        bus_id = stack.pop()
        for nbr, _line_id in adj[bus_id]:
            if nbr not in reachable:
                reachable.add(nbr)
                stack.append(nbr)
    for bus in scenario.buses.values():
        bus.energized = bus.id in reachable
        if not bus.energized:
            bus.load_switch_closed = False


def served_load_kw(scenario: Scenario) -> float:
    return sum(
        b.load_kw for b in scenario.buses.values() if b.energized and b.load_switch_closed
    )


class InsufficientResidual(RuntimeError):
    pass


@dataclass
class StationBalance:
    """Capacity accounting for one V2G station."""

    station: str
    fleet_capacity_kw: float = 0.0
    picked_up_kw: float = 0.0

    @property
    def residual_kw(self) -> float:
        return self.fleet_capacity_kw - self.picked_up_kw

    def vehicle_arrived(self, output_kw: float) -> None:
        self.fleet_capacity_kw += output_kw

    def vehicle_departed(self, output_kw: float) -> None:
        if self.residual_kw < output_kw - 1e-9:
            raise InsufficientResidual(
                f"station {self.station}: cannot release {output_kw} kW, residual {self.residual_kw}"
            )
        self.fleet_capacity_kw -= output_kw

    def can_commit(self, step_load_kw: float) -> bool:
        return self.residual_kw >= step_load_kw - 1e-9

    def commit(self, step_load_kw: float) -> None:
        """Pick up one recovery step's load; rejected if residual is short."""
        if not self.can_commit(step_load_kw):
            raise InsufficientResidual(
                f"station {self.station}: step needs {step_load_kw} kW, residual {self.residual_kw}"
            )
        self.picked_up_kw += step_load_kw
