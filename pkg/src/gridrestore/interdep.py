"""Cross-network coupling: the coupled state sweep, damage application, dispatchability."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .comm import CommCertificate, CoverageMatrix, coverage_pairs, derive_bus_comm, derive_ev_comm, solve_connectivity
from .model import EV, MESS, Scenario, sorted_by_id
from .power import energization_sweep
from .scenario import ScenarioError
from .traffic import update_speed_limits

SWEEP_LIMIT = 6


@dataclass
class SweepResult:
    coverage: CoverageMatrix
    certificate: CommCertificate
    passes: int


def _state_fingerprint(scenario: Scenario) -> tuple:
    return (
        tuple(sorted((b.id, b.energized, b.comm, b.load_switch_closed) for b in scenario.buses.values())),
        tuple(sorted((n.id, n.energized, n.comm) for n in scenario.cn_nodes.values())),
        tuple(sorted((j.id, j.energized) for j in scenario.junctions.values())),
        tuple(sorted((l.id, l.energized) for l in scenario.lanes.values())),
    )


def recompute_coupled_state(scenario: Scenario, sources: Iterable[str]) -> SweepResult:
    """Propagate energization, facility supply, comm coverage, and speed limits.

    Iterates the sweep until the coupled flags reach a fixed point; the chain
    has no feedback within a step, so this normally converges in one pass.
    """
    sources = sorted(set(sources))
    result: Optional[SweepResult] = None
    before = _state_fingerprint(scenario)
    for sweep_pass in range(1, SWEEP_LIMIT + 1):
        energization_sweep(scenario, sources)

        for node in scenario.cn_nodes.values():
            if node.is_uav_backed:
                node.energized = False
                continue
            bus = scenario.buses.get(node.supply_bus or "")
            node.energized = bool(bus and bus.energized and bus.load_switch_closed)
        for junction in scenario.junctions.values():
            bus = scenario.buses.get(junction.supply_bus)
            junction.energized = bool(bus and bus.energized and bus.load_switch_closed)
        for lane in scenario.lanes.values():
            bus = scenario.buses.get(lane.supply_bus)
            lane.energized = bool(bus and bus.energized and bus.load_switch_closed)

        nodes = sorted_by_id(scenario.cn_nodes.values())
        evs = [v for v in sorted_by_id(scenario.vehicles.values()) if v.kind == EV]
        coverage = coverage_pairs(nodes, sorted_by_id(scenario.buses.values()), evs)
        certificate = solve_connectivity(nodes, coverage)
        derive_bus_comm(scenario.buses.values(), coverage, certificate.comm)
        derive_ev_comm(evs, coverage, certificate.comm)

        update_speed_limits(scenario)

        result = SweepResult(coverage=coverage, certificate=certificate, passes=sweep_pass)
        after = _state_fingerprint(scenario)
        if after == before:
            break
        before = after
    assert result is not None
    return result


def active_sources(scenario: Scenario) -> list[str]:
    """Stations usable as energization roots given the current state flags."""
    return [b.id for b in scenario.stations() if b.energized and b.equipment_ok]


def apply_damage(scenario: Scenario, damage=None) -> Scenario:
    """Return a new scenario with equipment failures applied and states re-derived.

    Energization roots are the V2GS buses that were energized (and healthy)
    in the input state, so applying the same damage twice is a no-op.
    """
    damage = damage if damage is not None else scenario.damage
    unknown = [l for l in damage.failed_lines if l not in scenario.lines]
    unknown += [b for b in damage.failed_buses if b not in scenario.buses]
    if unknown:
        raise ScenarioError([f"damage references unknown element {e}" for e in sorted(unknown)])

    out = scenario.clone()
    out.damage.failed_lines = sorted(set(out.damage.failed_lines) | set(damage.failed_lines))
    out.damage.failed_buses = sorted(set(out.damage.failed_buses) | set(damage.failed_buses))
    for line_id in out.damage.failed_lines:
        line = out.lines[line_id]
        line.equipment_ok = False
        line.switch_closed = False
    for bus_id in out.damage.failed_buses:
        out.buses[bus_id].equipment_ok = False

    sources = active_sources(scenario)
    recompute_coupled_state(out, sources)
    return out


def dispatchable_evs(scenario: Scenario) -> set[str]:
    """Vehicles the dispatch centre can currently reach.

    EVs need communication coverage and a positive willingness draw; MESS
    trucks carry satellite phones and are always reachable.
    """
    out: set[str] = set()
    for vehicle in scenario.vehicles.values():
        if vehicle.kind == MESS:
            out.add(vehicle.id)
        elif vehicle.comm and vehicle.participates:
            out.add(vehicle.id)
    return out
