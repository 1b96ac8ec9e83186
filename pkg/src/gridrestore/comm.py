"""Communication network: coverage geometry, radial connectivity, derived comm states.

Connectivity is solved by multi-source reachability from energized central
nodes plus spanning-forest extraction.  The commodity-flow constraint system
the forest must satisfy is kept as an arithmetic validator over the produced
certificate, so every solution can be checked independently of how it was
found.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import CnNode, PdnBus, Vehicle, sorted_by_id, within_range

Pair = tuple[str, str]


def link_pair(a: str, b: str) -> Pair:
    """Canonical undirected pair, ordered for deterministic iteration."""
    return (a, b) if a <= b else (b, a)


@dataclass
class CoverageMatrix:
    """Pairwise coverage flags between CN nodes, buses, and EVs."""

    node_ids: list[str]
    node_pairs: set[Pair] = field(default_factory=set)
    bus_cover: dict[str, set[str]] = field(default_factory=dict)  # bus -> covering nodes
    ev_cover: dict[str, set[str]] = field(default_factory=dict)  # ev -> covering nodes

    def neighbours(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {node_id: [] for node_id in self.node_ids}
        for a, b in sorted(self.node_pairs):
            adj[a].append(b)
            adj[b].append(a)
        return adj


def coverage_pairs(
    nodes: Sequence[CnNode],
    buses: Sequence[PdnBus] = (),
    evs: Sequence[Vehicle] = (),
) -> CoverageMatrix:
    """Geometric coverage: a node pair is linked when within the larger of the two ranges."""
    nodes = sorted_by_id(nodes)
    cov = CoverageMatrix(node_ids=[n.id for n in nodes])
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            reach = max(a.range_km, b.range_km)
            if within_range(a.x, a.y, b.x, b.y, reach):
                cov.node_pairs.add(link_pair(a.id, b.id))
    for bus in buses:
        cov.bus_cover[bus.id] = {
            n.id for n in nodes if within_range(bus.x, bus.y, n.x, n.y, n.range_km)
        }
    for ev in evs:
        cov.ev_cover[ev.id] = {
            n.id for n in nodes if within_range(ev.x, ev.y, n.x, n.y, n.range_km)
        }
    return cov


@dataclass
class CommCertificate:
    """Radial connectivity solution: comm flags, used links, and commodity flows."""

    comm: dict[str, bool]
    links: set[Pair]
    flows: dict[tuple[str, str], float]
    injections: dict[str, float]  # central node -> injected commodity


def solve_connectivity(nodes: Sequence[CnNode], cov: CoverageMatrix) -> CommCertificate:
    """Set comm flags and build a spanning forest rooted at energized central nodes.

    A node can carry traffic only when it is energized or UAV-backed; comm
    requires a path of such nodes, each hop within coverage, back to an
    energized central node.
    """
    capable = {n.id for n in nodes if n.energized or n.is_uav_backed}
    roots = sorted(n.id for n in nodes if n.is_central and n.energized)
    adj = cov.neighbours()

    parent: dict[str, str | None] = {r: None for r in roots}
    order: list[str] = []
    frontier = list(roots)
    while frontier:
        nxt: list[str] = []
        for node_id in frontier:
            order.append(node_id)
            for nbr in adj.get(node_id, ()):
                if nbr in capable and nbr not in parent:
                    parent[nbr] = node_id
                    nxt.append(nbr)
        frontier = sorted(nxt)

    comm = {n.id: (n.id in parent) for n in nodes}
    links = {link_pair(child, par) for child, par in parent.items() if par is not None}

    # Commodity flows: each comm node consumes one unit sourced by its root.
    subtree = {node_id: 1 for node_id in parent}
    for node_id in reversed(order):
        par = parent[node_id]
        if par is not None:
            subtree[par] += subtree[node_id]
    flows: dict[tuple[str, str], float] = {}
    for child, par in parent.items():
        if par is None:
            continue
        flows[(par, child)] = float(subtree[child])
        flows[(child, par)] = -float(subtree[child])
    injections = {r: float(subtree[r]) for r in roots}

    for node in nodes:
        node.comm = comm[node.id]
    return CommCertificate(comm=comm, links=links, flows=flows, injections=injections)


def validate_certificate(
    nodes: Sequence[CnNode], cov: CoverageMatrix, cert: CommCertificate
) -> list[str]:
    """Arithmetic re-check of the coverage and radial-topology constraint system."""
    v: list[str] = []
    ids = [n.id for n in sorted_by_id(nodes)]
    centrals = {n.id for n in nodes if n.is_central}
    comm = cert.comm

    for a, b in sorted(cert.links):
        if link_pair(a, b) not in cov.node_pairs:
            v.append(f"link {a}-{b} used outside coverage")
        if a == b:
            v.append(f"self-link at {a}")
        if comm.get(a) != comm.get(b):
            v.append(f"link {a}-{b} joins unequal comm states")

    for (a, b), f in cert.flows.items():
        if abs(f + cert.flows.get((b, a), 0.0)) > 1e-9:
            v.append(f"flow antisymmetry violated on {a}-{b}")
        if link_pair(a, b) not in cert.links and abs(f) > 1e-9:
            v.append(f"flow on unused link {a}-{b}")

    for node_id in ids:
        outflow = sum(f for (a, _b), f in cert.flows.items() if a == node_id)
        balance = outflow + (1.0 if comm.get(node_id) else 0.0)
        if node_id in centrals:
            if abs(balance - cert.injections.get(node_id, 0.0)) > 1e-9:
                v.append(f"central {node_id}: injection balance off by {balance}")
        elif abs(balance) > 1e-9:
            v.append(f"node {node_id}: commodity balance off by {balance}")

    lhs = sum(1 for node_id in ids if comm.get(node_id)) - sum(
        1 for node_id in ids if comm.get(node_id) and node_id in centrals
    )
    if lhs != len(cert.links):
        v.append(f"radial identity violated: {lhs} comm nodes beyond roots vs {len(cert.links)} links")
    return v


def derive_bus_comm(buses: Iterable[PdnBus], cov: CoverageMatrix, comm: dict[str, bool]) -> None:
    """A bus FTU communicates iff covered by some comm-normal CN node."""
    for bus in buses:
        covering = cov.bus_cover.get(bus.id, set())
        bus.comm = any(comm.get(node_id, False) for node_id in covering)


def derive_ev_comm(evs: Iterable[Vehicle], cov: CoverageMatrix, comm: dict[str, bool]) -> None:
    for ev in evs:
        covering = cov.ev_cover.get(ev.id, set())
        ev.comm = any(comm.get(node_id, False) for node_id in covering)
