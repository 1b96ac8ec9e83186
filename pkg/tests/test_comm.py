"""Coverage geometry, radial connectivity, and derived comm flags."""

import itertools
import random

from gridrestore.cases import build_case37
from gridrestore.comm import (
    coverage_pairs,
    derive_bus_comm,
    derive_ev_comm,
    link_pair,
    solve_connectivity,
    validate_certificate,
)
from gridrestore.model import CnNode, PdnBus, Vehicle
from gridrestore.oracles import (
    bus_comm_by_pairs,
    comm_by_reachability,
    ev_comm_by_pairs,
    random_energization_pattern,
)


def node(nid, x, y, range_km=3.0, central=False, energized=True, uav=False):
    return CnNode(id=nid, x=x, y=y, range_km=range_km, is_central=central,
                  energized=energized, is_uav_backed=uav, supply_bus=None if uav else "b")


def test_coverage_at_exact_range_is_inclusive():
    nodes = [node("a", 0.0, 0.0), node("b", 2.9, 0.0)]
    cov = coverage_pairs(nodes)
    assert link_pair("a", "b") in cov.node_pairs
    nodes = [node("a", 0.0, 0.0), node("b", 3.0, 0.0)]
    assert link_pair("a", "b") in coverage_pairs(nodes).node_pairs
    nodes = [node("a", 0.0, 0.0), node("b", 3.001, 0.0)]
    assert link_pair("a", "b") not in coverage_pairs(nodes).node_pairs


def test_coverage_uses_larger_range():
    nodes = [node("a", 0.0, 0.0, range_km=1.0), node("b", 2.0, 0.0, range_km=3.0)]
    assert link_pair("a", "b") in coverage_pairs(nodes).node_pairs


def test_no_self_links_in_solution():
    nodes = [node("a", 0.0, 0.0, central=True)]
    cert = solve_connectivity(nodes, coverage_pairs(nodes))
    assert cert.links == set()
    assert cert.comm["a"] is True


def test_neighbor_needs_energization():
    nodes = [node("c", 0.0, 0.0, central=True), node("n", 2.0, 0.0, energized=False)]
    cert = solve_connectivity(nodes, coverage_pairs(nodes))
    assert cert.comm == {"c": True, "n": False}

    nodes = [node("c", 0.0, 0.0, central=True), node("n", 2.0, 0.0, energized=True)]
    cert = solve_connectivity(nodes, coverage_pairs(nodes))
    assert cert.comm == {"c": True, "n": True}

    # a UAV-backed node participates without a supply bus
    nodes = [node("c", 0.0, 0.0, central=True), node("u", 2.0, 0.0, energized=False, uav=True)]
    cert = solve_connectivity(nodes, coverage_pairs(nodes))
    assert cert.comm["u"] is True


def test_connectivity_matches_reachability_oracle():
    base = build_case37()
    rng = random.Random(1)
    for _ in range(60):
        pattern = random_energization_pattern(base, rng)
        nodes = sorted(pattern.cn_nodes.values(), key=lambda n: n.id)
        cov = coverage_pairs(nodes)
        cert = solve_connectivity(nodes, cov)
        assert cert.comm == comm_by_reachability(pattern)
        assert validate_certificate(nodes, cov, cert) == []


def test_connectivity_exhaustive_small_instances():
    # every energization pattern on two small geometries
    geometries = [
        [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (6.0, 0.0), (4.0, 2.5)],
        [(0.0, 0.0), (2.5, 0.5), (5.0, 0.0), (2.5, 3.0), (0.0, 5.5), (7.5, 0.0)],
    ]
    for coords in geometries:
        for pattern in itertools.product([False, True], repeat=len(coords)):
            nodes = [
                node(f"n{i}", x, y, central=(i == 0), energized=up)
                for i, ((x, y), up) in enumerate(zip(coords, pattern))
            ]
            cov = coverage_pairs(nodes)
            cert = solve_connectivity(nodes, cov)
            # independent reachability
            reach = {n.id for n in nodes if n.is_central and n.energized}
            grown = True
            while grown:
                grown = False
                for a in nodes:
                    if a.id not in reach:
                        continue
                    for b in nodes:
                        if b.id not in reach and b.energized and link_pair(a.id, b.id) in cov.node_pairs:
                            reach.add(b.id)
                            grown = True
            assert cert.comm == {n.id: n.id in reach for n in nodes}
            assert validate_certificate(nodes, cov, cert) == []


def test_radial_identity_on_certificates():
    base = build_case37()
    rng = random.Random(9)
    for _ in range(40):
        pattern = random_energization_pattern(base, rng)
        nodes = sorted(pattern.cn_nodes.values(), key=lambda n: n.id)
        cov = coverage_pairs(nodes)
        cert = solve_connectivity(nodes, cov)
        centrals = {n.id for n in nodes if n.is_central}
        lhs = sum(cert.comm.values()) - sum(1 for n in centrals if cert.comm[n])
        assert lhs == len(cert.links)


def test_uav_node_never_reduces_comm():
    base = build_case37()
    rng = random.Random(4)
    pattern = random_energization_pattern(base, rng)
    nodes = sorted(pattern.cn_nodes.values(), key=lambda n: n.id)
    before = solve_connectivity(nodes, coverage_pairs(nodes)).comm
    extended = nodes + [node("zz-uav", 10.0, 10.0, range_km=1.0, energized=False, uav=True)]
    after = solve_connectivity(extended, coverage_pairs(extended)).comm
    assert all(after[k] >= before[k] for k in before)


def test_bus_and_ev_comm_derivation():
    nodes = [node("c", 0.0, 0.0, central=True), node("n", 2.0, 0.0, energized=False)]
    cov_nodes = solve_connectivity(nodes, coverage_pairs(nodes))
    buses = [PdnBus(id="b1", x=1.0, y=0.0), PdnBus(id="b2", x=4.5, y=0.0)]
    evs = [Vehicle(id="e1", kind="ev", x=2.5, y=0.0, output_kw=50, energy_kwh=150)]
    cov = coverage_pairs(nodes, buses, evs)
    derive_bus_comm(buses, cov, cov_nodes.comm)
    derive_ev_comm(evs, cov, cov_nodes.comm)
    assert buses[0].comm is True          # covered by the live central
    assert buses[1].comm is False         # only the dead node reaches it
    assert evs[0].comm is True


def test_bus_ev_comm_match_bruteforce_on_case():
    base = build_case37()
    rng = random.Random(21)
    for _ in range(20):
        pattern = random_energization_pattern(base, rng)
        nodes = sorted(pattern.cn_nodes.values(), key=lambda n: n.id)
        buses = sorted(pattern.buses.values(), key=lambda b: b.id)
        evs = [v for v in pattern.vehicles.values() if v.kind == "ev"]
        cov = coverage_pairs(nodes, buses, evs)
        cert = solve_connectivity(nodes, cov)
        derive_bus_comm(buses, cov, cert.comm)
        derive_ev_comm(evs, cov, cert.comm)
        assert {b.id: b.comm for b in buses} == bus_comm_by_pairs(pattern, cert.comm)
        assert {v.id: v.comm for v in evs} == ev_comm_by_pairs(pattern, cert.comm)
