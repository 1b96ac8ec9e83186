"""Min-max storage dispatch: solver examples, oracle equivalence, invariants."""

import math
import random

import pytest

from gridrestore import mesr
from gridrestore.oracles import dispatch_by_enumeration, random_dispatch_instance


def instance(vehicles, stations, travel, eta=0.3):
    return mesr.DispatchInstance(
        vehicles=[mesr.DispatchVehicle(id=v, kind=k, output_kw=p) for v, k, p in vehicles],
        stations=[mesr.DispatchStation(id=s, requirement_kw=r) for s, r in stations],
        travel_s=travel,
        eta=eta,
    )


def test_single_mess_single_station():
    inst = instance([("m1", "mess", 500.0)], [("s1", 400.0)], {("m1", "s1"): 120.0})
    sol = mesr.solve(inst)
    assert sol.feasible
    assert sol.assignment == {"m1": "s1"}
    assert sol.objective_s == 120.0
    assert mesr.validate(inst, sol) == []


def test_crossed_travel_times():
    inst = instance(
        [("a", "ev", 50.0), ("b", "ev", 50.0)],
        [("s1", 50.0), ("s2", 50.0)],
        {("a", "s1"): 60.0, ("a", "s2"): 300.0, ("b", "s1"): 300.0, ("b", "s2"): 60.0},
    )
    sol = mesr.solve(inst)
    assert sol.assignment == {"a": "s1", "b": "s2"}
    assert sol.objective_s == 60.0
    assert sol.objective_s == dispatch_by_enumeration(inst)


def test_zero_requirements_mean_empty_dispatch():
    inst = instance([("a", "ev", 50.0)], [("s1", 0.0), ("s2", 0.0)], {("a", "s1"): 60.0})
    sol = mesr.solve(inst)
    assert sol.assignment == {}
    assert sol.objective_s == 0.0


def test_solver_matches_enumeration():
    rng = random.Random(17)
    for _ in range(200):
        inst = random_dispatch_instance(rng)
        expected = dispatch_by_enumeration(inst)
        sol = mesr.solve(inst)
        if expected is None:
            assert not sol.feasible
        else:
            assert sol.feasible
            assert sol.objective_s == pytest.approx(expected, abs=1e-9)
            assert mesr.validate(inst, sol) == []


def test_adding_a_vehicle_never_hurts():
    rng = random.Random(8)
    for _ in range(60):
        inst = random_dispatch_instance(rng, max_vehicles=5)
        base = mesr.solve(inst)
        extra = mesr.DispatchVehicle(id="zz-extra", kind="mess", output_kw=500.0)
        travel = dict(inst.travel_s)
        for st in inst.stations:
            travel[("zz-extra", st.id)] = 1.0
        bigger = mesr.DispatchInstance(
            vehicles=inst.vehicles + [extra], stations=inst.stations, travel_s=travel, eta=inst.eta
        )
        richer = mesr.solve(bigger)
        if base.feasible:
            assert richer.feasible
            assert richer.objective_s <= base.objective_s + 1e-9


def test_scaling_travel_times_scales_objective():
    rng = random.Random(12)
    for _ in range(40):
        inst = random_dispatch_instance(rng, max_vehicles=5)
        sol = mesr.solve(inst)
        if not sol.feasible:
            continue
        scaled = mesr.DispatchInstance(
            vehicles=inst.vehicles,
            stations=inst.stations,
            travel_s={k: 3.0 * v for k, v in inst.travel_s.items()},
            eta=inst.eta,
        )
        assert mesr.solve(scaled).objective_s == pytest.approx(3.0 * sol.objective_s, rel=1e-12)


def test_expected_capacity_mode_discounts_evs():
    inst = instance(
        [("a", "ev", 100.0)], [("s1", 50.0)], {("a", "s1"): 10.0}, eta=0.3
    )
    assert mesr.solve(inst).feasible                      # full 100 kW counted
    assert not mesr.solve(inst, expected_capacity=True).feasible  # 30 kW < 50


def test_partial_cover_reports_prefix_and_shortfall():
    inst = instance(
        [("m1", "mess", 500.0)],
        [("s1", 400.0), ("s2", 300.0)],
        {("m1", "s1"): 100.0, ("m1", "s2"): 100.0},
    )
    sol = mesr.solve(inst)
    assert not sol.feasible
    assert sol.covered_stations == ["s1"]
    assert sol.shortfall_kw == {"s2": 300.0}


def test_validate_flags_violations():
    inst = instance(
        [("a", "ev", 50.0), ("b", "ev", 50.0)],
        [("s1", 100.0)],
        {("a", "s1"): 60.0, ("b", "s1"): 50.0},
    )
    sol = mesr.solve(inst)
    assert mesr.validate(inst, sol) == []

    short = mesr.DispatchSolution(
        assignment={"a": "s1"}, objective_s=60.0, delivered_kw={"s1": 50.0},
        covered_stations=["s1"],
    )
    issues = mesr.validate(inst, short)
    assert any("requirement" in i for i in issues)

    wrong_obj = mesr.DispatchSolution(
        assignment=dict(sol.assignment), objective_s=1.0, delivered_kw=dict(sol.delivered_kw),
        covered_stations=["s1"],
    )
    assert any("objective" in i for i in mesr.validate(inst, wrong_obj))

    unreachable = mesr.DispatchSolution(
        assignment={"a": "s1", "b": "s1"}, objective_s=math.inf,
        delivered_kw={"s1": 100.0}, covered_stations=["s1"],
    )
    bad = mesr.DispatchInstance(
        vehicles=inst.vehicles, stations=inst.stations,
        travel_s={("a", "s1"): 60.0}, eta=0.3,
    )
    assert any("cannot reach" in i for i in mesr.validate(bad, unreachable))
