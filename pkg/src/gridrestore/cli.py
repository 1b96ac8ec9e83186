"""Command-line front end: scenario validation, strategy runs, oracle suites."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import oracles, restoration
from .cases import bundled_case_path
from .model import Scenario
from .scenario import ScenarioError, load_scenario, redraw_participation

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_ORACLE_MISMATCH = 4


def _load(path: str, seed: int | None) -> Scenario:
    scenario = load_scenario(path)
    if seed is not None:
        redraw_participation(scenario, seed)
    return scenario


def cmd_validate(args) -> int:
    try:
        load_scenario(args.scenario)
    except ScenarioError as exc:
        print(exc.report())
        print(f"{len(exc.violations)} violation(s)")
        return EXIT_VALIDATION
    print("0 violations")
    return EXIT_OK


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json_default(obj):
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def cmd_run(args) -> int:
    seed = args.seed
    env_seed = os.environ.get("GRIDRESTORE_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    try:
        scenario = _load(args.scenario, seed)
    except ScenarioError as exc:
        print(exc.report())
        return EXIT_VALIDATION
    scenario.params.routing_node_budget = args.routing_node_budget
    out = Path(args.out)
    summaries = {}
    status = EXIT_OK
    for strategy in args.strategy:
        try:
            timeline = restoration.run(scenario, strategy, horizon_s=args.horizon)
        except restoration.uav.RoutingInfeasible as exc:
            print(f"{strategy}: infeasible: {exc}")
            status = EXIT_INFEASIBLE
            continue
        _write(
            out / f"events_{strategy}.json",
            json.dumps([dataclasses.asdict(e) for e in timeline.events], indent=2, sort_keys=True) + "\n",
        )
        _write(
            out / f"curve_{strategy}.csv",
            "".join(f"{t},{kw:.3f}\n" for t, kw in enumerate(timeline.curve_kw)),
        )
        traces = []
        for plan in timeline.stage_plans:
            if plan.routing is None:
                continue
            traces.append(
                {
                    "stage": plan.stage,
                    "optimal": plan.routing.optimal,
                    "objective_s": plan.routing.objective_s,
                    "routes": {
                        uav_id: [dataclasses.asdict(v) for v in visits]
                        for uav_id, visits in sorted(plan.routing.routes.items())
                    },
                }
            )
        _write(out / f"traces_{strategy}.json", json.dumps(traces, indent=2, sort_keys=True) + "\n")
        dispatches = []
        for plan in timeline.stage_plans:
            if plan.dispatch is None or plan.dispatch_instance is None:
                continue
            inst = plan.dispatch_instance
            dispatches.append(
                {
                    "stage": plan.stage,
                    "stations": {s.id: s.requirement_kw for s in inst.stations},
                    "vehicles": {v.id: v.output_kw for v in inst.vehicles},
                    "travel_s": {
                        veh: {st.id: inst.travel_s[(veh, st.id)] for st in inst.stations
                              if (veh, st.id) in inst.travel_s}
                        for veh in sorted({v.id for v in inst.vehicles})
                    },
                    "assignment": plan.dispatch.assignment,
                    "objective_s": plan.dispatch.objective_s,
                    "delivered_kw": plan.dispatch.delivered_kw,
                    "feasible": plan.dispatch.feasible,
                    "shortfall_kw": plan.dispatch.shortfall_kw,
                    "unrecoverable": plan.unrecoverable,
                }
            )
        _write(out / f"dispatch_{strategy}.json", json.dumps(dispatches, indent=2, sort_keys=True) + "\n")
        summary = timeline.summary()
        summary["seed"] = scenario.params.seed
        summary["horizon_s"] = args.horizon
        if args.debug_density:
            summary["final_lane_density_veh_per_km"] = timeline.final_lane_density
        non_optimal = [
            p.stage for p in timeline.stage_plans if p.routing is not None and not p.routing.optimal
        ]
        if non_optimal:
            summary["routing_non_optimal_stages"] = non_optimal
        summaries[strategy] = summary
        print(
            f"{strategy}: restored {timeline.final_kw:.1f} kW of {timeline.total_load_kw:.1f} kW, "
            f"{timeline.executed_steps} steps"
        )
    _write(out / "summary.json", json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return status


def cmd_oracle(args) -> int:
    suites = {
        "dispatch": lambda: oracles.dispatch_suite(args.count or 500, args.seed),
        "routing": lambda: oracles.routing_suite(args.count or 200, args.seed),
        "connectivity": lambda: oracles.connectivity_suite(args.count or 200, args.seed),
        "radiality": lambda: oracles.radiality_suite(args.count or 1000, args.seed),
        "udssf": lambda: oracles.udssf_suite(args.count or 100, args.seed),
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    status = EXIT_OK
    for name in names:
        result = suites[name]()
        print(f"{result.name:>12}: {result.passed}/{result.total} matched")
        for failure in result.failures:
            print(f"{'':>14}{failure}")
        if not result.ok:
            status = EXIT_ORACLE_MISMATCH
    return status


def cmd_case(args) -> int:
    data = bundled_case_path().read_text()
    Path(args.out).write_text(data)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridrestore",
        description="Post-disaster distribution-grid restoration simulator and dispatch toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario file against the schema")
    p_validate.add_argument("--scenario", required=True)
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="execute restoration strategies and write artifacts")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--strategy", nargs="+", choices=["A1", "A2", "A3"], default=["A3"])
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--horizon", type=int, default=14400, help="simulated seconds")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--routing-node-budget", type=int, default=200_000)
    p_run.add_argument("--debug-density", action="store_true",
                       help="include final per-lane background density in the summary")
    p_run.set_defaults(func=cmd_run)

    p_oracle = sub.add_parser("oracle", help="run brute-force equivalence suites")
    p_oracle.add_argument("--suite", choices=["dispatch", "routing", "connectivity", "radiality", "udssf", "all"],
                          default="all")
    p_oracle.add_argument("--count", type=int, default=None)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(func=cmd_oracle)

    p_case = sub.add_parser("case", help="write a copy of the bundled scenario file")
    p_case.add_argument("--out", required=True)
    p_case.set_defaults(func=cmd_case)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
