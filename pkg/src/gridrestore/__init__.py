"""Restoration toolkit for power grids coupled with traffic and communication networks."""

from .interdep import apply_damage, dispatchable_evs, recompute_coupled_state
from .model import DamageSet, Params, Scenario
from .restoration import STRATEGIES, Timeline, run
from .scenario import ScenarioError, dumps_scenario, load_scenario, loads_scenario, save_scenario

__version__ = "0.1.0"

__all__ = [
    "DamageSet",
    "Params",
    "Scenario",
    "ScenarioError",
    "STRATEGIES",
    "Timeline",
    "apply_damage",
    "dispatchable_evs",
    "dumps_scenario",
    "load_scenario",
    "loads_scenario",
    "recompute_coupled_state",
    "run",
    "save_scenario",
    "__version__",
]
