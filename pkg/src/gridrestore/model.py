"""Domain types shared across the restoration toolkit.

All quantities use km, km/h, seconds, kW, and kWh.  UAV battery levels are
normalized fractions of a full charge; a full charge corresponds to
``range_budget_km`` of level flight.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

EV = "ev"
MESS = "mess"

# Coordinates are snapped to 1 m before any distance test so that coverage
# ties ("exactly at range") resolve the same way on every platform.
COORD_DECIMALS = 3
DIST_DECIMALS = 6


def snap(value: float) -> float:
    return round(value, COORD_DECIMALS)


def distance_km(x1: float, y1: float, x2: float, y2: float) -> float:
    """Euclidean distance between two snapped planar points, in km."""
    d = math.hypot(snap(x1) - snap(x2), snap(y1) - snap(y2))
    return round(d, DIST_DECIMALS)


def within_range(x1: float, y1: float, x2: float, y2: float, range_km: float) -> bool:
    """Coverage indicator; a distance exactly equal to the range counts."""
    return distance_km(x1, y1, x2, y2) <= range_km


@dataclass
class PdnBus:
    id: str
    x: float
    y: float
    load_kw: float = 0.0
    cn_utn_load_kw: float = 0.0  # portion of load_kw feeding CN/UTN facilities
    equipment_ok: bool = True
    energized: bool = False
    comm: bool = False
    load_switch_closed: bool = False
    is_v2gs: bool = False
    station_demand_kw: Optional[float] = None


@dataclass
class PdnLine:
    id: str
    from_bus: str
    to_bus: str
    equipment_ok: bool = True
    initial_closed: bool = True
    switch_closed: bool = True
    control_from: bool = True  # FTU at from_bus actuates the switch
    control_to: bool = True

    def endpoints(self) -> tuple[str, str]:
        return self.from_bus, self.to_bus


@dataclass
class CnNode:
    id: str
    x: float
    y: float
    range_km: float
    is_central: bool = False
    supply_bus: Optional[str] = None  # None only for UAV-backed nodes
    demand_kw: float = 0.0
    energized: bool = False
    comm: bool = False
    is_uav_backed: bool = False


@dataclass
class TrafficJunction:
    id: str
    x: float
    y: float
    supply_bus: str = ""
    energized: bool = False
    crossing_len_km: float = 0.1
    v_jmax_kmh: float = 30.0  # current limit, maintained by update_speed_limits
    degraded_factor: float = 0.11  # degraded limit = factor * prescribed limit


@dataclass
class TrafficLane:
    id: str
    from_junction: str
    to_junction: str
    section_lengths_km: list[float] = field(default_factory=list)
    supply_bus: str = ""
    energized: bool = False
    v_lmax_kmh: float = 60.0
    degraded_factor: float = 0.4167
    background_vehicles: float = 0.0

    @property
    def length_km(self) -> float:
        return sum(self.section_lengths_km)


@dataclass
class Vehicle:
    id: str
    kind: str  # EV or MESS
    x: float
    y: float
    output_kw: float
    energy_kwh: float
    comm: bool = False  # EVs only; MESSs carry satellite phones
    participates: Optional[bool] = None  # EV willingness draw; None = not drawn yet
    assigned_station: Optional[str] = None
    rightofway_lane: float = 0.0  # MESS only: police escort speed-up on lanes
    rightofway_junction: float = 0.0


@dataclass
class Uav:
    id: str
    speed_kmh: float = 180.0
    range_budget_km: float = 50.0
    cn_range_km: float = 1.0
    home: str = ""

    @property
    def per_km_draw(self) -> float:
        return 1.0 / self.range_budget_km


@dataclass
class Warehouse:
    id: str
    x: float
    y: float
    swap_slots: int = 0
    swap_duration_s: float = 90.0


@dataclass
class Params:
    seed: int = 0
    schema_version: int = 1
    # prescribed and degraded traffic limits
    lane_limit_kmh: float = 60.0
    lane_degraded_kmh: float = 25.0
    junction_limit_kmh: float = 30.0
    junction_degraded_kmh: float = 3.3
    # mesoscopic background-traffic relation
    jam_density_veh_per_km: float = 120.0
    speed_floor_kmh: float = 3.0
    # EV participation
    eta: float = 0.30
    participation_mode: str = "deterministic"  # or "bernoulli"
    # MESS right-of-way defaults
    mess_rightofway_lane: float = 0.4
    mess_rightofway_junction: float = 0.4
    # UAV work model
    da_work_s: float = 120.0
    uav_hover_equiv_kmh: float = 60.0
    # solver controls
    big_m: float = 1e6
    routing_node_budget: int = 200_000
    udssf_max_sites: int = 4
    udssf_grid_cap: int = 24

    def degraded_lane_factor(self) -> float:
        return self.lane_degraded_kmh / self.lane_limit_kmh

    def degraded_junction_factor(self) -> float:
        return self.junction_degraded_kmh / self.junction_limit_kmh


@dataclass
class DamageSet:
    failed_lines: list[str] = field(default_factory=list)
    failed_buses: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.failed_lines and not self.failed_buses


@dataclass
class Scenario:
    """One fully linked simulation case; the single source of truth for a run.

    All mutation during planning or execution happens on deep copies, so a
    loaded Scenario can be shared freely.
    """

    params: Params
    buses: dict[str, PdnBus]
    lines: dict[str, PdnLine]
    cn_nodes: dict[str, CnNode]
    junctions: dict[str, TrafficJunction]
    lanes: dict[str, TrafficLane]
    vehicles: dict[str, Vehicle]
    uavs: dict[str, Uav]
    warehouses: dict[str, Warehouse]
    damage: DamageSet = field(default_factory=DamageSet)

    def clone(self) -> "Scenario":
        return copy.deepcopy(self)

    def stations(self) -> list[PdnBus]:
        return [b for b in sorted_by_id(self.buses.values()) if b.is_v2gs]

    def fixed_cn_nodes(self) -> list[CnNode]:
        return [n for n in sorted_by_id(self.cn_nodes.values()) if not n.is_uav_backed]


def sorted_by_id(items: Iterable) -> list:
    """Deterministic iteration order used everywhere tie-breaks matter."""
    return sorted(items, key=lambda item: item.id)
