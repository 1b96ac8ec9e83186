"""Bundled desk-scale case: a 37-bus feeder, a 24-junction road grid, a 42-node CN.

The case is reconstructed from published test-network shapes: a 37-bus
distribution feeder split into three station-rooted zones, the classic
24-junction / 76-lane road network, and 42 wireless base stations with 3 km
coverage.  Geometry is chosen so that one south-east pocket of the feeder is
unreachable by fixed-network communication alone and needs airborne base
stations, while the rest recovers over the wireless mesh as supply returns.

Everything is generated deterministically from the tables below;
``build_case37`` and the shipped JSON data file must stay in sync (a test
regenerates the file and compares).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import (
    EV,
    MESS,
    CnNode,
    DamageSet,
    Params,
    PdnBus,
    PdnLine,
    Scenario,
    TrafficJunction,
    TrafficLane,
    Uav,
    Vehicle,
    Warehouse,
    distance_km,
)

DATA_FILE = "ieee37_sioux24_cn42.json"

# 24 road junctions (km); the canonical 38-road adjacency below
JUNCTIONS = {
    "n01": (5.0, 21.5), "n02": (14.0, 21.5),
    "n03": (5.0, 18.5), "n04": (8.0, 17.5), "n05": (12.0, 17.5), "n06": (14.0, 19.0),
    "n07": (18.5, 15.0), "n08": (14.0, 15.5), "n09": (12.0, 14.5),
    "n10": (12.0, 12.0), "n11": (8.0, 12.0), "n12": (5.0, 14.0),
    "n13": (5.0, 4.0), "n14": (8.0, 9.0), "n15": (12.0, 9.0), "n16": (14.0, 12.0),
    "n17": (14.0, 9.5), "n18": (18.5, 12.0), "n19": (14.0, 7.0),
    "n20": (18.5, 5.5), "n21": (14.0, 4.0), "n22": (12.0, 5.5),
    "n23": (8.0, 5.5), "n24": (8.0, 2.5),
}

ROADS = [
    ("n01", "n02"), ("n01", "n03"), ("n02", "n06"), ("n03", "n04"), ("n03", "n12"),
    ("n04", "n05"), ("n04", "n11"), ("n05", "n06"), ("n05", "n09"), ("n06", "n08"),
    ("n07", "n08"), ("n07", "n18"), ("n08", "n09"), ("n08", "n16"), ("n09", "n10"),
    ("n10", "n11"), ("n10", "n15"), ("n10", "n16"), ("n10", "n17"), ("n11", "n12"),
    ("n11", "n14"), ("n12", "n13"), ("n13", "n24"), ("n14", "n15"), ("n14", "n23"),
    ("n15", "n19"), ("n15", "n22"), ("n16", "n17"), ("n16", "n18"), ("n17", "n19"),
    ("n18", "n20"), ("n19", "n20"), ("n20", "n21"), ("n20", "n22"), ("n21", "n22"),
    ("n21", "n24"), ("n22", "n23"), ("n23", "n24"),
]

# 37 feeder buses: id -> (x, y, residential kW, role)
STATION, FACILITY, PLAIN = "station", "facility", "plain"
BUSES = {
    "b01": (6.0, 19.5, 30.0, STATION),
    "b02": (15.0, 12.5, 30.0, STATION),
    "b03": (6.5, 3.5, 30.0, STATION),
    # north zone
    "b04": (3.5, 20.5, 60.0, PLAIN),
    "b05": (8.0, 20.5, 60.0, FACILITY),
    "b06": (11.0, 21.0, 40.0, PLAIN),
    "b07": (13.5, 20.0, 60.0, FACILITY),
    "b08": (3.5, 17.5, 80.0, PLAIN),
    "b09": (6.0, 16.5, 65.0, FACILITY),
    "b10": (9.0, 18.0, 60.0, PLAIN),
    "b11": (11.5, 17.0, 60.0, FACILITY),
    "b12": (14.0, 17.5, 75.0, PLAIN),
    "b13": (8.0, 15.5, 70.0, PLAIN),
    # east zone
    "b14": (17.0, 14.0, 30.0, FACILITY),
    "b15": (18.5, 11.5, 90.0, PLAIN),
    "b16": (16.5, 10.0, 30.0, FACILITY),
    "b17": (13.0, 11.0, 130.0, PLAIN),
    "b18": (11.0, 13.0, 30.0, FACILITY),
    "b19": (8.5, 12.5, 60.0, PLAIN),
    "b20": (12.5, 14.5, 140.0, PLAIN),
    "b21": (19.0, 7.5, 30.0, FACILITY),
    "b22": (21.0, 5.5, 100.0, PLAIN),
    "b23": (21.5, 8.0, 80.0, PLAIN),
    "b24": (14.5, 8.0, 30.0, FACILITY),
    # south zone
    "b25": (3.5, 4.5, 100.0, PLAIN),
    "b26": (3.0, 2.0, 90.0, PLAIN),
    "b27": (5.5, 6.0, 110.0, PLAIN),
    "b28": (8.5, 5.0, 30.0, FACILITY),
    "b29": (11.0, 4.0, 100.0, PLAIN),
    "b30": (7.5, 7.5, 30.0, FACILITY),
    "b31": (10.5, 7.0, 110.0, PLAIN),
    "b32": (5.0, 9.0, 80.0, PLAIN),
    "b33": (13.0, 3.0, 120.0, PLAIN),
    "b34": (10.0, 1.5, 70.0, PLAIN),
    "b35": (13.5, 6.0, 100.0, PLAIN),
    "b36": (3.0, 7.0, 60.0, PLAIN),
    "b37": (7.0, 1.0, 80.0, PLAIN),
}

# feeder lines.  Every switch starts open: the blackout sectionalizes the
# feeder for black start, and the stations re-energize it line by line.
# b11-b18 and b24-b35 are the broken pre-event inter-zone connectors; the
# last four entries are normally-open tie lines.
LINES = [
    ("b01", "b04"), ("b01", "b05"), ("b05", "b06"), ("b06", "b07"),
    ("b01", "b08"), ("b01", "b09"), ("b09", "b13"), ("b13", "b10"),
    ("b10", "b11"), ("b11", "b12"),
    ("b02", "b14"), ("b14", "b15"), ("b15", "b16"), ("b02", "b17"),
    ("b17", "b24"), ("b02", "b20"), ("b20", "b18"), ("b18", "b19"),
    ("b16", "b21"), ("b21", "b22"), ("b21", "b23"),
    ("b03", "b27"), ("b03", "b28"), ("b03", "b26"), ("b03", "b37"),
    ("b27", "b30"), ("b30", "b31"), ("b30", "b32"), ("b28", "b29"),
    ("b29", "b33"), ("b29", "b34"), ("b31", "b35"), ("b25", "b36"),
    ("b03", "b25"),
    ("b11", "b18"),
    ("b24", "b35"),
    ("b13", "b19"),
    ("b10", "b06"),
    ("b32", "b19"),
    ("b24", "b21"),
]

FAULTED = ["b01-b05", "b11-b18", "b16-b21", "b24-b35"]

# 39 regular base stations (the three Internet-gateway nodes sit at the
# V2G stations).  The south-east approach (x>15.5, y<10) is deliberately
# node-free except for the two pocket stations fed from bus b21.
CN_SITES = [
    (4.0, 21.0), (7.0, 20.0), (10.5, 20.5), (13.5, 20.5), (3.5, 18.0), (6.5, 18.0),
    (9.5, 17.5), (12.0, 18.5), (14.5, 18.0), (5.0, 15.5), (8.6, 16.4), (11.0, 15.5),
    (13.0, 13.5), (15.5, 13.5), (17.5, 14.5), (19.0, 12.5), (16.0, 11.0), (14.2, 10.6),
    (9.5, 13.0), (11.0, 11.5), (14.5, 9.0), (12.5, 8.0), (15.3, 8.8), (10.0, 10.0),
    (4.5, 5.5), (3.5, 3.0), (5.5, 1.5), (8.0, 6.5), (9.5, 5.5), (8.0, 3.8),
    (11.5, 3.2), (10.5, 6.5), (13.0, 5.0), (12.5, 2.0), (9.0, 1.5), (6.0, 8.5),
    (4.0, 7.5), (19.5, 7.0), (21.0, 6.5),
]

WAREHOUSE = ("wh1", 1.5, 21.5)

# EVs parked around town; 50 kW / 150 kWh each
EV_SITES = [
    (4.5, 20.0), (6.5, 19.0), (9.0, 19.5), (12.0, 20.0), (13.5, 18.5), (5.5, 17.0),
    (8.5, 16.5), (11.0, 16.0), (13.0, 16.5), (6.0, 15.0), (9.5, 14.5), (12.5, 15.5),
    (14.5, 13.0), (16.5, 13.0), (18.0, 13.5), (15.5, 11.5), (12.5, 12.5), (10.5, 12.5),
    (8.0, 13.0), (13.5, 9.5), (15.0, 10.5), (11.5, 9.5), (9.0, 10.5), (16.0, 14.5),
    (4.0, 4.0), (5.0, 2.5), (7.5, 4.5), (9.0, 3.0), (10.5, 5.0), (12.0, 4.5),
    (8.5, 7.0), (10.0, 8.0), (6.0, 7.0), (4.5, 8.0), (12.0, 6.5), (13.0, 2.0),
    (8.0, 1.8), (6.5, 2.8), (11.0, 1.8), (9.8, 6.2), (5.5, 4.8), (6.2, 2.2),
    (7.8, 3.2), (9.5, 4.2), (10.8, 2.6), (12.2, 5.2), (8.8, 5.8), (7.2, 6.6),
]

BACKGROUND_VEHICLES = 2600.0
LAMP_KW_PER_KM = 1.25  # 50 W per 20 m of road, one lamp row shared by both directions
SIGNAL_KW = 10.0
BASE_STATION_KW = 5.0
BASE_STATION_RANGE_KM = 3.0


def _facility_buses() -> list[str]:
    return [b for b, (_, _, _, role) in BUSES.items() if role == FACILITY]


def _nearest_facility(x: float, y: float) -> str:
    best = None
    for bus_id in _facility_buses():
        bx, by = BUSES[bus_id][0], BUSES[bus_id][1]
        d = distance_km(x, y, bx, by)
        if best is None or d < best[0] - 1e-12 or (abs(d - best[0]) <= 1e-12 and bus_id < best[1]):
            best = (d, bus_id)
    assert best is not None
    return best[1]


def build_case37(seed: int = 5) -> Scenario:
    params = Params(seed=seed)

    buses: dict[str, PdnBus] = {}
    for bus_id, (x, y, residential, role) in BUSES.items():
        buses[bus_id] = PdnBus(
            id=bus_id, x=x, y=y, load_kw=residential, cn_utn_load_kw=0.0,
            is_v2gs=(role == STATION),
            station_demand_kw=0.0 if role == STATION else None,
        )

    lines: dict[str, PdnLine] = {}
    for from_bus, to_bus in LINES:
        line_id = f"{from_bus}-{to_bus}"
        lines[line_id] = PdnLine(
            id=line_id, from_bus=from_bus, to_bus=to_bus,
            initial_closed=False, switch_closed=False,
        )

    junctions: dict[str, TrafficJunction] = {}
    incident: dict[str, list[float]] = {j: [] for j in JUNCTIONS}
    for a, b in ROADS:
        length = distance_km(*JUNCTIONS[a], *JUNCTIONS[b])
        incident[a].append(length)
        incident[b].append(length)
    for jid, (x, y) in JUNCTIONS.items():
        junctions[jid] = TrafficJunction(
            id=jid, x=x, y=y,
            supply_bus=_nearest_facility(x, y),
            crossing_len_km=round(sum(incident[jid]) / len(incident[jid]) / 5.0, 4),
            degraded_factor=params.degraded_junction_factor(),
        )

    lanes: dict[str, TrafficLane] = {}
    total_length = 0.0
    for a, b in ROADS:
        for u, v in ((a, b), (b, a)):
            length = distance_km(*JUNCTIONS[u], *JUNCTIONS[v])
            total_length += length
            n_sections = max(2, round(length / 1.5))
            mid_x = (JUNCTIONS[u][0] + JUNCTIONS[v][0]) / 2.0
            mid_y = (JUNCTIONS[u][1] + JUNCTIONS[v][1]) / 2.0
            lanes[f"{u}-{v}"] = TrafficLane(
                id=f"{u}-{v}", from_junction=u, to_junction=v,
                section_lengths_km=[round(length / n_sections, 6)] * n_sections,
                supply_bus=_nearest_facility(mid_x, mid_y),
                degraded_factor=params.degraded_lane_factor(),
            )
    for lane in lanes.values():
        lane.background_vehicles = round(BACKGROUND_VEHICLES * lane.length_km / total_length, 6)

    cn_nodes: dict[str, CnNode] = {}
    for idx, station_bus in enumerate(("b01", "b02", "b03"), start=1):
        node_id = f"c{idx:02d}"
        bus = buses[station_bus]
        cn_nodes[node_id] = CnNode(
            id=node_id, x=bus.x, y=bus.y, range_km=BASE_STATION_RANGE_KM,
            is_central=True, supply_bus=station_bus, demand_kw=BASE_STATION_KW,
        )
    for idx, (x, y) in enumerate(CN_SITES, start=4):
        cn_nodes[f"c{idx:02d}"] = CnNode(
            id=f"c{idx:02d}", x=x, y=y, range_km=BASE_STATION_RANGE_KM,
            supply_bus=_nearest_facility(x, y), demand_kw=BASE_STATION_KW,
        )

    # facility demand rolls up into the supply bus's CN/UTN load share
    for node in cn_nodes.values():
        buses[node.supply_bus].cn_utn_load_kw += node.demand_kw
    for junction in junctions.values():
        buses[junction.supply_bus].cn_utn_load_kw += SIGNAL_KW
    for lane in lanes.values():
        buses[lane.supply_bus].cn_utn_load_kw += LAMP_KW_PER_KM * lane.length_km
    for bus in buses.values():
        bus.cn_utn_load_kw = round(bus.cn_utn_load_kw, 6)
        bus.load_kw = round(bus.load_kw + bus.cn_utn_load_kw, 6)

    vehicles: dict[str, Vehicle] = {}
    for idx, (x, y) in enumerate(EV_SITES, start=1):
        vid = f"ev{idx:02d}"
        vehicles[vid] = Vehicle(id=vid, kind=EV, x=x, y=y, output_kw=50.0, energy_kwh=150.0)
    for idx in range(1, 6):
        vid = f"m{idx:02d}"
        vehicles[vid] = Vehicle(
            id=vid, kind=MESS, x=WAREHOUSE[1], y=WAREHOUSE[2], output_kw=500.0, energy_kwh=776.0,
            comm=True, rightofway_lane=params.mess_rightofway_lane,
            rightofway_junction=params.mess_rightofway_junction,
        )

    uavs = {
        f"u{idx:02d}": Uav(id=f"u{idx:02d}", speed_kmh=180.0, range_budget_km=50.0,
                           cn_range_km=1.0, home=WAREHOUSE[0])
        for idx in range(1, 6)
    }
    warehouses = {
        WAREHOUSE[0]: Warehouse(id=WAREHOUSE[0], x=WAREHOUSE[1], y=WAREHOUSE[2],
                                swap_slots=4, swap_duration_s=90.0)
    }

    return Scenario(
        params=params,
        buses=buses,
        lines=lines,
        cn_nodes=cn_nodes,
        junctions=junctions,
        lanes=lanes,
        vehicles=vehicles,
        uavs=uavs,
        warehouses=warehouses,
        damage=DamageSet(failed_lines=list(FAULTED)),
    )


def bundled_case_path() -> Path:
    return Path(str(resources.files("gridrestore").joinpath("data", DATA_FILE)))


def total_load_kw(scenario: Scenario) -> float:
    return round(sum(b.load_kw for b in scenario.buses.values()), 6)


def total_cn_utn_load_kw(scenario: Scenario) -> float:
    return round(sum(b.cn_utn_load_kw for b in scenario.buses.values()), 6)
