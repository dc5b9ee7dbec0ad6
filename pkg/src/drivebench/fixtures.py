"""Hand-authored fixture maps and the scenario library used by the benchmark."""

from __future__ import annotations

from .worldmap import Lane, RoadMap, TrafficLight
from .world import ActorSpawn, ScenarioSpec

LANE_W = 3.5


def _straight(lane_id, y, x0, x1, **kw):
    return Lane(id=lane_id, centerline=[[x0, y], [x1, y]], width=LANE_W, **kw)


def build_straight2(double_solid: bool = False) -> RoadMap:
    """Two-lane one-way road, 1 km."""
    kind = "double_solid" if double_solid else "dashed"
    lanes = [
        _straight("r", 0.0, 0.0, 1000.0, left_neighbor="l",
                  left_boundary_kind=kind, right_boundary_kind="solid", speed_limit=15.0),
        _straight("l", LANE_W, 0.0, 1000.0, right_neighbor="r",
                  left_boundary_kind="solid", right_boundary_kind=kind, speed_limit=15.0),
    ]
    return RoadMap("straight2_ds" if double_solid else "straight2", lanes)


def build_highway3(length: float = 1500.0) -> RoadMap:
    """Three-lane one-way highway."""
    lanes = [
        _straight("h0", 0.0, 0.0, length, left_neighbor="h1",
                  left_boundary_kind="dashed", right_boundary_kind="solid", speed_limit=15.0),
        _straight("h1", LANE_W, 0.0, length, left_neighbor="h2", right_neighbor="h0",
                  left_boundary_kind="dashed", right_boundary_kind="dashed", speed_limit=15.0),
        _straight("h2", 2 * LANE_W, 0.0, length, right_neighbor="h1",
                  left_boundary_kind="solid", right_boundary_kind="dashed", speed_limit=15.0),
    ]
    return RoadMap("highway3", lanes)


def build_junction4(phases=None) -> RoadMap:
    """Signalized 4-way junction: two approach lanes, a box, two exits."""
    phases = phases or [("red", 25.0), ("green", 30.0), ("yellow", 3.0)]
    lanes = [
        _straight("a0", 0.0, 0.0, 300.0, left_neighbor="a1", successors=["j0"],
                  left_boundary_kind="dashed", right_boundary_kind="solid",
                  speed_limit=12.0),
        _straight("a1", LANE_W, 0.0, 300.0, right_neighbor="a0", successors=["j1"],
                  left_boundary_kind="solid", right_boundary_kind="dashed",
                  speed_limit=12.0),
        _straight("j0", 0.0, 300.0, 324.0, successors=["e0"], in_junction=True,
                  right_boundary_kind="dashed", speed_limit=10.0),
        _straight("j1", LANE_W, 300.0, 324.0, successors=["e1"], in_junction=True,
                  right_boundary_kind="dashed", speed_limit=10.0),
        _straight("e0", 0.0, 324.0, 640.0, left_neighbor="e1",
                  left_boundary_kind="dashed", right_boundary_kind="solid",
                  speed_limit=12.0),
        _straight("e1", LANE_W, 324.0, 640.0, right_neighbor="e0",
                  left_boundary_kind="solid", right_boundary_kind="dashed",
                  speed_limit=12.0),
    ]
    lights = [
        TrafficLight("tl_main", ["a0", "a1"], [[300.0, -2.5], [300.0, 6.0]], phases),
    ]
    return RoadMap("junction4", lanes, lights)


def build_junction4_open() -> RoadMap:
    """Junction variant with a permanently green signal (pedestrian scenarios)."""
    m = build_junction4(phases=[("green", 36000.0)])
    m.id = "junction4_open"
    return m


BUILTIN_MAPS = {
    "straight2": build_straight2,
    "straight2_ds": lambda: build_straight2(double_solid=True),
    "highway3": build_highway3,
    "junction4": build_junction4,
    "junction4_open": build_junction4_open,
}


def builtin_map(name: str) -> RoadMap:
    if name not in BUILTIN_MAPS:
        raise KeyError(f"unknown builtin map {name!r}; have {sorted(BUILTIN_MAPS)}")
    return BUILTIN_MAPS[name]()


# --- scenario library -------------------------------------------------------

def yield_behind_emergency(variant: int = 0) -> ScenarioSpec:
    ego_s = 60.0 + 15.0 * variant
    return ScenarioSpec(
        id=f"YieldBehindEmergencyVehicles/{variant}",
        name="YieldBehindEmergencyVehicles",
        map_id="highway3",
        ego_lane_id="h1",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["h1"],
        actors=[
            ActorSpawn(id="ambulance", kind="emergency_vehicle", lane_id="h1",
                       s=ego_s - 50.0, speed=9.5,
                       behavior={"kind": "constant_speed", "speed": 9.5}),
        ],
    )


def overtaking_from_left(variant: int = 0) -> ScenarioSpec:
    ego_s = 50.0 + 20.0 * variant
    return ScenarioSpec(
        id=f"OvertakingFromLeft/{variant}",
        name="OvertakingFromLeft",
        map_id="highway3",
        ego_lane_id="h0",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["h0"],
        actors=[
            ActorSpawn(id="slowcar", kind="vehicle", lane_id="h0", s=ego_s + 85.0,
                       speed=2.0, behavior={"kind": "constant_speed", "speed": 2.0}),
        ],
    )


def left_borrow_pass_obstacle(variant: int = 0) -> ScenarioSpec:
    ego_s = 40.0 + 25.0 * variant
    return ScenarioSpec(
        id=f"LeftBorrowPassObstacle/{variant}",
        name="LeftBorrowPassObstacle",
        map_id="highway3",
        ego_lane_id="h0",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["h0"],
        actors=[
            ActorSpawn(id="wreck", kind="static_obstacle", lane_id="h0",
                       s=ego_s + 110.0, behavior={"kind": "stand"}),
        ],
    )


def right_change_in_route(variant: int = 0) -> ScenarioSpec:
    ego_s = 55.0 + 20.0 * variant
    return ScenarioSpec(
        id=f"RightChangeInRoute/{variant}",
        name="RightChangeInRoute",
        map_id="highway3",
        ego_lane_id="h1",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["h1"],
        actors=[
            ActorSpawn(id="slowcar", kind="vehicle", lane_id="h1", s=ego_s + 90.0,
                       speed=2.0, behavior={"kind": "constant_speed", "speed": 2.0}),
            # paces the ego in the left lane so the free side is the right one
            ActorSpawn(id="pacer", kind="vehicle", lane_id="h2", s=ego_s + 5.0,
                       speed=8.0, behavior={"kind": "constant_speed", "speed": 8.0}),
        ],
    )


def junction_straight(variant: int = 0) -> ScenarioSpec:
    ego_s = 170.0 + 15.0 * variant
    return ScenarioSpec(
        id=f"JunctionStraight/{variant}",
        name="JunctionStraight",
        map_id="junction4",
        ego_lane_id="a0",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["a0", "j0", "e0"],
    )


def junction_yield_pedestrian(variant: int = 0) -> ScenarioSpec:
    ego_s = 200.0 + 10.0 * variant
    cross_x = 310.0
    return ScenarioSpec(
        id=f"JunctionYieldPedestrian/{variant}",
        name="JunctionYieldPedestrian",
        map_id="junction4_open",
        ego_lane_id="a0",
        ego_s=ego_s,
        ego_speed=8.0,
        route=["a0", "j0", "e0"],
        actors=[
            ActorSpawn(
                id="walker", kind="pedestrian",
                behavior={
                    "kind": "scripted_trajectory",
                    "waypoints": [
                        [0.0, cross_x, -4.0],
                        [9.3, cross_x, 9.0],
                    ],
                },
                start_trigger={"point": [cross_x, 0.0], "radius": 23.0},
            ),
        ],
    )


SCENARIO_BUILDERS = {
    "YieldBehindEmergencyVehicles": yield_behind_emergency,
    "OvertakingFromLeft": overtaking_from_left,
    "LeftBorrowPassObstacle": left_borrow_pass_obstacle,
    "RightChangeInRoute": right_change_in_route,
    "JunctionStraight": junction_straight,
    "JunctionYieldPedestrian": junction_yield_pedestrian,
}


def builtin_scenario(name: str, variant: int = 0) -> ScenarioSpec:
    if name not in SCENARIO_BUILDERS:
        raise KeyError(f"unknown scenario {name!r}; have {sorted(SCENARIO_BUILDERS)}")
    return SCENARIO_BUILDERS[name](variant)


# The ten-route benchmark set used by the baseline fixture.
BENCHMARK_ROUTES = [
    ("YieldBehindEmergencyVehicles", 0),
    ("YieldBehindEmergencyVehicles", 1),
    ("OvertakingFromLeft", 0),
    ("OvertakingFromLeft", 1),
    ("LeftBorrowPassObstacle", 0),
    ("LeftBorrowPassObstacle", 1),
    ("RightChangeInRoute", 0),
    ("JunctionStraight", 0),
    ("JunctionStraight", 1),
    ("JunctionYieldPedestrian", 0),
]
