import sys

import pytest

from drivebench import fixtures
from drivebench.world import ActorSpawn, ScenarioSpec, perceive, spawn_scenario


@pytest.fixture(scope="session")
def highway3():
    return fixtures.build_highway3()


@pytest.fixture(scope="session")
def junction4():
    return fixtures.build_junction4()


def make_world(world_map, ego_lane="h1", ego_s=100.0, ego_speed=8.0,
               actors=(), route=None, seed=0):
    spec = ScenarioSpec(
        id="t/synth", name="synth", map_id=world_map.id,
        ego_lane_id=ego_lane, ego_s=ego_s, ego_speed=ego_speed,
        actors=list(actors), route=route or [ego_lane],
    )
    return spawn_scenario(world_map, spec, seed), spec


def make_scene(world_map, **kw):
    world, spec = make_world(world_map, **kw)
    return perceive(world, world_map, 100.0, spec.route)


def spawn(aid, kind, lane, s, speed=0.0, behavior=None, lateral=0.0):
    return ActorSpawn(id=aid, kind=kind, lane_id=lane, s=s, speed=speed,
                      lateral=lateral,
                      behavior=behavior or {"kind": "constant_speed"})


PY = sys.executable


def drive_decision_log(world_map, segments, ego_lane="h1", ego_s=50.0,
                       ego_speed=8.0, actors=(), scenario_id="t/driven",
                       dt=0.05, decision_period=10, scene_stride=5):
    """Execute a sequence of (DecisionPair, duration_s) segments through the
    motion stack and return the resulting DrivingLog. The commanded per-frame
    decision sequence is returned alongside for agreement checks."""
    from drivebench.data_engine import DrivingLog, LogFrame
    from drivebench.motion import PlannerConfig, plan_path, plan_speed, track
    from drivebench.world import perceive, step

    cfg = PlannerConfig()
    world, spec = make_world(world_map, ego_lane=ego_lane, ego_s=ego_s,
                             ego_speed=ego_speed, actors=actors)
    spec.id = scenario_id
    frames, commanded = [], []
    idx = 0
    for pair, duration in segments:
        # one plan per commanded segment; the plan horizon covers it
        scene = perceive(world, world_map, 100.0, spec.route)
        plan = plan_path(pair.path, scene, cfg)
        profile = plan_speed(pair.speed, scene, plan, cfg)
        for k in range(int(round(duration / dt))):
            ctrl = track(plan, profile, world.ego, cfg)
            world = step(world, world_map, ctrl, dt)
            scene_rec = None
            if idx % scene_stride == 0:
                scene_rec = perceive(world, world_map, 100.0, spec.route).to_dict()
            frames.append(LogFrame(
                time=world.time,
                ego={"x": world.ego.pose.x, "y": world.ego.pose.y,
                     "heading": world.ego.pose.heading, "speed": world.ego.speed,
                     "lane_id": world.ego.lane_id},
                actors=[], lights={}, scene=scene_rec,
            ))
            commanded.append(pair)
            idx += 1
    log = DrivingLog(scenario_id=scenario_id, scenario_name="driven",
                     map_id=world_map.id, route=list(spec.route), frames=frames)
    return log, commanded
