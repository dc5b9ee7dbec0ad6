"""Deterministic 2D driving world: actors, stepping, infractions, perception."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np
from shapely.geometry import Polygon

from .geometry import Polyline, Pose, normalize_angle, oriented_box, segments_intersect
from .scene import (
    EgoView,
    LaneContext,
    NeighborLaneInfo,
    SceneActor,
    SceneDescription,
)
from .worldmap import RoadMap

INFRACTION_KINDS = (
    "collision_pedestrian",
    "collision_vehicle",
    "collision_static",
    "red_light",
    "stop_sign",
    "double_solid_crossing",
    "failed_yield_emergency",
)

ACTOR_KINDS = ("ego", "vehicle", "emergency_vehicle", "pedestrian", "static_obstacle")

DEFAULT_BBOX = {
    "ego": (4.6, 2.0),
    "vehicle": (4.6, 2.0),
    "emergency_vehicle": (5.5, 2.2),
    "pedestrian": (0.6, 0.6),
    "static_obstacle": (3.0, 2.0),
}


class WorldError(ValueError):
    pass


class EgoOffMapError(WorldError):
    """Ego left the drivable lane graph; the episode must abort."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    wheelbase: float = 2.8
    v_max: float = 20.0
    walk_speed_cap: float = 2.0
    d_yield: float = 15.0
    t_yield: float = 5.0
    perceive_range: float = 100.0
    corridor_horizon: float = 130.0
    corridor_step: float = 1.0


@dataclass
class ActorState:
    id: str
    kind: str
    pose: Pose
    speed: float
    bbox: tuple  # (length, width)
    lane_id: str | None = None

    def __post_init__(self):
        if self.kind not in ACTOR_KINDS:
            raise WorldError(f"unknown actor kind {self.kind}")
        if self.bbox[0] <= 0 or self.bbox[1] <= 0:
            raise WorldError("bbox dims must be positive")
        if self.speed < 0:
            raise WorldError("speed must be >= 0")

    def footprint(self) -> np.ndarray:
        return oriented_box(self.pose.x, self.pose.y, self.pose.heading, *self.bbox)


@dataclass
class WorldState:
    time: float
    ego: ActorState
    actors: list
    light_states: dict = field(default_factory=dict)
    pending_instruction: str | None = None
    # Bookkeeping kept inside the state so stepping stays a pure function of it.
    actor_meta: dict = field(default_factory=dict)   # id -> {s, lane_id, activated_at}
    yield_timers: dict = field(default_factory=dict)  # emergency id -> start time

    def clone(self) -> "WorldState":
        return copy.deepcopy(self)

    def actor_by_id(self, aid: str) -> ActorState | None:
        for a in self.actors:
            if a.id == aid:
                return a
        return None


@dataclass(frozen=True)
class Infraction:
    kind: str
    time: float
    position: tuple

    def __post_init__(self):
        if self.kind not in INFRACTION_KINDS:
            raise WorldError(f"unknown infraction kind {self.kind}")


# --- scenario specs ---------------------------------------------------------

BEHAVIOR_KINDS = ("idm_follow", "constant_speed", "scripted_trajectory", "stand")


@dataclass
class ActorSpawn:
    id: str
    kind: str
    lane_id: str | None = None
    s: float = 0.0
    lateral: float = 0.0
    speed: float = 0.0
    bbox: tuple | None = None
    behavior: dict = field(default_factory=lambda: {"kind": "stand"})
    start_trigger: dict | None = None  # {"point": [x, y], "radius": r}

    def __post_init__(self):
        if self.behavior.get("kind") not in BEHAVIOR_KINDS:
            raise WorldError(f"actor {self.id}: unknown behavior {self.behavior.get('kind')}")


@dataclass
class ScenarioSpec:
    id: str
    name: str
    map_id: str
    ego_lane_id: str
    ego_s: float = 0.0
    ego_speed: float = 0.0
    route: list = field(default_factory=list)          # ordered lane ids
    actors: list = field(default_factory=list)         # ActorSpawn
    nav_command: str = "follow_lane"
    trigger: dict | None = None                        # {"point": [x,y], "radius": r}
    instruction_events: list = field(default_factory=list)  # {"at_time"|"trigger", "text", "hold"}

    def route_polyline(self, world_map: RoadMap) -> Polyline:
        pts = []
        for lid in self.route:
            lane_pts = world_map.lane(lid).poly.points
            for p in lane_pts:
                if pts and np.linalg.norm(p - pts[-1]) < 1e-9:
                    continue
                pts.append(p)
        if len(pts) < 2:
            raise WorldError(f"scenario {self.id}: route has no geometry")
        return Polyline(np.array(pts))


def spawn_scenario(world_map: RoadMap, spec: ScenarioSpec, seed: int = 0) -> WorldState:
    """Instantiate a world from a scenario spec. Same seed, same world."""
    del seed  # spawn is fully scripted; kept for interface stability
    for lid in spec.route:
        world_map.lane(lid)
    ego_lane = world_map.lane(spec.ego_lane_id)
    pose = Pose(*ego_lane.poly.point_at(spec.ego_s), ego_lane.poly.heading_at(spec.ego_s))
    ego = ActorState("ego", "ego", pose, spec.ego_speed, DEFAULT_BBOX["ego"], spec.ego_lane_id)

    actors = []
    meta = {}
    for sp in sorted(spec.actors, key=lambda a: a.id):
        bbox = tuple(sp.bbox) if sp.bbox else DEFAULT_BBOX[sp.kind]
        if sp.lane_id is not None:
            lane = world_map.lane(sp.lane_id)
            xy = lane.poly.offset_point(sp.s, sp.lateral)
            heading = lane.poly.heading_at(sp.s)
        else:
            traj = sp.behavior.get("waypoints")
            if not traj:
                raise WorldError(f"actor {sp.id}: needs a lane or scripted waypoints")
            xy = np.array(traj[0][1:3], dtype=float)
            heading = 0.0
        speed = sp.speed
        if sp.kind == "static_obstacle":
            speed = 0.0
        actors.append(ActorState(sp.id, sp.kind, Pose(xy[0], xy[1], heading), speed, bbox, sp.lane_id))
        meta[sp.id] = {
            "s": sp.s,
            "lane_id": sp.lane_id,
            "lateral": sp.lateral,
            "activated_at": None if sp.start_trigger else 0.0,
            "behavior": dict(sp.behavior),
            "start_trigger": dict(sp.start_trigger) if sp.start_trigger else None,
        }

    light_states = {tid: tl.state_at(0.0) for tid, tl in world_map.lights.items()}
    return WorldState(0.0, ego, actors, light_states, None, meta, {})


SCENARIO_FORMAT_VERSION = 1

_SPAWN_FIELDS = {"id", "kind", "lane_id", "s", "lateral", "speed", "bbox",
                 "behavior", "start_trigger"}
_SCENARIO_FIELDS = {"format_version", "id", "name", "map_id", "ego_lane_id", "ego_s",
                    "ego_speed", "route", "actors", "nav_command", "trigger",
                    "instruction_events"}


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    d = {
        "format_version": SCENARIO_FORMAT_VERSION,
        "id": spec.id,
        "name": spec.name,
        "map_id": spec.map_id,
        "ego_lane_id": spec.ego_lane_id,
        "ego_s": spec.ego_s,
        "ego_speed": spec.ego_speed,
        "route": list(spec.route),
        "actors": [
            {
                "id": a.id, "kind": a.kind, "lane_id": a.lane_id, "s": a.s,
                "lateral": a.lateral, "speed": a.speed,
                "bbox": list(a.bbox) if a.bbox else None,
                "behavior": a.behavior, "start_trigger": a.start_trigger,
            }
            for a in spec.actors
        ],
        "nav_command": spec.nav_command,
        "trigger": spec.trigger,
        "instruction_events": spec.instruction_events,
    }
    return d


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    if doc.get("format_version") != SCENARIO_FORMAT_VERSION:
        raise WorldError(f"unsupported scenario format_version {doc.get('format_version')!r}")
    unknown = set(doc) - _SCENARIO_FIELDS
    if unknown:
        raise WorldError(f"unknown scenario fields: {sorted(unknown)}")
    actors = []
    for rec in doc.get("actors", []):
        extra = set(rec) - _SPAWN_FIELDS
        if extra:
            raise WorldError(f"unknown actor fields: {sorted(extra)}")
        rec = dict(rec)
        if rec.get("bbox"):
            rec["bbox"] = tuple(rec["bbox"])
        actors.append(ActorSpawn(**rec))
    return ScenarioSpec(
        id=doc["id"], name=doc["name"], map_id=doc["map_id"],
        ego_lane_id=doc["ego_lane_id"], ego_s=doc.get("ego_s", 0.0),
        ego_speed=doc.get("ego_speed", 0.0), route=doc.get("route", []),
        actors=actors, nav_command=doc.get("nav_command", "follow_lane"),
        trigger=doc.get("trigger"),
        instruction_events=doc.get("instruction_events", []),
    )


# --- stepping ---------------------------------------------------------------

# Intelligent Driver Model defaults (Treiber et al.).
IDM_T = 1.5
IDM_A = 1.5
IDM_B = 1.67
IDM_S0 = 2.0
IDM_DELTA = 4.0


def _idm_accel(v: float, v0: float, gap: float, dv: float) -> float:
    s_star = IDM_S0 + max(0.0, v * IDM_T + v * dv / (2.0 * math.sqrt(IDM_A * IDM_B)))
    gap = max(gap, 0.1)
    return IDM_A * (1.0 - (v / max(v0, 0.1)) ** IDM_DELTA - (s_star / gap) ** 2)


def _advance_on_lane(world_map: RoadMap, meta: dict, dist: float):
    """Move an actor's (lane, s) forward, following successors."""
    lane = world_map.lane(meta["lane_id"])
    s = meta["s"] + dist
    while s > lane.length:
        if not lane.successors:
            s = lane.length
            break
        s -= lane.length
        lane = world_map.lane(lane.successors[0])
    meta["lane_id"] = lane.id
    meta["s"] = s
    return lane


def _lane_chain_gap(world_map: RoadMap, lane_id: str, s: float, other_lane: str,
                    other_s: float, max_ahead: float = 120.0) -> float | None:
    """Arc-length from (lane_id, s) forward to (other_lane, other_s)."""
    lane = world_map.lane(lane_id)
    offset = -s
    for _ in range(5):
        if lane.id == other_lane:
            d = offset + other_s
            return d if 0.0 < d <= max_ahead else None
        offset += lane.length
        if not lane.successors:
            return None
        lane = world_map.lane(lane.successors[0])
    return None


def step(world: WorldState, world_map: RoadMap, ego_control, dt: float,
         cfg: SimConfig | None = None) -> WorldState:
    """Advance every actor by dt. Deterministic; returns a new WorldState."""
    cfg = cfg or SimConfig()
    if not (0.0 < dt <= 0.2):
        raise WorldError(f"dt must be in (0, 0.2], got {dt}")
    steer = float(ego_control.steer)
    accel = float(ego_control.accel)
    if not (math.isfinite(steer) and math.isfinite(accel)):
        raise WorldError("ego control must be finite")

    nxt = world.clone()
    nxt.time = world.time + dt

    # Ego: kinematic bicycle model.
    e = world.ego
    v = e.speed
    x = e.pose.x + v * math.cos(e.pose.heading) * dt
    y = e.pose.y + v * math.sin(e.pose.heading) * dt
    heading = normalize_angle(e.pose.heading + v * math.tan(steer) / cfg.wheelbase * dt)
    v_new = min(max(v + accel * dt, 0.0), cfg.v_max)
    ego_lane = world_map.nearest_lane((x, y))
    nxt.ego = ActorState("ego", "ego", Pose(x, y, heading), v_new, e.bbox, ego_lane)

    # Scripted actors, in stable id order.
    new_actors = []
    for a in sorted(world.actors, key=lambda a: a.id):
        meta = nxt.actor_meta[a.id]
        trig = meta.get("start_trigger")
        if trig and meta["activated_at"] is None:
            d = math.hypot(e.pose.x - trig["point"][0], e.pose.y - trig["point"][1])
            if d <= trig["radius"]:
                meta["activated_at"] = world.time
        new_actors.append(_step_actor(a, meta, world, world_map, dt, cfg))
    nxt.actors = new_actors

    nxt.light_states = {tid: tl.state_at(nxt.time) for tid, tl in world_map.lights.items()}
    _update_yield_timers(nxt, world_map, cfg)
    return nxt


def _step_actor(a: ActorState, meta: dict, world: WorldState, world_map: RoadMap,
                dt: float, cfg: SimConfig) -> ActorState:
    kind = meta["behavior"]["kind"]
    if meta["activated_at"] is None or kind == "stand":
        return replace(a, speed=0.0 if kind == "stand" else a.speed)

    if kind == "constant_speed":
        speed = float(meta["behavior"].get("speed", a.speed))
        lane = _advance_on_lane(world_map, meta, speed * dt)
        xy = lane.poly.offset_point(meta["s"], meta.get("lateral", 0.0))
        return replace(a, pose=Pose(xy[0], xy[1], lane.poly.heading_at(meta["s"])),
                       speed=speed, lane_id=lane.id)

    if kind == "idm_follow":
        v0 = float(meta["behavior"].get("desired_speed", 10.0))
        gap, lead_v = _find_leader(a, meta, world, world_map)
        if gap is None:
            acc = IDM_A * (1.0 - (a.speed / max(v0, 0.1)) ** IDM_DELTA)
        else:
            acc = _idm_accel(a.speed, v0, gap - a.bbox[0], a.speed - lead_v)
        speed = max(a.speed + acc * dt, 0.0)
        lane = _advance_on_lane(world_map, meta, speed * dt)
        xy = lane.poly.offset_point(meta["s"], meta.get("lateral", 0.0))
        return replace(a, pose=Pose(xy[0], xy[1], lane.poly.heading_at(meta["s"])),
                       speed=speed, lane_id=lane.id)

    if kind == "scripted_trajectory":
        wps = meta["behavior"]["waypoints"]  # [(t_rel, x, y), ...]
        t = world.time + dt - meta["activated_at"]
        if t <= wps[0][0]:
            x, y = wps[0][1], wps[0][2]
            return replace(a, pose=Pose(x, y, a.pose.heading), speed=0.0, lane_id=None)
        if t >= wps[-1][0]:
            x, y = wps[-1][1], wps[-1][2]
            return replace(a, pose=Pose(x, y, a.pose.heading), speed=0.0, lane_id=None)
        for i in range(len(wps) - 1):
            t0, x0, y0 = wps[i]
            t1, x1, y1 = wps[i + 1]
            if t0 <= t <= t1:
                u = (t - t0) / (t1 - t0)
                x, y = x0 + u * (x1 - x0), y0 + u * (y1 - y0)
                seg_t = max(t1 - t0, 1e-6)
                speed = math.hypot(x1 - x0, y1 - y0) / seg_t
                if a.kind == "pedestrian":
                    speed = min(speed, cfg.walk_speed_cap)
                heading = math.atan2(y1 - y0, x1 - x0)
                return replace(a, pose=Pose(x, y, heading), speed=speed, lane_id=None)
    return a


def _find_leader(a: ActorState, meta: dict, world: WorldState, world_map: RoadMap):
    """Nearest vehicle (or ego) ahead along the actor's lane chain."""
    best_gap, best_v = None, 0.0
    candidates = [(world.ego.id, world.ego)] + [(o.id, o) for o in world.actors if o.id != a.id]
    for _, other in sorted(candidates):
        if other.kind == "pedestrian":
            continue
        if other.lane_id is None:
            continue
        lane = world_map.lane(other.lane_id)
        s_other, lat = lane.poly.project((other.pose.x, other.pose.y))
        if abs(lat) > lane.width:
            continue
        gap = _lane_chain_gap(world_map, meta["lane_id"], meta["s"], other.lane_id, s_other)
        if gap is not None and (best_gap is None or gap < best_gap):
            best_gap, best_v = gap, other.speed
    return best_gap, best_v


def _update_yield_timers(state: WorldState, world_map: RoadMap, cfg: SimConfig):
    active = {}
    ego = state.ego
    if ego.lane_id is not None:
        lane = world_map.lane(ego.lane_id)
        s_ego, _ = lane.poly.project((ego.pose.x, ego.pose.y))
        for a in state.actors:
            if a.kind != "emergency_vehicle":
                continue
            s_a, lat_a = lane.poly.project((a.pose.x, a.pose.y))
            behind = 0.0 < s_ego - s_a <= cfg.d_yield and abs(lat_a) <= lane.width / 2.0
            if behind:
                active[a.id] = state.yield_timers.get(a.id, state.time)
    state.yield_timers = active


# --- infractions ------------------------------------------------------------

def _overlaps(ego: ActorState, other: ActorState) -> bool:
    d = math.hypot(ego.pose.x - other.pose.x, ego.pose.y - other.pose.y)
    if d > (ego.bbox[0] + other.bbox[0]):
        return False
    return Polygon(ego.footprint()).intersects(Polygon(other.footprint()))


_COLLISION_KIND = {
    "pedestrian": "collision_pedestrian",
    "vehicle": "collision_vehicle",
    "emergency_vehicle": "collision_vehicle",
    "static_obstacle": "collision_static",
}


def detect_infractions(prev: WorldState, nxt: WorldState, world_map: RoadMap,
                       cfg: SimConfig | None = None) -> list:
    """All infractions whose triggering transition occurred in (prev, next]."""
    cfg = cfg or SimConfig()
    if not prev.time < nxt.time:
        raise WorldError("detect_infractions requires prev.time < next.time")
    found = []

    # Collisions: report at overlap onset only.
    for a_next in sorted(nxt.actors, key=lambda a: a.id):
        a_prev = prev.actor_by_id(a_next.id)
        if _overlaps(nxt.ego, a_next) and not (a_prev and _overlaps(prev.ego, a_prev)):
            found.append(Infraction(_COLLISION_KIND[a_next.kind], nxt.time,
                                    (nxt.ego.pose.x, nxt.ego.pose.y)))

    # Red light: ego center crosses a controlled stop line while the light is red.
    p0 = (prev.ego.pose.x, prev.ego.pose.y)
    p1 = (nxt.ego.pose.x, nxt.ego.pose.y)
    for tid, tl in sorted(world_map.lights.items()):
        if prev.light_states.get(tid) != "red":
            continue
        if prev.ego.lane_id not in tl.controlled_lane_ids:
            continue
        # half-open side test: landing exactly on the line counts once
        (ax, ay), (bx, by) = tl.stop_line
        side0 = (bx - ax) * (p0[1] - ay) - (by - ay) * (p0[0] - ax)
        side1 = (bx - ax) * (p1[1] - ay) - (by - ay) * (p1[0] - ax)
        crossed = (side0 < 0.0 <= side1) or (side0 > 0.0 >= side1)
        if crossed and segments_intersect(p0, p1, tl.stop_line[0], tl.stop_line[1]):
            found.append(Infraction("red_light", nxt.time, p1))

    # Double solid crossing: ego center passes a double_solid boundary.
    if prev.ego.lane_id is not None:
        lane = world_map.lane(prev.ego.lane_id)
        _, lat0 = lane.poly.project(p0)
        _, lat1 = lane.poly.project(p1)
        half = lane.width / 2.0
        if lat0 <= half < lat1 and lane.left_boundary_kind == "double_solid":
            found.append(Infraction("double_solid_crossing", nxt.time, p1))
        if lat0 >= -half > lat1 and lane.right_boundary_kind == "double_solid":
            found.append(Infraction("double_solid_crossing", nxt.time, p1))

    # Failed emergency yield: timer crosses the threshold in this transition.
    for aid, start in sorted(nxt.yield_timers.items()):
        over_now = nxt.time - start > cfg.t_yield
        was_over = aid in prev.yield_timers and prev.time - prev.yield_timers[aid] > cfg.t_yield
        if over_now and not was_over:
            found.append(Infraction("failed_yield_emergency", nxt.time, p1))

    return found


# --- perception -------------------------------------------------------------

def _corridor_points(world_map: RoadMap, lane_id: str, s_from: float, horizon: float,
                     step_m: float, route: list | None):
    """Sampled centerline from s_from, following successors (route-preferred)."""
    pts = []
    lane = world_map.lane(lane_id)
    s = max(s_from, 0.0)
    remaining = horizon
    guard = 0
    while remaining > 0 and guard < 10:
        guard += 1
        end = lane.length
        while s <= end + 1e-9 and remaining > 0:
            pts.append(tuple(lane.poly.point_at(min(s, end))))
            s += step_m
            remaining -= step_m
        if remaining <= 0 or not lane.successors:
            break
        nxt = lane.successors[0]
        if route:
            for cand in lane.successors:
                if cand in route:
                    nxt = cand
                    break
        s = s - end
        lane = world_map.lane(nxt)
    # dedupe any repeated joint points
    out = [pts[0]]
    for p in pts[1:]:
        if math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) > 1e-9:
            out.append(p)
    return out


def perceive(world: WorldState, world_map: RoadMap, view_range: float = 100.0,
             route: list | None = None, cfg: SimConfig | None = None) -> SceneDescription:
    """Ground-truth structured snapshot for planners. Pure; stable ordering."""
    cfg = cfg or SimConfig()
    if view_range <= 0:
        raise WorldError("perceive range must be > 0")
    ego = world.ego
    lane_id = world_map.nearest_lane((ego.pose.x, ego.pose.y))
    if lane_id is None:
        raise EgoOffMapError(f"ego at ({ego.pose.x:.1f}, {ego.pose.y:.1f}) is off-map")
    lane = world_map.lane(lane_id)
    s_ego, lat_ego = lane.poly.project((ego.pose.x, ego.pose.y))

    left = right = None
    if lane.left_neighbor:
        left = NeighborLaneInfo(lane.left_neighbor, lane.left_boundary_kind)
    if lane.right_neighbor:
        right = NeighborLaneInfo(lane.right_neighbor, lane.right_boundary_kind)

    stop_d = world_map.stop_line_distance(lane_id, s_ego)
    tl = world_map.light_for_lane(lane_id)
    light_state = world.light_states.get(tl.id) if tl else None

    ctx = LaneContext(
        lane_id=lane_id,
        width=lane.width,
        speed_limit=lane.speed_limit,
        in_junction=lane.in_junction,
        left=left,
        right=right,
        distance_to_junction=world_map.distance_to_junction(lane_id, s_ego),
        stop_line_distance=stop_d,
        light_state=light_state,
    )

    # Extended reference line for relative actor coordinates (reaches behind ego).
    back = 60.0
    ref_pts = _corridor_points(world_map, lane_id, max(s_ego - back, 0.0),
                               cfg.corridor_horizon + min(s_ego, back),
                               cfg.corridor_step, route)
    ref = Polyline(np.array(ref_pts)) if len(ref_pts) >= 2 else lane.poly
    s_ref_ego, _ = ref.project((ego.pose.x, ego.pose.y))

    actors = []
    for a in sorted(world.actors, key=lambda a: a.id):
        d = math.hypot(a.pose.x - ego.pose.x, a.pose.y - ego.pose.y)
        if d > view_range:
            continue
        s_a, lat_a = ref.project((a.pose.x, a.pose.y))
        lon = s_a - s_ref_ego
        same = abs(lat_a) <= lane.width / 2.0 or a.lane_id == lane_id
        actors.append(SceneActor(
            id=a.id, kind=a.kind, x=a.pose.x, y=a.pose.y, heading=a.pose.heading,
            speed=a.speed, length=a.bbox[0], width=a.bbox[1], lane_id=a.lane_id,
            distance=d, longitudinal=lon, lateral=lat_a, same_lane=bool(same),
        ))

    corridors = {
        "current": _corridor_points(world_map, lane_id, s_ego, cfg.corridor_horizon,
                                    cfg.corridor_step, route)
    }
    for key, nb in (("left", lane.left_neighbor), ("right", lane.right_neighbor)):
        if nb:
            nb_lane = world_map.lane(nb)
            s_nb, _ = nb_lane.poly.project((ego.pose.x, ego.pose.y))
            corridors[key] = _corridor_points(world_map, nb, s_nb, cfg.corridor_horizon,
                                              cfg.corridor_step, route)

    return SceneDescription(
        time=world.time,
        ego=EgoView(x=ego.pose.x, y=ego.pose.y, heading=ego.pose.heading,
                    speed=ego.speed, lane_s=s_ego, lateral=lat_ego),
        lane=ctx,
        actors=actors,
        instruction=world.pending_instruction,
        corridors=corridors,
    )
