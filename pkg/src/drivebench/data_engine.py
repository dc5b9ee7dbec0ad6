"""Expert-log recording, rule-based decision annotation, dataset export."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .decisions import DecisionPair, PathDecision, SpeedDecision, render_decision
from .scene import SceneDescription
from .worldmap import RoadMap

LOG_FORMAT_VERSION = 1
DATASET_FORMAT_VERSION = 1


class DataEngineError(ValueError):
    pass


@dataclass
class LogFrame:
    time: float
    ego: dict               # {x, y, heading, speed, lane_id}
    actors: list = field(default_factory=list)
    lights: dict = field(default_factory=dict)
    instruction: str | None = None
    scene: dict | None = None   # serialized SceneDescription when recorded


@dataclass
class DrivingLog:
    scenario_id: str
    scenario_name: str
    map_id: str
    route: list
    nav_command: str = "follow_lane"
    frames: list = field(default_factory=list)
    flagged_unsafe: bool = False

    def __post_init__(self):
        if len(self.frames) >= 2:
            times = [f.time for f in self.frames]
            if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
                raise DataEngineError("frame times must be strictly increasing")


def save_log(log: DrivingLog, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "format_version": LOG_FORMAT_VERSION,
            "type": "header",
            "scenario_id": log.scenario_id,
            "scenario_name": log.scenario_name,
            "map_id": log.map_id,
            "route": log.route,
            "nav_command": log.nav_command,
            "flagged_unsafe": log.flagged_unsafe,
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for fr in log.frames:
            rec = {"time": fr.time, "ego": fr.ego, "actors": fr.actors,
                   "lights": fr.lights}
            if fr.instruction is not None:
                rec["instruction"] = fr.instruction
            if fr.scene is not None:
                rec["scene"] = fr.scene
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_log(path) -> DrivingLog:
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("format_version") != LOG_FORMAT_VERSION:
            raise DataEngineError(
                f"unsupported log format_version {header.get('format_version')!r}")
        frames = []
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            frames.append(LogFrame(
                time=rec["time"], ego=rec["ego"], actors=rec.get("actors", []),
                lights=rec.get("lights", {}), instruction=rec.get("instruction"),
                scene=rec.get("scene"),
            ))
    return DrivingLog(
        scenario_id=header["scenario_id"], scenario_name=header["scenario_name"],
        map_id=header["map_id"], route=header["route"],
        nav_command=header.get("nav_command", "follow_lane"), frames=frames,
        flagged_unsafe=header.get("flagged_unsafe", False),
    )


@dataclass(frozen=True)
class AnnotationConfig:
    accel_threshold: float = 0.5     # m/s^2
    stop_speed: float = 0.3          # m/s
    lateral_threshold: float = 0.3   # m, maneuver detection hysteresis
    smooth_window: int = 5           # frames
    backfill_eps: float = 0.05       # m, maneuver onset backfill

    def __post_init__(self):
        if min(self.accel_threshold, self.stop_speed, self.lateral_threshold,
               self.smooth_window, self.backfill_eps) <= 0:
            raise DataEngineError("annotation thresholds must be positive")


@dataclass
class AnnotatedFrame:
    time: float
    decision: DecisionPair
    explanation: str
    scene: dict | None
    scenario_id: str = ""
    scenario_name: str = ""
    nav_command: str = "follow_lane"
    instruction: str | None = None


def _smooth(values: list[float], window: int) -> list[float]:
    half = window // 2
    out = []
    for i in range(len(values)):
        lo, hi = max(0, i - half), min(len(values), i + half + 1)
        out.append(sum(values[lo:hi]) / (hi - lo))
    return out


def _speed_labels(log: DrivingLog, cfg: AnnotationConfig) -> list[SpeedDecision]:
    times = [f.time for f in log.frames]
    speeds = [f.ego["speed"] for f in log.frames]
    n = len(speeds)
    accel = []
    for i in range(n):
        lo, hi = max(0, i - 1), min(n - 1, i + 1)
        dt = times[hi] - times[lo]
        accel.append((speeds[hi] - speeds[lo]) / dt if dt > 0 else 0.0)
    accel = _smooth(accel, cfg.smooth_window)
    labels = []
    for v, a in zip(speeds, accel):
        if v < cfg.stop_speed:
            labels.append(SpeedDecision.STOP)
        elif a > cfg.accel_threshold:
            labels.append(SpeedDecision.ACCELERATE)
        elif a < -cfg.accel_threshold:
            labels.append(SpeedDecision.DECELERATE)
        else:
            labels.append(SpeedDecision.KEEP)
    return labels


def _path_labels(log: DrivingLog, world_map: RoadMap,
                 cfg: AnnotationConfig) -> tuple[list, list[int]]:
    """Per-frame path decisions from the lane-graph trajectory.

    Returns (labels with None for off-map frames, off-map frame indices).
    """
    n = len(log.frames)
    labels: list = [PathDecision.FOLLOW_LANE] * n
    off_map: list[int] = []

    positions = [(f.ego["x"], f.ego["y"]) for f in log.frames]
    nearest = [world_map.nearest_lane(p) for p in positions]
    for i, lid in enumerate(nearest):
        if lid is None:
            labels[i] = None
            off_map.append(i)

    def lat_to(lane_id: str, i: int) -> float:
        _, lat = world_map.lane(lane_id).poly.project(positions[i])
        return lat

    home = next((lid for lid in nearest if lid is not None), None)
    if home is None:
        return labels, off_map

    i = 0
    while i < n:
        if nearest[i] is None:
            i += 1
            continue
        lat = lat_to(home, i)
        if abs(lat) <= cfg.lateral_threshold:
            i += 1
            continue
        # Maneuver onset: backfill to where the drift began.
        direction = "left" if lat > 0 else "right"
        start = i
        while start > 0 and nearest[start - 1] is not None \
                and abs(lat_to(home, start - 1)) > cfg.backfill_eps:
            start -= 1
        # Find where the excursion resolves: back home (borrow) or never (change).
        j = i
        returned = None
        while j < n:
            if nearest[j] is None:
                break
            if abs(lat_to(home, j)) <= cfg.lateral_threshold:
                returned = j
                break
            j += 1
        if returned is not None:
            kind = (PathDecision.LEFT_LANE_BORROW if direction == "left"
                    else PathDecision.RIGHT_LANE_BORROW)
            end = returned
        else:
            kind = (PathDecision.LEFT_LANE_CHANGE if direction == "left"
                    else PathDecision.RIGHT_LANE_CHANGE)
            # settle frame: first frame near the new lane's centerline
            target = world_map.lane(home).left_neighbor if direction == "left" \
                else world_map.lane(home).right_neighbor
            end = j - 1 if j > i else i
            if target is not None:
                k = i
                while k < n and nearest[k] is not None:
                    if abs(lat_to(target, k)) <= cfg.lateral_threshold:
                        end = k
                        break
                    k += 1
                home = target
        for idx in range(start, min(end + 1, n)):
            if labels[idx] is not None:
                labels[idx] = kind
        i = end + 1
    return labels, off_map


def annotate_decisions(log: DrivingLog, world_map: RoadMap,
                       cfg: AnnotationConfig | None = None,
                       fill_explanations: bool = True) -> tuple[list[AnnotatedFrame], int]:
    """Label every on-map frame with a decision pair; returns (frames, skipped)."""
    cfg = cfg or AnnotationConfig()
    if len(log.frames) < 2:
        raise DataEngineError("log needs at least 2 frames")
    speed_labels = _speed_labels(log, cfg)
    path_labels, off_map = _path_labels(log, world_map, cfg)
    out = []
    for frame, sp, pa in zip(log.frames, speed_labels, path_labels):
        if pa is None:
            continue
        af = AnnotatedFrame(
            time=frame.time,
            decision=DecisionPair(pa, sp),
            explanation="",
            scene=frame.scene,
            scenario_id=log.scenario_id,
            scenario_name=log.scenario_name,
            nav_command=log.nav_command,
            instruction=frame.instruction,
        )
        if fill_explanations:
            af.explanation = generate_explanation(af, {"scenario": log.scenario_name,
                                                       "nav": log.nav_command})
        out.append(af)
    return out, len(off_map)


# --- explanation templates ---------------------------------------------------

_GENERIC_FALLBACKS = {
    PathDecision.FOLLOW_LANE: "continue in the current lane",
    PathDecision.LEFT_LANE_CHANGE: "change lanes to the left",
    PathDecision.RIGHT_LANE_CHANGE: "change lanes to the right",
    PathDecision.LEFT_LANE_BORROW: "temporarily borrow the left lane",
    PathDecision.RIGHT_LANE_BORROW: "temporarily borrow the right lane",
}
_GENERIC_SPEED = {
    SpeedDecision.KEEP: "keep a steady speed",
    SpeedDecision.ACCELERATE: "accelerate",
    SpeedDecision.DECELERATE: "reduce speed",
    SpeedDecision.STOP: "stop the vehicle",
}

fallback_template_uses = 0


def _scene_slots(scene_dict: dict | None) -> dict:
    slots = {"light": None, "lead_kind": None, "lead_dist": None, "ped": False,
             "emergency": False, "static": False}
    if not scene_dict:
        return slots
    scene = SceneDescription.from_dict(scene_dict)
    slots["light"] = scene.lane.light_state
    lead = scene.lead_actor()
    if lead:
        slots["lead_kind"] = lead.kind
        slots["lead_dist"] = lead.longitudinal
    for a in scene.actors:
        if a.kind == "pedestrian" and 0 < a.longitudinal < 35 and abs(a.lateral) < 4:
            slots["ped"] = True
        if a.kind == "emergency_vehicle" and a.longitudinal < 0:
            slots["emergency"] = True
        if a.kind == "static_obstacle" and 0 < a.longitudinal < 60:
            slots["static"] = True
    return slots


def generate_explanation(frame: AnnotatedFrame, context: dict | None = None) -> str:
    """Deterministic per-(scenario, decision) explanation text."""
    global fallback_template_uses
    context = context or {}
    nav = context.get("nav", frame.nav_command)
    pair = frame.decision
    slots = _scene_slots(frame.scene)

    if pair.speed == SpeedDecision.STOP and slots["light"] == "red":
        return "The traffic light ahead is red, so stop before the stop line."
    if pair.speed == SpeedDecision.STOP and slots["ped"]:
        return "A pedestrian is crossing ahead, so stop and yield."
    if pair.path == PathDecision.RIGHT_LANE_CHANGE and nav == "turn_right":
        return ("Since a right turn is required ahead and not in the right turn lane, "
                "so change to the right lane.")
    if pair.path == PathDecision.LEFT_LANE_CHANGE and nav == "turn_left":
        return ("Since a left turn is required ahead and not in the left turn lane, "
                "so change to the left lane.")
    if pair.path == PathDecision.LEFT_LANE_CHANGE and pair.speed == SpeedDecision.ACCELERATE:
        return ("Since there is no vehicle in the left lane, in order to pass the "
                "vehicle in front, change lanes to the left and accelerate.")
    if pair.path == PathDecision.RIGHT_LANE_CHANGE and pair.speed == SpeedDecision.ACCELERATE:
        return ("Since there is no vehicle in the right lane, in order to pass the "
                "vehicle in front, change lanes to the right and accelerate.")
    if pair.path in (PathDecision.LEFT_LANE_BORROW, PathDecision.RIGHT_LANE_BORROW):
        side = "left" if pair.path == PathDecision.LEFT_LANE_BORROW else "right"
        if slots["static"]:
            return (f"There is an obstacle ahead in the current lane, so temporarily "
                    f"borrow the {side} lane to pass it.")
        return f"Temporarily borrow the {side} lane to pass the vehicle in front."
    if slots["emergency"] and pair.path != PathDecision.FOLLOW_LANE:
        return "An emergency vehicle is approaching from behind, so change lanes to yield."
    if pair.path == PathDecision.FOLLOW_LANE and pair.speed == SpeedDecision.DECELERATE \
            and slots["lead_kind"]:
        return "The vehicle ahead is slow, so reduce speed and keep a safe distance."
    if pair.path == PathDecision.FOLLOW_LANE and pair.speed == SpeedDecision.KEEP:
        return "The lane ahead is clear, so continue in the current lane and keep a steady speed."
    # generic fallback (counted)
    fallback_template_uses += 1
    return f"The driver decides to {_GENERIC_FALLBACKS[pair.path]} and {_GENERIC_SPEED[pair.speed]}."


# --- dataset export ----------------------------------------------------------

def _scenario_order_key(sid: str) -> str:
    return hashlib.md5(sid.encode("utf-8")).hexdigest()


def export_dataset(frames: list[AnnotatedFrame], split_config: dict, out_dir) -> dict:
    """Write one JSONL file per split; scenario-disjoint, deterministic.

    split_config: {"train": 0.8, "test": 0.2}; returns {split: path}.
    """
    import os

    if not frames:
        raise DataEngineError("no frames to export")
    if abs(sum(split_config.values()) - 1.0) > 1e-9:
        raise DataEngineError("split fractions must sum to 1")

    by_scenario: dict[str, list[AnnotatedFrame]] = {}
    for f in frames:
        by_scenario.setdefault(f.scenario_id, []).append(f)
    ordered = sorted(by_scenario, key=_scenario_order_key)
    total = len(frames)

    assignment: dict[str, str] = {}
    splits = sorted(split_config)
    cum = 0
    targets = {}
    acc = 0.0
    for name in splits:
        acc += split_config[name]
        targets[name] = acc * total
    si = 0
    for sid in ordered:
        while si < len(splits) - 1 and cum >= targets[splits[si]]:
            si += 1
        assignment[sid] = splits[si]
        cum += len(by_scenario[sid])

    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name in splits:
        path = os.path.join(out_dir, f"{name}.jsonl")
        paths[name] = path
        with open(path, "w", encoding="utf-8") as f:
            for sid in ordered:
                if assignment[sid] != name:
                    continue
                for fr in sorted(by_scenario[sid], key=lambda fr: fr.time):
                    rec = {
                        "format_version": DATASET_FORMAT_VERSION,
                        "scenario_id": fr.scenario_id,
                        "time": fr.time,
                        "scene": fr.scene,
                        "navigation_command": fr.nav_command,
                        "decision": render_decision(fr.decision),
                        "explanation": fr.explanation,
                    }
                    if fr.instruction is not None:
                        rec["instruction"] = fr.instruction
                    f.write(json.dumps(rec, sort_keys=True) + "\n")
    return paths


def load_dataset(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("format_version") != DATASET_FORMAT_VERSION:
                raise DataEngineError("unsupported dataset record version")
            records.append(rec)
    return records
