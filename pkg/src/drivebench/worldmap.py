"""Lane-graph maps: lanes, boundaries, traffic lights, and map file IO."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polyline, segments_intersect

MAP_FORMAT_VERSION = 1

BOUNDARY_KINDS = ("dashed", "solid", "double_solid")
LIGHT_STATES = ("red", "yellow", "green")


class MapError(ValueError):
    pass


@dataclass
class Lane:
    id: str
    centerline: list  # [[x, y], ...] ordered by travel direction
    width: float
    left_neighbor: str | None = None
    right_neighbor: str | None = None
    left_boundary_kind: str = "dashed"
    right_boundary_kind: str = "solid"
    successors: list = field(default_factory=list)
    in_junction: bool = False
    speed_limit: float = 13.9

    def __post_init__(self):
        if self.width <= 0:
            raise MapError(f"lane {self.id}: width must be > 0")
        if self.speed_limit <= 0:
            raise MapError(f"lane {self.id}: speed_limit must be > 0")
        if self.left_boundary_kind not in BOUNDARY_KINDS:
            raise MapError(f"lane {self.id}: bad boundary kind {self.left_boundary_kind}")
        if self.right_boundary_kind not in BOUNDARY_KINDS:
            raise MapError(f"lane {self.id}: bad boundary kind {self.right_boundary_kind}")
        self.poly = Polyline(self.centerline)

    @property
    def length(self) -> float:
        return self.poly.length


@dataclass
class TrafficLight:
    id: str
    controlled_lane_ids: list
    stop_line: list  # [[x1, y1], [x2, y2]]
    phases: list  # [(state, duration_s), ...] cycled from t=0

    def __post_init__(self):
        if len(self.stop_line) != 2:
            raise MapError(f"light {self.id}: stop_line must be two points")
        for state, dur in self.phases:
            if state not in LIGHT_STATES:
                raise MapError(f"light {self.id}: bad phase state {state}")
            if dur <= 0:
                raise MapError(f"light {self.id}: phase durations must be > 0")

    def state_at(self, t: float) -> str:
        cycle = sum(d for _, d in self.phases)
        r = math.fmod(t, cycle)
        for state, dur in self.phases:
            if r < dur:
                return state
            r -= dur
        return self.phases[-1][0]


class RoadMap:
    """Immutable lane graph with traffic lights."""

    def __init__(self, map_id: str, lanes: list[Lane], lights: list[TrafficLight] | None = None):
        self.id = map_id
        self.lanes = {l.id: l for l in lanes}
        if len(self.lanes) != len(lanes):
            raise MapError("duplicate lane ids")
        self.lights = {tl.id: tl for tl in (lights or [])}
        self._validate()

    def _validate(self):
        for lane in self.lanes.values():
            for nb, attr in ((lane.left_neighbor, "left"), (lane.right_neighbor, "right")):
                if nb is None:
                    continue
                if nb not in self.lanes:
                    raise MapError(f"lane {lane.id}: unknown {attr} neighbor {nb}")
                other = self.lanes[nb]
                back = other.right_neighbor if attr == "left" else other.left_neighbor
                if back != lane.id:
                    raise MapError(f"lane {lane.id}: {attr} neighbor relation not symmetric")
            for succ in lane.successors:
                if succ not in self.lanes:
                    raise MapError(f"lane {lane.id}: unknown successor {succ}")
        for tl in self.lights.values():
            for lid in tl.controlled_lane_ids:
                if lid not in self.lanes:
                    raise MapError(f"light {tl.id}: unknown lane {lid}")
                lane = self.lanes[lid]
                pts = lane.poly.points
                hit = any(
                    segments_intersect(pts[i], pts[i + 1], tl.stop_line[0], tl.stop_line[1])
                    for i in range(len(pts) - 1)
                )
                if not hit:
                    raise MapError(f"light {tl.id}: stop line misses lane {lid} centerline")

    def lane(self, lane_id: str) -> Lane:
        if lane_id not in self.lanes:
            raise MapError(f"unknown lane {lane_id}")
        return self.lanes[lane_id]

    def nearest_lane(self, xy, max_lateral: float | None = None) -> str | None:
        """Lane whose centerline is laterally closest to a point.

        Returns None when no lane is within max_lateral (default: half width + 1 m).
        """
        best = None
        best_d = math.inf
        for lane in self.lanes.values():
            s, lat = lane.poly.project(xy)
            if s <= 1e-9 or s >= lane.length - 1e-9:
                end = lane.poly.point_at(s)
                d = float(np.linalg.norm(np.asarray(xy, dtype=float) - end))
            else:
                d = abs(lat)
            limit = max_lateral if max_lateral is not None else lane.width / 2.0 + 1.0
            if d < best_d and d <= limit:
                best_d = d
                best = lane.id
        return best

    def light_for_lane(self, lane_id: str) -> TrafficLight | None:
        for tl in sorted(self.lights.values(), key=lambda t: t.id):
            if lane_id in tl.controlled_lane_ids:
                return tl
        return None

    def stop_line_distance(self, lane_id: str, s_ego: float) -> float | None:
        """Arc-length from s_ego to the controlling stop line along the lane."""
        tl = self.light_for_lane(lane_id)
        if tl is None:
            return None
        lane = self.lane(lane_id)
        mid = (np.asarray(tl.stop_line[0]) + np.asarray(tl.stop_line[1])) / 2.0
        s_line, _ = lane.poly.project(mid)
        d = s_line - s_ego
        return d if d > -1.0 else None

    def distance_to_junction(self, lane_id: str, s_ego: float, max_depth: int = 4) -> float | None:
        """Arc-length ahead until the first in_junction lane, or None."""
        lane = self.lane(lane_id)
        if lane.in_junction:
            return 0.0
        d = lane.length - s_ego
        cur = lane
        for _ in range(max_depth):
            if not cur.successors:
                return None
            cur = self.lane(cur.successors[0])
            if cur.in_junction:
                return d
            d += cur.length
        return None


def map_to_dict(m: RoadMap) -> dict:
    return {
        "format_version": MAP_FORMAT_VERSION,
        "id": m.id,
        "lanes": [
            {
                "id": l.id,
                "centerline": [[float(x), float(y)] for x, y in l.poly.points],
                "width": l.width,
                "left_neighbor": l.left_neighbor,
                "right_neighbor": l.right_neighbor,
                "left_boundary_kind": l.left_boundary_kind,
                "right_boundary_kind": l.right_boundary_kind,
                "successors": list(l.successors),
                "in_junction": l.in_junction,
                "speed_limit": l.speed_limit,
            }
            for l in sorted(m.lanes.values(), key=lambda l: l.id)
        ],
        "lights": [
            {
                "id": t.id,
                "controlled_lane_ids": list(t.controlled_lane_ids),
                "stop_line": [[float(x), float(y)] for x, y in t.stop_line],
                "phases": [[s, d] for s, d in t.phases],
            }
            for t in sorted(m.lights.values(), key=lambda t: t.id)
        ],
    }


_LANE_FIELDS = {
    "id", "centerline", "width", "left_neighbor", "right_neighbor",
    "left_boundary_kind", "right_boundary_kind", "successors", "in_junction",
    "speed_limit",
}
_LIGHT_FIELDS = {"id", "controlled_lane_ids", "stop_line", "phases"}


def map_from_dict(doc: dict) -> RoadMap:
    if doc.get("format_version") != MAP_FORMAT_VERSION:
        raise MapError(f"unsupported map format_version {doc.get('format_version')!r}")
    unknown = set(doc) - {"format_version", "id", "lanes", "lights"}
    if unknown:
        raise MapError(f"unknown map fields: {sorted(unknown)}")
    lanes = []
    for rec in doc["lanes"]:
        extra = set(rec) - _LANE_FIELDS
        if extra:
            raise MapError(f"unknown lane fields: {sorted(extra)}")
        lanes.append(Lane(**rec))
    lights = []
    for rec in doc.get("lights", []):
        extra = set(rec) - _LIGHT_FIELDS
        if extra:
            raise MapError(f"unknown light fields: {sorted(extra)}")
        lights.append(
            TrafficLight(
                id=rec["id"],
                controlled_lane_ids=rec["controlled_lane_ids"],
                stop_line=rec["stop_line"],
                phases=[(s, float(d)) for s, d in rec["phases"]],
            )
        )
    return RoadMap(doc["id"], lanes, lights)


def save_map(m: RoadMap, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(map_to_dict(m), f, indent=1, sort_keys=True)
        f.write("\n")


def load_map(path) -> RoadMap:
    with open(path, encoding="utf-8") as f:
        return map_from_dict(json.load(f))
