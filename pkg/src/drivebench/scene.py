"""Planner-facing scene snapshot: the structured stand-in for onboard sensing."""

from __future__ import annotations

from dataclasses import dataclass, field


def _q(v, nd=3):
    """Quantize floats (3 decimals) for cross-language reproducible wire frames."""
    if isinstance(v, float):
        return round(v, nd)
    return v


@dataclass
class NeighborLaneInfo:
    lane_id: str
    boundary_kind: str  # boundary between ego lane and this neighbor


@dataclass
class LaneContext:
    lane_id: str
    width: float
    speed_limit: float
    in_junction: bool
    left: NeighborLaneInfo | None = None
    right: NeighborLaneInfo | None = None
    distance_to_junction: float | None = None
    stop_line_distance: float | None = None
    light_state: str | None = None


@dataclass
class SceneActor:
    id: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float
    lane_id: str | None
    distance: float          # euclidean to ego
    longitudinal: float      # arc-length lead (+) / lag (-) along ego lane
    lateral: float           # signed offset from ego lane centerline (+left)
    same_lane: bool


@dataclass
class EgoView:
    x: float
    y: float
    heading: float
    speed: float
    lane_s: float
    lateral: float


@dataclass
class SceneDescription:
    time: float
    ego: EgoView
    lane: LaneContext
    actors: list[SceneActor] = field(default_factory=list)
    instruction: str | None = None
    # Centerline corridors sampled ahead of the ego, for geometric planning.
    # Keys: "current", plus "left"/"right" when those neighbors exist.
    corridors: dict = field(default_factory=dict)

    def actors_sorted(self):
        return sorted(self.actors, key=lambda a: a.id)

    def lead_actor(self, max_ahead: float = 60.0) -> SceneActor | None:
        """Nearest same-lane actor ahead of the ego."""
        best = None
        for a in self.actors_sorted():
            if a.same_lane and 0.5 < a.longitudinal <= max_ahead:
                if best is None or a.longitudinal < best.longitudinal:
                    best = a
        return best

    def to_dict(self) -> dict:
        d = {
            "time": _q(self.time),
            "ego": {k: _q(v) for k, v in vars(self.ego).items()},
            "lane": {
                "lane_id": self.lane.lane_id,
                "width": _q(self.lane.width),
                "speed_limit": _q(self.lane.speed_limit),
                "in_junction": self.lane.in_junction,
                "left": vars(self.lane.left) if self.lane.left else None,
                "right": vars(self.lane.right) if self.lane.right else None,
                "distance_to_junction": _q(self.lane.distance_to_junction),
                "stop_line_distance": _q(self.lane.stop_line_distance),
                "light_state": self.lane.light_state,
            },
            "actors": [{k: _q(v) for k, v in vars(a).items()} for a in self.actors_sorted()],
            "corridors": {
                k: [[_q(float(x)), _q(float(y))] for x, y in pts]
                for k, pts in sorted(self.corridors.items())
            },
        }
        if self.instruction is not None:
            d["instruction"] = self.instruction
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneDescription":
        lane = d["lane"]
        return cls(
            time=d["time"],
            ego=EgoView(**d["ego"]),
            lane=LaneContext(
                lane_id=lane["lane_id"],
                width=lane["width"],
                speed_limit=lane["speed_limit"],
                in_junction=lane["in_junction"],
                left=NeighborLaneInfo(**lane["left"]) if lane.get("left") else None,
                right=NeighborLaneInfo(**lane["right"]) if lane.get("right") else None,
                distance_to_junction=lane.get("distance_to_junction"),
                stop_line_distance=lane.get("stop_line_distance"),
                light_state=lane.get("light_state"),
            ),
            actors=[SceneActor(**a) for a in d.get("actors", [])],
            instruction=d.get("instruction"),
            corridors={k: [tuple(p) for p in v] for k, v in d.get("corridors", {}).items()},
        )
