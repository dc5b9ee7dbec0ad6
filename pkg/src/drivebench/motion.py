"""Motion planning and control: decision -> path -> speed profile -> actuation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decisions import DecisionPair, PathDecision, SpeedDecision
from .geometry import Polyline, normalize_angle
from .scene import SceneDescription


class MotionError(ValueError):
    pass


class TrackingLost(MotionError):
    """Ego drifted too far from the active plan; harness treats it as a takeover."""


@dataclass(frozen=True)
class PlannerConfig:
    cruise_speed: float = 8.0
    accel_limit: float = 2.0
    decel_limit: float = 4.0
    lane_change_length: float = 30.0
    lookahead_gain: float = 1.2
    stop_margin: float = 1.0
    steer_max: float = 0.5
    wheelbase: float = 2.8
    # secondary tuning knobs
    decel_fraction: float = 0.6     # DECELERATE target = fraction * current speed
    min_lookahead: float = 3.0
    max_lookahead: float = 25.0
    speed_gain: float = 2.0         # proportional speed-tracking gain
    preview_time: float = 0.5       # seconds of profile preview for speed control
    horizon: float = 120.0
    clear_margin: float = 8.0       # longitudinal clearance before a borrow returns
    sample_step: float = 1.0

    def __post_init__(self):
        for name in (
            "cruise_speed", "accel_limit", "decel_limit", "lane_change_length",
            "lookahead_gain", "stop_margin", "steer_max", "wheelbase",
        ):
            if getattr(self, name) <= 0:
                raise MotionError(f"{name} must be positive")
        if self.stop_margin >= self.lane_change_length:
            raise MotionError("stop_margin must be smaller than lane_change_length")


@dataclass(frozen=True)
class ControlSignal:
    steer: float
    accel: float

    def __post_init__(self):
        if not (math.isfinite(self.steer) and math.isfinite(self.accel)):
            raise MotionError("control must be finite")


@dataclass
class PathPlan:
    points: np.ndarray          # (N, 2)
    target_lane_id: str
    kind: str                   # follow | change | borrow_out | borrow_return

    def __post_init__(self):
        self.poly = Polyline(self.points)

    @property
    def length(self) -> float:
        return self.poly.length


@dataclass
class SpeedProfile:
    samples: list               # [(s, v), ...] s strictly increasing, v >= 0
    accel_limit: float
    decel_limit: float
    infeasible_stop: bool = False

    def speed_at(self, s: float) -> float:
        pts = self.samples
        if s <= pts[0][0]:
            return pts[0][1]
        if s >= pts[-1][0]:
            return pts[-1][1]
        for i in range(len(pts) - 1):
            s0, v0 = pts[i]
            s1, v1 = pts[i + 1]
            if s0 <= s <= s1:
                t = (s - s0) / (s1 - s0)
                return v0 + t * (v1 - v0)
        return pts[-1][1]


def quintic_blend(u: float) -> float:
    """Smoothstep with zero first/second derivatives at both ends."""
    u = min(max(u, 0.0), 1.0)
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


def _corridor(scene: SceneDescription, key: str) -> np.ndarray | None:
    pts = scene.corridors.get(key)
    if pts is None:
        return None
    return np.asarray(pts, dtype=float)


def _actor_corridor_label(actor, lane_width: float) -> str | None:
    """Classify an actor into current/left/right corridor by lateral offset."""
    lat = actor.lateral
    if abs(lat) <= lane_width * 0.5:
        return "current"
    if lane_width * 0.5 < lat <= lane_width * 1.5:
        return "left"
    if -lane_width * 1.5 <= lat < -lane_width * 0.5:
        return "right"
    return None


def _nearest_blocker(scene: SceneDescription, corridor: str, cfg: PlannerConfig,
                     scan: float = 70.0):
    """Slow or static actor ahead in the given corridor, nearest first."""
    best = None
    for a in scene.actors_sorted():
        if _actor_corridor_label(a, scene.lane.width) != corridor:
            continue
        if a.longitudinal <= 0.0 or a.longitudinal > scan:
            continue
        if a.speed > 0.5 * cfg.cruise_speed:
            continue
        if best is None or a.longitudinal < best.longitudinal:
            best = a
    return best


def plan_path(path_decision: PathDecision, scene: SceneDescription,
              cfg: PlannerConfig) -> PathPlan:
    """Geometric realization of a path decision over the scene corridors."""
    cur = _corridor(scene, "current")
    if cur is None or len(cur) < 2:
        raise MotionError("scene lacks a usable current corridor")
    step = cfg.sample_step
    n = len(cur)

    if path_decision == PathDecision.FOLLOW_LANE:
        return PathPlan(cur, scene.lane.lane_id, "follow")

    side = "left" if path_decision in (PathDecision.LEFT_LANE_CHANGE,
                                       PathDecision.LEFT_LANE_BORROW) else "right"
    tgt = _corridor(scene, side)
    info = scene.lane.left if side == "left" else scene.lane.right
    if tgt is None or info is None:
        raise MotionError(f"no {side} corridor for {path_decision.value}")
    m = min(n, len(tgt))
    cur, tgt = cur[:m], tgt[:m]
    stations = np.arange(m) * step

    # Replans happen mid-maneuver: resume the blend from the ego's current
    # lateral fraction instead of restarting it at the lane centerline.
    offset = scene.lane.width if side == "left" else -scene.lane.width
    w0 = min(max(scene.ego.lateral / offset, 0.0), 0.95)
    remaining = (1.0 - w0) * cfg.lane_change_length

    if path_decision in (PathDecision.LEFT_LANE_CHANGE, PathDecision.RIGHT_LANE_CHANGE):
        w = w0 + (1.0 - w0) * np.array(
            [quintic_blend(s / remaining) for s in stations])
        pts = cur * (1.0 - w[:, None]) + tgt * w[:, None]
        return PathPlan(pts, info.lane_id, "change")

    # Borrow: blend out around the blocker, hold, and blend back home.
    blocker = _nearest_blocker(scene, "current", cfg)
    opposite = "right" if side == "left" else "left"
    if blocker is not None:
        s_clear = blocker.longitudinal + blocker.length / 2.0 + cfg.clear_margin
        w = np.empty(m)
        for i, s in enumerate(stations):
            if s < remaining:
                w[i] = w0 + (1.0 - w0) * quintic_blend(s / remaining)
            elif s < s_clear:
                w[i] = 1.0
            else:
                w[i] = 1.0 - quintic_blend((s - max(s_clear, remaining))
                                           / cfg.lane_change_length)
        pts = cur * (1.0 - w[:, None]) + tgt * w[:, None]
        return PathPlan(pts, scene.lane.lane_id, "borrow_out")

    # Already borrowed out: the home lane is on the opposite side. Return once
    # its blocker is cleared by the configured margin.
    home = _corridor(scene, opposite)
    home_info = scene.lane.left if opposite == "left" else scene.lane.right
    if home is not None and home_info is not None:
        m2 = min(m, len(home))
        cur2, home = cur[:m2], home[:m2]
        stations2 = stations[:m2]
        home_blocker = _nearest_blocker(scene, opposite, cfg)
        s_return = 0.0
        if home_blocker is not None:
            s_return = home_blocker.longitudinal + home_blocker.length / 2.0 + cfg.clear_margin
        w = np.array([quintic_blend((s - s_return) / cfg.lane_change_length)
                      for s in stations2])
        pts = cur2 * (1.0 - w[:, None]) + home * w[:, None]
        return PathPlan(pts, home_info.lane_id, "borrow_return")

    # Nothing to borrow around; degenerate to lane keeping.
    return PathPlan(cur, scene.lane.lane_id, "follow")


def _stop_distance(scene: SceneDescription, path: PathPlan, cfg: PlannerConfig) -> float | None:
    """Distance along the plan to the nearest mandatory stop point."""
    candidates = []
    if scene.lane.light_state == "red" and scene.lane.stop_line_distance is not None:
        if scene.lane.stop_line_distance > -0.5:
            candidates.append(scene.lane.stop_line_distance)
    lead = scene.lead_actor(max_ahead=cfg.horizon)
    if lead is not None and lead.speed < 0.5:
        candidates.append(lead.longitudinal - lead.length / 2.0 - 2.5)
    for a in scene.actors:
        # a pedestrian crossing toward the lane is a stop point even while
        # still outside the lane band
        if a.kind == "pedestrian" and a.longitudinal > 0 and abs(a.lateral) <= 4.5:
            candidates.append(a.longitudinal - 4.0)
    if not candidates:
        return None
    return max(min(candidates), 0.0)


def plan_speed(speed_decision: SpeedDecision, scene: SceneDescription,
               path: PathPlan, cfg: PlannerConfig) -> SpeedProfile:
    """Arc-length speed profile realizing a speed decision along the plan."""
    v0 = max(scene.ego.speed, 0.0)
    horizon = min(path.length, cfg.horizon)
    ss = np.arange(0.0, horizon + cfg.sample_step, cfg.sample_step)
    infeasible = False

    if speed_decision == SpeedDecision.KEEP:
        v_t = v0 if v0 >= 0.5 else cfg.cruise_speed
        if v_t <= v0 + 1e-9:
            vs = np.full_like(ss, v_t)
        else:
            vs = np.sqrt(np.minimum(v0 * v0 + 2.0 * cfg.accel_limit * ss, v_t * v_t))
    elif speed_decision == SpeedDecision.ACCELERATE:
        v_t = max(min(cfg.cruise_speed, scene.lane.speed_limit), v0)
        vs = np.sqrt(np.minimum(v0 * v0 + 2.0 * cfg.accel_limit * ss, v_t * v_t))
    elif speed_decision == SpeedDecision.DECELERATE:
        v_t = cfg.decel_fraction * v0
        vs = np.sqrt(np.maximum(v0 * v0 - 2.0 * cfg.decel_limit * ss, v_t * v_t))
    elif speed_decision == SpeedDecision.STOP:
        d = _stop_distance(scene, path, cfg)
        if d is None:
            # No mandated stop point: immediate comfortable stop.
            s_stop = max(v0 * v0 / (2.0 * (cfg.decel_limit / 2.0)), 2.0)
        else:
            s_stop = d - cfg.stop_margin
        required = v0 * v0 / (2.0 * cfg.decel_limit)
        if s_stop < required - 1e-9:
            infeasible = True
            s_stop = required
        if v0 < 1e-6 or s_stop < 1e-6:
            vs = np.zeros_like(ss)
        else:
            decel = v0 * v0 / (2.0 * s_stop)
            vs = np.sqrt(np.maximum(v0 * v0 - 2.0 * decel * ss, 0.0))
            vs[ss >= s_stop] = 0.0
    else:  # pragma: no cover - closed enum
        raise MotionError(f"unknown speed decision {speed_decision}")

    samples = [(float(s), float(v)) for s, v in zip(ss, vs)]
    return SpeedProfile(samples, cfg.accel_limit, cfg.decel_limit, infeasible)


def track(path: PathPlan, profile: SpeedProfile, ego, cfg: PlannerConfig) -> ControlSignal:
    """Pure-pursuit steering plus proportional speed tracking with preview."""
    pos = np.array([ego.pose.x, ego.pose.y])
    s_e, lat = path.poly.project(pos)
    if abs(lat) > 5.0:
        raise TrackingLost(f"ego {abs(lat):.1f} m off plan")

    v = max(ego.speed, 0.0)
    lookahead = min(max(cfg.lookahead_gain * v, cfg.min_lookahead), cfg.max_lookahead)
    target = path.poly.point_at(min(s_e + lookahead, path.length))
    alpha = normalize_angle(math.atan2(target[1] - pos[1], target[0] - pos[0])
                            - ego.pose.heading)
    steer = math.atan2(2.0 * cfg.wheelbase * math.sin(alpha), lookahead)
    steer = min(max(steer, -cfg.steer_max), cfg.steer_max)

    preview = max(v * cfg.preview_time, 1.0)
    v_target = profile.speed_at(s_e + preview)
    accel = cfg.speed_gain * (v_target - v)
    accel = min(max(accel, -cfg.decel_limit), cfg.accel_limit)
    return ControlSignal(steer=steer, accel=accel)


def plan_and_track(decision: DecisionPair, scene: SceneDescription, ego,
                   cfg: PlannerConfig) -> tuple[PathPlan, SpeedProfile, ControlSignal]:
    """One replanning tick: realize the decision and emit a control signal."""
    plan = plan_path(decision.path, scene, cfg)
    profile = plan_speed(decision.speed, scene, plan, cfg)
    return plan, profile, track(plan, profile, ego, cfg)
