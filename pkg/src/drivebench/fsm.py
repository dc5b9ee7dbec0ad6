"""Rule-based finite-state-machine planner: the fail-safe baseline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .decisions import (
    DecisionPair,
    DecisionResponse,
    PathDecision,
    SpeedDecision,
    validate_feasibility,
)
from .scene import SceneDescription

NAV_COMMANDS = ("follow_lane", "turn_left", "turn_right")


@dataclass(frozen=True)
class FsmConfig:
    cruise_speed: float = 8.0
    comfort_decel: float = 2.0
    red_stop_extra: float = 15.0       # added to braking distance for rule (1)
    pedestrian_scan: float = 30.0
    pedestrian_lat: float = 4.5
    emergency_react_dist: float = 18.0
    slow_lead_fraction: float = 0.5
    block_scan: float = 40.0
    queue_gap: float = 15.0            # closer than this behind a blocker: stop
    side_clear_back: float = 10.0
    side_clear_ahead: float = 25.0
    overtake_mode: str = "change"      # moving slow lead: "change" or "borrow"
    latch_settle_lat: float = 0.4
    latch_timeout: float = 20.0
    turn_prepare_dist: float = 120.0


@dataclass(frozen=True)
class Maneuver:
    kind: str                  # "change" | "borrow"
    decision: DecisionPair
    start_time: float
    target_lane: str
    home_lane: str
    phase: str = "out"
    explanation: str = ""


@dataclass
class FsmState:
    current: DecisionPair = field(
        default_factory=lambda: DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.KEEP))
    latch: Maneuver | None = None


_SIDE_PATHS = {
    ("left", "change"): PathDecision.LEFT_LANE_CHANGE,
    ("right", "change"): PathDecision.RIGHT_LANE_CHANGE,
    ("left", "borrow"): PathDecision.LEFT_LANE_BORROW,
    ("right", "borrow"): PathDecision.RIGHT_LANE_BORROW,
}


def _side_info(scene, side):
    return scene.lane.left if side == "left" else scene.lane.right


def _side_free(scene: SceneDescription, side: str, cfg: FsmConfig,
               ahead: float | None = None) -> bool:
    """No actor occupying the neighbor corridor around the ego."""
    if _side_info(scene, side) is None:
        return False
    w = scene.lane.width
    lo = (0.5 * w, 1.5 * w) if side == "left" else (-1.5 * w, -0.5 * w)
    ahead = ahead if ahead is not None else cfg.side_clear_ahead
    for a in scene.actors:
        if lo[0] <= a.lateral <= lo[1] and -cfg.side_clear_back <= a.longitudinal <= ahead:
            return False
    return True


def _red_light_ahead(scene: SceneDescription, cfg: FsmConfig) -> bool:
    d = scene.lane.stop_line_distance
    if scene.lane.light_state != "red" or d is None or d < -0.5:
        return False
    v = scene.ego.speed
    return d <= v * v / (2.0 * cfg.comfort_decel) + cfg.red_stop_extra


def _pedestrian_in_path(scene: SceneDescription, cfg: FsmConfig) -> bool:
    for a in scene.actors:
        if a.kind != "pedestrian":
            continue
        if 0.0 < a.longitudinal <= cfg.pedestrian_scan and abs(a.lateral) <= cfg.pedestrian_lat:
            return True
    return False


def _emergency_behind(scene: SceneDescription, cfg: FsmConfig):
    for a in scene.actors_sorted():
        if a.kind != "emergency_vehicle":
            continue
        if -cfg.emergency_react_dist <= a.longitudinal < 0.0 and a.same_lane:
            return a
    return None


def _slow_blocker(scene: SceneDescription, cfg: FsmConfig):
    best = None
    for a in scene.actors_sorted():
        if not a.same_lane or a.longitudinal <= 0.0 or a.longitudinal > cfg.block_scan:
            continue
        if a.speed >= cfg.slow_lead_fraction * cfg.cruise_speed:
            continue
        if best is None or a.longitudinal < best.longitudinal:
            best = a
    return best


def _latch_done(latch: Maneuver, scene: SceneDescription, cfg: FsmConfig) -> tuple[bool, Maneuver]:
    if scene.time - latch.start_time > cfg.latch_timeout:
        return True, latch
    settled = abs(scene.ego.lateral) <= cfg.latch_settle_lat
    if latch.kind == "change":
        return scene.lane.lane_id == latch.target_lane and settled, latch
    # borrow: out to the target lane, then back home once the plan returns
    if latch.phase == "out" and scene.lane.lane_id == latch.target_lane:
        latch = replace(latch, phase="back")
    if latch.phase == "back" and scene.lane.lane_id == latch.home_lane and settled:
        return True, latch
    return False, latch


def fsm_decide(state: FsmState, scene: SceneDescription,
               nav: str = "follow_lane") -> tuple[FsmState, DecisionResponse]:
    """Priority-ordered rule evaluation; always yields a feasible decision."""
    if nav not in NAV_COMMANDS:
        raise ValueError(f"unknown navigation command {nav!r}")
    cfg = FsmConfig()

    # Rule 1: mandatory stops (red light, crossing pedestrian) preempt everything.
    if _red_light_ahead(scene, cfg):
        pair = DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.STOP)
        state = FsmState(pair, None)
        return state, DecisionResponse(
            pair, "The traffic light ahead is red, so stop before the stop line.")
    if _pedestrian_in_path(scene, cfg):
        pair = DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.STOP)
        state = FsmState(pair, None)
        return state, DecisionResponse(
            pair, "A pedestrian is crossing ahead, so stop and yield.")

    # Rule 2: yield to an emergency vehicle closing in from behind.
    emergency = _emergency_behind(scene, cfg)
    if emergency is not None and (state.latch is None or state.latch.kind != "change"):
        for side in ("right", "left"):
            pair = DecisionPair(_SIDE_PATHS[(side, "change")], SpeedDecision.KEEP)
            if validate_feasibility(pair, scene) and _side_free(scene, side, cfg):
                latch = Maneuver("change", pair, scene.time,
                                 _side_info(scene, side).lane_id, scene.lane.lane_id,
                                 explanation="An emergency vehicle is approaching from "
                                             "behind, so change lanes to yield.")
                return FsmState(pair, latch), DecisionResponse(pair, latch.explanation)
        pair = DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.KEEP)
        return FsmState(pair, None), DecisionResponse(
            pair, "An emergency vehicle is behind but no side lane is free; hold the lane.")

    # An in-progress maneuver holds until it settles (rules 1-2 already had
    # their chance to preempt above).
    if state.latch is not None:
        done, latch = _latch_done(state.latch, scene, cfg)
        if not done:
            pair = latch.decision
            # Once the ego's lane is already the change target, the honest
            # replan is lane keeping (it only needs to settle on the center).
            if latch.kind == "change" and scene.lane.lane_id == latch.target_lane:
                pair = DecisionPair(PathDecision.FOLLOW_LANE, pair.speed)
            return FsmState(pair, latch), DecisionResponse(pair, latch.explanation)
        state = FsmState(state.current, None)

    # Rule 3: blocked lane or slow lead: overtake toward a free side.
    blocker = _slow_blocker(scene, cfg)
    if blocker is not None:
        mode = "borrow" if blocker.kind == "static_obstacle" else cfg.overtake_mode
        for side in ("left", "right"):
            pair = DecisionPair(_SIDE_PATHS[(side, mode)], SpeedDecision.KEEP)
            if not validate_feasibility(pair, scene):
                continue
            if not _side_free(scene, side, cfg, ahead=blocker.longitudinal + 15.0):
                continue
            speed = (SpeedDecision.ACCELERATE
                     if _side_free(scene, side, cfg, ahead=60.0) else SpeedDecision.KEEP)
            pair = DecisionPair(pair.path, speed)
            word = "borrow" if mode == "borrow" else "change lanes"
            expl = (f"Since there is no vehicle in the {side} lane, in order to pass "
                    f"the vehicle in front, {word} to the {side}"
                    + (" and accelerate." if speed == SpeedDecision.ACCELERATE else "."))
            latch = Maneuver(mode, pair, scene.time,
                             _side_info(scene, side).lane_id, scene.lane.lane_id,
                             explanation=expl)
            return FsmState(pair, latch), DecisionResponse(pair, expl)
        # No side available: queue behind the blocker.
        speed = (SpeedDecision.STOP if blocker.longitudinal <= cfg.queue_gap
                 else SpeedDecision.DECELERATE)
        pair = DecisionPair(PathDecision.FOLLOW_LANE, speed)
        return FsmState(pair, None), DecisionResponse(
            pair, "The lane ahead is blocked and no side lane is free, so slow down "
                  "behind the vehicle in front.")

    # Rule 4: get into the turn lane demanded by navigation.
    if nav in ("turn_left", "turn_right"):
        d = scene.lane.distance_to_junction
        side = "left" if nav == "turn_left" else "right"
        info = _side_info(scene, side)
        if info is not None and d is not None and d <= cfg.turn_prepare_dist:
            pair = DecisionPair(_SIDE_PATHS[(side, "change")], SpeedDecision.KEEP)
            if validate_feasibility(pair, scene) and _side_free(scene, side, cfg):
                expl = (f"Since a {side} turn is required ahead and not in the {side} "
                        f"turn lane, so change to the {side} lane.")
                latch = Maneuver("change", pair, scene.time, info.lane_id,
                                 scene.lane.lane_id, explanation=expl)
                return FsmState(pair, latch), DecisionResponse(pair, expl)

    # Rule 5: default lane keeping; regain cruise speed after a stop or slowdown.
    if scene.ego.speed < 0.8 * cfg.cruise_speed:
        pair = DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.ACCELERATE)
        return FsmState(pair, None), DecisionResponse(
            pair, "The lane ahead is clear, so accelerate back to cruising speed.")
    pair = DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.KEEP)
    return FsmState(pair, None), DecisionResponse(
        pair, "The lane ahead is clear, so continue in the current lane.")


class FsmPlanner:
    """Stateful wrapper: one instance per episode."""

    def __init__(self):
        self.state = FsmState()

    def decide(self, scene: SceneDescription, nav: str = "follow_lane") -> DecisionResponse:
        self.state, resp = fsm_decide(self.state, scene, nav)
        return resp
