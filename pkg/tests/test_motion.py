import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivebench import fixtures
from drivebench.decisions import DecisionPair, PathDecision, SpeedDecision
from drivebench.geometry import Pose
from drivebench.motion import (
    ControlSignal,
    MotionError,
    PlannerConfig,
    plan_path,
    plan_speed,
    quintic_blend,
    track,
)
from drivebench.world import ActorState

from conftest import make_scene, spawn

CFG = PlannerConfig()


def test_quintic_blend_endpoints_and_midpoint():
    assert quintic_blend(0.0) == 0.0
    assert quintic_blend(1.0) == 1.0
    # the blend's symmetry point: half the total offset exactly
    assert quintic_blend(0.5) == pytest.approx(0.5, abs=1e-12)
    # clamped outside [0, 1]
    assert quintic_blend(-3.0) == 0.0 and quintic_blend(7.0) == 1.0


@given(st.floats(0.0, 1.0))
def test_quintic_blend_monotone(u):
    h = 1e-6
    if u + h <= 1.0:
        assert quintic_blend(u + h) >= quintic_blend(u)


def test_follow_lane_path_is_centerline(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0)
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    assert plan.kind == "follow"
    assert plan.target_lane_id == "h1"
    ys = plan.points[:, 1]
    assert np.allclose(ys, 3.5, atol=1e-9)


def test_lane_change_path_reaches_target_centerline(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0)
    plan = plan_path(PathDecision.LEFT_LANE_CHANGE, scene, CFG)
    assert plan.kind == "change"
    assert plan.target_lane_id == "h2"
    ys = plan.points[:, 1]
    assert ys[0] == pytest.approx(3.5, abs=1e-6)
    # settled on the target centerline after the change length
    idx = int(CFG.lane_change_length / CFG.sample_step) + 1
    assert np.allclose(ys[idx:], 7.0, atol=1e-6)


def test_lane_change_midpoint_offset_is_half_lane_width(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0)
    plan = plan_path(PathDecision.LEFT_LANE_CHANGE, scene, CFG)
    idx_mid = int(CFG.lane_change_length / 2.0 / CFG.sample_step)
    y_mid = plan.points[idx_mid, 1]
    assert y_mid - 3.5 == pytest.approx(3.5 / 2.0, abs=1e-9)


def test_lane_change_resumes_from_partial_offset(highway3):
    # an ego already 1 m into a left change replans without snapping back
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0)
    scene.ego.lateral = 1.0
    plan = plan_path(PathDecision.LEFT_LANE_CHANGE, scene, CFG)
    y0 = plan.points[0, 1]
    assert y0 == pytest.approx(4.5, abs=1e-6)
    assert np.all(np.diff(plan.points[:, 1]) >= -1e-9)


def test_borrow_path_goes_out_and_back(highway3):
    wreck = spawn("wreck", "static_obstacle", "h1", 140.0, 0.0,
                  behavior={"kind": "stand"})
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, actors=[wreck])
    plan = plan_path(PathDecision.LEFT_LANE_BORROW, scene, CFG)
    assert plan.kind == "borrow_out"
    ys = plan.points[:, 1]
    assert ys.max() == pytest.approx(7.0, abs=1e-6)   # reaches the borrowed lane
    assert ys[-1] == pytest.approx(3.5, abs=1e-6)     # and returns home
    # the ego is clear of the obstacle while alongside it
    i_block = int(40.0 / CFG.sample_step)  # obstacle is 40 m ahead
    assert ys[i_block] == pytest.approx(7.0, abs=1e-6)


def test_plan_path_raises_without_target_lane(highway3):
    scene = make_scene(highway3, ego_lane="h2", ego_s=100.0)
    with pytest.raises(MotionError, match="left"):
        plan_path(PathDecision.LEFT_LANE_CHANGE, scene, CFG)


def test_stop_profile_matches_constant_decel_solution(highway3):
    lead = spawn("parked", "vehicle", "h1", 160.0, 0.0, behavior={"kind": "stand"})
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=8.0,
                       actors=[lead])
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    prof = plan_speed(SpeedDecision.STOP, scene, plan, CFG)
    assert not prof.infeasible_stop
    # stop point: lead at 60 m, minus half its length, 2.5 m gap, 1 m margin
    s_stop = 60.0 - lead_half_length() - 2.5 - 1.0
    a_n = 8.0 ** 2 / (2.0 * s_stop)
    # exact at the 1 m sample stations (speed_at interpolates between them)
    for s in (0.0, 10.0, 25.0, 40.0):
        expect = math.sqrt(max(8.0 ** 2 - 2.0 * a_n * s, 0.0))
        assert prof.speed_at(s) == pytest.approx(expect, abs=1e-6)
    assert prof.speed_at(s_stop + 1.0) == 0.0


def lead_half_length():
    from drivebench.world import DEFAULT_BBOX
    return DEFAULT_BBOX["vehicle"][0] / 2.0


def test_stop_profile_flags_infeasible(highway3):
    lead = spawn("parked", "vehicle", "h1", 104.0, 0.0, behavior={"kind": "stand"})
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=12.0,
                       actors=[lead])
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    prof = plan_speed(SpeedDecision.STOP, scene, plan, CFG)
    # 12 m/s needs 18 m at the 4 m/s^2 limit; only ~0 m is available
    assert prof.infeasible_stop


def test_decelerate_profile_targets_fraction(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=10.0)
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    prof = plan_speed(SpeedDecision.DECELERATE, scene, plan, CFG)
    assert prof.speed_at(100.0) == pytest.approx(CFG.decel_fraction * 10.0, abs=1e-6)


def test_accelerate_profile_respects_speed_limit(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=2.0)
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    prof = plan_speed(SpeedDecision.ACCELERATE, scene, plan, CFG)
    v_end = prof.speed_at(120.0)
    assert v_end == pytest.approx(min(CFG.cruise_speed, 15.0), abs=1e-6)
    # never exceeds the accel-limited envelope
    assert prof.speed_at(1.0) <= math.sqrt(2.0 ** 2 + 2.0 * CFG.accel_limit * 1.0) + 1e-9


def test_track_limits_and_direction(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=8.0)
    plan = plan_path(PathDecision.LEFT_LANE_CHANGE, scene, CFG)
    prof = plan_speed(SpeedDecision.KEEP, scene, plan, CFG)
    ego = ActorState("ego", "ego", Pose(100.0, 3.5, 0.0), 8.0, (4.8, 1.9), "h1")
    ctrl = track(plan, prof, ego, CFG)
    assert isinstance(ctrl, ControlSignal)
    assert ctrl.steer > 0.0                       # change is to the left
    assert abs(ctrl.steer) <= CFG.steer_max
    assert -CFG.decel_limit <= ctrl.accel <= CFG.accel_limit


def test_track_raises_when_far_off_plan(highway3):
    scene = make_scene(highway3, ego_lane="h1", ego_s=100.0, ego_speed=8.0)
    plan = plan_path(PathDecision.FOLLOW_LANE, scene, CFG)
    prof = plan_speed(SpeedDecision.KEEP, scene, plan, CFG)
    from drivebench.motion import TrackingLost
    ego = ActorState("ego", "ego", Pose(100.0, 13.5, 0.0), 8.0, (4.8, 1.9), None)
    with pytest.raises(TrackingLost):
        track(plan, prof, ego, CFG)


def test_control_signal_rejects_non_finite():
    with pytest.raises(MotionError):
        ControlSignal(steer=float("nan"), accel=0.0)
