"""Episode orchestration: closed-loop runs, open-loop eval, data generation, replay."""

from __future__ import annotations

import dataclasses
import json
import math
import os
import shlex
from dataclasses import dataclass, field

from . import fixtures
from .data_engine import (
    AnnotationConfig,
    DrivingLog,
    LogFrame,
    annotate_decisions,
    export_dataset,
    load_dataset,
    save_log,
)
from .decisions import (
    DecisionPair,
    DecisionResponse,
    PathDecision,
    SpeedDecision,
    build_system_message,
    parse_decision,
    render_decision,
    validate_feasibility,
)
from .fsm import FsmPlanner
from .geometry import Pose
from .metrics import (
    EpisodeMetrics,
    PenaltyTable,
    RouteResult,
    bleu4,
    cider,
    decision_metrics,
    driving_score,
)
from .motion import MotionError, PlannerConfig, TrackingLost, plan_path, plan_speed, track
from .protocol import (
    ConnectionClosed,
    MockPlanner,
    PlannerRequest,
    ProtocolStats,
    SocketTransport,
    SubprocessTransport,
    query_planner,
)
from .scene import SceneDescription
from .world import (
    ActorState,
    EgoOffMapError,
    SimConfig,
    _overlaps,
    detect_infractions,
    perceive,
    scenario_from_dict,
    spawn_scenario,
    step,
)
from .worldmap import load_map

TRACE_FORMAT_VERSION = 1


class HarnessError(ValueError):
    pass


@dataclass
class RunConfig:
    scenarios: list = field(default_factory=lambda: list(fixtures.BENCHMARK_ROUTES))
    map_path: str | None = None          # overrides builtin maps when set
    planner_spec: str = "fsm"
    seed: int = 0
    decision_period: int = 10
    dt: float = 0.05
    penalties: dict | None = None
    out_dir: str | None = None
    mpi_mode: bool = False               # takeover-relocate instead of DS termination
    planner_timeout: float = 2.0
    fallback: str = "fsm"                # or "stop"
    instruction_hold: float = 10.0
    perceive_range: float = 100.0
    planner_cfg: PlannerConfig = field(default_factory=PlannerConfig)
    sim_cfg: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.decision_period < 1:
            raise HarnessError("decision period must be >= 1")
        if not self.scenarios:
            raise HarnessError("need at least one route")

    def to_dict(self) -> dict:
        return {
            "scenarios": [list(s) if isinstance(s, (list, tuple)) else s
                          for s in self.scenarios],
            "map_path": self.map_path,
            "planner_spec": self.planner_spec,
            "seed": self.seed,
            "decision_period": self.decision_period,
            "dt": self.dt,
            "penalties": PenaltyTable(self.penalties).coefficients,
            "mpi_mode": self.mpi_mode,
            "planner_timeout": self.planner_timeout,
            "fallback": self.fallback,
            "instruction_hold": self.instruction_hold,
            "perceive_range": self.perceive_range,
        }


class StopFallback:
    def decide(self, scene, nav="follow_lane"):
        return DecisionResponse(DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.STOP),
                                "Fallback: stop.")


class ConstantPlanner:
    def __init__(self, text: str):
        self.response = DecisionResponse(parse_decision(text), "Scripted constant decision.")

    def decide(self, scene, nav="follow_lane"):
        return self.response


class RemotePlanner:
    """Planner behind a wire transport, with fallback and stats accounting."""

    def __init__(self, transport, system_message: str, timeout: float, fallback):
        self.transport = transport
        self.system_message = system_message
        self.timeout = timeout
        self.fallback = fallback
        self.stats = ProtocolStats()
        self._next_id = 1

    def decide(self, scene: SceneDescription, nav: str = "follow_lane") -> DecisionResponse:
        req = PlannerRequest(
            request_id=self._next_id,
            system_message=self.system_message,
            scene=scene,
            navigation_command=nav,
            user_instruction=scene.instruction,
        )
        self._next_id += 1
        resp, delta = query_planner(self.transport, req, self.timeout, self.fallback)
        self.stats.merge(delta)
        return resp

    def close(self):
        self.transport.close()


def make_planner(spec: str, system_message: str, timeout: float, fallback_kind: str):
    """Per-episode planner from a spec string: fsm | constant:<t> | mock:<f> | external:..."""
    fallback = FsmPlanner() if fallback_kind == "fsm" else StopFallback()
    if spec == "fsm":
        return FsmPlanner()
    if spec.startswith("constant:"):
        return ConstantPlanner(spec.split(":", 1)[1])
    if spec.startswith("mock:"):
        return MockPlanner.from_file(spec.split(":", 1)[1])
    if spec.startswith("external:stdio:"):
        argv = shlex.split(spec.split(":", 2)[2])
        return RemotePlanner(SubprocessTransport(argv), system_message, timeout, fallback)
    if spec.startswith("external:socket:"):
        addr = spec.split(":", 2)[2]
        host, port = addr.rsplit(":", 1)
        return RemotePlanner(SocketTransport(host, int(port)), system_message,
                             timeout, fallback)
    raise HarnessError(f"unknown planner spec {spec!r}")


def _resolve_scenario(entry, cfg: RunConfig):
    if isinstance(entry, (tuple, list)):
        name, variant = entry
        spec = fixtures.builtin_scenario(name, variant)
    elif isinstance(entry, str) and os.path.exists(entry):
        with open(entry, encoding="utf-8") as f:
            spec = scenario_from_dict(json.load(f))
    elif isinstance(entry, str):
        spec = fixtures.builtin_scenario(entry, 0)
    else:
        raise HarnessError(f"bad scenario entry {entry!r}")
    if cfg.map_path:
        world_map = load_map(cfg.map_path)
    else:
        world_map = fixtures.builtin_map(spec.map_id)
    return spec, world_map


def _relocate_ego(world, route_poly, world_map, ahead: float = 20.0):
    """Takeover: reset the ego to a clear on-route pose ahead, speed zero."""
    s, _ = route_poly.project((world.ego.pose.x, world.ego.pose.y))
    s_new = min(s + ahead, route_poly.length - 5.0)
    for _ in range(20):
        p = route_poly.point_at(s_new)
        h = route_poly.heading_at(s_new)
        candidate = ActorState("ego", "ego", Pose(p[0], p[1], h), 0.0,
                               world.ego.bbox, world_map.nearest_lane(p))
        if not any(_overlaps(candidate, a) for a in world.actors):
            world.ego = candidate
            return
        s_new = min(s_new + 5.0, route_poly.length - 5.0)
    world.ego = candidate  # last resort: place anyway


@dataclass
class EpisodeOutcome:
    result: RouteResult
    trace: list
    stats: ProtocolStats
    infeasible_decisions: int
    log: DrivingLog | None = None


def run_episode(entry, cfg: RunConfig, record_log: bool = False,
                log_scene_stride: int = 5) -> EpisodeOutcome:
    spec, world_map = _resolve_scenario(entry, cfg)
    sysmsg = build_system_message().render()
    planner = make_planner(cfg.planner_spec, sysmsg, cfg.planner_timeout, cfg.fallback)
    fallback = FsmPlanner() if cfg.fallback == "fsm" else StopFallback()
    sim_cfg = dataclasses.replace(cfg.sim_cfg, dt=cfg.dt)

    world = spawn_scenario(world_map, spec, cfg.seed)
    route_poly = spec.route_polyline(world_map)
    s0, _ = route_poly.project((world.ego.pose.x, world.ego.pose.y))
    route_len = route_poly.length - s0
    timeout = 2.0 * route_len / cfg.planner_cfg.cruise_speed + 60.0

    completed = 0.0
    infractions = []
    takeovers = 0
    infeasible = 0
    terminated_early = False
    stats = ProtocolStats()
    trace = []
    log_frames = []
    fired_events = set()
    instruction_until = -1.0

    plan = profile = None
    decision = DecisionResponse(DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.KEEP), "")
    step_idx = 0
    need_replan = True
    new_inf = []

    try:
        while world.time < timeout:
            # instruction events
            for k, ev in enumerate(spec.instruction_events):
                if k in fired_events:
                    continue
                fire = False
                if "at_time" in ev and world.time >= ev["at_time"]:
                    fire = True
                if "trigger" in ev:
                    tp = ev["trigger"]
                    d = math.hypot(world.ego.pose.x - tp["point"][0],
                                   world.ego.pose.y - tp["point"][1])
                    fire = d <= tp["radius"]
                if fire:
                    fired_events.add(k)
                    world.pending_instruction = ev["text"]
                    instruction_until = world.time + ev.get("hold", cfg.instruction_hold)
            if world.pending_instruction and world.time > instruction_until:
                world.pending_instruction = None

            if step_idx % cfg.decision_period == 0 or need_replan:
                need_replan = False
                scene = perceive(world, world_map, cfg.perceive_range, spec.route, sim_cfg)
                decision = planner.decide(scene, spec.nav_command)
                if not validate_feasibility(decision.decision, scene):
                    infeasible += 1
                    decision = fallback.decide(scene, spec.nav_command)
                try:
                    plan = plan_path(decision.decision.path, scene, cfg.planner_cfg)
                except MotionError:
                    infeasible += 1
                    decision = fallback.decide(scene, spec.nav_command)
                    try:
                        plan = plan_path(decision.decision.path, scene, cfg.planner_cfg)
                    except MotionError:
                        # no drivable corridor left (e.g. at the route's end)
                        break
                profile = plan_speed(decision.decision.speed, scene, plan, cfg.planner_cfg)

            try:
                control = track(plan, profile, world.ego, cfg.planner_cfg)
            except TrackingLost:
                takeovers += 1
                if cfg.mpi_mode:
                    _relocate_ego(world, route_poly, world_map)
                    need_replan = True
                    control = None
                else:
                    terminated_early = True
                    break

            if control is not None:
                prev = world
                world = step(world, world_map, control, cfg.dt, sim_cfg)
                new_inf = detect_infractions(prev, world, world_map, sim_cfg)
                if new_inf:
                    infractions.extend(new_inf)
                    if cfg.mpi_mode:
                        takeovers += len(new_inf)
                        _relocate_ego(world, route_poly, world_map)
                        need_replan = True

            s, _ = route_poly.project((world.ego.pose.x, world.ego.pose.y))
            completed = max(completed, min(s - s0, route_len))

            trace.append({
                "t": round(world.time, 3),
                "x": round(world.ego.pose.x, 3),
                "y": round(world.ego.pose.y, 3),
                "heading": round(world.ego.pose.heading, 4),
                "v": round(world.ego.speed, 3),
                "decision": render_decision(decision.decision),
                "infractions": [i.kind for i in new_inf] if control is not None and new_inf else [],
            })
            if record_log:
                scene_rec = None
                if step_idx % log_scene_stride == 0:
                    # fresh snapshot so the stored scene matches this frame exactly
                    scene_rec = perceive(world, world_map, cfg.perceive_range,
                                         spec.route, sim_cfg).to_dict()
                frame = LogFrame(
                    time=world.time,
                    ego={"x": world.ego.pose.x, "y": world.ego.pose.y,
                         "heading": world.ego.pose.heading, "speed": world.ego.speed,
                         "lane_id": world.ego.lane_id},
                    actors=[{"id": a.id, "kind": a.kind, "x": a.pose.x, "y": a.pose.y,
                             "heading": a.pose.heading, "speed": a.speed,
                             "length": a.bbox[0], "width": a.bbox[1],
                             "lane_id": a.lane_id} for a in world.actors],
                    lights=dict(world.light_states),
                    instruction=world.pending_instruction,
                    scene=scene_rec,
                )
                log_frames.append(frame)

            if route_len - completed < 0.5:
                completed = route_len
                break
            step_idx += 1
    except (ConnectionClosed, EgoOffMapError):
        terminated_early = True
        takeovers += 1
    finally:
        if hasattr(planner, "close"):
            planner.close()

    if hasattr(planner, "stats"):
        stats.merge(planner.stats)

    result = RouteResult(
        route_id=spec.id, length=route_len, completed=completed,
        infractions=infractions, takeovers=takeovers,
        terminated_early=terminated_early,
    )
    log = None
    if record_log:
        log = DrivingLog(
            scenario_id=spec.id, scenario_name=spec.name, map_id=spec.map_id,
            route=list(spec.route), nav_command=spec.nav_command, frames=log_frames,
            flagged_unsafe=bool(infractions) or terminated_early,
        )
    return EpisodeOutcome(result, trace, stats, infeasible, log)


def run_closed_loop(cfg: RunConfig) -> dict:
    """Run every route, aggregate metrics, emit a self-contained report."""
    table = PenaltyTable(cfg.penalties)
    outcomes = []
    for entry in cfg.scenarios:
        outcomes.append((entry, run_episode(entry, cfg)))

    results = [o.result for _, o in outcomes]
    em: EpisodeMetrics = driving_score(results, table)
    stats = ProtocolStats()
    infeasible = 0
    for _, o in outcomes:
        stats.merge(o.stats)
        infeasible += o.infeasible_decisions

    report = {
        "report_version": TRACE_FORMAT_VERSION,
        "config": cfg.to_dict(),
        "metrics": em.to_dict(),
        "protocol_stats": stats.to_dict(),
        "infeasible_decisions": infeasible,
        "route_note": "fixture routes, 0.4-1.5 km",
    }

    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, "report.json"), "w", encoding="utf-8") as f:
            json.dump(report, f, indent=1, sort_keys=True)
            f.write("\n")
        traces_dir = os.path.join(cfg.out_dir, "traces")
        os.makedirs(traces_dir, exist_ok=True)
        for (entry, o) in outcomes:
            fname = o.result.route_id.replace("/", "_") + ".jsonl"
            write_trace(os.path.join(traces_dir, fname), o, cfg)
    return report


def write_trace(path, outcome: EpisodeOutcome, cfg: RunConfig):
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "format_version": TRACE_FORMAT_VERSION,
            "type": "header",
            "route_id": outcome.result.route_id,
            "dt": cfg.dt,
            "seed": cfg.seed,
            "planner_spec": cfg.planner_spec,
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for row in outcome.trace:
            f.write(json.dumps({"type": "step", **row}, sort_keys=True) + "\n")
        f.write(json.dumps({
            "type": "result",
            "length_m": outcome.result.length,
            "completed_m": outcome.result.completed,
            "infractions": outcome.result.infraction_kinds(),
            "takeovers": outcome.result.takeovers,
            "terminated_early": outcome.result.terminated_early,
        }, sort_keys=True) + "\n")


def replay(trace_path, plot_data_path=None) -> dict:
    """Render a trace timeline and recompute metrics from the logged rows."""
    with open(trace_path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("format_version") != TRACE_FORMAT_VERSION:
            raise HarnessError(
                f"trace format_version {header.get('format_version')!r}, "
                f"expected {TRACE_FORMAT_VERSION}")
        steps = []
        result = None
        for line in f:
            rec = json.loads(line)
            if rec["type"] == "step":
                steps.append(rec)
            elif rec["type"] == "result":
                result = rec
    if result is None:
        raise HarnessError("trace has no result record")

    lines = []
    last_decision = None
    for rec in steps:
        marks = ""
        if rec["infractions"]:
            marks = "  !! " + ",".join(rec["infractions"])
        if rec["decision"] != last_decision or marks:
            lines.append(f"t={rec['t']:8.2f}  v={rec['v']:5.2f}  {rec['decision']}{marks}")
            last_decision = rec["decision"]

    rc = 100.0 * result["completed_m"] / result["length_m"]
    table = PenaltyTable()
    is_ = 1.0
    for kind in result["infractions"]:
        is_ *= table[kind]

    if plot_data_path:
        with open(plot_data_path, "w", encoding="utf-8") as f:
            f.write("t,x,y,v\n")
            for rec in steps:
                f.write(f"{rec['t']},{rec['x']},{rec['y']},{rec['v']}\n")

    return {
        "route_id": header["route_id"],
        "steps": len(steps),
        "timeline": lines,
        "route_completion": rc,
        "infraction_score": is_,
        "driving_score": rc * is_,
        "takeovers": result["takeovers"],
    }


# --- open loop ----------------------------------------------------------------

def run_open_loop(dataset_path, planner_spec: str, timeout: float = 2.0) -> dict:
    """Replay dataset scenes through a planner; score decisions and explanations."""
    records = load_dataset(dataset_path)
    sysmsg = build_system_message().render()
    planner = None if planner_spec == "echo" else make_planner(
        planner_spec, sysmsg, timeout, "stop")
    preds, gts = [], []
    cand_expl, ref_expl = [], []
    skipped = 0
    for rec in records:
        try:
            gt = parse_decision(rec["decision"])
            scene = SceneDescription.from_dict(rec["scene"])
            if rec.get("instruction"):
                scene.instruction = rec["instruction"]
        except Exception:
            skipped += 1
            continue
        if planner is None:
            resp = DecisionResponse(gt, rec["explanation"])
        else:
            resp = planner.decide(scene, rec.get("navigation_command", "follow_lane"))
        preds.append(resp.decision)
        gts.append(gt)
        cand_expl.append(resp.explanation or "")
        ref_expl.append([rec["explanation"]])
    if hasattr(planner, "close"):
        planner.close()
    if not preds:
        raise HarnessError("no usable dataset records")
    dm = decision_metrics(preds, gts)
    report = {
        "records": len(preds),
        "skipped": skipped,
        **dm,
        "bleu4": bleu4(cand_expl, ref_expl),
        "cider": cider(cand_expl, ref_expl),
    }
    return report


# --- data generation ------------------------------------------------------------

def gen_data(cfg: RunConfig, out_dir, safe_only: bool = False,
             annotation_cfg: AnnotationConfig | None = None,
             split: dict | None = None) -> dict:
    """Drive every route with the expert planner, record, annotate, export."""
    os.makedirs(out_dir, exist_ok=True)
    logs_dir = os.path.join(out_dir, "logs")
    os.makedirs(logs_dir, exist_ok=True)
    all_frames = []
    log_paths = []
    kept = dropped = 0
    for entry in cfg.scenarios:
        outcome = run_episode(entry, cfg, record_log=True)
        log = outcome.log
        path = os.path.join(logs_dir, log.scenario_id.replace("/", "_") + ".jsonl")
        save_log(log, path)
        log_paths.append(path)
        if safe_only and log.flagged_unsafe:
            dropped += 1
            continue
        kept += 1
        spec, world_map = _resolve_scenario(entry, cfg)
        frames, _ = annotate_decisions(log, world_map, annotation_cfg)
        # dataset rows need a recorded scene
        all_frames.extend([f for f in frames if f.scene is not None])
    if not all_frames:
        raise HarnessError("no annotated frames produced")
    paths = export_dataset(all_frames, split or {"train": 0.8, "test": 0.2},
                           os.path.join(out_dir, "dataset"))
    return {
        "logs": log_paths,
        "logs_kept": kept,
        "logs_dropped": dropped,
        "dataset": paths,
        "frames": len(all_frames),
    }
