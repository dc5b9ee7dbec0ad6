"""Closed-loop benchmark for language-aligned driving decisions.

A 2D multi-lane simulator, a behavioral decision grammar (path x speed),
motion planning that realizes decisions as trajectories, a rule-based
reference planner, a newline-delimited JSON wire protocol for external
planners, scoring (driving score, miles-per-intervention, decision F1,
BLEU-4, CIDEr), and a data engine that turns driving logs into annotated
decision datasets.
"""

from .decisions import (
    ALL_PAIRS,
    DecisionPair,
    DecisionResponse,
    PathDecision,
    SpeedDecision,
    build_system_message,
    parse_decision,
    render_decision,
    validate_feasibility,
)
from .fsm import FsmConfig, FsmPlanner, fsm_decide
from .harness import RunConfig, gen_data, replay, run_closed_loop, run_episode, run_open_loop
from .metrics import (
    DEFAULT_PENALTIES,
    EpisodeMetrics,
    PenaltyTable,
    RouteResult,
    bleu4,
    cider,
    decision_metrics,
    driving_score,
    mpi,
)
from .motion import PlannerConfig, plan_and_track, plan_path, plan_speed, track
from .protocol import (
    PROTO_VERSION,
    MockPlanner,
    MockPlannerServer,
    PlannerReply,
    PlannerRequest,
    ProtocolStats,
    SocketTransport,
    SubprocessTransport,
    decode_reply,
    decode_request,
    encode_reply,
    encode_request,
    query_planner,
)
from .scene import SceneDescription
from .world import (
    ActorSpawn,
    ActorState,
    ScenarioSpec,
    SimConfig,
    WorldState,
    detect_infractions,
    perceive,
    spawn_scenario,
    step,
)
from .worldmap import Lane, RoadMap, TrafficLight, load_map, map_from_dict, map_to_dict, save_map

__version__ = "0.1.0"
