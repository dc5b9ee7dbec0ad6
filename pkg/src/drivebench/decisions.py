"""Behavioral decision space: path/speed enums, text grammar, feasibility."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .scene import SceneDescription


class PathDecision(enum.Enum):
    FOLLOW_LANE = "FOLLOW_LANE"
    LEFT_LANE_CHANGE = "LEFT_LANE_CHANGE"
    RIGHT_LANE_CHANGE = "RIGHT_LANE_CHANGE"
    LEFT_LANE_BORROW = "LEFT_LANE_BORROW"
    RIGHT_LANE_BORROW = "RIGHT_LANE_BORROW"


class SpeedDecision(enum.Enum):
    KEEP = "KEEP"
    ACCELERATE = "ACCELERATE"
    DECELERATE = "DECELERATE"
    STOP = "STOP"


# Short aliases used in dialogue alongside the long state names.
PATH_ALIASES = {
    "FOLLOW_LANE": PathDecision.FOLLOW_LANE,
    "FOLLOW": PathDecision.FOLLOW_LANE,
    "LEFT_LANE_CHANGE": PathDecision.LEFT_LANE_CHANGE,
    "LEFT_CHANGE": PathDecision.LEFT_LANE_CHANGE,
    "RIGHT_LANE_CHANGE": PathDecision.RIGHT_LANE_CHANGE,
    "RIGHT_CHANGE": PathDecision.RIGHT_LANE_CHANGE,
    "LEFT_LANE_BORROW": PathDecision.LEFT_LANE_BORROW,
    "LEFT_BORROW": PathDecision.LEFT_LANE_BORROW,
    "RIGHT_LANE_BORROW": PathDecision.RIGHT_LANE_BORROW,
    "RIGHT_BORROW": PathDecision.RIGHT_LANE_BORROW,
}

SPEED_ALIASES = {
    "KEEP": SpeedDecision.KEEP,
    "ACCELERATE": SpeedDecision.ACCELERATE,
    "DECELERATE": SpeedDecision.DECELERATE,
    "STOP": SpeedDecision.STOP,
}


@dataclass(frozen=True)
class DecisionPair:
    path: PathDecision
    speed: SpeedDecision


ALL_PAIRS = tuple(DecisionPair(p, s) for p in PathDecision for s in SpeedDecision)


@dataclass(frozen=True)
class DecisionResponse:
    decision: DecisionPair
    explanation: str = ""


class DecisionParseError(ValueError):
    pass


class AmbiguousPath(DecisionParseError):
    pass


class AmbiguousSpeed(DecisionParseError):
    pass


_TOKEN_RE = re.compile(r"[A-Za-z_]+")


def parse_decision(text) -> DecisionPair:
    """Extract the unique (path, speed) decision pair from free text.

    Case-insensitive word scan; long names and short aliases both accepted.
    Zero or several distinct tokens in a category raise Ambiguous{Path,Speed}.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    else:
        text = str(text)
    paths = set()
    speeds = set()
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0).upper().strip("_")
        if tok in PATH_ALIASES:
            paths.add(PATH_ALIASES[tok])
        elif tok in SPEED_ALIASES:
            speeds.add(SPEED_ALIASES[tok])
    if len(paths) != 1:
        raise AmbiguousPath(f"found {len(paths)} path decision tokens")
    if len(speeds) != 1:
        raise AmbiguousSpeed(f"found {len(speeds)} speed decision tokens")
    return DecisionPair(paths.pop(), speeds.pop())


def render_decision(pair: DecisionPair) -> str:
    """Canonical long-form text; parse_decision(render_decision(p)) == p."""
    return f"{pair.path.value}, {pair.speed.value}"


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str | None = None

    def __bool__(self):
        return self.feasible


FEASIBLE = Feasibility(True)


def validate_feasibility(pair: DecisionPair, scene: SceneDescription) -> Feasibility:
    """Check a path decision against lane topology and boundary markings."""
    lane = scene.lane
    side = None
    if pair.path in (PathDecision.LEFT_LANE_CHANGE, PathDecision.LEFT_LANE_BORROW):
        side = lane.left
        label = "left"
    elif pair.path in (PathDecision.RIGHT_LANE_CHANGE, PathDecision.RIGHT_LANE_BORROW):
        side = lane.right
        label = "right"
    else:
        return FEASIBLE
    if side is None:
        return Feasibility(False, f"no {label} lane")
    if pair.path in (PathDecision.LEFT_LANE_BORROW, PathDecision.RIGHT_LANE_BORROW):
        if side.boundary_kind == "double_solid":
            return Feasibility(False, f"{label} boundary is double solid; overtaking prohibited")
    return FEASIBLE


# --- system message ---------------------------------------------------------

DEFAULT_TASK = (
    "You are a driving assistant to drive the car. "
    "You need to follow the navigation command and traffic rules."
)

DEFAULT_RULES = (
    "The traffic rule is "
    "1. Traffic light indications: a. Green: Vehicles may proceed. "
    "b. Yellow: Vehicles already past the stop line can continue. "
    "c. Red: Vehicles must stop. "
    "2. Vehicle regulations: a. Vehicles must not exceed speed limits indicated by "
    "signs or road markings. b. Vehicles must stop when they meet the stop line. "
    "3. Drivers should note specific traffic signs/markings: "
    "- Double solid lines: Overtaking is prohibited. Adhere strictly and don't cross "
    "to overtake. - Single solid line: Overtaking is restricted. Overtaking is allowed "
    "to provide a safe distance and clear visibility, ensuring safety. "
    "4. If special vehicles like police or ambulances are behind, yield and allow them "
    "to pass first. "
    "5. Collision with other moving or static objects is not allowed."
)

DEFAULT_DEFINITIONS = (
    "Path decision definitions: "
    "`LEFT_LANE_CHANGE' refers to a driver's decision to switch from the current to "
    "the adjacent left lane. "
    "`RIGHT_LANE_CHANGE' refers to a driver's decision to switch from the current lane "
    "to the adjacent right lane. "
    "`LEFT_LANE_BORROW' is when a driver temporarily uses the adjacent left lane, "
    "commonly for overtaking or avoiding obstacles. "
    "`RIGHT_LANE_BORROW' is when a driver temporarily uses the adjacent right lane, "
    "commonly for overtaking or avoiding obstacles. "
    "`FOLLOW_LANE' means the driver decides to continue in their current lane. "
    "Speed decision definitions: "
    "`ACCELERATE' refers to a driver increasing their speed. "
    "`DECELERATE' means the driver reduces their speed. "
    "`KEEP' refers to a driver keeping a steady speed. "
    "`STOP' means the driver completely halts the vehicle."
)

CLOSING = (
    "Based on the definitions of path decision, and while adhering to traffic rules, "
    "please choose a path and speed decision from the predefined options below, "
    "considering the current scenario. "
    "Path decisions include [LEFT_LANE_BORROW, RIGHT_LANE_BORROW, LEFT_LANE_CHANGE, "
    "RIGHT_LANE_CHANGE, FOLLOW_LANE]. "
    "Speed decisions include [ACCELERATE, DECELERATE, KEEP, STOP]. "
    "Given the navigation command and driving scene obtained from the camera or LiDAR, "
    "You should choose a path decision and a speed decision from the predefined options "
    "and give an explanation of your decision."
)


@dataclass(frozen=True)
class SystemMessage:
    task: str
    rules: str
    definitions: str

    def render(self) -> str:
        return " ".join([self.task, self.rules, self.definitions, CLOSING])


@dataclass(frozen=True)
class SystemMessageConfig:
    task: str = DEFAULT_TASK
    rules: str = DEFAULT_RULES
    definitions: str = DEFAULT_DEFINITIONS


class SystemMessageError(ValueError):
    pass


def build_system_message(config: SystemMessageConfig | None = None) -> SystemMessage:
    """Assemble the planner system message; definitions must name every state once."""
    cfg = config or SystemMessageConfig()
    names = [p.value for p in PathDecision] + [s.value for s in SpeedDecision]
    for name in names:
        n = len(re.findall(rf"\b{name}\b", cfg.definitions))
        if n != 1:
            raise SystemMessageError(
                f"definitions must mention {name} exactly once (found {n})"
            )
    return SystemMessage(task=cfg.task, rules=cfg.rules, definitions=cfg.definitions)
