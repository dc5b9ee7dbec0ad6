"""Newline-delimited wire protocol between the harness and external planners."""

from __future__ import annotations

import json
import selectors
import socket
import subprocess
import threading
import time as _time
from dataclasses import dataclass, field

from .decisions import DecisionParseError, DecisionResponse, parse_decision
from .scene import SceneDescription

PROTO_VERSION = 1


class ProtocolError(ValueError):
    pass


class ConnectionClosed(ProtocolError):
    """Peer went away; the harness aborts the episode as a takeover."""


@dataclass
class PlannerRequest:
    request_id: int
    system_message: str
    scene: SceneDescription
    navigation_command: str = "follow_lane"
    user_instruction: str | None = None
    dialogue_history: list | None = None

    def __post_init__(self):
        if not self.system_message:
            raise ProtocolError("system_message must be non-empty")


@dataclass
class PlannerReply:
    request_id: int
    decision_text: str
    explanation: str | None = None


@dataclass
class ProtocolStats:
    requests_sent: int = 0
    ok: int = 0
    parse_failures: int = 0
    timeouts: int = 0
    fallbacks: int = 0

    def merge(self, other: "ProtocolStats"):
        for k in vars(self):
            setattr(self, k, getattr(self, k) + getattr(other, k))

    def to_dict(self) -> dict:
        return dict(vars(self))


def encode_request(req: PlannerRequest) -> bytes:
    """One JSON object per frame, newline terminated, fields in fixed order."""
    obj = {
        "proto_version": PROTO_VERSION,
        "type": "request",
        "request_id": req.request_id,
        "system_message": req.system_message,
        "scene": req.scene.to_dict(),
        "navigation_command": req.navigation_command,
    }
    if req.user_instruction is not None:
        obj["user_instruction"] = req.user_instruction
    if req.dialogue_history is not None:
        obj["dialogue_history"] = [list(t) for t in req.dialogue_history]
    try:
        line = json.dumps(obj, ensure_ascii=False, allow_nan=False)
    except (TypeError, ValueError) as e:
        raise ProtocolError(f"unencodable request: {e}") from e
    return line.encode("utf-8") + b"\n"


def decode_request(line: bytes | str) -> PlannerRequest:
    obj = _load_frame(line)
    if obj.get("type") != "request":
        raise ProtocolError(f"expected request frame, got {obj.get('type')!r}")
    return PlannerRequest(
        request_id=obj["request_id"],
        system_message=obj["system_message"],
        scene=SceneDescription.from_dict(obj["scene"]),
        navigation_command=obj.get("navigation_command", "follow_lane"),
        user_instruction=obj.get("user_instruction"),
        dialogue_history=[tuple(t) for t in obj["dialogue_history"]]
        if obj.get("dialogue_history") is not None else None,
    )


def encode_reply(rep: PlannerReply) -> bytes:
    obj = {
        "proto_version": PROTO_VERSION,
        "type": "reply",
        "request_id": rep.request_id,
        "decision_text": rep.decision_text,
    }
    if rep.explanation is not None:
        obj["explanation"] = rep.explanation
    return json.dumps(obj, ensure_ascii=False).encode("utf-8") + b"\n"


def decode_reply(line: bytes | str) -> PlannerReply:
    obj = _load_frame(line)
    if obj.get("type") != "reply":
        raise ProtocolError(f"expected reply frame, got {obj.get('type')!r}")
    return PlannerReply(
        request_id=obj["request_id"],
        decision_text=obj["decision_text"],
        explanation=obj.get("explanation"),
    )


def _load_frame(line) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="strict")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed frame: {e}") from e
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    if obj.get("proto_version") != PROTO_VERSION:
        raise ProtocolError(f"unsupported proto_version {obj.get('proto_version')!r}")
    # Unknown top-level fields are ignored for forward compatibility.
    return obj


# --- transports -------------------------------------------------------------

class Transport:
    def send_line(self, data: bytes):  # pragma: no cover - interface
        raise NotImplementedError

    def recv_line(self, timeout: float) -> bytes:  # pragma: no cover - interface
        raise NotImplementedError

    def close(self):  # pragma: no cover - interface
        pass


class SubprocessTransport(Transport):
    """Line-framed stdio to a planner subprocess."""

    def __init__(self, argv: list[str]):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)

    def send_line(self, data: bytes):
        if self.proc.poll() is not None or self.proc.stdin.closed:
            raise ConnectionClosed("planner subprocess exited")
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ConnectionClosed(str(e)) from e

    def recv_line(self, timeout: float) -> bytes:
        deadline = _time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - _time.monotonic()
            if remaining <= 0:
                raise TimeoutError("planner reply timed out")
            if not self._sel.select(remaining):
                continue
            # stdout is unbuffered (raw FileIO): one os.read, returns what's there
            chunk = self.proc.stdout.read(65536)
            if not chunk:
                raise ConnectionClosed("planner subprocess closed stdout")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self):
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class SocketTransport(Transport):
    """Line-framed TCP to a planner endpoint."""

    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port), timeout=10.0)
        self._buf = b""

    def send_line(self, data: bytes):
        try:
            self.sock.sendall(data)
        except OSError as e:
            raise ConnectionClosed(str(e)) from e

    def recv_line(self, timeout: float) -> bytes:
        deadline = _time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - _time.monotonic()
            if remaining <= 0:
                raise TimeoutError("planner reply timed out")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise TimeoutError("planner reply timed out") from None
            if not chunk:
                raise ConnectionClosed("planner socket closed")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def query_planner(conn: Transport, req: PlannerRequest, timeout: float,
                  fallback) -> tuple[DecisionResponse, ProtocolStats]:
    """Send one request, await the matching reply, fall back on any failure.

    fallback: object with decide(scene, nav) -> DecisionResponse.
    Never blocks past the timeout; connection loss propagates as ConnectionClosed.
    """
    if timeout <= 0:
        raise ProtocolError("timeout must be > 0")
    stats = ProtocolStats()
    conn.send_line(encode_request(req))
    stats.requests_sent = 1
    deadline = _time.monotonic() + timeout
    try:
        while True:
            remaining = deadline - _time.monotonic()
            if remaining <= 0:
                raise TimeoutError("planner reply timed out")
            rep = decode_reply(conn.recv_line(remaining))
            if rep.request_id == req.request_id:
                break
            # stale reply id: keep draining until the deadline
        decision = parse_decision(rep.decision_text)
        stats.ok = 1
        return DecisionResponse(decision, rep.explanation or ""), stats
    except TimeoutError:
        stats.timeouts = 1
    except (ProtocolError, DecisionParseError) as e:
        if isinstance(e, ConnectionClosed):
            raise
        stats.parse_failures = 1
    stats.fallbacks = 1
    return fallback.decide(req.scene, req.navigation_command), stats


# --- scripted mock planner --------------------------------------------------

_CONDITION_KEYS = {
    "always", "red_light_within", "lead_within", "instruction_contains",
    "left_lane_free", "right_lane_free", "time_after", "pedestrian_within",
}


def _side_lane_free(scene: SceneDescription, side: str, window: float = 20.0) -> bool:
    info = scene.lane.left if side == "left" else scene.lane.right
    if info is None:
        return False
    w = scene.lane.width
    lo, hi = ((0.5 * w, 1.5 * w) if side == "left" else (-1.5 * w, -0.5 * w))
    for a in scene.actors:
        if lo <= a.lateral <= hi and abs(a.longitudinal) <= window:
            return False
    return True


def _rule_matches(rule: dict, scene: SceneDescription, instruction: str | None) -> bool:
    for key, want in rule.items():
        if key in ("decision", "explanation"):
            continue
        if key == "always":
            if not want:
                return False
        elif key == "red_light_within":
            d = scene.lane.stop_line_distance
            if scene.lane.light_state != "red" or d is None or not 0 <= d <= want:
                return False
        elif key == "lead_within":
            lead = scene.lead_actor(max_ahead=want)
            if lead is None:
                return False
        elif key == "pedestrian_within":
            if not any(a.kind == "pedestrian" and 0 < a.longitudinal <= want
                       and abs(a.lateral) <= 3.0 for a in scene.actors):
                return False
        elif key == "instruction_contains":
            if not instruction or want.lower() not in instruction.lower():
                return False
        elif key in ("left_lane_free", "right_lane_free"):
            side = "left" if key.startswith("left") else "right"
            if _side_lane_free(scene, side) != bool(want):
                return False
        elif key == "time_after":
            if scene.time < want:
                return False
        else:
            raise ProtocolError(f"unknown mock condition {key!r}")
    return True


class MockPlanner:
    """Deterministic scripted planner: first matching rule answers."""

    def __init__(self, script: list[dict]):
        if not script:
            raise ProtocolError("mock script must be non-empty")
        for rule in script:
            if "decision" not in rule:
                raise ProtocolError("every mock rule needs a decision")
            unknown = set(rule) - _CONDITION_KEYS - {"decision", "explanation"}
            if unknown:
                raise ProtocolError(f"unknown mock rule keys: {sorted(unknown)}")
        last = {k for k in script[-1] if k not in ("decision", "explanation")}
        if last != {"always"} or not script[-1]["always"]:
            raise ProtocolError("last mock rule must be an always-true catch-all")
        self.script = script

    @classmethod
    def from_file(cls, path) -> "MockPlanner":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def reply_text(self, scene: SceneDescription, instruction: str | None) -> tuple[str, str]:
        for rule in self.script:
            if _rule_matches(rule, scene, instruction):
                return rule["decision"], rule.get("explanation", "")
        raise AssertionError("unreachable: catch-all rule guaranteed")

    def decide(self, scene: SceneDescription, nav: str = "follow_lane") -> DecisionResponse:
        text, expl = self.reply_text(scene, scene.instruction)
        return DecisionResponse(parse_decision(text), expl)

    def answer_frame(self, line: bytes) -> bytes:
        req = decode_request(line)
        text, expl = self.reply_text(req.scene, req.user_instruction)
        return encode_reply(PlannerReply(req.request_id, text, expl))


class MockPlannerServer:
    """Serves a mock script over a local TCP socket (one client at a time)."""

    def __init__(self, script: list[dict], host: str = "127.0.0.1"):
        self.planner = MockPlanner(script)
        self._srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._srv.bind((host, 0))
        self._srv.listen(4)
        self.host, self.port = self._srv.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        self._srv.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except socket.timeout:
                continue
            with conn:
                buf = b""
                conn.settimeout(0.2)
                while not self._stop.is_set():
                    try:
                        chunk = conn.recv(65536)
                    except socket.timeout:
                        continue
                    except OSError:
                        break
                    if not chunk:
                        break
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        try:
                            conn.sendall(self.planner.answer_frame(line))
                        except ProtocolError:
                            pass  # unparseable frame: stay silent, host times out

    def close(self):
        self._stop.set()
        self._thread.join(timeout=2)
        self._srv.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_mock_planner(script: list[dict], host: str = "127.0.0.1") -> MockPlannerServer:
    """Spin up a deterministic scripted planner endpoint for tests."""
    return MockPlannerServer(script, host)
