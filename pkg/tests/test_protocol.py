import json
import subprocess
import sys

import pytest

from drivebench import fixtures
from drivebench.decisions import PathDecision, SpeedDecision
from drivebench.protocol import (
    PROTO_VERSION,
    ConnectionClosed,
    MockPlanner,
    MockPlannerServer,
    PlannerReply,
    PlannerRequest,
    ProtocolError,
    ProtocolStats,
    SocketTransport,
    SubprocessTransport,
    decode_reply,
    decode_request,
    encode_reply,
    encode_request,
    query_planner,
)

from conftest import make_scene

CATCH_ALL = {"always": True, "decision": "FOLLOW_LANE, KEEP", "explanation": "ok"}


@pytest.fixture(scope="module")
def scene():
    return make_scene(fixtures.build_highway3(), ego_lane="h1", ego_s=100.0,
                      ego_speed=8.0)


def make_request(scene, rid=1):
    return PlannerRequest(request_id=rid, system_message="sys", scene=scene)


def test_request_frame_round_trip(scene):
    req = make_request(scene, rid=7)
    line = encode_request(req)
    assert line.endswith(b"\n") and line.count(b"\n") == 1
    back = decode_request(line)
    assert back.request_id == 7
    assert back.scene.to_dict() == scene.to_dict()


def test_reply_frame_round_trip():
    rep = PlannerReply(3, "FOLLOW_LANE, STOP", "red light")
    back = decode_reply(encode_reply(rep))
    assert back == rep


def test_frames_carry_proto_version(scene):
    doc = json.loads(encode_request(make_request(scene)))
    assert doc["proto_version"] == PROTO_VERSION
    doc = json.loads(encode_reply(PlannerReply(1, "FOLLOW_LANE, KEEP", "")))
    assert doc["proto_version"] == PROTO_VERSION


def test_unknown_top_level_fields_ignored(scene):
    doc = json.loads(encode_reply(PlannerReply(1, "FOLLOW_LANE, KEEP", "x")))
    doc["novel_extension"] = {"a": 1}
    rep = decode_reply((json.dumps(doc) + "\n").encode())
    assert rep.decision_text == "FOLLOW_LANE, KEEP"


def test_version_mismatch_rejected(scene):
    doc = json.loads(encode_reply(PlannerReply(1, "FOLLOW_LANE, KEEP", "")))
    doc["proto_version"] = 99
    with pytest.raises(ProtocolError, match="proto_version"):
        decode_reply((json.dumps(doc) + "\n").encode())


def test_empty_system_message_rejected(scene):
    with pytest.raises(ProtocolError):
        PlannerRequest(request_id=1, system_message="", scene=scene)


class ScriptedTransport:
    """In-memory transport: replies from a queue, records what was sent."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.sent = []

    def send_line(self, data):
        self.sent.append(data)

    def recv_line(self, timeout):
        if not self.replies:
            raise TimeoutError("no reply scripted")
        item = self.replies.pop(0)
        if item == "CLOSE":
            raise ConnectionClosed("scripted close")
        return item

    def close(self):
        pass


class StopFallback:
    def decide(self, scene, nav="follow_lane"):
        from drivebench.decisions import DecisionPair, DecisionResponse
        return DecisionResponse(
            DecisionPair(PathDecision.FOLLOW_LANE, SpeedDecision.STOP), "fb")


def test_query_happy_path(scene):
    req = make_request(scene, rid=5)
    conn = ScriptedTransport([encode_reply(PlannerReply(5, "LEFT_LANE_CHANGE, KEEP", "go"))])
    resp, stats = query_planner(conn, req, 1.0, StopFallback())
    assert resp.decision.path == PathDecision.LEFT_LANE_CHANGE
    assert stats.ok == 1 and stats.fallbacks == 0


def test_query_garbage_falls_back_and_counts(scene):
    req = make_request(scene, rid=5)
    conn = ScriptedTransport([b'{"proto_version": 1, "type": "reply", "request_id": 5,'
                              b' "decision_text": "drive softly"}'])
    resp, stats = query_planner(conn, req, 1.0, StopFallback())
    assert resp.decision.speed == SpeedDecision.STOP  # the fallback answered
    assert stats.parse_failures == 1 and stats.fallbacks == 1 and stats.ok == 0


def test_query_timeout_falls_back(scene):
    req = make_request(scene, rid=5)
    resp, stats = query_planner(ScriptedTransport([]), req, 0.05, StopFallback())
    assert stats.timeouts == 1 and stats.fallbacks == 1


def test_query_skips_stale_reply_ids(scene):
    req = make_request(scene, rid=9)
    conn = ScriptedTransport([
        encode_reply(PlannerReply(8, "FOLLOW_LANE, STOP", "stale")),
        encode_reply(PlannerReply(9, "FOLLOW_LANE, ACCELERATE", "fresh")),
    ])
    resp, stats = query_planner(conn, req, 1.0, StopFallback())
    assert resp.decision.speed == SpeedDecision.ACCELERATE
    assert stats.ok == 1


def test_query_raises_on_connection_loss(scene):
    req = make_request(scene, rid=5)
    with pytest.raises(ConnectionClosed):
        query_planner(ScriptedTransport(["CLOSE"]), req, 1.0, StopFallback())


def test_stats_accounting_invariant(scene):
    stats = ProtocolStats()
    for replies in ([encode_reply(PlannerReply(1, "FOLLOW_LANE, KEEP", ""))],
                    [b'{"proto_version":1,"type":"reply","request_id":1,'
                     b'"decision_text":"??"}'],
                    []):
        req = make_request(scene, rid=1)
        _, delta = query_planner(ScriptedTransport(replies), req, 0.05, StopFallback())
        stats.merge(delta)
    assert stats.requests_sent == 3
    assert stats.ok + stats.parse_failures + stats.timeouts == stats.requests_sent


def test_mock_planner_rules(scene):
    planner = MockPlanner([
        {"lead_within": 40.0, "decision": "FOLLOW_LANE, DECELERATE",
         "explanation": "lead"},
        CATCH_ALL,
    ])
    resp = planner.decide(scene)
    assert resp.decision.speed == SpeedDecision.KEEP  # no lead in this scene


def test_mock_planner_requires_catch_all():
    with pytest.raises(ProtocolError, match="catch-all"):
        MockPlanner([{"lead_within": 10.0, "decision": "FOLLOW_LANE, KEEP"}])


def test_mock_planner_rejects_unknown_condition():
    with pytest.raises(ProtocolError, match="unknown"):
        MockPlanner([{"mood": "sunny", "decision": "FOLLOW_LANE, KEEP"}, CATCH_ALL])


def test_socket_server_round_trip(scene):
    with MockPlannerServer([CATCH_ALL]) as srv:
        conn = SocketTransport("127.0.0.1", srv.port)
        try:
            resp, stats = query_planner(conn, make_request(scene), 5.0, StopFallback())
            assert stats.ok == 1
            assert resp.decision.path == PathDecision.FOLLOW_LANE
        finally:
            conn.close()


def test_stdio_subprocess_round_trip(scene, tmp_path):
    script = tmp_path / "script.json"
    script.write_text(json.dumps([CATCH_ALL]))
    conn = SubprocessTransport(
        [sys.executable, "-m", "drivebench.mock_server", str(script)])
    try:
        resp, stats = query_planner(conn, make_request(scene), 10.0, StopFallback())
        assert stats.ok == 1
        assert resp.explanation == "ok"
    finally:
        conn.close()


def test_subprocess_exit_surfaces_as_connection_closed(scene):
    conn = SubprocessTransport([sys.executable, "-c", "pass"])
    try:
        with pytest.raises((ConnectionClosed, TimeoutError)):
            conn.send_line(encode_request(make_request(scene)))
            conn.recv_line(2.0)
    finally:
        conn.close()
