"""Endpoint stubs and the HTTP chat client."""

import http.server
import json
import threading

import pytest

from llm_adapter.endpoint import (
    CannedEndpoint,
    EndpointConfig,
    EndpointError,
    HttpChatEndpoint,
    make_endpoint,
    parse_endpoint_spec,
)
from llm_adapter.prompts import PromptBundle

BUNDLE = PromptBundle(system="sys", user_turns=["Traffic light: red ahead",
                                                "please decide"])


class TestEndpointConfig:
    def test_rejects_unknown_kind(self):
        with pytest.raises(EndpointError):
            EndpointConfig("carrier_pigeon", "x")

    def test_rejects_bad_timeout(self):
        with pytest.raises(EndpointError):
            EndpointConfig("canned", "x", timeout=0)

    def test_canned_requires_script(self):
        with pytest.raises(EndpointError):
            EndpointConfig("canned", "")

    def test_spec_parsing(self):
        assert parse_endpoint_spec("canned:rules.json").kind == "canned"
        cfg = parse_endpoint_spec("http://localhost:1/v1/chat", model="m")
        assert cfg.kind == "http_chat" and cfg.model == "m"
        with pytest.raises(EndpointError):
            parse_endpoint_spec("smoke-signals:hill")


class TestCannedEndpoint:
    def _write(self, tmp_path, rules):
        path = tmp_path / "rules.json"
        path.write_text(json.dumps(rules))
        return str(path)

    def test_first_match_wins(self, tmp_path):
        ep = CannedEndpoint(self._write(tmp_path, [
            {"contains": "Traffic light: red", "reply": "FOLLOW_LANE, STOP. Red."},
            {"reply": "FOLLOW_LANE, KEEP. Clear."},
        ]))
        assert ep.complete(BUNDLE) == "FOLLOW_LANE, STOP. Red."
        green = PromptBundle(system="sys", user_turns=["all clear"])
        assert ep.complete(green) == "FOLLOW_LANE, KEEP. Clear."

    def test_no_match_without_catch_all(self, tmp_path):
        ep = CannedEndpoint(self._write(tmp_path, [
            {"contains": "zebra", "reply": "x"},
        ]))
        with pytest.raises(EndpointError):
            ep.complete(BUNDLE)

    def test_script_validation(self, tmp_path):
        with pytest.raises(EndpointError):
            CannedEndpoint(self._write(tmp_path, []))
        with pytest.raises(EndpointError):
            CannedEndpoint(self._write(tmp_path, [{"contains": "a"}]))
        with pytest.raises(EndpointError):
            CannedEndpoint(self._write(tmp_path, [{"reply": "a", "when": "?"}]))

    def test_make_endpoint_dispatch(self, tmp_path):
        path = self._write(tmp_path, [{"reply": "ok"}])
        ep = make_endpoint(EndpointConfig("canned", path))
        assert isinstance(ep, CannedEndpoint)


class _ChatStub(http.server.BaseHTTPRequestHandler):
    fail_first = 0

    def do_POST(self):
        cls = type(self)
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if cls.fail_first > 0:
            cls.fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        n_user = sum(1 for m in body["messages"] if m["role"] == "user")
        reply = {"choices": [{"message": {
            "content": f"FOLLOW_LANE, KEEP. Saw {n_user} user turns."}}]}
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *a):
        pass


@pytest.fixture
def chat_server():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _ChatStub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


class TestHttpChatEndpoint:
    def test_round_trip(self, chat_server):
        ep = HttpChatEndpoint(EndpointConfig("http_chat", chat_server))
        assert ep.complete(BUNDLE) == "FOLLOW_LANE, KEEP. Saw 2 user turns."

    def test_retries_transient_failures(self, chat_server):
        _ChatStub.fail_first = 2
        ep = HttpChatEndpoint(EndpointConfig("http_chat", chat_server, retries=2))
        assert "FOLLOW_LANE, KEEP" in ep.complete(BUNDLE)

    def test_raises_after_retries_exhausted(self, chat_server):
        _ChatStub.fail_first = 3
        ep = HttpChatEndpoint(EndpointConfig("http_chat", chat_server, retries=1))
        with pytest.raises(EndpointError):
            ep.complete(BUNDLE)
        _ChatStub.fail_first = 0

    def test_endpoint_down(self):
        ep = HttpChatEndpoint(EndpointConfig(
            "http_chat", "http://127.0.0.1:9/none", timeout=0.3, retries=0))
        with pytest.raises(EndpointError):
            ep.complete(BUNDLE)
