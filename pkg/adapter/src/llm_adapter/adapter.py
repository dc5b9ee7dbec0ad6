"""Wire-protocol service loop: request frames in, reply frames out.

The adapter talks newline-delimited JSON frames with the benchmark harness:
every incoming line is a request object carrying a request_id, a system
message, a structured scene, the navigation command, and optionally a user
instruction. Every outgoing line echoes the request_id with a decision text
and an explanation. When the endpoint fails, the adapter answers with the
conservative literal "FOLLOW_LANE, DECELERATE" so the host episode can
continue under its own fallback policy.
"""

from __future__ import annotations

import json
import socketserver

from .endpoint import EndpointError
from .prompts import PromptError, render_prompt

PROTO_VERSION = 1
FALLBACK_DECISION = "FOLLOW_LANE, DECELERATE"


def split_reply_text(text: str) -> tuple[str, str]:
    """First sentence carries the decision; the rest is the explanation."""
    text = text.strip()
    head, sep, tail = text.partition(". ")
    if sep and tail:
        return head + ".", tail.strip()
    return text, text


def handle_frame(line: str, endpoint, variant: int = 0) -> str | None:
    """One request line -> one reply line (None for blank input)."""
    line = line.strip()
    if not line:
        return None
    reply = {"proto_version": PROTO_VERSION, "type": "reply"}
    try:
        obj = json.loads(line)
        if obj.get("proto_version") != PROTO_VERSION:
            raise ValueError(f"unsupported proto_version {obj.get('proto_version')!r}")
        if obj.get("type") != "request":
            raise ValueError(f"expected a request frame, got {obj.get('type')!r}")
        reply["request_id"] = obj["request_id"]
        bundle = render_prompt(obj, variant=variant)
        text = endpoint.complete(bundle)
        decision_text, explanation = split_reply_text(text)
        reply["decision_text"] = decision_text
        reply["explanation"] = explanation
    except (KeyError, ValueError, PromptError, EndpointError, OSError) as e:
        if "request_id" not in reply:
            # a frame with no usable id cannot be answered: never invent one
            return None
        reply["decision_text"] = FALLBACK_DECISION
        reply["explanation"] = f"Endpoint unavailable ({e}); decelerating."
    return json.dumps(reply, ensure_ascii=False)


def serve_stdio(endpoint, variant: int = 0, stdin=None, stdout=None) -> int:
    import sys

    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        out = handle_frame(line, endpoint, variant)
        if out is not None:
            stdout.write(out + "\n")
            stdout.flush()
    return 0


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            out = handle_frame(raw.decode("utf-8"), self.server.endpoint,
                               self.server.variant)
            if out is not None:
                self.wfile.write(out.encode("utf-8") + b"\n")
                self.wfile.flush()


class AdapterServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, endpoint, variant: int = 0):
        super().__init__(addr, _Handler)
        self.endpoint = endpoint
        self.variant = variant


def serve_socket(endpoint, host: str, port: int, variant: int = 0) -> int:
    with AdapterServer((host, port), endpoint, variant) as server:
        server.serve_forever()
    return 0
