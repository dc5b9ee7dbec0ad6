"""Text-completion endpoints: a canned-response stub and an HTTP chat client."""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from .prompts import PromptBundle


class EndpointError(Exception):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    kind: str                   # "canned" | "http_chat"
    location: str               # script path (canned) or base URL (http_chat)
    model: str = "default"
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self):
        if self.kind not in ("canned", "http_chat"):
            raise EndpointError(f"unknown endpoint kind {self.kind!r}")
        if self.timeout <= 0:
            raise EndpointError("timeout must be > 0")
        if self.kind == "canned" and not self.location:
            raise EndpointError("canned endpoint requires a response script file")


class CannedEndpoint:
    """Offline stub: the first rule whose substring matches the prompt answers.

    Script file: JSON list of {"contains": <substring>, "reply": <text>} rules;
    a rule without "contains" matches unconditionally and should come last.
    """

    def __init__(self, script_path: str):
        with open(script_path, encoding="utf-8") as f:
            rules = json.load(f)
        if not isinstance(rules, list) or not rules:
            raise EndpointError("canned script must be a non-empty JSON list")
        for rule in rules:
            if not isinstance(rule, dict) or "reply" not in rule:
                raise EndpointError(f"canned rule needs a 'reply': {rule!r}")
            unknown = set(rule) - {"contains", "reply"}
            if unknown:
                raise EndpointError(f"unknown canned rule keys {sorted(unknown)}")
        self.rules = rules

    def complete(self, bundle: PromptBundle) -> str:
        text = bundle.flat_text()
        for rule in self.rules:
            if "contains" not in rule or rule["contains"] in text:
                return rule["reply"]
        raise EndpointError("no canned rule matched and no catch-all present")


class HttpChatEndpoint:
    """Minimal chat-completion client (OpenAI-style request/response shape)."""

    def __init__(self, cfg: EndpointConfig):
        self.cfg = cfg

    def complete(self, bundle: PromptBundle) -> str:
        payload = json.dumps({
            "model": self.cfg.model,
            "messages": bundle.messages(),
        }).encode("utf-8")
        req = urllib.request.Request(
            self.cfg.location, data=payload,
            headers={"Content-Type": "application/json"})
        last_err = None
        for attempt in range(self.cfg.retries + 1):
            try:
                with urllib.request.urlopen(req, timeout=self.cfg.timeout) as resp:
                    doc = json.loads(resp.read().decode("utf-8"))
                return doc["choices"][0]["message"]["content"]
            except (urllib.error.URLError, OSError, KeyError, IndexError,
                    ValueError) as e:
                last_err = e
                if attempt < self.cfg.retries:
                    time.sleep(min(0.2 * (attempt + 1), 1.0))
        raise EndpointError(f"endpoint failed after {self.cfg.retries + 1} "
                            f"attempts: {last_err}")


def make_endpoint(cfg: EndpointConfig):
    if cfg.kind == "canned":
        return CannedEndpoint(cfg.location)
    return HttpChatEndpoint(cfg)


def parse_endpoint_spec(spec: str, model: str = "default", timeout: float = 10.0,
                        retries: int = 2) -> EndpointConfig:
    """'canned:<file>' or 'http:<url>' (the url keeps its scheme)."""
    if spec.startswith("canned:"):
        return EndpointConfig("canned", spec.split(":", 1)[1], model, timeout, retries)
    if spec.startswith("http:") or spec.startswith("https:"):
        return EndpointConfig("http_chat", spec, model, timeout, retries)
    raise EndpointError(f"unknown endpoint spec {spec!r}")
