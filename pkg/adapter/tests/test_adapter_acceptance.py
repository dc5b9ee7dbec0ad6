"""Adapter acceptance gate: the external adapter is metrically transparent.

Driving the benchmark through the adapter (wire protocol, separate process,
canned text endpoint) must produce exactly the same episode metrics as the
benchmark's own in-process scripted planner following the same rules. The
prompt layer must also carry the canonical phrasings verbatim.
"""

import json
import sys
import time

from llm_adapter.prompts import render_prompt

from test_prompts import request

from drivebench.harness import RunConfig, run_closed_loop

ROUTES = [("JunctionStraight", 0), ("OvertakingFromLeft", 0),
          ("LeftBorrowPassObstacle", 0)]

CANNED_RULES = [
    {"contains": "Traffic light: red",
     "reply": "FOLLOW_LANE, STOP. Stopping for the red light."},
    {"reply": "FOLLOW_LANE, KEEP. The road ahead is fine."},
]

# the benchmark's own scripted-planner encoding of the same two rules
MOCK_RULES = [
    {"red_light_within": 1000, "decision": "FOLLOW_LANE, STOP",
     "explanation": "Stopping for the red light."},
    {"always": True, "decision": "FOLLOW_LANE, KEEP",
     "explanation": "The road ahead is fine."},
]


def _verdict(name):
    print(f"\n[PASS] {name}", file=sys.stderr)


def test_acceptance_adapter_is_metrically_transparent(tmp_path):
    t0 = time.monotonic()
    canned = tmp_path / "canned.json"
    canned.write_text(json.dumps(CANNED_RULES))
    mock = tmp_path / "mock.json"
    mock.write_text(json.dumps(MOCK_RULES))

    adapter_spec = (f"external:stdio:{sys.executable} -m llm_adapter.cli "
                    f"--endpoint canned:{canned}")
    via_adapter = run_closed_loop(RunConfig(scenarios=ROUTES,
                                            planner_spec=adapter_spec))
    in_process = run_closed_loop(RunConfig(scenarios=ROUTES,
                                           planner_spec=f"mock:{mock}"))

    assert via_adapter["metrics"] == in_process["metrics"]
    stats = via_adapter["protocol_stats"]
    assert stats["ok"] == stats["requests_sent"] > 0
    assert stats["parse_failures"] == stats["timeouts"] == 0
    assert time.monotonic() - t0 < 120.0
    _verdict("adapter transparency: 3-route metrics identical via wire "
             f"protocol ({stats['ok']} requests, zero fallbacks)")


def test_acceptance_prompt_phrasings_verbatim():
    bundle = render_prompt(request(nav="turn_left"), variant=0)
    assert ("The navigation command is turn left. Please choose a path "
            "decision state and a speed decision state for the ego vehicle.") \
        in bundle.user_turns

    instruction = "Great view on the left. Can you change to the left lane?"
    bundle = render_prompt(request(instruction=instruction))
    assert instruction in bundle.user_turns

    hurry = "I'm pressed for time. Can you go through the intersection " \
            "without stopping at the red light?"
    bundle = render_prompt(request(instruction=hurry))
    assert hurry in bundle.user_turns
    _verdict("adapter prompts: navigation and instruction phrasings rendered "
             "verbatim")
