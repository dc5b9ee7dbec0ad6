#!/usr/bin/env python3
"""Drive benchmark routes through the out-of-process language-model adapter.

Runs the same routes twice -- once through the adapter (stdio wire protocol,
canned text endpoint) and once with the in-process scripted planner encoding
the same rules -- and checks the metrics agree.

Example:
    python3 scripts/adapter_demo.py --routes JunctionStraight
"""

import argparse
import json
import sys
import tempfile

from drivebench.fixtures import BENCHMARK_ROUTES
from drivebench.harness import RunConfig, run_closed_loop

CANNED_RULES = [
    {"contains": "Traffic light: red",
     "reply": "FOLLOW_LANE, STOP. Stopping for the red light."},
    {"reply": "FOLLOW_LANE, KEEP. The road ahead is fine."},
]

MOCK_RULES = [
    {"red_light_within": 1000, "decision": "FOLLOW_LANE, STOP",
     "explanation": "Stopping for the red light."},
    {"always": True, "decision": "FOLLOW_LANE, KEEP",
     "explanation": "The road ahead is fine."},
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--routes", nargs="*", default=["JunctionStraight"])
    parser.add_argument("--variant", type=int, default=0,
                        help="prompt phrasing variant (0-4)")
    args = parser.parse_args(argv)

    scenarios = [(n, v) for n, v in BENCHMARK_ROUTES if n in set(args.routes)]
    if not scenarios:
        parser.error(f"no benchmark routes match {args.routes}")

    with tempfile.TemporaryDirectory() as tmp:
        canned = f"{tmp}/canned.json"
        mock = f"{tmp}/mock.json"
        with open(canned, "w", encoding="utf-8") as f:
            json.dump(CANNED_RULES, f)
        with open(mock, "w", encoding="utf-8") as f:
            json.dump(MOCK_RULES, f)

        spec = (f"external:stdio:{sys.executable} -m llm_adapter.cli "
                f"--endpoint canned:{canned} --variant {args.variant}")
        via_adapter = run_closed_loop(RunConfig(scenarios=scenarios,
                                                planner_spec=spec))
        in_process = run_closed_loop(RunConfig(scenarios=scenarios,
                                               planner_spec=f"mock:{mock}"))

    for label, report in (("adapter", via_adapter), ("mock", in_process)):
        m = report["metrics"]
        print(f"{label:8s} driving_score={m['driving_score']:.2f} "
              f"mpi={m['mpi']:.2f} stats={report['protocol_stats']}")
    same = via_adapter["metrics"] == in_process["metrics"]
    print("metrics identical:", same)
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
