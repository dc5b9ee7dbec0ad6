#!/usr/bin/env python3
"""Run the full closed-loop benchmark with a chosen planner and print a summary.

Examples:
    python3 scripts/run_benchmark.py --planner fsm --out runs/fsm
    python3 scripts/run_benchmark.py --planner "mock:rules.json" --seed 7
"""

import argparse
import json
import sys

from drivebench.fixtures import BENCHMARK_ROUTES
from drivebench.harness import RunConfig, run_closed_loop


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--planner", default="fsm",
                        help="planner spec: fsm | constant:<decision> | "
                             "mock:<rules.json> | external:stdio:<cmd> | "
                             "external:socket:<host:port>")
    parser.add_argument("--routes", nargs="*", default=None,
                        help="route names (default: all builtin routes)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="directory for report.json and traces")
    args = parser.parse_args(argv)

    available = BENCHMARK_ROUTES
    if args.routes:
        unknown = [r for r in args.routes if r not in {n for n, _ in available}]
        if unknown:
            parser.error(f"unknown routes: {unknown}")
        scenarios = [(n, v) for n, v in available if n in set(args.routes)]
    else:
        scenarios = available

    report = run_closed_loop(RunConfig(scenarios=scenarios,
                                       planner_spec=args.planner,
                                       seed=args.seed,
                                       out_dir=args.out))
    m = report["metrics"]
    print(f"routes={len(scenarios)} planner={args.planner}")
    print(f"driving_score={m['driving_score']:.2f} "
          f"route_completion={m['route_completion']:.2f} "
          f"infraction_score={m['infraction_score']:.4f} "
          f"mpi={m['mpi']:.2f}")
    print(json.dumps(report["protocol_stats"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
