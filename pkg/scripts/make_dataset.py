#!/usr/bin/env python3
"""Record expert runs, annotate them, and export a train/val/test decision dataset.

Example:
    python3 scripts/make_dataset.py --out data/v1 --seed 0
"""

import argparse
import json
import os
import sys

from drivebench.fixtures import BENCHMARK_ROUTES
from drivebench.harness import RunConfig, gen_data


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--planner", default="fsm", help="expert planner spec")
    parser.add_argument("--keep-unsafe", action="store_true",
                        help="keep runs that incurred infractions")
    args = parser.parse_args(argv)

    cfg = RunConfig(scenarios=BENCHMARK_ROUTES, planner_spec=args.planner,
                    seed=args.seed)
    summary = gen_data(cfg, args.out, safe_only=not args.keep_unsafe)
    print(json.dumps(summary, indent=1, sort_keys=True))
    for split in ("train", "val", "test"):
        path = os.path.join(args.out, "dataset", f"{split}.jsonl")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as f:
                n = sum(1 for _ in f)
            print(f"{split}: {n} records ({path})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
