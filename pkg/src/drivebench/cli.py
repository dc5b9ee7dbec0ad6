"""Command-line entry points for the benchmark harness.

Exit codes: 0 completed with report, 1 config error (bad flag, unknown
planner spec, malformed config file), 2 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import fixtures
from .harness import HarnessError, RunConfig, gen_data, replay, run_closed_loop, run_open_loop

ENV_OUT_DIR = "DRIVEBENCH_OUT_DIR"


def _load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise HarnessError("config file must hold a JSON object")
    return doc


def _build_run_config(args, overrides: dict) -> RunConfig:
    kwargs = {
        "planner_spec": args.planner,
        "seed": args.seed,
        "decision_period": args.decision_period,
        "dt": args.dt,
        "mpi_mode": getattr(args, "mpi", False),
        "fallback": args.fallback,
        "planner_timeout": args.planner_timeout,
    }
    if args.routes:
        kwargs["scenarios"] = [_parse_route(r) for r in args.routes]
    if args.map:
        kwargs["map_path"] = args.map
    # config file wins over flags, per the documented precedence
    for key, value in overrides.items():
        if key == "scenarios":
            value = [_parse_route(v) if isinstance(v, str) else tuple(v) for v in value]
        if key not in RunConfig.__dataclass_fields__:
            raise HarnessError(f"unknown config key {key!r}")
        kwargs[key] = value
    out_dir = getattr(args, "out", None) or os.environ.get(ENV_OUT_DIR)
    if out_dir:
        kwargs["out_dir"] = out_dir
    return RunConfig(**kwargs)


def _parse_route(text):
    if os.path.exists(text):
        return text
    if ":" in text:
        name, variant = text.rsplit(":", 1)
        return (name, int(variant))
    return (text, 0)


def _add_common(p):
    p.add_argument("--planner", default="fsm",
                   help="fsm | constant:<pair> | mock:<script.json> | "
                        "external:stdio:<cmd> | external:socket:<host:port>")
    p.add_argument("--routes", nargs="*", default=None,
                   help="builtin 'name:variant' entries or scenario JSON paths "
                        "(default: full benchmark route set)")
    p.add_argument("--map", default=None, help="map JSON overriding builtin maps")
    p.add_argument("--config", default=None, help="JSON config file; overrides flags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--decision-period", type=int, default=10)
    p.add_argument("--fallback", choices=["fsm", "stop"], default="fsm")
    p.add_argument("--planner-timeout", type=float, default=2.0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="drivebench",
        description="Closed-loop driving-decision benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run-closed-loop", help="drive routes and score them")
    _add_common(p_run)
    p_run.add_argument("--mpi", action="store_true",
                       help="takeover-relocate regime (miles-per-intervention)")
    p_run.add_argument("--out", default=None,
                       help=f"report/trace directory (or ${ENV_OUT_DIR})")

    p_open = sub.add_parser("run-open-loop", help="score a planner on dataset scenes")
    p_open.add_argument("dataset", help="dataset JSONL file")
    p_open.add_argument("--planner", default="fsm")
    p_open.add_argument("--planner-timeout", type=float, default=2.0)
    p_open.add_argument("--out", default=None, help="write the report JSON here")

    p_gen = sub.add_parser("gen-data", help="record expert runs and export a dataset")
    _add_common(p_gen)
    p_gen.add_argument("--out", required=False, default=None)
    p_gen.add_argument("--safe-only", action="store_true",
                       help="drop logs containing any infraction")
    p_gen.add_argument("--split", default="train=0.8,test=0.2",
                       help="comma-separated name=fraction pairs")

    p_rep = sub.add_parser("replay", help="print a trace timeline and recompute scores")
    p_rep.add_argument("trace", help="trace JSONL from run-closed-loop")
    p_rep.add_argument("--plot-data", default=None,
                       help="write a t,x,y,v CSV for external plotting")

    p_list = sub.add_parser("list-routes", help="print the builtin benchmark routes")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (HarnessError, ValueError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime abort mid-episode
        print(f"runtime abort: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "list-routes":
        for name, variant in fixtures.BENCHMARK_ROUTES:
            print(f"{name}:{variant}")
        return 0

    if args.command == "replay":
        rep = replay(args.trace, args.plot_data)
        for line in rep["timeline"]:
            print(line)
        print(f"route_completion={rep['route_completion']:.2f} "
              f"infraction_score={rep['infraction_score']:.4f} "
              f"driving_score={rep['driving_score']:.2f} "
              f"takeovers={rep['takeovers']}")
        return 0

    if args.command == "run-open-loop":
        report = run_open_loop(args.dataset, args.planner, args.planner_timeout)
        text = json.dumps(report, indent=1, sort_keys=True)
        print(text)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(text + "\n")
        return 0

    overrides = _load_config_file(args.config) if args.config else {}
    cfg = _build_run_config(args, overrides)

    if args.command == "run-closed-loop":
        report = run_closed_loop(cfg)
        m = report["metrics"]
        print(json.dumps(report, indent=1, sort_keys=True))
        print(f"DS={m['driving_score']:.2f} RC={m['route_completion']:.2f} "
              f"IS={m['infraction_score']:.4f} MPI={m['mpi']}", file=sys.stderr)
        return 0

    if args.command == "gen-data":
        out_dir = cfg.out_dir or "dataset_out"
        split = {}
        for part in args.split.split(","):
            name, frac = part.split("=")
            split[name.strip()] = float(frac)
        summary = gen_data(cfg, out_dir, safe_only=args.safe_only, split=split)
        print(json.dumps(summary, indent=1, sort_keys=True))
        return 0

    raise HarnessError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
