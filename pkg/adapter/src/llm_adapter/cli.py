"""llm-adapter command line: choose a transport and an endpoint, then serve."""

from __future__ import annotations

import argparse
import sys

from .adapter import serve_socket, serve_stdio
from .endpoint import EndpointError, make_endpoint, parse_endpoint_spec
from .prompts import PromptError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="llm-adapter",
        description="Bridge the driving-benchmark planner protocol to a text "
                    "endpoint.")
    parser.add_argument("--transport", default="stdio",
                        help="stdio | socket:<host:port> (socket listens for "
                             "the harness to connect)")
    parser.add_argument("--endpoint", required=True,
                        help="canned:<script.json> | http:<url>")
    parser.add_argument("--model", default="default")
    parser.add_argument("--variant", type=int, default=0,
                        help="prompt phrasing index (0-4)")
    parser.add_argument("--timeout", type=float, default=10.0)
    parser.add_argument("--retries", type=int, default=2)
    args = parser.parse_args(argv)

    try:
        cfg = parse_endpoint_spec(args.endpoint, args.model, args.timeout,
                                  args.retries)
        endpoint = make_endpoint(cfg)
        if args.transport == "stdio":
            return serve_stdio(endpoint, args.variant)
        if args.transport.startswith("socket:"):
            addr = args.transport.split(":", 1)[1]
            host, port = addr.rsplit(":", 1)
            return serve_socket(endpoint, host, int(port), args.variant)
        raise ValueError(f"unknown transport {args.transport!r}")
    except (EndpointError, PromptError, ValueError, OSError) as e:
        print(f"llm-adapter: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
