"""Scripted planner over stdio: `python -m drivebench.mock_server script.json`.

Reads newline-delimited request frames on stdin and writes reply frames on
stdout, suitable for the harness planner spec
`external:stdio:python -m drivebench.mock_server <script>`.
"""

from __future__ import annotations

import sys

from .protocol import MockPlanner


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m drivebench.mock_server <script.json>", file=sys.stderr)
        return 2
    planner = MockPlanner.from_file(argv[0])
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(planner.answer_frame(line))
        stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
