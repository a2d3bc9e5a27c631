"""`quorumvault-harness run <scenario.json>`: scripted deterministic runs."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from .cluster import run_scenario


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="quorumvault-harness")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a scenario file")
    runp.add_argument("scenario", help="canonical-JSON scenario file")
    runp.add_argument("--workdir", help="directory for node stores (default: temp)")
    runp.add_argument("--logs", help="write the full report JSON here")
    args = parser.parse_args(argv)

    scenario = json.loads(Path(args.scenario).read_text())
    if args.workdir:
        report = run_scenario(scenario, Path(args.workdir))
    else:
        with tempfile.TemporaryDirectory() as workdir:
            report = run_scenario(scenario, workdir)
    for output in report["outputs"]:
        print(json.dumps(output, sort_keys=True))
    print(f"transcript_hash {report['transcript_hash']}")
    if args.logs:
        Path(args.logs).write_text(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
