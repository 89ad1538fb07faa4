"""Command-line entry: render every job in a manifest file."""

from __future__ import annotations

import argparse
import json
import sys

from .jobs import load_manifest
from .render import render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bvar-figures",
        description="Render BVAR figures from experiment CSV outputs.",
    )
    parser.add_argument("--manifest", required=True, help="JSON manifest of figure jobs")
    args = parser.parse_args(argv)
    try:
        jobs = load_manifest(args.manifest)
        for job in jobs:
            render(job)
            print(f"rendered {job.kind} -> {job.output}")
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
