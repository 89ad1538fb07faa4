"""Figure job descriptions and manifest parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = (
    "coefficient-heatmap",
    "cumulative-lbf",
    "dma-weights",
    "prior-density",
    "induced-qq",
)


@dataclass(frozen=True)
class FigureJob:
    """One figure: input CSV path(s), kind, output image path, styling."""

    kind: str
    inputs: dict
    output: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("job needs at least one input file")


def load_manifest(path):
    """Read a JSON manifest: a list of job objects."""
    path = Path(path)
    raw = json.loads(path.read_text())
    if not isinstance(raw, list):
        raise ValueError("manifest must be a JSON list of jobs")
    jobs = []
    for i, entry in enumerate(raw):
        try:
            jobs.append(
                FigureJob(
                    kind=entry["kind"],
                    inputs={k: str(path.parent / v) for k, v in entry["inputs"].items()},
                    output=str(path.parent / entry["output"]),
                    options=entry.get("options", {}),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"manifest entry {i} is malformed: {exc}") from exc
    return jobs
