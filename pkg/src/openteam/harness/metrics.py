"""Metric records and the append-only JSONL stream."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass
class MetricRecord:
    global_step: int
    episodes: int
    mean_return: float | None
    ci95: float | None
    agent_model_nll: float | None = None
    mean_qbar: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "MetricRecord":
        return MetricRecord(**json.loads(line))


def append_record(path, record: MetricRecord):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(record.to_json() + "\n")


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return [MetricRecord.from_json(line) for line in fh if line.strip()]
