"""Run traces: step records, JSONL persistence and replay.

A trace is a header record (instance, design, config), one record per
executed step, and a closing result record. With a scripted backend the
JSONL text is identical across replays.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable

from bigmas.gateway import Usage, UsageLedger
from bigmas.workspace import (
    ValidationResult,
    Workspace,
    WriteInstruction,
    advance_sys,
    apply_write,
    init_workspace,
    serialize_workspace,
)

__all__ = [
    "StepRecord",
    "dump_jsonl",
    "write_trace",
    "read_trace",
    "replay_trace",
    "replay_matches",
    "trace_usage",
]


@dataclass
class StepRecord:
    step: int
    node: str
    attempts: list[dict]
    corrections: int
    validation: ValidationResult
    applied: WriteInstruction | None
    pre: str
    post: str
    routing: dict | None = None
    next: str | None = None
    mode: str | None = None  # routing mode, or "failure" for the route-to-sink branch
    usage: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "record": "step",
            "step": self.step,
            "node": self.node,
            "attempts": self.attempts,
            "corrections": self.corrections,
            "validation": self.validation.to_dict(),
            "applied": self.applied.to_dict() if self.applied else None,
            "routing": self.routing,
            "next": self.next,
            "mode": self.mode,
            "pre": self.pre,
            "post": self.post,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StepRecord":
        applied = data.get("applied")
        return cls(
            step=data["step"],
            node=data["node"],
            attempts=data["attempts"],
            corrections=data["corrections"],
            validation=ValidationResult.from_dict(data["validation"]),
            applied=_instruction(applied) if applied else None,
            pre=data["pre"],
            post=data["post"],
            routing=data.get("routing"),
            next=data.get("next"),
            mode=data.get("mode"),
        )


def _instruction(data: dict) -> WriteInstruction:
    path = data["target_path"]
    segments = path.split(".") if isinstance(path, str) else path
    return WriteInstruction(tuple(segments), data["action"], data["payload"])


def dump_jsonl(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_trace(path: str | os.PathLike, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dump_jsonl(rec) + "\n")


def read_trace(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_trace(records: list[dict]) -> Workspace:
    """Rebuild the final workspace from the header and the applied writes alone."""
    from bigmas.tasks import TaskInstance

    header = records[0]
    if header.get("record") != "header":
        raise ValueError("trace must start with a header record")
    ws = init_workspace(TaskInstance.from_dict(header["instance"]), header["design"]["work_schema"])
    result: dict[str, Any] | None = None
    for rec in records[1:]:
        if rec["record"] == "step":
            step = StepRecord.from_dict(rec)
            if step.applied is not None:
                ws = apply_write(step.applied, ws)
            advance_sys(ws, step.node, step.corrections, step.next, step.mode)
        elif rec["record"] == "result":
            result = rec
    if result and result.get("fallback") and ws.ans is None:
        ws.ans = result["fallback"]["written"]
    return ws


def final_snapshot(records: list[dict]) -> str:
    return next(r["final"] for r in records if r["record"] == "result")


def replay_matches(records: list[dict]) -> bool:
    return serialize_workspace(replay_trace(records)) == final_snapshot(records)


def trace_usage(records: list[dict]) -> UsageLedger:
    """Re-tally per-call usage from a trace; equals the run's ledger when nothing leaked."""
    ledger = UsageLedger()

    def add(phase: str, usage: dict | None) -> None:
        if usage is not None:
            ledger.record(phase, Usage(**usage))

    for rec in records:
        if rec["record"] == "header":
            for attempt in rec.get("design_attempts") or ():
                add("design", attempt.get("usage"))
        elif rec["record"] == "step":
            for attempt in rec.get("attempts") or ():
                add("node_execution", attempt.get("usage"))
            if rec.get("routing"):
                add("routing", rec["routing"].get("usage"))
            if "label" in rec:
                add("baseline", rec.get("usage"))
    return ledger
