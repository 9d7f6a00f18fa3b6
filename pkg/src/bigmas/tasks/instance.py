from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

__all__ = ["TASK_KINDS", "TaskInstance", "Verdict", "read_instances", "write_instances"]

TASK_KINDS = ("game24", "sixfives", "tol")


@dataclass(frozen=True)
class TaskInstance:
    """One puzzle: input, target and provenance.

    ``input`` holds ``numbers`` (game24), ``target`` (sixfives) or
    ``initial``/``goal`` peg lists (tol). ``oracle`` carries the reference
    solution and metadata (``solvable``, ``optimal_length``, ...).
    """

    kind: str
    input: Mapping[str, Any]
    target: Any
    seed: int | None = None
    oracle: Mapping[str, Any] = field(default_factory=dict)
    id: str = ""

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")

    @property
    def constraints(self) -> str:
        from bigmas.tasks import constraints_text

        return constraints_text(self)

    def to_context(self) -> dict:
        from bigmas.tasks import render_context

        return {
            "task": self.kind,
            "statement": render_context(self),
            "input": json.loads(json.dumps(self.input)),
            "target": json.loads(json.dumps(self.target)),
        }

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "input": dict(self.input),
            "constraints": self.constraints,
            "target": self.target,
            "seed": self.seed,
            "oracle": dict(self.oracle),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TaskInstance":
        return cls(
            kind=data["kind"],
            input=dict(data["input"]),
            target=data["target"],
            seed=data.get("seed"),
            oracle=dict(data.get("oracle") or {}),
            id=data.get("id", ""),
        )

    def with_oracle(self, oracle: Mapping[str, Any]) -> "TaskInstance":
        return TaskInstance(self.kind, self.input, self.target, self.seed, dict(oracle), self.id)


@dataclass(frozen=True)
class Verdict:
    correct: bool
    reason: str = "ok"
    detail: str = ""
    checks: Mapping[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"correct": self.correct, "reason": self.reason, "detail": self.detail, "checks": dict(self.checks)}

    @classmethod
    def fail(cls, reason: str, detail: str = "", **checks: bool) -> "Verdict":
        return cls(False, reason, detail, checks)


def write_instances(path: str | os.PathLike, instances: Iterable[TaskInstance]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), sort_keys=True) + "\n")
            n += 1
    return n


def read_instances(path: str | os.PathLike) -> list[TaskInstance]:
    with open(path, encoding="utf-8") as fh:
        return [TaskInstance.from_dict(json.loads(line)) for line in fh if line.strip()]
