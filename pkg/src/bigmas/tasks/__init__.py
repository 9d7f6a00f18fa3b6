"""The three benchmark tasks behind one dispatch surface."""

from __future__ import annotations

import json
from typing import Any

from bigmas.tasks import game24, sixfives, tol
from bigmas.tasks.instance import TASK_KINDS, TaskInstance, Verdict, read_instances, write_instances

__all__ = [
    "TASK_KINDS",
    "TaskInstance",
    "Verdict",
    "generate_instances",
    "verify",
    "oracle_solve",
    "oracle_answer",
    "render_context",
    "constraints_text",
    "read_instances",
    "write_instances",
]

_MODULES = {"game24": game24, "sixfives": sixfives, "tol": tol}


def _module(kind: str):
    try:
        return _MODULES[kind]
    except KeyError:
        raise ValueError(f"unknown task kind {kind!r}; expected one of {TASK_KINDS}") from None


def generate_instances(kind: str, count: int, seed: int) -> list[TaskInstance]:
    """Seeded, reproducible instances with oracle metadata attached."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _module(kind).generate(count, seed)


def verify(instance: TaskInstance, answer: Any, *, require_optimal: bool = True) -> Verdict:
    """Judge ``answer`` against every constraint of ``instance``.

    ``require_optimal`` only matters for Tower of London, where it can be
    relaxed to plain goal-reaching.
    """
    if instance.kind == "tol":
        return tol.verify(instance, answer, require_optimal=require_optimal)
    if not isinstance(answer, str):
        answer = "" if answer is None else str(answer)
    return _module(instance.kind).verify(instance, answer)


def oracle_solve(instance: TaskInstance) -> dict:
    """Reference solution by exhaustive or breadth-first search."""
    return _module(instance.kind).oracle(instance)


def oracle_answer(instance: TaskInstance) -> str | None:
    """The oracle solution as answer text (cached on the instance when present)."""
    solution = instance.oracle.get("solution") if instance.oracle else None
    if solution is None:
        solution = oracle_solve(instance)["solution"]
    if solution is None:
        return None
    if isinstance(solution, list):
        return json.dumps(solution)
    return str(solution)


def render_context(instance: TaskInstance) -> str:
    return _module(instance.kind).render(instance)


def constraints_text(instance: TaskInstance) -> str:
    return _module(instance.kind).constraints(instance)
