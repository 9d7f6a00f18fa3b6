"""The four-partition shared workspace and its write protocol.

Partitions: ``ctx`` (read-only problem statement), ``work`` (agent-writable
tree of named fields), ``sys`` (step counter, routing history, correction
counts) and ``ans`` (answer slot, written once, by the sink only).

Nodes never touch the workspace directly; they emit a
:class:`WriteInstruction` which must pass :func:`validate_write` before
:func:`apply_write` produces the next state.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Mapping, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from bigmas.graph import AgentGraph

__all__ = [
    "ANSWER_KEY",
    "ANSWER_PATH",
    "ACTIONS",
    "NO_ANSWER",
    "SchemaError",
    "WorkspaceError",
    "Workspace",
    "WriteInstruction",
    "ValidationResult",
    "init_workspace",
    "resolve_path",
    "validate_write",
    "apply_write",
    "serialize_workspace",
    "parse_workspace",
    "is_empty_payload",
    "advance_sys",
]

ANSWER_KEY = "answer"
ANSWER_PATH = (ANSWER_KEY,)
ACTIONS = ("append", "update", "replace")
# written by the fallback resolver when nothing usable exists in the work area
NO_ANSWER = "<no-answer>"


class SchemaError(ValueError):
    """Malformed work-area template."""


class WorkspaceError(RuntimeError):
    """Internal protocol violation (e.g. applying an unvalidated write)."""


@dataclass
class Workspace:
    ctx: dict
    work: dict
    sys: dict
    ans: Any = None

    def copy(self) -> "Workspace":
        return Workspace(
            copy.deepcopy(self.ctx),
            copy.deepcopy(self.work),
            copy.deepcopy(self.sys),
            copy.deepcopy(self.ans),
        )

    @property
    def step(self) -> int:
        return self.sys["step"]

    def to_dict(self) -> dict:
        return {"ctx": self.ctx, "work": self.work, "sys": self.sys, "ans": self.ans}


@dataclass(frozen=True)
class WriteInstruction:
    path: tuple[str, ...]
    action: str
    payload: Any = field(compare=True)

    def __post_init__(self):
        path = tuple(self.path)
        if not path or not all(isinstance(s, str) and s for s in path):
            raise ValueError(f"path must be non-empty string segments, got {self.path!r}")
        object.__setattr__(self, "path", path)
        action = str(self.action).lower()
        if action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        object.__setattr__(self, "action", action)

    def to_dict(self) -> dict:
        return {"target_path": ".".join(self.path), "action": self.action, "payload": self.payload}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class ValidationResult:
    status: str  # "pass" | "fail"
    code: str = ""
    path: tuple[str, ...] = ()
    action: str = ""
    hint: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def error(self) -> dict:
        if self.passed:
            return {}
        return {"code": self.code, "path": ".".join(self.path), "action": self.action, "hint": self.hint}

    @classmethod
    def ok(cls) -> "ValidationResult":
        return cls("pass")

    @classmethod
    def fail(cls, code: str, hint: str, path: Sequence[str] = (), action: str = "") -> "ValidationResult":
        return cls("fail", code, tuple(path), action, hint)

    def to_dict(self) -> dict:
        return {"status": self.status, "error": self.error}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ValidationResult":
        if data["status"] == "pass":
            return cls.ok()
        err = data["error"]
        path = tuple(err["path"].split(".")) if err.get("path") else ()
        return cls("fail", err["code"], path, err.get("action", ""), err.get("hint", ""))


def _check_schema(node: Any, where: str) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            if not isinstance(key, str) or not key:
                raise SchemaError(f"{where}: keys must be non-empty strings")
            if "." in key:
                raise SchemaError(f"{where}: key {key!r} contains '.'")
            _check_schema(value, f"{where}.{key}")
    elif isinstance(node, list):
        for i, value in enumerate(node):
            _check_schema(value, f"{where}[{i}]")
    elif node is not None and not isinstance(node, (str, int, float, bool)):
        raise SchemaError(f"{where}: unsupported value of type {type(node).__name__}")


def init_workspace(ctx: Mapping | Any, schema: Mapping | None = None) -> Workspace:
    """Create a fresh workspace.

    ``ctx`` is either a ready context mapping or a task instance (anything
    with a ``to_context()`` method). ``schema`` is deep-copied into ``work``.
    """
    schema = {} if schema is None else schema
    if not isinstance(schema, Mapping):
        raise SchemaError("work schema must be a mapping")
    schema = copy.deepcopy(dict(schema))
    _check_schema(schema, "work")
    if ANSWER_KEY in schema:
        raise SchemaError(f"work schema shadows the reserved answer path {ANSWER_KEY!r}")
    if hasattr(ctx, "to_context"):
        ctx = ctx.to_context()
    sys_part = {"step": 0, "routing": [], "corrections": {}}
    return Workspace(ctx=copy.deepcopy(dict(ctx)), work=schema, sys=sys_part, ans=None)


def _lookup(work: Any, path: Sequence[str]) -> tuple[bool, Any]:
    node = work
    for segment in path:
        if not isinstance(node, dict) or segment not in node:
            return False, None
        node = node[segment]
    return True, node


def resolve_path(ws: Workspace, path: Sequence[str]) -> str:
    """Kind of the field at ``path``: list, map, scalar, absent or answer-slot."""
    path = tuple(path)
    if path == ANSWER_PATH:
        return "answer-slot"
    if not path:
        return "absent"
    found, value = _lookup(ws.work, path)
    if not found:
        return "absent"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "map"
    return "scalar"


def is_empty_payload(payload: Any) -> bool:
    if payload is None:
        return True
    if isinstance(payload, (str, list, dict)):
        return len(payload.strip() if isinstance(payload, str) else payload) == 0
    return False


def validate_write(instr: WriteInstruction, ws: Workspace, current_node: str, graph: "AgentGraph") -> ValidationResult:
    kind = resolve_path(ws, instr.path)
    where = ".".join(instr.path)
    if kind == "answer-slot" and current_node != graph.sink:
        return ValidationResult.fail(
            "answer-write-by-non-sink",
            f"only the sink node {graph.sink!r} may write {ANSWER_KEY!r}; write to a work field instead",
            instr.path,
            instr.action,
        )
    if kind == "absent":
        fields = ", ".join(sorted(ws.work)) or "(none)"
        return ValidationResult.fail(
            "unknown-path",
            f"path {where!r} does not exist in the work area; existing top-level fields: {fields}",
            instr.path,
            instr.action,
        )
    if instr.action == "append" and kind != "list":
        return ValidationResult.fail(
            "type-mismatch", f"append requires a list field but {where!r} is a {kind}", instr.path, instr.action
        )
    if instr.action == "update" and kind != "map":
        return ValidationResult.fail(
            "type-mismatch", f"update requires a map field but {where!r} is a {kind}", instr.path, instr.action
        )
    if instr.action == "update" and not isinstance(instr.payload, dict):
        return ValidationResult.fail(
            "type-mismatch", "update payload must be a key-value map", instr.path, instr.action
        )
    if is_empty_payload(instr.payload):
        return ValidationResult.fail(
            "empty-payload", "payload is empty; provide a non-empty value", instr.path, instr.action
        )
    return ValidationResult.ok()


def apply_write(instr: WriteInstruction, ws: Workspace) -> Workspace:
    """Return the next workspace. The input workspace is left untouched."""
    kind = resolve_path(ws, instr.path)
    new = ws.copy()
    payload = copy.deepcopy(instr.payload)
    if kind == "answer-slot":
        if instr.action != "replace":
            raise WorkspaceError(f"{instr.action} on the answer slot")
        if ws.ans is not None:
            raise WorkspaceError("answer slot already written")
        new.ans = payload
        return new
    if kind == "absent":
        raise WorkspaceError(f"apply_write on missing path {instr.path!r}")
    parent = new.work
    for segment in instr.path[:-1]:
        parent = parent[segment]
    key = instr.path[-1]
    if instr.action == "append":
        if kind != "list":
            raise WorkspaceError("append onto a non-list field")
        parent[key].append(payload)
    elif instr.action == "update":
        if kind != "map" or not isinstance(payload, dict):
            raise WorkspaceError("update onto a non-map field")
        parent[key].update(payload)
    else:
        parent[key] = payload
    return new


def advance_sys(ws: Workspace, node: str, corrections: int, next_node: str | None, mode: str | None) -> None:
    """Step bookkeeping in ``sys``, done in place once per executed step."""
    ws.sys["step"] += 1
    if corrections:
        ws.sys["corrections"][node] = ws.sys["corrections"].get(node, 0) + corrections
    if next_node is not None:
        ws.sys["routing"].append({"from": node, "to": next_node, "mode": mode})


def serialize_workspace(ws: Workspace) -> str:
    return json.dumps(ws.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)


def parse_workspace(text: str) -> Workspace:
    data = json.loads(text)
    return Workspace(ctx=data["ctx"], work=data["work"], sys=data["sys"], ans=data["ans"])
