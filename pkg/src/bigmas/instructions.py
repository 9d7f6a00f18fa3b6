"""Decode a node's raw reply into a :class:`~bigmas.workspace.WriteInstruction`.

Strategies are tried in order and the first success wins:

1. the whole reply is a JSON object with ``target_path``, ``action``, ``payload``;
2. the last fenced code block holds such an object;
3. the last balanced ``{...}`` that contains an ``"action"`` key;
4. ``target_path:`` / ``action:`` / ``payload:`` header lines, where the
   payload runs to the end of the reply (JSON if it parses, text otherwise).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from bigmas.workspace import ACTIONS, WriteInstruction

__all__ = [
    "INSTRUCTION_FORMAT",
    "ParseOutcome",
    "parse_instruction",
    "fenced_blocks",
    "balanced_objects",
    "extract_object",
]

INSTRUCTION_FORMAT = """\
Reply with exactly one JSON object (a ```json fenced block is fine):
{"target_path": "<field or dotted.path>", "action": "append" | "update" | "replace", "payload": <value>}
- append adds the payload as one new element of a list field
- update merges the payload (a JSON object) into a map field
- replace overwrites the field with the payload
The payload must be non-empty."""

_MAX_OBJECT_STARTS = 256
_FENCE = re.compile(r"```[\w+.-]*[ \t]*\n?(.*?)```", re.DOTALL)
_HEADER = re.compile(r"^\s*(?:[-*+]\s+)?[*_`]*\s*(target_path|path|action|payload)\s*[*_`]*\s*[:=]\s*(.*)$", re.IGNORECASE)


@dataclass
class ParseOutcome:
    instruction: WriteInstruction | None = None
    strategy_used: int | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.instruction is not None

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction.to_dict() if self.instruction else None,
            "strategy": self.strategy_used,
            "diagnostics": list(self.diagnostics),
        }


def fenced_blocks(text: str) -> list[str]:
    return [m.group(1) for m in _FENCE.finditer(text)]


def balanced_objects(text: str) -> Iterator[str]:
    """Yield balanced ``{...}`` spans, last-starting first.

    String literals are honoured so braces inside JSON strings do not count.
    """
    starts = [i for i, ch in enumerate(text) if ch == "{"]
    # bounds the quadratic worst case on brace-heavy replies
    for start in reversed(starts[-_MAX_OBJECT_STARTS:]):
        depth = 0
        in_str = False
        escaped = False
        for j in range(start, len(text)):
            ch = text[j]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : j + 1]
                    break


def _loads_object(text: str) -> dict | None:
    try:
        value = json.loads(text)
    except (ValueError, RecursionError):
        return None
    return value if isinstance(value, dict) else None


def extract_object(text: str, accept: Callable[[dict], bool]) -> tuple[dict | None, int | None, list[str]]:
    """Shared JSON-object extraction (strategies 1-3) used by every parser here.

    Returns ``(object, strategy, diagnostics)``.
    """
    diagnostics = []
    obj = _loads_object(text.strip())
    if obj is not None and accept(obj):
        return obj, 1, diagnostics
    diagnostics.append("strategy 1: reply is not a single JSON object of the expected shape")

    blocks = fenced_blocks(text)
    if blocks:
        obj = _loads_object(blocks[-1].strip())
        if obj is not None and accept(obj):
            return obj, 2, diagnostics
        diagnostics.append("strategy 2: last fenced block is not a JSON object of the expected shape")
    else:
        diagnostics.append("strategy 2: no fenced code block")

    for candidate in balanced_objects(text):
        obj = _loads_object(candidate)
        if obj is not None and accept(obj):
            return obj, 3, diagnostics
    diagnostics.append("strategy 3: no balanced JSON object of the expected shape")
    return None, None, diagnostics


def _to_instruction(obj: dict) -> WriteInstruction:
    path = obj["target_path"]
    if isinstance(path, str):
        segments = tuple(path.strip().split("."))
    elif isinstance(path, list) and all(isinstance(s, str) for s in path):
        segments = tuple(s.strip() for s in path)
    else:
        raise ValueError(f"target_path must be a string or a list of strings, got {path!r}")
    action = obj["action"]
    if not isinstance(action, str) or action.strip().lower() not in ACTIONS:
        raise ValueError(f"action must be one of {ACTIONS}, got {action!r}")
    return WriteInstruction(segments, action.strip().lower(), obj["payload"])


def _instruction_shaped(obj: dict) -> bool:
    if not {"target_path", "action", "payload"} <= obj.keys():
        return False
    try:
        _to_instruction(obj)
    except (ValueError, TypeError):
        return False
    return True


def _headers(text: str) -> WriteInstruction | None:
    lines = text.splitlines()
    found: dict[str, str] = {}
    payload_lines: list[str] | None = None
    for line in lines:
        if payload_lines is not None:
            payload_lines.append(line)
            continue
        m = _HEADER.match(line)
        if not m:
            continue
        key = m.group(1).lower()
        key = "target_path" if key == "path" else key
        if key == "payload":
            payload_lines = [m.group(2)]
        elif key not in found:
            found[key] = m.group(2).strip().strip("`'\"").strip()
    if payload_lines is None or "target_path" not in found or "action" not in found:
        return None
    raw = "\n".join(payload_lines).strip()
    blocks = fenced_blocks(raw)
    if blocks:
        raw = blocks[-1].strip()
    payload: Any = raw
    try:
        payload = json.loads(raw)
    except (ValueError, RecursionError):
        # a JSON container followed by trailing prose keeps just the container
        try:
            value, _ = json.JSONDecoder().raw_decode(raw)
        except (ValueError, RecursionError):
            value = None
        if isinstance(value, (list, dict)):
            payload = value
    obj = {"target_path": found["target_path"], "action": found["action"], "payload": payload}
    return _to_instruction(obj) if _instruction_shaped(obj) else None


def parse_instruction(text: str) -> ParseOutcome:
    """Never raises; failure is an outcome with per-strategy diagnostics."""
    if not isinstance(text, str):
        return ParseOutcome(diagnostics=["input is not text"])
    text = text.lstrip("\ufeff")
    try:
        obj, strategy, diagnostics = extract_object(text, _instruction_shaped)
        if obj is not None:
            return ParseOutcome(_to_instruction(obj), strategy, diagnostics)
        instr = _headers(text)
    except Exception as exc:  # pragma: no cover - the fuzz suite guards this
        return ParseOutcome(diagnostics=[f"parser error: {type(exc).__name__}: {exc}"])
    if instr is not None:
        return ParseOutcome(instr, 4, diagnostics)
    diagnostics.append("strategy 4: no target_path/action/payload header lines")
    return ParseOutcome(diagnostics=diagnostics)
