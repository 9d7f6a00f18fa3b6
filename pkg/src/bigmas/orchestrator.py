"""Global routing between agent nodes.

A unique successor is taken without a model call. At a branch the router
model sees the whole workspace, a digest of recent steps and the candidate
ids; an unusable reply (or a backend failure) falls back to the first
declared successor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Sequence

from bigmas.gateway import ChatRequest, Gateway, GatewayError, Usage
from bigmas.graph import AgentGraph, successors
from bigmas.workspace import Workspace, serialize_workspace

__all__ = ["HISTORY_DIGEST", "RoutingDecision", "route", "parse_route_choice", "history_digest"]

HISTORY_DIGEST = 5


@dataclass(frozen=True)
class RoutingDecision:
    next: str
    mode: str  # deterministic | model | fallback
    candidates: tuple[str, ...] = ()
    rationale_text: str = ""
    prompt: str = ""
    usage: Usage | None = None
    error: str = ""

    @property
    def branching(self) -> bool:
        return len(self.candidates) > 1

    def to_dict(self) -> dict:
        return {
            "next": self.next,
            "mode": self.mode,
            "candidates": list(self.candidates),
            "rationale_text": self.rationale_text,
            "prompt": self.prompt,
            "usage": self.usage.to_dict() if self.usage else None,
            "error": self.error,
        }


def _token_pattern(candidate: str) -> re.Pattern:
    return re.compile(rf"(?<![\w-]){re.escape(candidate)}(?![\w-])", re.IGNORECASE)


def parse_route_choice(text: str, candidates: Sequence[str]) -> str | None:
    """Match a router reply to a candidate id.

    A line consisting of just an id wins (the last such line); otherwise the
    candidate whose whole-token occurrence comes last in the text.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    text = text or ""
    lowered = {c.lower(): c for c in candidates}
    exact = None
    for line in text.splitlines():
        bare = line.strip().strip("`'\"*.:").strip().lower()
        if bare in lowered:
            exact = lowered[bare]
    if exact is not None:
        return exact
    best, best_pos = None, -1
    for cand in candidates:
        for m in _token_pattern(cand).finditer(text):
            if m.start() > best_pos:
                best, best_pos = cand, m.start()
    return best


def history_digest(history: Sequence[Any], limit: int = HISTORY_DIGEST) -> str:
    """Last ``limit`` steps as ``(node, action, target path, validation status)`` lines.

    Records may be step dicts or objects with a ``to_dict`` method.
    """
    rows = []
    for rec in list(history)[-limit:]:
        if hasattr(rec, "to_dict"):
            rec = rec.to_dict()
        applied = rec.get("applied") or {}
        rows.append(
            f"step {rec['step']}: node={rec['node']} action={applied.get('action', '-')} "
            f"path={applied.get('target_path', '-')} validation={rec['validation']['status']}"
        )
    return "\n".join(rows) if rows else "(no steps yet)"


_ROUTER_SYSTEM = (
    "You are the global router of a multi-agent graph. Given the shared workspace and recent history, pick "
    "which agent runs next. Send work to the sink once a verified answer exists; avoid unproductive loops."
)


def route(
    ws: Workspace,
    history: Sequence[Any],
    current: str,
    graph: AgentGraph,
    gateway: Gateway,
    temperature: float = 0.7,
    max_output_tokens: int | None = None,
) -> RoutingDecision:
    succ = successors(graph, current)
    if not succ:
        return RoutingDecision(graph.sink, "fallback", (), error="no successors; routed to sink")
    if len(succ) == 1:
        return RoutingDecision(succ[0], "deterministic", tuple(succ))
    roles = "\n".join(f"- {c}: {graph.nodes[c].role}" for c in succ)
    prompt = (
        f"Workspace:\n{serialize_workspace(ws)}\n\nRecent steps:\n{history_digest(history)}\n\n"
        f"The node {current!r} just finished. Candidates for the next node:\n{roles}\n\n"
        "Reply with the id of the chosen node on its own line."
    )
    req = ChatRequest(
        _ROUTER_SYSTEM,
        prompt,
        phase="routing",
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        meta={"current": current, "candidates": list(succ), "workspace": ws.to_dict()},
    )
    try:
        resp = gateway.complete(req)
    except GatewayError as exc:
        return RoutingDecision(succ[0], "fallback", tuple(succ), prompt=prompt, error=str(exc))
    choice = parse_route_choice(resp.text, succ)
    if choice is None:
        return RoutingDecision(succ[0], "fallback", tuple(succ), resp.text, prompt, resp.usage, "no candidate id in reply")
    return RoutingDecision(choice, "model", tuple(succ), resp.text, prompt, resp.usage)
