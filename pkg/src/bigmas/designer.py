"""Phase 1: turn a problem instance into (agent graph, work schema, contract)."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from bigmas.config import RunConfig
from bigmas.gateway import ChatRequest, Gateway, GatewayError, UsageLedger
from bigmas.graph import MAX_NODES, AgentGraph, GraphFormatError, NodeSpec, validate_graph
from bigmas.instructions import extract_object
from bigmas.tasks import TaskInstance, render_context
from bigmas.workspace import ANSWER_KEY, SchemaError, init_workspace

__all__ = ["DesignOutput", "DesignError", "DesignResult", "design", "parse_design", "default_design", "design_prompt"]


class DesignError(ValueError):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class DesignOutput:
    graph: AgentGraph
    work_schema: Mapping[str, Any]
    contract: str

    def to_dict(self) -> dict:
        doc = self.graph.to_dict()
        doc["work_schema"] = copy.deepcopy(dict(self.work_schema))
        doc["contract"] = self.contract
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DesignOutput":
        return cls(AgentGraph.from_dict(data), copy.deepcopy(dict(data["work_schema"])), data["contract"])


@dataclass
class DesignResult:
    design: DesignOutput
    source: str  # "model" | "fallback"
    attempts: list[dict] = field(default_factory=list)

    @property
    def used_fallback(self) -> bool:
        return self.source == "fallback"


def _contract_text(raw: Any) -> str:
    if isinstance(raw, str):
        return raw.strip()
    if isinstance(raw, Mapping):
        return "\n".join(f"{k}: {v if isinstance(v, str) else json.dumps(v)}" for k, v in raw.items())
    if isinstance(raw, list):
        return "\n".join(str(item) for item in raw)
    return ""


def parse_design(text: str) -> DesignOutput:
    """Extract and check a design document; raises :class:`DesignError`."""
    doc, _, diagnostics = extract_object(text or "", lambda o: "nodes" in o)
    if doc is None:
        raise DesignError("no-document-found", "; ".join(diagnostics))
    try:
        graph = AgentGraph.from_dict(doc)
    except GraphFormatError as exc:
        raise DesignError("invalid-graph", str(exc)) from exc
    check = validate_graph(graph)
    if not check:
        raise DesignError("invalid-graph", f"{check.rule}: {check.detail}")
    schema = doc.get("work_schema")
    if not isinstance(schema, Mapping):
        raise DesignError("invalid-schema", "'work_schema' must be an object")
    if ANSWER_KEY in schema:
        raise DesignError("schema-shadows-answer-path", f"work_schema may not define {ANSWER_KEY!r}")
    try:
        init_workspace({}, schema)
    except SchemaError as exc:
        raise DesignError("invalid-schema", str(exc)) from exc
    contract = _contract_text(doc.get("contract"))
    if not contract:
        raise DesignError("invalid-contract", "'contract' is missing or empty")
    missing = [n for n in graph.nodes if n not in contract]
    if missing:
        raise DesignError("invalid-contract", f"contract does not mention node(s) {', '.join(missing)}")
    return DesignOutput(graph, dict(schema), contract)


_TASK_NOTES = {
    "game24": "each of the four numbers used exactly once, value exactly 24",
    "sixfives": "exactly six digit-5s (concatenation like 55 counts each 5), value exactly the target",
    "tol": "legal top-bead moves under peg capacities (3, 2, 1), shortest sequence reaching the goal",
}


def default_design(kind: str) -> DesignOutput:
    """Fixed generator -> validator -> formatter chain for ``kind``."""
    if kind not in _TASK_NOTES:
        raise ValueError(f"unknown task kind {kind!r}")
    schema: dict[str, Any] = {"candidates": [], "validated": {}}
    if kind == "tol":
        schema["moves"] = []
        item = '{"moves": [[from, to], ...]}'
    else:
        item = '{"expr": "<expression>"}'
    nodes = (
        NodeSpec("generator", "candidate generator", f"Reads ctx and work; appends one candidate {item} to candidates."),
        NodeSpec(
            "validator",
            "validator",
            f"Checks the latest candidate against the constraints ({_TASK_NOTES[kind]}); updates validated "
            'with {"candidate": ..., "status": "verified" or "rejected", "reason": ...}.',
        ),
        NodeSpec(
            "formatter",
            "answer formatter",
            f"Sink. Reads validated and candidates; writes the final answer to {ANSWER_KEY!r} with action replace.",
        ),
    )
    graph = AgentGraph.chain(*nodes)
    contract = "\n".join(f"{n.id}: {n.responsibilities}" for n in nodes)
    if kind == "tol":
        contract += "\nmoves: optional scratch list of single moves tried so far."
    return DesignOutput(graph, schema, contract)


_SKELETONS = """\
Example skeletons (roles only; adapt freely):
- arithmetic target puzzle: "expression generator" -> "validator" -> "answer formatter"
- digit-constrained expression puzzle: "strategy planner" -> "expression generator" -> "rule checker" \
-> "answer formatter", with the checker able to loop back to the generator
- peg planning puzzle: "state analyzer" -> "move proposer" -> "move validator" -> "plan refiner" \
-> "answer formatter", with a cycle between proposer and validator"""

_FORMAT = f"""\
Output one JSON object inside a ```json fenced block with these fields:
{{
  "nodes": [{{"id": "<short id>", "role": "<role descriptor>", "responsibilities": "<what it reads and writes>"}}],
  "edges": [["<from id>", "<to id>"], ...],
  "source": "<id of the first node>",
  "sink": "<id of the node that writes the final answer>",
  "work_schema": {{"<field>": [] or {{}} or "" ...}},
  "contract": "<one line per node id: the fields it reads and writes>"
}}
Rules: at most {MAX_NODES} nodes; source and sink differ; the sink must be reachable from the source;
cycles are allowed for iterative refinement; edge order matters (first listed successor is the default route);
work_schema keys must not contain '.' and must not be "{ANSWER_KEY}" (reserved: only the sink writes the
final answer, to target path "{ANSWER_KEY}" with action replace); the contract must mention every node id."""


def design_prompt(instance: TaskInstance) -> tuple[str, str]:
    system = (
        "You design a small team of specialised agents for one reasoning problem. The agents never talk to "
        "each other directly; they only read and write a shared workspace. Propose the agent graph, the "
        "initial layout of the shared work area, and a contract saying what each agent reads and writes."
    )
    user = f"Problem:\n{render_context(instance)}\n\n{_FORMAT}\n\n{_SKELETONS}"
    return system, user


def design(
    instance: TaskInstance,
    gateway: Gateway,
    config: RunConfig | None = None,
    ledger: UsageLedger | None = None,
) -> DesignResult:
    """Ask the model for a design; one retry with the error, then fall back."""
    config = config or RunConfig()
    system, user = design_prompt(instance)
    attempts: list[dict] = []
    prompt = user
    for _ in range(2):
        req = ChatRequest(
            system,
            prompt,
            phase="design",
            temperature=config.temperature,
            max_output_tokens=config.max_tokens["design"],
            meta={"task": instance.kind, "instance": instance.to_dict()},
        )
        try:
            resp = gateway.complete(req)
        except GatewayError as exc:
            attempts.append({"prompt": prompt, "response": None, "usage": None, "error": {"code": "gateway-error", "detail": str(exc)}})
            continue
        if ledger is not None:
            ledger.record("design", resp.usage)
        attempt = {"prompt": prompt, "response": resp.text, "usage": resp.usage.to_dict(), "error": None}
        attempts.append(attempt)
        try:
            return DesignResult(parse_design(resp.text), "model", attempts)
        except DesignError as exc:
            attempt["error"] = {"code": exc.code, "detail": exc.detail}
            prompt = (
                f"{user}\n\nYour previous design was rejected ({exc.code}: {exc.detail}). "
                "Return a corrected design in the required format."
            )
    return DesignResult(default_design(instance.kind), "fallback", attempts)
