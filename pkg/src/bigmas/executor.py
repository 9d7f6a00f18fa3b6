"""Phase 2: execute a designed agent graph against the shared workspace.

Each step runs the active node, validates its write (re-prompting with the
structured error up to ``r`` times), applies it, then routes. A node that
never produces a valid write sends control to the sink, which still gets one
chance to answer. When the step budget runs out, or the sink leaves the
answer slot empty, :func:`fallback_resolve` fills it from the work area.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from bigmas.config import RunConfig
from bigmas.designer import DesignOutput, DesignResult, design as design_graph
from bigmas.gateway import ChatRequest, ChatResponse, Gateway, GatewayError, UsageLedger
from bigmas.graph import AgentGraph, NodeSpec, validate_graph
from bigmas.instructions import INSTRUCTION_FORMAT, parse_instruction
from bigmas.orchestrator import route
from bigmas.tasks import TaskInstance, verify
from bigmas.trace import StepRecord
from bigmas.workspace import (
    ANSWER_KEY,
    NO_ANSWER,
    ValidationResult,
    Workspace,
    advance_sys,
    apply_write,
    init_workspace,
    is_empty_payload,
    serialize_workspace,
    validate_write,
)

__all__ = [
    "ExecutionResult",
    "FallbackOutcome",
    "node_prompt",
    "execute_node",
    "run",
    "fallback_resolve",
    "answer_text",
    "solve",
]

log = logging.getLogger(__name__)

ANSWER_FIELDS = ("expr", "answer", "solution", "moves")


@dataclass
class FallbackOutcome:
    answer: str
    source: str  # verified | recent | empty
    written: Any
    checked: int = 0

    def to_dict(self) -> dict:
        return {"answer": self.answer, "source": self.source, "written": self.written, "checked": self.checked}


@dataclass
class ExecutionResult:
    answer: str
    termination: str  # sink | budget-exhausted | node-failure-to-sink
    history: list[StepRecord]
    ledger: UsageLedger
    design: DesignOutput
    workspace: Workspace
    design_source: str = "given"
    fallback: FallbackOutcome | None = None
    trace: list[dict] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.history)

    @property
    def routing_decisions(self) -> int:
        """Router invocations at branching nodes."""
        return sum(1 for s in self.history if s.routing and len(s.routing["candidates"]) > 1)

    @property
    def hops(self) -> int:
        return sum(1 for s in self.history if s.next is not None)

    @property
    def corrections(self) -> int:
        return sum(s.corrections for s in self.history)


def answer_text(value: Any) -> str:
    """Flatten an answer payload (text, candidate map, or move list) to text."""
    if value is None or value == NO_ANSWER:
        return ""
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, dict):
        for key in ANSWER_FIELDS:
            if key in value and not is_empty_payload(value[key]):
                return answer_text(value[key])
        return json.dumps(value, sort_keys=True)
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


_NODE_SYSTEM = (
    "You are one agent in a team that solves a problem by reading and writing a shared workspace. "
    "Do only your own role. Your single output is one write instruction to the workspace."
)


def node_prompt(
    node: NodeSpec,
    ws: Workspace,
    contract: str,
    is_sink: bool = False,
    prior_error: ValidationResult | None = None,
) -> tuple[str, str]:
    parts = [
        f"Your node id: {node.id}\nYour role: {node.role}",
        f"Your responsibilities: {node.responsibilities}" if node.responsibilities else "",
        f"Workspace contract:\n{contract}",
        f"Current workspace (ctx is read-only; write only into work):\n{serialize_workspace(ws)}",
        INSTRUCTION_FORMAT,
    ]
    if is_sink:
        parts.append(
            f'You are the sink node: write the final answer with target_path "{ANSWER_KEY}" and action "replace". '
            "Use the answer format stated in ctx."
        )
    else:
        parts.append(f'Do not write to "{ANSWER_KEY}"; only the sink node may.')
    if prior_error is not None:
        err = prior_error.error
        parts.append(
            "Your previous instruction was rejected.\n"
            f"error code: {err['code']}\npath: {err['path'] or '-'}\naction: {err['action'] or '-'}\n"
            f"hint: {err['hint']}\nCorrect the instruction and reply again."
        )
    return _NODE_SYSTEM, "\n\n".join(p for p in parts if p)


def execute_node(
    node: NodeSpec,
    ws: Workspace,
    contract: str,
    gateway: Gateway,
    *,
    is_sink: bool = False,
    prior_error: ValidationResult | None = None,
    config: RunConfig | None = None,
    attempt: int = 0,
) -> tuple[ChatResponse, str]:
    """One node-execution call; returns the raw response and the user prompt."""
    config = config or RunConfig()
    system, user = node_prompt(node, ws, contract, is_sink, prior_error)
    req = ChatRequest(
        system,
        user,
        phase="node_execution",
        temperature=config.temperature,
        max_output_tokens=config.max_tokens["node_execution"],
        meta={
            "node": node.id,
            "role": node.role,
            "is_sink": is_sink,
            "attempt": attempt,
            "workspace": ws.to_dict(),
            "prior_error": prior_error.error if prior_error else None,
        },
    )
    return gateway.complete(req), user


def _iter_candidates(node: Any):
    if isinstance(node, str):
        if node.strip():
            yield node.strip()
    elif isinstance(node, dict):
        for key, value in node.items():
            if key in ANSWER_FIELDS and isinstance(value, list) and value:
                yield json.dumps(value)
            else:
                yield from _iter_candidates(value)
    elif isinstance(node, list):
        for item in node:
            yield from _iter_candidates(item)


def fallback_resolve(
    ws: Workspace, history: Sequence[StepRecord], verifier: Callable[[str], bool]
) -> tuple[Workspace, FallbackOutcome]:
    """Fill an empty answer slot from the work area.

    The first candidate (depth-first) that passes ``verifier`` wins; failing
    that, the most recent non-empty applied write; failing that, an explicit
    no-answer marker.
    """
    if ws.ans is not None:
        raise ValueError("answer slot already written")
    checked = 0
    outcome = None
    for candidate in _iter_candidates(ws.work):
        checked += 1
        if verifier(candidate):
            outcome = FallbackOutcome(candidate, "verified", candidate, checked)
            break
    if outcome is None:
        for rec in reversed(history):
            if rec.applied is not None and not is_empty_payload(rec.applied.payload):
                text = answer_text(rec.applied.payload)
                if text:
                    outcome = FallbackOutcome(text, "recent", text, checked)
                    break
    if outcome is None:
        outcome = FallbackOutcome("", "empty", NO_ANSWER, checked)
    new = ws.copy()
    new.ans = outcome.written
    return new, outcome


def _attempt_node(
    node: NodeSpec,
    ws: Workspace,
    design: DesignOutput,
    gateway: Gateway,
    config: RunConfig,
    ledger: UsageLedger,
):
    """Initial call plus up to ``r`` corrections; returns (instruction|None, validation, attempts)."""
    graph = design.graph
    is_sink = node.id == graph.sink
    attempts: list[dict] = []
    error: ValidationResult | None = None
    for k in range(config.r + 1):
        entry: dict[str, Any] = {"attempt": k, "prompt": None, "response": None, "parse": None, "usage": None}
        try:
            resp, prompt = execute_node(
                node, ws, design.contract, gateway, is_sink=is_sink, prior_error=error, config=config, attempt=k
            )
        except GatewayError as exc:
            log.warning("node %s: gateway failure on attempt %d: %s", node.id, k, exc)
            error = ValidationResult.fail("gateway-error", f"the model call failed ({exc}); try again")
            entry["validation"] = error.to_dict()
            attempts.append(entry)
            continue
        ledger.record("node_execution", resp.usage)
        entry.update(prompt=prompt, response=resp.text, usage=resp.usage.to_dict())
        outcome = parse_instruction(resp.text)
        entry["parse"] = outcome.to_dict()
        if outcome.ok:
            validation = validate_write(outcome.instruction, ws, node.id, graph)
        else:
            validation = ValidationResult.fail(
                "parse-error",
                "could not read a write instruction from your reply: " + " | ".join(outcome.diagnostics),
            )
        entry["validation"] = validation.to_dict()
        attempts.append(entry)
        if validation.passed:
            return outcome.instruction, validation, attempts
        error = validation
    return None, error, attempts


def run(
    instance: TaskInstance,
    design: DesignOutput | DesignResult,
    config: RunConfig | None,
    gateway: Gateway,
    ledger: UsageLedger | None = None,
) -> ExecutionResult:
    """Execute ``design`` on ``instance`` and return the full result with trace.

    ``ledger`` may already hold design-phase usage; node and routing usage
    are added to it.
    """
    config = config or RunConfig()
    design_source, design_attempts = "given", []
    if isinstance(design, DesignResult):
        design_source, design_attempts = design.source, design.attempts
        design = design.design
    graph: AgentGraph = design.graph
    check = validate_graph(graph)
    if not check:
        raise ValueError(f"invalid graph ({check.rule}): {check.detail}")
    ledger = ledger if ledger is not None else UsageLedger()

    trace = [
        {
            "record": "header",
            "instance": instance.to_dict(),
            "design": design.to_dict(),
            "design_source": design_source,
            "design_attempts": design_attempts,
            "config": config.to_dict(),
        }
    ]
    ws = init_workspace(instance, design.work_schema)
    history: list[StepRecord] = []
    v = graph.source
    t = 0
    sink_executed = False
    failed_to_sink = False

    while t < config.t_max:
        node = graph.nodes[v]
        pre = serialize_workspace(ws)
        instr, validation, attempts = _attempt_node(node, ws, design, gateway, config, ledger)
        if instr is not None:
            ws = apply_write(instr, ws)
        post = serialize_workspace(ws)
        record = StepRecord(t, v, attempts, len(attempts) - 1, validation, instr, pre, post)
        history.append(record)

        if v == graph.sink:
            sink_executed = True
        elif instr is not None:
            decision = route(
                ws, history, v, graph, gateway, config.temperature, config.max_tokens["routing"]
            )
            if decision.usage is not None:
                ledger.record("routing", decision.usage)
            record.routing = decision.to_dict()
            record.next, record.mode = decision.next, decision.mode
        else:
            failed_to_sink = True
            record.next, record.mode = graph.sink, "failure"

        advance_sys(ws, v, record.corrections, record.next, record.mode)
        t += 1
        trace.append(record.to_dict())
        if sink_executed:
            break
        v = record.next

    if sink_executed:
        termination = "node-failure-to-sink" if failed_to_sink else "sink"
    else:
        termination = "budget-exhausted"

    fallback = None
    if ws.ans is None:
        ws, fallback = fallback_resolve(ws, history, lambda text: verify(instance, text).correct)
    answer = fallback.answer if fallback else answer_text(ws.ans)

    result = ExecutionResult(
        answer=answer,
        termination=termination,
        history=history,
        ledger=ledger,
        design=design,
        workspace=ws,
        design_source=design_source,
        fallback=fallback,
        trace=trace,
    )
    trace.append(
        {
            "record": "result",
            "answer": answer,
            "termination": termination,
            "steps": result.steps,
            "routing_decisions": result.routing_decisions,
            "hops": result.hops,
            "fallback": fallback.to_dict() if fallback else None,
            "ledger": ledger.to_dict(),
            "final": serialize_workspace(ws),
        }
    )
    return result


def solve(instance: TaskInstance, gateway: Gateway, config: RunConfig | None = None) -> ExecutionResult:
    """Both phases: design a graph for ``instance``, then execute it."""
    config = config or RunConfig()
    ledger = UsageLedger()
    return run(instance, design_graph(instance, gateway, config, ledger), config, gateway, ledger)
