"""Offline stand-ins for the model: oracle-backed agents and random protocol agents.

Both plug into :class:`~bigmas.gateway.ScriptedGateway` as responders and
read the request's ``meta`` hints, never the prompt text.

Oracle agents act by role category. A generator appends the oracle solution
as a candidate, a validator runs the real verifier on the latest candidate,
and the sink formats the best candidate it can find in the work area (or
emits an empty write when there is none). ``broken_generator=True`` makes
every generator write target a missing field, which exercises the
route-to-sink branch and the fallback resolver.
"""

from __future__ import annotations

import json
import random
from typing import Any, Callable

from bigmas.designer import DesignOutput, default_design
from bigmas.gateway import ChatRequest, ScriptedGateway
from bigmas.graph import MAX_NODES, AgentGraph, NodeSpec, classify_role, validate_graph
from bigmas.tasks import TaskInstance, oracle_answer, verify
from bigmas.workspace import ANSWER_KEY

__all__ = [
    "oracle_responder",
    "oracle_gateway",
    "random_graph",
    "random_design",
    "random_protocol_responder",
]


def _instruction(path: str, action: str, payload: Any) -> str:
    body = json.dumps({"target_path": path, "action": action, "payload": payload})
    return f"```json\n{body}\n```"


def _fields(work: dict, kind: type) -> list[str]:
    return [k for k, v in work.items() if isinstance(v, kind)]


def _latest_candidate(work: dict) -> Any:
    for key in _fields(work, list):
        if work[key]:
            return work[key][-1]
    return None


def _candidate_text(item: Any) -> str:
    if isinstance(item, dict):
        for key in ("expr", "answer", "solution", "moves"):
            if key in item:
                value = item[key]
                return value if isinstance(value, str) else json.dumps(value)
    return item if isinstance(item, str) else json.dumps(item)


def _node_reply(instance: TaskInstance, meta: dict, broken_generator: bool) -> str:
    work = meta["workspace"]["work"]
    if meta["is_sink"]:
        validated = [m for m in _fields(work, dict) if work[m].get("status") == "verified"]
        if validated:
            return _instruction(ANSWER_KEY, "replace", _candidate_text(work[validated[0]]["candidate"]))
        latest = _latest_candidate(work)
        # nothing to format: an empty write, which validation rejects
        return _instruction(ANSWER_KEY, "replace", _candidate_text(latest) if latest is not None else "")
    category = classify_role(meta["role"])
    lists, maps = _fields(work, list), _fields(work, dict)
    if category == "Generator" or (category != "Validator" and lists):
        if broken_generator:
            return _instruction("scratchpad.draft", "append", {"note": "candidate"})
        solution = oracle_answer(instance)
        key = "moves" if instance.kind == "tol" else "expr"
        payload = {key: json.loads(solution) if instance.kind == "tol" else solution}
        return _instruction(lists[0] if lists else "notes", "append", payload)
    latest = _latest_candidate(work)
    if latest is None:
        return _instruction(maps[0] if maps else "notes", "update", {"status": "waiting"})
    verdict = verify(instance, _candidate_text(latest))
    status = "verified" if verdict.correct else "rejected"
    return _instruction(
        maps[0] if maps else "notes", "update", {"candidate": latest, "status": status, "reason": verdict.reason}
    )


def _baseline_reply(instance: TaskInstance, meta: dict) -> str:
    solution = oracle_answer(instance) or ""
    step = meta.get("step")
    if step == "act":
        return f"Thought: the search gives a solution.\nAction: finish[{solution}]"
    if step == "rate":
        return "10"
    return f"Working it out.\nANSWER: {solution}"


def oracle_responder(instance: TaskInstance, *, broken_generator: bool = False) -> Callable[[ChatRequest], str]:
    """Responder that plays every phase from the oracle solution of ``instance``."""

    def respond(req: ChatRequest) -> str:
        meta = dict(req.meta)
        if req.phase == "design":
            return "```json\n" + default_design(instance.kind).to_json() + "\n```"
        if req.phase == "routing":
            # prefer the most downstream candidate: the last declared one
            return meta["candidates"][-1]
        if req.phase == "baseline":
            return _baseline_reply(instance, meta)
        return _node_reply(instance, meta, broken_generator)

    return respond


def oracle_gateway(instance: TaskInstance, *, broken_generator: bool = False) -> ScriptedGateway:
    return ScriptedGateway(responder=oracle_responder(instance, broken_generator=broken_generator))


def random_graph(rng: random.Random, max_nodes: int = MAX_NODES) -> AgentGraph:
    """A valid random graph: a source-to-sink backbone plus random extra edges.

    Extra edges may form cycles (including self-loops on non-sink nodes) and
    may leave the sink, so routing is exercised in every shape.
    """
    n = rng.randint(2, max_nodes)
    roles = ("generator", "validator", "analyzer", "optimizer", "formatter", "planner")
    nodes = [NodeSpec(f"n{i}", rng.choice(roles)) for i in range(n)]
    ids = [nd.id for nd in nodes]
    backbone = ids[:1] + rng.sample(ids[1:-1], rng.randint(0, n - 2)) + ids[-1:]
    edges = list(zip(backbone, backbone[1:]))
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.choice(ids), rng.choice(ids)
        if (a, b) not in edges and not (a == b == ids[-1]):
            edges.append((a, b))
    graph = AgentGraph({nd.id: nd for nd in nodes}, tuple(edges), ids[0], ids[-1])
    assert validate_graph(graph)
    return graph


def random_design(rng: random.Random, max_nodes: int = MAX_NODES) -> DesignOutput:
    graph = random_graph(rng, max_nodes)
    schema = {"items": [], "notes": {}, "status": "", "nested": {"log": [], "flags": {}}}
    contract = "\n".join(f"{v}: reads everything, writes any work field" for v in graph.nodes)
    return DesignOutput(graph, schema, contract)


_VALID_WRITES = (
    ("items", "append", lambda r: {"expr": f"{r.randint(1, 9)}+{r.randint(1, 9)}"}),
    ("items", "replace", lambda r: [r.randint(0, 5)]),
    ("notes", "update", lambda r: {f"k{r.randint(0, 3)}": r.random()}),
    ("status", "replace", lambda r: r.choice(["ok", "draft", "done"])),
    ("nested.log", "append", lambda r: r.randint(0, 100)),
    ("nested.flags", "update", lambda r: {"seen": True}),
)

_INVALID_WRITES = (
    ("missing", "append", lambda r: 1),  # unknown-path
    ("nested.nope", "replace", lambda r: "x"),  # unknown-path
    ("status", "append", lambda r: "x"),  # type-mismatch
    ("notes", "update", lambda r: [1, 2]),  # type-mismatch (payload)
    ("items", "append", lambda r: ""),  # empty-payload
    ("notes", "update", lambda r: {}),  # empty-payload
)


def _render_write(rng: random.Random, path: str, action: str, payload: Any) -> str:
    style = rng.randrange(4)
    body = json.dumps({"target_path": path, "action": action, "payload": payload})
    if style == 0:
        return body
    if style == 1:
        return f"Here is my write.\n```json\n{body}\n```"
    if style == 2:
        return f"I will now write {{this}} -> {body} done."
    return f"target_path: {path}\naction: {action}\npayload: {json.dumps(payload)}"


def random_protocol_responder(rng: random.Random, p_valid: float = 0.6) -> Callable[[ChatRequest], str]:
    """Random agents mixing valid writes, invalid writes, answer writes and garbage."""

    def respond(req: ChatRequest) -> str:
        if req.phase == "routing":
            cands = list(req.meta["candidates"])
            roll = rng.random()
            if roll < 0.1:
                return "no idea"
            if roll < 0.2:
                return "ghost-node"
            return rng.choice(cands)
        roll = rng.random()
        if roll < 0.05:
            return "I refuse to answer in the requested format."
        if roll < 0.12:
            return _render_write(rng, ANSWER_KEY, "replace", f"{rng.randint(1, 99)}")
        if roll < 0.12 + p_valid * 0.88:
            path, action, make = rng.choice(_VALID_WRITES)
        else:
            path, action, make = rng.choice(_INVALID_WRITES)
        return _render_write(rng, path, action, make(rng))

    return respond
