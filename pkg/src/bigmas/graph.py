"""Directed agent graphs: structure checks, successors, role categories."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping

__all__ = [
    "MAX_NODES",
    "MAX_PATH_LENGTH",
    "ROLE_CATEGORIES",
    "NodeSpec",
    "AgentGraph",
    "GraphCheck",
    "GraphFormatError",
    "validate_graph",
    "successors",
    "classify_role",
]

MAX_NODES = 10
MAX_PATH_LENGTH = 15

ROLE_CATEGORIES = ("Generator", "Validator", "Formatter", "Analyzer", "Optimizer", "Other")

# first match wins
_ROLE_TABLE = (
    (re.compile(r"generat|propos|enumerat"), "Generator"),
    (re.compile(r"valid|verif|check"), "Validator"),
    (re.compile(r"format|extract|final|answer"), "Formatter"),
    (re.compile(r"analy|select|plan|strateg"), "Analyzer"),
    (re.compile(r"optim|refin|improv"), "Optimizer"),
)


class GraphFormatError(ValueError):
    """The graph-interchange document is structurally unusable."""


@dataclass(frozen=True)
class NodeSpec:
    id: str
    role: str
    responsibilities: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "role": self.role, "responsibilities": self.responsibilities}


@dataclass(frozen=True)
class AgentGraph:
    """Role-annotated directed graph; may contain cycles.

    Construction does not validate. Call :func:`validate_graph` before
    executing a graph from an untrusted source.
    """

    nodes: Mapping[str, NodeSpec]
    edges: tuple[tuple[str, str], ...]
    source: str
    sink: str
    _succ: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(self.nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        succ: dict[str, list[str]] = {}
        for a, b in self.edges:
            succ.setdefault(a, []).append(b)
        object.__setattr__(self, "_succ", succ)

    @classmethod
    def chain(cls, *nodes: NodeSpec) -> "AgentGraph":
        ids = [n.id for n in nodes]
        return cls({n.id: n for n in nodes}, tuple(zip(ids, ids[1:])), ids[0], ids[-1])

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [[a, b] for a, b in self.edges],
            "source": self.source,
            "sink": self.sink,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: Any) -> "AgentGraph":
        """Build from the interchange format; raises :class:`GraphFormatError`."""
        if not isinstance(data, Mapping):
            raise GraphFormatError("graph document must be an object")
        raw_nodes = data.get("nodes")
        if isinstance(raw_nodes, Mapping):
            raw_nodes = [{"id": k, **(v if isinstance(v, Mapping) else {"role": v})} for k, v in raw_nodes.items()]
        if not isinstance(raw_nodes, list) or not raw_nodes:
            raise GraphFormatError("'nodes' must be a non-empty list")
        nodes: dict[str, NodeSpec] = {}
        for raw in raw_nodes:
            if not isinstance(raw, Mapping):
                raise GraphFormatError("each node must be an object")
            node_id = raw.get("id")
            if not isinstance(node_id, str):
                raise GraphFormatError("node id must be a string")
            if node_id in nodes:
                raise GraphFormatError(f"duplicate node id {node_id!r}")
            role = raw.get("role", raw.get("role_descriptor", ""))
            resp = raw.get("responsibilities", "")
            if not isinstance(role, str):
                raise GraphFormatError(f"role of {node_id!r} must be text")
            if not isinstance(resp, str):
                resp = json.dumps(resp, ensure_ascii=False)
            nodes[node_id] = NodeSpec(node_id, role, resp)
        raw_edges = data.get("edges", [])
        if not isinstance(raw_edges, list):
            raise GraphFormatError("'edges' must be a list")
        edges = []
        for raw in raw_edges:
            if isinstance(raw, Mapping):
                pair = (raw.get("from"), raw.get("to"))
            elif isinstance(raw, (list, tuple)) and len(raw) == 2:
                pair = tuple(raw)
            else:
                raise GraphFormatError(f"bad edge {raw!r}")
            if not all(isinstance(x, str) for x in pair):
                raise GraphFormatError(f"edge endpoints must be node ids: {raw!r}")
            edges.append(pair)
        source, sink = data.get("source"), data.get("sink")
        if not isinstance(source, str) or not isinstance(sink, str):
            raise GraphFormatError("'source' and 'sink' must be node ids")
        return cls(nodes, tuple(edges), source, sink)


@dataclass(frozen=True)
class GraphCheck:
    ok: bool
    rule: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_graph(g: AgentGraph) -> GraphCheck:
    """Check every structural rule; report the first one violated."""
    if g.source not in g.nodes:
        return GraphCheck(False, "unknown-source", f"source {g.source!r} is not a node")
    if g.sink not in g.nodes:
        return GraphCheck(False, "unknown-sink", f"sink {g.sink!r} is not a node")
    if g.source == g.sink:
        return GraphCheck(False, "source-is-sink", "source and sink must differ")
    if len(g.nodes) > MAX_NODES:
        return GraphCheck(False, "node-limit", f"{len(g.nodes)} nodes exceeds MAX_NODES={MAX_NODES}")
    for node_id, spec in g.nodes.items():
        if not node_id or spec.id != node_id:
            return GraphCheck(False, "bad-node-id", f"node id {node_id!r} is empty or inconsistent")
        if not spec.role.strip():
            return GraphCheck(False, "empty-role", f"node {node_id!r} has no role descriptor")
    seen = set()
    for a, b in g.edges:
        if a not in g.nodes or b not in g.nodes:
            return GraphCheck(False, "unknown-endpoint", f"edge {a!r}->{b!r} references an undeclared node")
        if (a, b) in seen:
            return GraphCheck(False, "duplicate-edge", f"edge {a!r}->{b!r} declared twice")
        if a == b == g.sink:
            return GraphCheck(False, "sink-self-loop", "the sink may not loop onto itself")
        seen.add((a, b))
    if g.sink not in _reachable(g, g.source):
        return GraphCheck(False, "unreachable-sink", f"sink {g.sink!r} is unreachable from {g.source!r}")
    return GraphCheck(True)


def _reachable(g: AgentGraph, start: str) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        for nxt in g._succ.get(queue.popleft(), ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def successors(g: AgentGraph, v: str) -> list[str]:
    if v not in g.nodes:
        raise KeyError(f"unknown node {v!r}")
    return list(g._succ.get(v, ()))


def classify_role(descriptor: str) -> str:
    text = str(descriptor).lower()
    for pattern, category in _ROLE_TABLE:
        if pattern.search(text):
            return category
    return "Other"
