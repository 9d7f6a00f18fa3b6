"""Protocol invariant checks over an executed run, shared by several test files."""

from __future__ import annotations

from bigmas.config import RunConfig
from bigmas.executor import ExecutionResult
from bigmas.graph import successors
from bigmas.trace import replay_matches, trace_usage
from bigmas.workspace import parse_workspace


def protocol_violations(res: ExecutionResult, config: RunConfig) -> list[str]:
    """Every broken invariant, as readable strings; empty when the run is clean."""
    graph = res.design.graph
    bad: list[str] = []
    if len(res.history) > config.t_max:
        bad.append(f"{len(res.history)} steps > t_max {config.t_max}")
    ctx = None
    ans_set_at = None
    for i, step in enumerate(res.history):
        where = f"step {step.step} ({step.node})"
        if step.corrections > config.r or len(step.attempts) > config.r + 1:
            bad.append(f"{where}: {step.corrections} corrections > r {config.r}")
        if step.applied is None and step.pre != step.post:
            bad.append(f"{where}: failed step changed the workspace")
        pre, post = parse_workspace(step.pre), parse_workspace(step.post)
        ctx = ctx if ctx is not None else pre.ctx
        if pre.ctx != ctx or post.ctx != ctx:
            bad.append(f"{where}: ctx changed")
        if pre.ans != post.ans:
            if step.node != graph.sink:
                bad.append(f"{where}: non-sink node wrote ans")
            if ans_set_at is not None or pre.ans is not None:
                bad.append(f"{where}: ans assigned twice")
            ans_set_at = i
        if step.node == graph.sink:
            if step.next is not None or i != len(res.history) - 1:
                bad.append(f"{where}: run continued past the sink")
            continue
        allowed = set(successors(graph, step.node)) | {graph.sink}
        if step.next not in allowed:
            bad.append(f"{where}: next {step.next!r} not in successors or sink")
        if i + 1 < len(res.history):
            nxt = res.history[i + 1]
            if nxt.node != step.next:
                bad.append(f"{where}: routed to {step.next!r} but ran {nxt.node!r}")
            if parse_workspace(nxt.pre).work != post.work or parse_workspace(nxt.pre).ans != post.ans:
                bad.append(f"{where}: workspace changed between steps")
    if res.fallback is not None and ans_set_at is not None:
        bad.append("fallback ran although the sink wrote ans")
    if res.workspace.ans is None:
        bad.append("run ended with ans unset")
    if not replay_matches(res.trace):
        bad.append("trace replay does not reproduce the final workspace")
    if trace_usage(res.trace) != res.ledger:
        bad.append("ledger does not match the per-call usage in the trace")
    return bad


def trace_shape_errors(records: list[dict]) -> list[str]:
    """Structural problems in a bigmas trace: one header, ordered steps, one result."""
    kinds = [r.get("record") for r in records]
    if not kinds or kinds[0] != "header" or kinds[-1] != "result":
        return ["trace must start with a header and end with a result"]
    if any(k != "step" for k in kinds[1:-1]):
        return ["only step records may sit between header and result"]
    steps = [r["step"] for r in records[1:-1]]
    if steps != list(range(len(steps))):
        return [f"step indices out of order: {steps}"]
    return []
