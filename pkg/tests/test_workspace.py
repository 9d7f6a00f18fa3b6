import copy
import json

import pytest
from hypothesis import given, strategies as st

from bigmas.designer import default_design
from bigmas.graph import AgentGraph, NodeSpec
from bigmas.workspace import (
    ANSWER_KEY,
    SchemaError,
    WorkspaceError,
    WriteInstruction,
    advance_sys,
    apply_write,
    init_workspace,
    parse_workspace,
    resolve_path,
    serialize_workspace,
    validate_write,
)
from conftest import game24, tol

GRAPH = default_design("game24").graph  # generator -> validator -> formatter


@pytest.fixture
def ws():
    return init_workspace(game24(4, 9, 10, 13), {"candidates": [], "validated": {}})


def W(path, action, payload):
    return WriteInstruction(tuple(path.split(".")), action, payload)


def test_init_from_instance(ws):
    assert ws.work == {"candidates": [], "validated": {}}
    assert ws.ans is None
    assert ws.sys == {"step": 0, "routing": [], "corrections": {}}
    assert ws.ctx["input"]["numbers"] == [4, 9, 10, 13]
    assert "24" in ws.ctx["statement"]


def test_init_empty_schema():
    assert init_workspace(game24(1, 2, 3, 4), {}).work == {}


def test_init_nested_schema_is_deep_copied():
    schema = {"search": {"frontier": [], "visited": []}}
    w = init_workspace(tol([["r", "g", "b"], [], []], [["r", "g"], ["b"], []], 1), schema)
    assert w.work == schema
    w.work["search"]["frontier"].append(1)
    assert schema["search"]["frontier"] == []


@pytest.mark.parametrize("schema", [{"a.b": []}, {ANSWER_KEY: ""}, {"x": object()}, [1, 2]])
def test_init_rejects_malformed_schema(schema):
    with pytest.raises(SchemaError):
        init_workspace({}, schema)


def test_resolve_path(ws):
    assert resolve_path(ws, ["candidates"]) == "list"
    assert resolve_path(ws, ["validated"]) == "map"
    assert resolve_path(ws, ["missing"]) == "absent"
    assert resolve_path(ws, [ANSWER_KEY]) == "answer-slot"
    ws.work["status"] = "x"
    assert resolve_path(ws, ["status"]) == "scalar"
    assert resolve_path(ws, ["status", "deeper"]) == "absent"


def test_validate_examples(ws):
    assert validate_write(W("candidates", "append", {"expr": "(13-9)*(10-4)"}), ws, "generator", GRAPH).passed
    r = validate_write(W("candidates", "update", {"a": 1}), ws, "generator", GRAPH)
    assert (r.status, r.code) == ("fail", "type-mismatch")
    r = validate_write(W(ANSWER_KEY, "replace", "1+1"), ws, "generator", GRAPH)
    assert r.code == "answer-write-by-non-sink"
    r = validate_write(W("candidates", "append", ""), ws, "generator", GRAPH)
    assert r.code == "empty-payload"
    assert validate_write(W(ANSWER_KEY, "replace", "1+1"), ws, "formatter", GRAPH).passed


@pytest.mark.parametrize("payload", [None, "", "   ", [], {}])
def test_every_empty_payload_kind_fails(ws, payload):
    assert validate_write(W("candidates", "replace", payload), ws, "generator", GRAPH).code == "empty-payload"


def test_fail_has_error_and_pass_has_none(ws):
    ok = validate_write(W("candidates", "append", 1), ws, "generator", GRAPH)
    bad = validate_write(W("nope", "append", 1), ws, "generator", GRAPH)
    assert ok.error == {} and ok.to_dict() == {"status": "pass", "error": {}}
    assert bad.error["code"] == "unknown-path" and bad.error["hint"]
    assert bad.error["path"] == "nope" and bad.error["action"] == "append"


def test_apply_examples(ws):
    w1 = apply_write(W("candidates", "append", {"expr": "x"}), ws)
    assert w1.work["candidates"] == [{"expr": "x"}]
    assert ws.work["candidates"] == []  # pre-state untouched
    ws.work["validated"] = {"attempts": 2}
    w2 = apply_write(W("validated", "update", {"status": "done"}), ws)
    assert w2.work["validated"] == {"attempts": 2, "status": "done"}
    ws.work["candidates"] = [1, 2, 3, 4, 5]
    w3 = apply_write(W("candidates", "replace", []), ws)
    assert w3.work["candidates"] == []
    w4 = apply_write(W("validated", "replace", ["now", "a", "list"]), ws)
    assert w4.work["validated"] == ["now", "a", "list"]


def test_answer_slot_single_assignment(ws):
    w1 = apply_write(W(ANSWER_KEY, "replace", "a"), ws)
    assert w1.ans == "a"
    with pytest.raises(WorkspaceError):
        apply_write(W(ANSWER_KEY, "replace", "b"), w1)


def test_apply_rejects_unvalidated(ws):
    with pytest.raises(WorkspaceError):
        apply_write(W("missing", "append", 1), ws)
    with pytest.raises(WorkspaceError):
        apply_write(W("validated", "append", 1), ws)


def test_instruction_invariants():
    with pytest.raises(ValueError):
        WriteInstruction((), "append", 1)
    with pytest.raises(ValueError):
        WriteInstruction(("a", ""), "append", 1)
    with pytest.raises(ValueError):
        WriteInstruction(("a",), "delete", 1)
    assert WriteInstruction(("a",), "APPEND", 1).action == "append"


def test_serialization_is_canonical(ws):
    a = apply_write(W("candidates", "append", {"b": 1, "a": 2}), ws)
    b = apply_write(W("candidates", "append", {"a": 2, "b": 1}), ws)
    assert serialize_workspace(a) == serialize_workspace(b)
    text = serialize_workspace(a)
    assert serialize_workspace(parse_workspace(text)) == text


def test_serialization_of_empty_work():
    text = serialize_workspace(init_workspace({"task": "demo"}, {}))
    doc = json.loads(text)
    assert doc["work"] == {} and doc["ctx"] == {"task": "demo"}
    assert '"work": {}' in text


def test_advance_sys(ws):
    advance_sys(ws, "generator", 2, "validator", "deterministic")
    advance_sys(ws, "validator", 0, None, None)
    assert ws.sys["step"] == 2
    assert ws.sys["corrections"] == {"generator": 2}
    assert ws.sys["routing"] == [{"from": "generator", "to": "validator", "mode": "deterministic"}]


# -- properties ---------------------------------------------------------------

scalars = st.one_of(st.integers(), st.text(max_size=5), st.booleans(), st.none())
payloads = st.recursive(
    scalars, lambda c: st.one_of(st.lists(c, max_size=3), st.dictionaries(st.text(min_size=1, max_size=3), c, max_size=3)), max_leaves=6
)
paths = st.sampled_from(["candidates", "validated", "missing", "validated.inner", ANSWER_KEY])
actions = st.sampled_from(["append", "update", "replace"])
nodes = st.sampled_from(["generator", "validator", "formatter"])


@given(paths, actions, payloads, nodes)
def test_failed_write_isolation_and_apply_coupling(path, action, payload, node):
    ws = init_workspace(game24(4, 9, 10, 13), {"candidates": [1], "validated": {"k": 1}})
    before = serialize_workspace(ws)
    instr = W(path, action, payload)
    result = validate_write(instr, ws, node, GRAPH)
    if result.passed:
        after = apply_write(instr, ws)
        assert serialize_workspace(ws) == before
        assert after.ctx == ws.ctx
    else:
        assert result.error["code"] in {"unknown-path", "answer-write-by-non-sink", "type-mismatch", "empty-payload"}
        assert serialize_workspace(ws) == before


@given(st.lists(scalars, max_size=4), payloads.filter(lambda p: p not in (None, "", [], {})))
def test_append_monotonicity(existing, payload):
    ws = init_workspace({}, {"items": existing, "other": {"x": 1}})
    instr = W("items", "append", payload)
    if not validate_write(instr, ws, "generator", GRAPH).passed:
        return
    after = apply_write(instr, ws)
    assert len(after.work["items"]) == len(existing) + 1
    masked_before, masked_after = copy.deepcopy(ws.to_dict()), copy.deepcopy(after.to_dict())
    masked_before["work"].pop("items"), masked_after["work"].pop("items")
    assert masked_before == masked_after


maps = st.dictionaries(st.sampled_from("abcde"), st.integers(), min_size=1, max_size=4)


@given(maps, maps, maps)
def test_merge_algebra(base, p, q):
    ws = init_workspace({}, {"m": base})
    two = apply_write(W("m", "update", q), apply_write(W("m", "update", p), ws))
    one = apply_write(W("m", "update", {**p, **q}), ws)
    assert two.work == one.work
