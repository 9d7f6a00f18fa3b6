import json
from itertools import product

import pytest

from bigmas.tasks import generate_instances, oracle_solve, render_context, verify
from bigmas.tasks.tol import (
    CAPACITIES,
    IllegalMove,
    TolMove,
    apply_move,
    bfs,
    distance,
    enumerate_states,
    make_state,
    pairs_by_length,
)
from conftest import tol

FULL = make_state([["r", "g", "b"], [], []])


def test_apply_move_stack_semantics():
    assert apply_move(FULL, TolMove(1, 3)) == (("r", "g"), (), ("b",))


def test_apply_move_errors():
    with pytest.raises(IllegalMove) as e:
        apply_move(FULL, TolMove(2, 1))
    assert e.value.code == "empty-source"
    s = apply_move(FULL, TolMove(1, 3))
    with pytest.raises(IllegalMove) as e:
        apply_move(s, TolMove(1, 3))
    assert e.value.code == "capacity-exceeded"


def test_state_space():
    states = enumerate_states()
    assert len(states) == 36
    distributions = {tuple(len(p) for p in s) for s in states}
    assert len(distributions) == 6
    for s in states:
        assert make_state(s) == s
        assert all(len(p) <= c for p, c in zip(s, CAPACITIES))
        assert set(bfs(s)) == states


def test_metric_properties():
    states = sorted(enumerate_states())
    for a, b in product(states, repeat=2):
        assert distance(a, b) == distance(b, a)
        assert (distance(a, b) == 0) == (a == b)
    for a, b, c in product(states[::5], states, states[::7]):
        assert distance(a, c) <= distance(a, b) + distance(b, c)


def test_every_length_present():
    assert set(pairs_by_length()) == set(range(0, 9))


def test_generator_labels_match_bfs():
    insts = generate_instances("tol", 8, 7)
    assert sorted(i.target["optimal_length"] for i in insts) == list(range(1, 9))
    assert insts == generate_instances("tol", 8, 7)
    for i in insts:
        d = distance(make_state(i.input["initial"]), make_state(i.input["goal"]))
        assert d == i.target["optimal_length"]
        assert verify(i, json.dumps(oracle_solve(i)["solution"])).correct


def test_verify_paths():
    inst = tol([["r", "g", "b"], [], []], [["r", "g"], [], ["b"]], 1)
    assert verify(inst, "[[1, 3]]").correct
    assert verify(inst, {"moves": [[1, 3]]}).correct
    assert verify(inst, "move 1 to 3").correct
    assert verify(inst, "[[1, 2], [2, 3]]").reason == "non-minimal"
    assert verify(inst, "[[1, 2], [2, 3]]", require_optimal=False).correct
    assert verify(inst, "[[1, 2]]").reason == "goal-not-reached"
    assert verify(inst, "[[2, 1]]").reason == "illegal-move"
    assert verify(inst, "nothing").reason == "parse-error"
    assert verify(inst, "").reason == "empty-answer"


def test_render_context_has_diagrams():
    inst = tol([["r", "g", "b"], [], []], [["r", "g"], [], ["b"]], 1)
    text = render_context(inst)
    assert "peg 1 (capacity 3): r g b" in text and "peg 3 (capacity 1): b" in text
    assert text == render_context(inst)
