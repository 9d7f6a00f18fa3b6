"""Tower of London: three beads (r, g, b) on three pegs of capacity 3, 2, 1."""

from __future__ import annotations

import json
import random
import re
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Any, Sequence

from bigmas.tasks.instance import TaskInstance, Verdict

CAPACITIES = (3, 2, 1)
BEADS = ("r", "g", "b")
MAX_LENGTH = 8

# pegs bottom -> top
TolState = tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]


@dataclass(frozen=True)
class TolMove:
    source: int  # 1-based peg
    dest: int

    def __post_init__(self):
        if self.source not in (1, 2, 3) or self.dest not in (1, 2, 3) or self.source == self.dest:
            raise ValueError(f"bad move {self.source}->{self.dest}")

    def to_list(self) -> list[int]:
        return [self.source, self.dest]


class IllegalMove(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def make_state(pegs: Sequence[Sequence[str]]) -> TolState:
    state = tuple(tuple(p) for p in pegs)
    if len(state) != 3:
        raise ValueError("a state has exactly three pegs")
    if sorted(b for p in state for b in p) != sorted(BEADS):
        raise ValueError(f"each bead must appear exactly once: {pegs!r}")
    for peg, cap in zip(state, CAPACITIES):
        if len(peg) > cap:
            raise ValueError(f"peg over capacity: {pegs!r}")
    return state  # type: ignore[return-value]


def state_to_json(state: TolState) -> list[list[str]]:
    return [list(p) for p in state]


def apply_move(state: TolState, move: TolMove) -> TolState:
    src, dst = move.source - 1, move.dest - 1
    if not state[src]:
        raise IllegalMove("empty-source", f"peg {move.source} is empty")
    if len(state[dst]) >= CAPACITIES[dst]:
        raise IllegalMove("capacity-exceeded", f"peg {move.dest} is full (capacity {CAPACITIES[dst]})")
    pegs = [list(p) for p in state]
    pegs[dst].append(pegs[src].pop())
    return tuple(tuple(p) for p in pegs)  # type: ignore[return-value]


@lru_cache(maxsize=1)
def enumerate_states() -> frozenset:
    states = set()
    for order in permutations(BEADS):
        for a in range(CAPACITIES[0] + 1):
            for b in range(CAPACITIES[1] + 1):
                c = len(BEADS) - a - b
                if 0 <= c <= CAPACITIES[2]:
                    states.add((order[:a], order[a : a + b], order[a + b :]))
    return frozenset(states)


def _neighbours(state: TolState):
    for src in range(1, 4):
        for dst in range(1, 4):
            if src != dst:
                move = TolMove(src, dst)
                try:
                    yield move, apply_move(state, move)
                except IllegalMove:
                    pass


@lru_cache(maxsize=64)
def bfs(start: TolState) -> dict:
    """Shortest move sequence from ``start`` to every reachable state."""
    paths = {start: ()}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for move, v in _neighbours(u):
            if v not in paths:
                paths[v] = paths[u] + (move,)
                queue.append(v)
    return paths


def distance(a: TolState, b: TolState) -> int:
    return len(bfs(a)[b])


def shortest_path(a: TolState, b: TolState) -> list[TolMove]:
    return list(bfs(a)[b])


@lru_cache(maxsize=1)
def pairs_by_length() -> dict[int, list[tuple[TolState, TolState]]]:
    states = sorted(enumerate_states())
    out: dict[int, list] = {}
    for a in states:
        for b in states:
            out.setdefault(distance(a, b), []).append((a, b))
    return out


_MOVE_LINE = re.compile(r"(?:move\s+)?(?:\w+\s+)?(?:from\s+)?(?:peg\s*)?([123])\s*(?:to|->|→)\s*(?:peg\s*)?([123])", re.I)


def parse_moves(answer: Any) -> list[TolMove]:
    """Accept a JSON list of [from, to] pairs, ``{"moves": [...]}``, or "move X to Y" lines."""
    data = answer
    if isinstance(answer, str):
        text = answer.strip()
        try:
            data = json.loads(text)
        except ValueError:
            found = re.findall(r"\[\s*\[.*?\]\s*\]", text, re.DOTALL)
            data = None
            for chunk in reversed(found):
                try:
                    data = json.loads(chunk)
                    break
                except ValueError:
                    continue
            if data is None:
                moves = [
                    TolMove(int(m.group(1)), int(m.group(2)))
                    for line in text.splitlines()
                    if (m := _MOVE_LINE.search(line))
                ]
                if not moves:
                    raise ValueError("no moves found")
                return moves
    if isinstance(data, dict):
        data = data.get("moves")
    if not isinstance(data, list):
        raise ValueError("moves must be a list of [from, to] pairs")
    moves = []
    for item in data:
        if isinstance(item, dict):
            item = [item.get("from"), item.get("to")]
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ValueError(f"bad move {item!r}")
        moves.append(TolMove(int(item[0]), int(item[1])))
    return moves


def verify(instance: TaskInstance, answer: Any, require_optimal: bool = True) -> Verdict:
    init = make_state(instance.input["initial"])
    goal = make_state(instance.input["goal"])
    if isinstance(answer, str) and not answer.strip():
        return Verdict.fail("empty-answer", "no moves given", parsed=False)
    try:
        moves = parse_moves(answer)
    except (ValueError, TypeError) as exc:
        return Verdict.fail("parse-error", str(exc), parsed=False)
    state = init
    for i, move in enumerate(moves, 1):
        try:
            state = apply_move(state, move)
        except IllegalMove as exc:
            return Verdict.fail("illegal-move", f"move {i}: {exc} ({exc.code})", parsed=True, legal=False)
    if state != goal:
        return Verdict.fail("goal-not-reached", f"final state {state_to_json(state)}", parsed=True, legal=True, goal=False)
    optimal = _optimal_length(instance, init, goal)
    if require_optimal and len(moves) != optimal:
        return Verdict.fail(
            "non-minimal", f"{len(moves)} moves, optimal is {optimal}", parsed=True, legal=True, goal=True, minimal=False
        )
    return Verdict(True, "ok", "", {"parsed": True, "legal": True, "goal": True, "minimal": True})


def _optimal_length(instance: TaskInstance, init: TolState, goal: TolState) -> int:
    target = instance.target
    if isinstance(target, dict) and "optimal_length" in target:
        return int(target["optimal_length"])
    return distance(init, goal)


def diagram(state: Sequence[Sequence[str]]) -> str:
    return "\n".join(
        f"  peg {i} (capacity {cap}): {' '.join(peg) if peg else '(empty)'}"
        for i, (peg, cap) in enumerate(zip(state, CAPACITIES), 1)
    )


def constraints(instance: TaskInstance) -> str:
    return (
        "Pegs 1, 2, 3 hold at most 3, 2 and 1 beads. A move takes the topmost bead of one peg and puts it on "
        "top of another peg that is not full. Find a minimum-length move sequence "
        f"({instance.target['optimal_length']} moves) from the initial to the goal configuration."
    )


def render(instance: TaskInstance) -> str:
    return (
        "Tower of London. Beads are listed bottom to top.\n"
        f"Initial:\n{diagram(instance.input['initial'])}\n"
        f"Goal:\n{diagram(instance.input['goal'])}\n"
        f"{constraints(instance)}\n"
        'Answer format: a JSON list of [from, to] peg pairs, e.g. [[1, 3], [2, 1]].'
    )


def generate(count: int, seed: int) -> list[TaskInstance]:
    """Lengths cycle through 1..8 in seeded-shuffled blocks; pairs uniform per length."""
    rng = random.Random(f"tol-{seed}")
    table = pairs_by_length()
    lengths: list[int] = []
    while len(lengths) < count:
        block = list(range(1, MAX_LENGTH + 1))
        rng.shuffle(block)
        lengths.extend(block)
    out = []
    for i, length in enumerate(lengths[:count]):
        if not table.get(length):
            raise RuntimeError(f"seed-pool-exhausted: no pair at distance {length}")
        init, goal = rng.choice(table[length])
        out.append(
            TaskInstance(
                kind="tol",
                input={"initial": state_to_json(init), "goal": state_to_json(goal)},
                target={"goal": state_to_json(goal), "optimal_length": length},
                seed=seed,
                oracle={
                    "solvable": True,
                    "optimal_length": length,
                    "solution": [m.to_list() for m in shortest_path(init, goal)],
                },
                id=f"tol-{seed}-{i:04d}",
            )
        )
    return out


def oracle(instance: TaskInstance) -> dict:
    init = make_state(instance.input["initial"])
    goal = make_state(instance.input["goal"])
    path = shortest_path(init, goal)
    return {"solvable": True, "optimal_length": len(path), "solution": [m.to_list() for m in path]}
