"""Game24: reach 24 from four numbers in [1, 13] with + - * / and parentheses."""

from __future__ import annotations

import random
import statistics
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from typing import Iterator, Sequence

from bigmas.expressions import BinOp, EvalError, ExprSyntaxError, Num, evaluate, literals, parse_expression
from bigmas.tasks.instance import TaskInstance, Verdict

TARGET = 24
LOW, HIGH = 1, 13
POOL_SIZE = 1000

# rationals as (numerator, denominator) pairs with denominator > 0; cheaper than Fraction
_Rat = tuple[int, int]
_Tree = object  # int leaf or (op, left, right)


def _combine(a: _Rat, b: _Rat) -> Iterator[tuple[str, _Rat]]:
    an, ad = a
    bn, bd = b
    yield "+", (an * bd + bn * ad, ad * bd)
    yield "-", (an * bd - bn * ad, ad * bd)
    yield "*", (an * bn, ad * bd)
    if bn:
        num, den = an * bd, ad * bn
        yield "/", (-num, -den) if den < 0 else (num, den)


def _hits(v: _Rat, target: int) -> bool:
    return v[0] == target * v[1]


def _shape_solutions(numbers: Sequence[int], target: int = TARGET) -> Iterator[_Tree]:
    """Every (shape, order, operators) tree that evaluates to ``target``."""
    for a, b, c, d in sorted(set(permutations(numbers))):
        ra, rb, rc, rd = ((a, 1), (b, 1), (c, 1), (d, 1))
        for op1, ab in _combine(ra, rb):
            for op2, abc in _combine(ab, rc):  # ((a b) c) d
                for op3, v in _combine(abc, rd):
                    if _hits(v, target):
                        yield (op3, (op2, (op1, a, b), c), d)
            for op2, cd in _combine(rc, rd):  # (a b) (c d)
                for op3, v in _combine(ab, cd):
                    if _hits(v, target):
                        yield (op3, (op1, a, b), (op2, c, d))
        for op1, bc in _combine(rb, rc):
            for op2, abc in _combine(ra, bc):  # (a (b c)) d
                for op3, v in _combine(abc, rd):
                    if _hits(v, target):
                        yield (op3, (op2, a, (op1, b, c)), d)
            for op2, bcd in _combine(bc, rd):  # a ((b c) d)
                for op3, v in _combine(ra, bcd):
                    if _hits(v, target):
                        yield (op3, a, (op2, (op1, b, c), d))
        for op1, cd in _combine(rc, rd):
            for op2, bcd in _combine(rb, cd):  # a (b (c d))
                for op3, v in _combine(ra, bcd):
                    if _hits(v, target):
                        yield (op3, a, (op2, b, (op1, c, d)))


def _tree_expr(tree: _Tree):
    if isinstance(tree, int):
        return Num(tree, str(tree))
    op, left, right = tree
    return BinOp(op, _tree_expr(left), _tree_expr(right))


def _canonical(tree: _Tree) -> str:
    if isinstance(tree, int):
        return str(tree)
    op, left, right = tree
    lhs, rhs = _canonical(left), _canonical(right)
    if op in "+*" and rhs < lhs:
        lhs, rhs = rhs, lhs
    return f"({lhs}{op}{rhs})"


def solve(numbers: Sequence[int], target: int = TARGET) -> str | None:
    """One solving expression by exhaustive search over all five tree shapes."""
    from bigmas.expressions import to_text

    for tree in _shape_solutions(numbers, target):
        return to_text(_tree_expr(tree))
    return None


@lru_cache(maxsize=4096)
def _difficulty(key: tuple[int, ...]) -> int:
    return len({_canonical(t) for t in _shape_solutions(key)})


def difficulty(numbers: Sequence[int]) -> int:
    """Distinct solutions up to commutativity of + and *; 0 when unsolvable."""
    return _difficulty(tuple(sorted(numbers)))


def solvable_pairwise(numbers: Sequence[int], target: int = TARGET) -> bool:
    """Independent check: repeatedly merge any two values with any operator."""

    def search(values: list[Fraction]) -> bool:
        if len(values) == 1:
            return values[0] == target
        for i, j in combinations(range(len(values)), 2):
            a, b = values[i], values[j]
            rest = [v for k, v in enumerate(values) if k not in (i, j)]
            results = {a + b, a - b, b - a, a * b}
            if b:
                results.add(a / b)
            if a:
                results.add(b / a)
            if any(search(rest + [r]) for r in results):
                return True
        return False

    return search([Fraction(n) for n in numbers])


def verify(instance: TaskInstance, answer: str) -> Verdict:
    numbers = list(instance.input["numbers"])
    target = int(instance.target)
    text = (answer or "").strip()
    if not text:
        return Verdict.fail("empty-answer", "no expression given", parsed=False)
    # tolerate a trailing "= 24"
    text = text.split("=")[0].strip()
    try:
        expr = parse_expression(text)
    except ExprSyntaxError as exc:
        return Verdict.fail("parse-error", str(exc), parsed=False)
    if not _binary_only(expr):
        return Verdict.fail(
            "forbidden-operator", "only + - * / and parentheses are allowed", parsed=True, operators=False
        )
    used = Counter(literals(expr))
    given = Counter(numbers)
    if used != given:
        extra = sorted((used - given).elements())
        missing = sorted((given - used).elements())
        parts = []
        if extra:
            parts.append(f"literal {', '.join(map(str, extra))} not in input multiset")
        if missing:
            parts.append(f"input {', '.join(map(str, missing))} not used")
        return Verdict.fail("literal-mismatch", "; ".join(parts), parsed=True, operators=True, numbers=False)
    try:
        value = evaluate(expr)
    except EvalError as exc:
        return Verdict.fail(exc.code, str(exc), parsed=True, operators=True, numbers=True, value=False)
    if value != target:
        return Verdict.fail(
            "wrong-value", f"evaluates to {value}, not {target}", parsed=True, operators=True, numbers=True, value=False
        )
    return Verdict(True, "ok", "", {"parsed": True, "operators": True, "numbers": True, "value": True})


def _binary_only(expr) -> bool:
    if isinstance(expr, Num):
        return True
    if isinstance(expr, BinOp):
        return _binary_only(expr.left) and _binary_only(expr.right)
    return False


def render(instance: TaskInstance) -> str:
    nums = " ".join(str(n) for n in instance.input["numbers"])
    return (
        f"Game24. Numbers: {nums}. Target: {instance.target}.\n"
        f"{constraints(instance)}\n"
        "Answer format: a single arithmetic expression such as (a-b)*(c+d), without '= 24'."
    )


def constraints(instance: TaskInstance) -> str:
    return (
        "Use each of the four numbers exactly once. Allowed operators: + - * / and parentheses. "
        f"No other operators or numbers. The expression must evaluate exactly to {instance.target}."
    )


def _pool_stats(seed: int) -> tuple[float, float]:
    rng = random.Random(f"game24-pool-{seed}")
    scores = []
    draws = 0
    while len(scores) < POOL_SIZE:
        draws += 1
        if draws > 50 * POOL_SIZE:
            raise RuntimeError("seed-pool-exhausted: too few solvable tuples in the difficulty pool")
        score = difficulty([rng.randint(LOW, HIGH) for _ in range(4)])
        if score:
            scores.append(score)
    return statistics.fmean(scores), statistics.pstdev(scores)


def generate(count: int, seed: int) -> list[TaskInstance]:
    """Solvable tuples whose difficulty lies within one sd of the pool mean."""
    mean, sd = _pool_stats(seed)
    rng = random.Random(f"game24-{seed}")
    chosen: list[tuple[int, ...]] = []
    seen = set()
    draws = 0
    while len(chosen) < count:
        draws += 1
        if draws > 200_000:
            raise RuntimeError("seed-pool-exhausted: cannot find enough in-band Game24 tuples")
        nums = tuple(sorted(rng.randint(LOW, HIGH) for _ in range(4)))
        if nums in seen:
            continue
        score = difficulty(nums)
        if score and abs(score - mean) <= sd:
            seen.add(nums)
            chosen.append(nums)
    return [
        TaskInstance(
            kind="game24",
            input={"numbers": list(nums)},
            target=TARGET,
            seed=seed,
            oracle={"solvable": True, "solution": solve(nums), "difficulty": difficulty(nums)},
            id=f"game24-{seed}-{i:04d}",
        )
        for i, nums in enumerate(chosen)
    ]


def oracle(instance: TaskInstance) -> dict:
    solution = solve(instance.input["numbers"], int(instance.target))
    return {"solvable": solution is not None, "solution": solution, "difficulty": difficulty(instance.input["numbers"])}
