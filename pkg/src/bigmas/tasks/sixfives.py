"""Six Fives: hit a target in [1, 100] with exactly six digit-5s.

Concatenation (55, 555, ...) and the operators + - * / ! !! are allowed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from bigmas.expressions import (
    EvalError,
    ExprSyntaxError,
    double_factorial,
    evaluate,
    literal_texts,
    parse_expression,
    to_text,
)
from bigmas.tasks.instance import TaskInstance, Verdict

DIGITS = 6
LOW, HIGH = 1, 100


@dataclass(frozen=True)
class SearchCaps:
    """Bounds for the reachable-value search; completeness is only claimed within them."""

    max_factorial: int = 12
    max_values: int = 200_000
    max_magnitude: int = 10**18


DEFAULT_CAPS = SearchCaps()


def _wrap(expr: str) -> str:
    return expr if expr.isdigit() else f"({expr})"


class _Table:
    def __init__(self, caps: SearchCaps):
        self.caps = caps
        self.values: dict[Fraction, str] = {}

    def add(self, value: Fraction, expr: str) -> bool:
        caps = self.caps
        if value in self.values or len(self.values) >= caps.max_values:
            return False
        if abs(value.numerator) > caps.max_magnitude or value.denominator > caps.max_magnitude:
            return False
        self.values[value] = expr
        return True

    def close_unary(self) -> None:
        frontier = list(self.values.items())
        while frontier:
            grown = []
            for value, expr in frontier:
                if value.denominator != 1 or not 0 <= value <= self.caps.max_factorial:
                    continue
                n = int(value)
                for result, text in (
                    (Fraction(math.factorial(n)), f"{_wrap(expr)}!"),
                    (Fraction(double_factorial(n)), f"{_wrap(expr)}!!"),
                ):
                    if self.add(result, text):
                        grown.append((result, text))
            frontier = grown


@lru_cache(maxsize=4)
def reachable(caps: SearchCaps = DEFAULT_CAPS) -> tuple[dict[Fraction, str], ...]:
    """Value tables for k = 1..5 fives (index k-1), each closed under ! and !!."""
    tables: list[dict[Fraction, str]] = []
    for k in range(1, DIGITS):
        table = _Table(caps)
        table.add(Fraction(int("5" * k)), "5" * k)
        for i in range(1, k):
            left, right = tables[i - 1], tables[k - i - 1]
            for a, ea in left.items():
                pa = _wrap(ea)
                for b, eb in right.items():
                    pb = _wrap(eb)
                    table.add(a + b, f"{pa}+{pb}")
                    table.add(a - b, f"{pa}-{pb}")
                    table.add(a * b, f"{pa}*{pb}")
                    if b:
                        table.add(a / b, f"{pa}/{pb}")
                if len(table.values) >= caps.max_values:
                    break
        table.close_unary()
        tables.append(table.values)
    return tuple(tables)


def _solve_six(target: Fraction, caps: SearchCaps, allow_unary: bool) -> str | None:
    tables = reachable(caps)
    if target == int("5" * DIGITS):
        return "5" * DIGITS
    # split six fives into i + j with i <= j; scan the smaller side, look up the other
    for i in range(1, DIGITS // 2 + 1):
        small, big = tables[i - 1], tables[DIGITS - i - 1]
        for a, ea in small.items():
            pa = _wrap(ea)
            b = target - a
            if b in big:
                return f"{pa}+{_wrap(big[b])}"
            b = a - target
            if b in big:
                return f"{pa}-{_wrap(big[b])}"
            b = a + target
            if b in big:
                return f"{_wrap(big[b])}-{pa}"
            if a:
                b = target / a
                if b in big:
                    return f"{pa}*{_wrap(big[b])}"
                b = target * a
                if b in big and b:
                    return f"{_wrap(big[b])}/{pa}"
            if target:
                b = a / target
                if b in big and b:
                    return f"{pa}/{_wrap(big[b])}"
    if allow_unary:
        for n in range(caps.max_factorial + 1):
            for value, symbol in ((math.factorial(n), "!"), (double_factorial(n), "!!")):
                if value == target:
                    inner = _solve_six(Fraction(n), caps, allow_unary=False)
                    if inner is not None:
                        return f"{_wrap(inner)}{symbol}"
    return None


def solve(target: int, caps: SearchCaps = DEFAULT_CAPS) -> str | None:
    found = _solve_six(Fraction(target), caps, allow_unary=True)
    return None if found is None else to_text(parse_expression(found))


@lru_cache(maxsize=4)
def solvable_targets(caps: SearchCaps = DEFAULT_CAPS) -> tuple[int, ...]:
    return tuple(t for t in range(LOW, HIGH + 1) if solve(t, caps) is not None)


def verify(instance: TaskInstance, answer: str) -> Verdict:
    target = Fraction(instance.target)
    text = (answer or "").strip()
    if not text:
        return Verdict.fail("empty-answer", "no expression given", parsed=False)
    text = text.split("=")[0].strip()
    try:
        expr = parse_expression(text)
    except ExprSyntaxError as exc:
        return Verdict.fail("parse-error", str(exc), parsed=False)
    texts = literal_texts(expr)
    bad = [t for t in texts if set(t) != {"5"}]
    if bad:
        return Verdict.fail(
            "non-five-digit", f"literals {', '.join(bad)} contain digits other than 5", parsed=True, digits=False
        )
    count = sum(len(t) for t in texts)
    if count != DIGITS:
        return Verdict.fail("digit-count", f"digit-count {count} ≠ {DIGITS}", parsed=True, digits=False)
    try:
        value = evaluate(expr)
    except EvalError as exc:
        return Verdict.fail(exc.code, str(exc), parsed=True, digits=True, value=False)
    if value != target:
        return Verdict.fail(
            "wrong-value", f"evaluates to {value}, not {instance.target}", parsed=True, digits=True, value=False
        )
    return Verdict(True, "ok", "", {"parsed": True, "digits": True, "value": True})


def constraints(instance: TaskInstance) -> str:
    return (
        "Use exactly six instances of the digit 5 and no other digits. Concatenation such as 55 or 555 is "
        "allowed (55 uses two 5s). Allowed operators: + - * / ! (factorial) !! (double factorial) and parentheses. "
        f"The expression must evaluate exactly to {instance.target}."
    )


def render(instance: TaskInstance) -> str:
    return (
        f"Six Fives. Target: {instance.target}.\n{constraints(instance)}\n"
        "Answer format: a single arithmetic expression, without '= target'."
    )


def generate(count: int, seed: int) -> list[TaskInstance]:
    rng = random.Random(f"sixfives-{seed}")
    pool = solvable_targets()
    if not pool:
        raise RuntimeError("seed-pool-exhausted: no solvable Six Fives targets")
    out = []
    for i in range(count):
        t = rng.choice(pool)
        out.append(
            TaskInstance(
                kind="sixfives",
                input={"target": t},
                target=t,
                seed=seed,
                oracle={"solvable": True, "solution": solve(t)},
                id=f"sixfives-{seed}-{i:04d}",
            )
        )
    return out


def oracle(instance: TaskInstance) -> dict:
    solution = solve(int(instance.target))
    return {"solvable": solution is not None, "solution": solution}
