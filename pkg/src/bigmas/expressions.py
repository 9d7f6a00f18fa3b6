"""Exact arithmetic expressions for the Game24 and Six Fives tasks.

Grammar (tightest binding first)::

    postfix  := primary ('!' | '!!')*
    unary    := '-' unary | postfix
    term     := unary (('*' | '/') unary)*
    expr     := term (('+' | '-') term)*
    primary  := INTEGER | '(' expr ')'

``!!`` is lexed as a single token, so ``5!!!`` reads as ``(5!!)!``.
Values are :class:`fractions.Fraction`, so ``eval(e) == 24`` is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "Num",
    "BinOp",
    "Neg",
    "Factorial",
    "DoubleFactorial",
    "Expr",
    "EvalPolicy",
    "ExpressionError",
    "ExprSyntaxError",
    "EvalError",
    "parse_expression",
    "evaluate",
    "literals",
    "literal_texts",
    "to_text",
    "double_factorial",
]


@dataclass(frozen=True)
class Num:
    value: int
    text: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Factorial:
    operand: "Expr"


@dataclass(frozen=True)
class DoubleFactorial:
    operand: "Expr"


Expr = Union[Num, BinOp, Neg, Factorial, DoubleFactorial]


@dataclass(frozen=True)
class EvalPolicy:
    max_factorial: int = 20
    max_magnitude: int = 10**18

    def __post_init__(self):
        if self.max_factorial <= 0 or self.max_magnitude <= 0:
            raise ValueError("EvalPolicy limits must be positive")


class ExpressionError(ValueError):
    code = "expression-error"


class ExprSyntaxError(ExpressionError):
    code = "syntax-error"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class EvalError(ExpressionError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


_OP_ALIASES = {"×": "*", "·": "*", "÷": "/", "−": "-", "–": "-"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("num", text[i:j], i))
            i = j
        elif ch == "!":
            if i + 1 < n and text[i + 1] == "!":
                tokens.append(("!!", "!!", i))
                i += 2
            else:
                tokens.append(("!", "!", i))
                i += 1
        elif ch in "+-*/()":
            tokens.append((ch, ch, i))
            i += 1
        elif ch in _OP_ALIASES:
            tokens.append((_OP_ALIASES[ch], ch, i))
            i += 1
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", self.peek()[2])
        node = self.expr()
        kind, _, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.peek()[1]!r}", offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.unary())
        return self.postfix()

    def postfix(self) -> Expr:
        node = self.primary()
        while self.peek()[0] in ("!", "!!"):
            node = Factorial(node) if self.take()[0] == "!" else DoubleFactorial(node)
        return node

    def primary(self) -> Expr:
        kind, text, offset = self.take()
        if kind == "num":
            return Num(int(text), text)
        if kind == "(":
            node = self.expr()
            closing = self.take()
            if closing[0] != ")":
                raise ExprSyntaxError("expected ')'", closing[2])
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", offset)
        raise ExprSyntaxError(f"unexpected token {text!r}", offset)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError` carrying the character offset of the
    first offending token.
    """
    return _Parser(text).parse()


def double_factorial(n: int) -> int:
    result = 1
    while n > 1:
        result *= n
        n -= 2
    return result


def _check_magnitude(value: Fraction, policy: EvalPolicy) -> Fraction:
    if abs(value.numerator) > policy.max_magnitude or value.denominator > policy.max_magnitude:
        raise EvalError("overflow", f"intermediate value exceeds {policy.max_magnitude}")
    return value


def _factorial_operand(value: Fraction, policy: EvalPolicy, symbol: str) -> int:
    if value.denominator != 1 or value < 0:
        raise EvalError("domain-error", f"{symbol} needs a non-negative integer, got {value}")
    n = int(value)
    if n > policy.max_factorial:
        raise EvalError("overflow", f"{symbol} operand {n} exceeds limit {policy.max_factorial}")
    return n


def evaluate(expr: Expr | str, policy: EvalPolicy | None = None) -> Fraction:
    """Evaluate exactly. Raises :class:`EvalError` (div-by-zero, domain-error, overflow)."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    policy = policy or EvalPolicy()
    return _eval(expr, policy)


def _eval(node: Expr, policy: EvalPolicy) -> Fraction:
    if isinstance(node, Num):
        return _check_magnitude(Fraction(node.value), policy)
    if isinstance(node, Neg):
        return -_eval(node.operand, policy)
    if isinstance(node, Factorial):
        n = _factorial_operand(_eval(node.operand, policy), policy, "!")
        return _check_magnitude(Fraction(math.factorial(n)), policy)
    if isinstance(node, DoubleFactorial):
        n = _factorial_operand(_eval(node.operand, policy), policy, "!!")
        return _check_magnitude(Fraction(double_factorial(n)), policy)
    left = _eval(node.left, policy)
    right = _eval(node.right, policy)
    if node.op == "+":
        value = left + right
    elif node.op == "-":
        value = left - right
    elif node.op == "*":
        value = left * right
    else:
        if right == 0:
            raise EvalError("div-by-zero", "division by zero")
        value = left / right
    return _check_magnitude(value, policy)


def _walk_literals(node: Expr, out: list[Num]) -> None:
    if isinstance(node, Num):
        out.append(node)
    elif isinstance(node, BinOp):
        _walk_literals(node.left, out)
        _walk_literals(node.right, out)
    else:
        _walk_literals(node.operand, out)


def literals(expr: Expr | str) -> list[int]:
    """Integer literals in reading order; ``55`` is one literal."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    found: list[Num] = []
    _walk_literals(expr, found)
    return [n.value for n in found]


def literal_texts(expr: Expr | str) -> list[str]:
    if isinstance(expr, str):
        expr = parse_expression(expr)
    found: list[Num] = []
    _walk_literals(expr, found)
    return [n.text for n in found]


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(node: Expr) -> str:
    """Canonical ASCII rendering with minimal parentheses.

    Re-parsing the output yields a structurally equal tree (literal text is
    preserved, so ``05`` stays ``05``).
    """
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        if isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, (Factorial, DoubleFactorial)):
        inner = to_text(node.operand)
        if not isinstance(node.operand, Num):
            inner = f"({inner})"
        return inner + ("!" if isinstance(node, Factorial) else "!!")
    prec = _PRECEDENCE[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if isinstance(node.left, BinOp) and _PRECEDENCE[node.left.op] < prec:
        left = f"({left})"
    # right operands are grouped on equal precedence too: the grammar is left-associative
    if isinstance(node.right, BinOp) and _PRECEDENCE[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"
