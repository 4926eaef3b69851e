"""Tiny expression language in one integer variable ``r``.

Grammar (whitespace-insensitive)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | "r" | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-4`` while ``2^-r`` is ``2^(-r)``.  All arithmetic is IEEE double.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import reduce
from typing import Union

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expr",
    "ParseError", "EvalError", "parse", "evaluate", "to_text", "compile_expr",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "r"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

# name -> (min arity, max arity or None for variadic)
FUNCTIONS = {
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "fact": (1, 1),
    "pow": (2, 2),
    "min": (1, None),
    "max": (1, None),
}


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvalError(ArithmeticError):
    def __init__(self, message: str, node):
        self.node = node
        super().__init__(f"{message} in {to_text(node)}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, text, pos = self.tok
        if text != value or kind == "num":
            raise ParseError(f"unexpected {text or 'end of input'!r}", pos, frozenset({value}))
        self.i += 1

    def expr(self) -> Expr:
        node = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "ident":
            self.take()
            if text == "r":
                return Var()
            if text not in FUNCTIONS:
                raise ParseError(f"unknown name {text!r}", pos, frozenset({"r", *FUNCTIONS}))
            self.expect("(")
            args = [self.expr()]
            while self.tok[1] == "," and self.tok[0] == "op":
                self.take()
                args.append(self.expr())
            self.expect(")")
            lo, hi = FUNCTIONS[text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ParseError(f"{text} takes {lo if lo == hi else f'at least {lo}'} argument(s), got {len(args)}", pos)
            return Call(text, tuple(args))
        if kind == "op" and text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(
            f"unexpected {text or 'end of input'!r}", pos, frozenset({"number", "r", "function", "(", "-"})
        )


def parse(text: str) -> Expr:
    """Parse ``text`` into an AST; raises :class:`ParseError` with the byte offset."""
    p = _Parser(text)
    node = p.expr()
    kind, tok, pos = p.tok
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", pos, frozenset({"+", "-", "*", "/", "^", "end of input"}))
    return node


def _fact(x: float, node) -> float:
    if not math.isfinite(x) or x < 0 or x != math.floor(x):
        raise EvalError(f"fact of {x!r} is undefined", node)
    if x > 170:
        return math.inf  # 171! overflows a double
    return float(reduce(lambda a, b: a * b, range(2, int(x) + 1), 1.0))


def evaluate(e: Expr, r: float) -> float:
    """Evaluate ``e`` at ``r``; domain errors raise :class:`EvalError`."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(r)
    if isinstance(e, Neg):
        return -evaluate(e.operand, r)
    if isinstance(e, BinOp):
        a = evaluate(e.left, r)
        b = evaluate(e.right, r)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise EvalError("division by zero", e)
            return a / b
        return _pow(a, b, e)
    if isinstance(e, Call):
        vals = [evaluate(a, r) for a in e.args]
        f = e.func
        if f == "exp":
            try:
                return math.exp(vals[0])
            except OverflowError:
                return math.inf
        if f == "log":
            if vals[0] <= 0:
                raise EvalError(f"log of nonpositive {vals[0]!r}", e)
            return math.log(vals[0])
        if f == "sqrt":
            if vals[0] < 0:
                raise EvalError(f"sqrt of negative {vals[0]!r}", e)
            return math.sqrt(vals[0])
        if f == "abs":
            return abs(vals[0])
        if f == "fact":
            return _fact(vals[0], e)
        if f == "pow":
            return _pow(vals[0], vals[1], e)
        if f == "min":
            return min(vals)
        if f == "max":
            return max(vals)
    raise TypeError(f"not an expression node: {e!r}")


def _pow(a: float, b: float, node) -> float:
    if a == 0 and b < 0:
        raise EvalError("division by zero", node)
    if a < 0 and b != math.floor(b):
        raise EvalError(f"{a!r} to non-integer power {b!r}", node)
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.copysign(math.inf, a) if b % 2 == 1 else math.inf


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def to_text(e: Expr) -> str:
    """Canonical printer; ``parse(to_text(e)) == e`` for every AST."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return "r"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        # operand of unary minus is a unary-level expression
        return "-" + (inner if _prec(e.operand) >= _PREC["neg"] else f"({inner})")
    p = _PREC[e.op]
    left = to_text(e.left)
    right = to_text(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    # left-associative: equal precedence on the right needs parentheses
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


class CompiledExpr:
    """Callable wrapper ``r -> float`` keeping the source text."""

    def __init__(self, text: str):
        self.text = text
        self.ast = parse(text)

    def __call__(self, r) -> float:
        return evaluate(self.ast, r)

    def __repr__(self) -> str:
        return f"CompiledExpr({self.text!r})"


def compile_expr(text: str) -> CompiledExpr:
    return CompiledExpr(text)
