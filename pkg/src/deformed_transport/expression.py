"""Arithmetic expressions over chart coordinates.

A small closed grammar used to write metric components and curve
parametrisations in config files::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus and is right-associative, so
``-x0^2`` is ``-(x0^2)`` and ``2^3^2`` is ``2^(3^2)``.  Evaluation is
vectorised: variables may be bound to numpy arrays of any common shape.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifier",
    "ArityError",
    "ExpressionDomainError",
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "FUNCTIONS",
    "parse_expression",
    "to_source",
    "evaluate",
    "compile_expression",
]

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int, expected: Sequence[str] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class UnknownIdentifier(ExpressionSyntaxError):
    pass


class ArityError(ExpressionSyntaxError):
    pass


class ExpressionDomainError(ExpressionError):
    """Evaluation left the real domain (log of a negative, division by zero, overflow)."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expression", ...]


Expression = Union[Num, Var, Const, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_COORD = re.compile(r"x\d+\Z")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExpressionSyntaxError(
                f"unexpected character {source[bad]!r}", _byte_offset(source, bad)
            )
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(source, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, variables: Sequence[str] | None):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = None if variables is None else frozenset(variables)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, offset = self.peek()
        if value != text or kind == "end":
            raise ExpressionSyntaxError(f"unexpected {value or 'end of input'!r}", offset, [repr(text)])
        self.advance()

    def parse(self) -> Expression:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {value!r}", offset, ["operator", "end of input"])
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {value!r}", offset)
                self.advance()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != 1:
                    raise ArityError(f"{value} takes 1 argument, got {len(args)}", offset)
                return Call(value, tuple(args))
            if value in CONSTANTS:
                return Const(value)
            if value in FUNCTIONS:
                raise ExpressionSyntaxError(f"function {value!r} used without arguments", offset, ["'('"])
            known = _COORD.match(value) if self.variables is None else value in self.variables
            if not known:
                raise UnknownIdentifier(f"unknown identifier {value!r}", offset)
            return Var(value)
        if (kind, value) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(
            f"unexpected {value or 'end of input'!r}", offset, ["number", "name", "'('", "'-'"]
        )


def parse_expression(source: str, variables: Sequence[str] | None = None) -> Expression:
    """Parse `source` into an expression tree.

    `variables` lists the admissible free names; by default any coordinate
    symbol ``x0, x1, ...`` is accepted.
    """
    return _Parser(source, variables).parse()


def to_source(node: Expression) -> str:
    """Fully parenthesised source text; ``parse_expression(to_source(t)) == t``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _power(a, b):
    return np.power(np.asarray(a, dtype=float), b)


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": _power,
}


def compile_expression(node: Expression, variables: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile to ``f(X)`` with ``X[..., i]`` bound to ``variables[i]``.

    The result always has shape ``X.shape[:-1]``.
    """
    index = {name: i for i, name in enumerate(variables)}

    def build(n: Expression):
        if isinstance(n, Num):
            v = float(n.value)
            return lambda X: v
        if isinstance(n, Const):
            v = CONSTANTS[n.name]
            return lambda X: v
        if isinstance(n, Var):
            if n.name not in index:
                raise UnknownIdentifier(f"unbound variable {n.name!r}", 0)
            i = index[n.name]
            return lambda X: X[..., i]
        if isinstance(n, Neg):
            f = build(n.operand)
            return lambda X: np.negative(f(X))
        if isinstance(n, BinOp):
            op, fl, fr = _BINARY[n.op], build(n.left), build(n.right)
            return lambda X: op(fl(X), fr(X))
        if isinstance(n, Call):
            fn, fa = FUNCTIONS[n.func], build(n.args[0])
            return lambda X: fn(fa(X))
        raise TypeError(f"not an expression node: {n!r}")

    inner = build(node)

    def f(X):
        X = np.asarray(X, dtype=float)
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            try:
                out = inner(X)
            except FloatingPointError as exc:
                raise ExpressionDomainError(f"{to_source(node)}: {exc}") from None
        out = np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1])
        if not np.all(np.isfinite(out)):
            raise ExpressionDomainError(f"{to_source(node)}: non-finite value")
        return np.array(out)

    return f


def evaluate(node: Expression, env: Mapping[str, float]) -> float:
    """Scalar evaluation with named bindings."""
    names = sorted(env)
    X = np.array([float(env[k]) for k in names])
    return float(compile_expression(node, names)(X))
