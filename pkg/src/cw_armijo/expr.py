"""Arithmetic expressions for user-defined objectives.

Grammar, lowest precedence first::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" unary)?          # right-associative
    primary := NUMBER | NAME | NAME "(" args ")" | "(" expr ")"

So ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.  Gradients of parsed
expressions come from central differences.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .core import BlockPartition, CwArmijoError, DimensionMismatch, InvalidParameter
from .core import UnknownFunction as _UnknownName
from .objectives import Objective

MAX_DEPTH = 100


class ExprError(CwArmijoError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class LexError(ExprError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int, expectation: str = ""):
        super().__init__(message, position)
        self.expectation = expectation


class UnknownFunction(ParseError, _UnknownName):
    pass


class ArityError(ParseError):
    pass


class UnboundVariable(ExprError):
    pass


class NonFinite(ExprError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | lparen | rparen | comma
    text: str
    position: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<identifier>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<operator>[-+*/^])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    return tokens


@dataclass(frozen=True)
class Constant:
    value: float
    position: int = 0


@dataclass(frozen=True)
class Variable:
    name: str
    position: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"
    position: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    position: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]
    position: int = 0


Expr = Union[Constant, Variable, Unary, Binary, Call]


def _relu(x):
    return x if x > 0 else 0.0


FUNCTIONS = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "exp": (1, math.exp),
    "log": (1, math.log),
    "abs": (1, abs),
    "sqrt": (1, math.sqrt),
    "relu": (1, _relu),
    "max": (2, max),
    "min": (2, min),
}


class _Parser:
    def __init__(self, tokens: Sequence[Token], end: int):
        self.tokens = list(tokens)
        self.i = 0
        self.end = end
        self.depth = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def here(self) -> int:
        tok = self.peek()
        return tok.position if tok is not None else self.end

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            found = "end of input" if tok is None else repr(tok.text)
            raise ParseError(f"expected {what}, found {found}", self.here(), what)
        return self.advance()

    def _enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError("expression nested too deeply", self.here(), "shallower nesting")

    def parse(self) -> Expr:
        if not self.tokens:
            raise ParseError("empty expression", self.end, "an expression")
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok.text!r}", tok.position, "end of input")
        return node

    def expr(self) -> Expr:
        self._enter()
        node = self.term()
        while (tok := self.peek()) is not None and tok.text in ("+", "-"):
            self.advance()
            node = Binary(tok.text, node, self.term(), tok.position)
        self.depth -= 1
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self.peek()) is not None and tok.text in ("*", "/"):
            self.advance()
            node = Binary(tok.text, node, self.unary(), tok.position)
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.text == "-":
            self.advance()
            self._enter()
            node = Unary("-", self.unary(), tok.position)
            self.depth -= 1
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        tok = self.peek()
        if tok is not None and tok.text == "^":
            self.advance()
            self._enter()
            node = Binary("^", base, self.unary(), tok.position)
            self.depth -= 1
            return node
        return base

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end, "a number, name or '('")
        if tok.kind == "number":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"number {tok.text!r} out of range", tok.position, "a finite number")
            return Constant(value, tok.position)
        if tok.kind == "identifier":
            self.advance()
            nxt = self.peek()
            if nxt is not None and nxt.kind == "lparen":
                return self.call(tok)
            if tok.text in FUNCTIONS:
                raise ParseError(f"function {tok.text!r} needs arguments", self.here(), "'('")
            return Variable(tok.text, tok.position)
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", "')'")
            return node
        raise ParseError(f"unexpected {tok.text!r}", tok.position, "a number, name or '('")

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise UnknownFunction(f"unknown function {name.text!r}", name.position)
        self.expect("lparen", "'('")
        args = [self.expr()]
        while (tok := self.peek()) is not None and tok.kind == "comma":
            self.advance()
            args.append(self.expr())
        self.expect("rparen", "')' or ','")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            raise ArityError(f"{name.text} takes {arity} argument(s), got {len(args)}", name.position)
        return Call(name.text, tuple(args), name.position)


def parse(tokens: Sequence[Token] | str) -> Expr:
    """Parse a token list (or a raw string) into an expression tree."""
    if isinstance(tokens, str):
        text = tokens
        tokens = tokenize(text)
        end = len(text)
    else:
        tokens = list(tokens)
        end = tokens[-1].position + len(tokens[-1].text) if tokens else 0
    return _Parser(tokens, end).parse()


def _checked(value: float, node) -> float:
    if not math.isfinite(value):
        raise NonFinite(f"non-finite value {value}", node.position)
    return value


def evaluate(e: Expr, assignment: Mapping[str, float]) -> float:
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        try:
            return float(assignment[e.name])
        except KeyError:
            raise UnboundVariable(f"variable {e.name!r} has no value", e.position) from None
    if isinstance(e, Unary):
        return -evaluate(e.child, assignment)
    if isinstance(e, Binary):
        a = evaluate(e.left, assignment)
        b = evaluate(e.right, assignment)
        try:
            if e.op == "+":
                out = a + b
            elif e.op == "-":
                out = a - b
            elif e.op == "*":
                out = a * b
            elif e.op == "/":
                out = a / b
            else:
                out = a ** b
                if isinstance(out, complex):
                    raise ValueError("complex result")
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise NonFinite(str(exc), e.position) from None
        return _checked(out, e)
    if isinstance(e, Call):
        args = [evaluate(a, assignment) for a in e.args]
        try:
            out = FUNCTIONS[e.func][1](*args)
        except (ValueError, OverflowError) as exc:
            raise NonFinite(f"{e.func}: {exc}", e.position) from None
        return _checked(float(out), e)
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> set[str]:
    if isinstance(e, Variable):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.child)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= variables(a)
        return out
    return set()


_INDEXED = re.compile(r"x(\d+)$")


def variable_names(e: Expr, m: int) -> list[str]:
    """Names bound to the m flat coordinates: ``x, y`` or ``x1 .. xm``."""
    names = variables(e)
    indexed = {n for n in names if _INDEXED.match(n)}
    if indexed and indexed != names:
        raise DimensionMismatch(f"mixes x/y names with indexed names: {sorted(names)}")
    if indexed:
        top = max(int(_INDEXED.match(n).group(1)) for n in indexed)
        if min(int(_INDEXED.match(n).group(1)) for n in indexed) < 1 or top > m:
            raise DimensionMismatch(f"indexed variables {sorted(indexed)} do not fit {m} coordinates")
        return [f"x{i + 1}" for i in range(m)]
    plain = ["x", "y"][:m] if m <= 2 else []
    unknown = names - set(plain)
    if unknown:
        raise DimensionMismatch(
            f"variables {sorted(unknown)} not available for {m} coordinates; "
            "use x, y (m <= 2) or x1..xm"
        )
    return plain


def to_objective(e: Expr | str, partition: BlockPartition | None = None,
                 fd_step: float = 1e-6) -> Objective:
    """Wrap an expression as an objective with a finite-difference gradient."""
    if isinstance(e, str):
        source = e
        e = parse(e)
    else:
        source = None
    if partition is None:
        names = variables(e)
        if any(_INDEXED.match(n) for n in names):
            m = max(int(_INDEXED.match(n).group(1)) for n in names if _INDEXED.match(n))
        else:
            m = 2 if "y" in names else 1
        partition = BlockPartition((1,) * m)
    if not fd_step > 0:
        raise InvalidParameter(f"fd_step must be positive, got {fd_step}")
    names = variable_names(e, partition.total)
    tree = e

    def fun(z):
        return evaluate(tree, dict(zip(names, z.tolist())))

    def jac(z):
        z = np.asarray(z, dtype=np.float64)
        out = np.empty_like(z)
        for j in range(z.size):
            plus = z.copy()
            plus[j] += fd_step
            minus = z.copy()
            minus[j] -= fd_step
            out[j] = (fun(plus) - fun(minus)) / (2.0 * fd_step)
        return out

    return Objective(
        "expr", partition, fun, jac, c1=False,
        metadata={"expr": source, "gradient": f"central differences, h={fd_step}"},
    )
