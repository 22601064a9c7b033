"""Small arithmetic expression language for scenario fields.

Expressions are functions of ``t`` and ``x`` only.  The grammar, in
decreasing precedence::

    primary  := number | t | x | func '(' args ')' | '(' expr ')'
    power    := primary ['^' unary]          (right associative)
    unary    := '-' unary | power
    product  := unary (('*' | '/') unary)*
    expr     := product (('+' | '-') product)*

Evaluation works on Python floats and on numpy arrays (broadcast over
``t`` and ``x``).  Division by zero, domain errors and non-finite
intermediate values raise :class:`ExpressionEvalError`; NaN never leaks out.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import ExprSyntaxError, ExpressionEvalError, UnknownIdentifier

__all__ = [
    "Number", "Variable", "Neg", "Binary", "Call", "ExprAst",
    "parse_expression", "evaluate", "compile_expression", "to_text",
    "FUNCTIONS", "VARIABLES",
]

VARIABLES = ("t", "x")
FUNCTIONS = {"exp": 1, "sin": 1, "cos": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2}


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


ExprAst = Union[Number, Variable, Neg, Binary, Call]


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(pos, "number, name, operator or parenthesis", text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind not in ("op",):
            raise ExprSyntaxError(self.tok.offset, repr(text), self.text)
        return self.advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(self.tok.offset, "operator or end of input", self.text)
        return node

    def expr(self) -> ExprAst:
        node = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.product())
        return node

    def product(self) -> ExprAst:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> ExprAst:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def primary(self) -> ExprAst:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Number(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in VARIABLES:
                return Variable(tok.text)
            if tok.text in FUNCTIONS:
                return self.call(tok)
            raise UnknownIdentifier(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        expected = "expression" if tok.kind == "end" else "number, name, '(' or '-'"
        raise ExprSyntaxError(tok.offset, expected, self.text)

    def call(self, name: _Tok) -> ExprAst:
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name.text]
        if len(args) != arity:
            raise ExprSyntaxError(
                name.offset, f"{arity} argument(s) for {name.text}()", self.text
            )
        return Call(name.text, tuple(args))


def parse_expression(text: str) -> ExprAst:
    """Parse ``text`` into an AST.

    Raises :class:`ExprSyntaxError` (with character offset) or
    :class:`UnknownIdentifier`.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError(0, "expression", text if isinstance(text, str) else "")
    return _Parser(text).parse()


def to_text(node: ExprAst) -> str:
    """Fully parenthesised text that re-parses to the same AST."""
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# evaluation

Evaluator = Callable[[object, object], object]


def _finite(node: ExprAst, value):
    if not np.all(np.isfinite(value)):
        raise ExpressionEvalError(to_text(node), "non-finite value")
    return value


def _power(node: Binary, a, b):
    if np.ndim(b) == 0 and float(b).is_integer() and abs(b) <= 8:
        n = int(b)
        acc = np.ones_like(a, dtype=float) if np.ndim(a) else 1.0
        for _ in range(abs(n)):
            acc = acc * a
        if n < 0:
            if np.any(acc == 0):
                raise ExpressionEvalError(to_text(node), "division by zero")
            acc = 1.0 / acc
        return acc
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    integral = np.floor(b) == b
    if np.any((a < 0) & ~integral):
        raise ExpressionEvalError(to_text(node), "negative base with non-integer exponent")
    if np.any((a == 0) & (b <= 0)):
        raise ExpressionEvalError(to_text(node), "zero base with non-positive exponent")
    with np.errstate(all="ignore"):
        pos = np.power(np.where(a > 0, a, 1.0), b)
        out = np.where(a > 0, pos, np.where(a == 0, 0.0, np.power(a, b)))
    return out if out.ndim else float(out)


def _compile(node: ExprAst) -> Evaluator:
    if isinstance(node, Number):
        v = node.value
        return lambda t, x: v
    if isinstance(node, Variable):
        return (lambda t, x: t) if node.name == "t" else (lambda t, x: x)
    if isinstance(node, Neg):
        f = _compile(node.operand)
        return lambda t, x: -f(t, x)
    if isinstance(node, Binary):
        fl, fr = _compile(node.left), _compile(node.right)
        op = node.op
        if op == "+":
            return lambda t, x: _finite(node, fl(t, x) + fr(t, x))
        if op == "-":
            return lambda t, x: _finite(node, fl(t, x) - fr(t, x))
        if op == "*":
            return lambda t, x: _finite(node, fl(t, x) * fr(t, x))
        if op == "/":
            def div(t, x):
                den = fr(t, x)
                if np.any(den == 0):
                    raise ExpressionEvalError(to_text(node), "division by zero")
                return _finite(node, fl(t, x) / den)
            return div
        if op == "^":
            return lambda t, x: _finite(node, _power(node, fl(t, x), fr(t, x)))
        raise ValueError(f"unknown operator {op!r}")
    if isinstance(node, Call):
        fs = [_compile(a) for a in node.args]
        name = node.func
        if name == "sqrt":
            def sqrt(t, x):
                v = fs[0](t, x)
                if np.any(v < 0):
                    raise ExpressionEvalError(to_text(node), "sqrt of negative value")
                return np.sqrt(v)
            return sqrt
        if name in ("min", "max"):
            reduce = np.minimum if name == "min" else np.maximum
            return lambda t, x: reduce(fs[0](t, x), fs[1](t, x))
        ufunc = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs}[name]

        def call(t, x):
            with np.errstate(over="ignore"):
                return _finite(node, ufunc(fs[0](t, x)))
        return call
    raise TypeError(f"not an expression node: {node!r}")


@lru_cache(maxsize=256)
def compile_expression(ast: ExprAst) -> Evaluator:
    """Return ``f(t, x)`` evaluating ``ast``; result broadcast to the inputs' shape."""
    inner = _compile(ast)

    def f(t, x):
        value = inner(t, x)
        shape = np.broadcast(t, x).shape
        if shape:
            return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
        return float(value)

    return f


def evaluate(ast: ExprAst, t, x):
    """Evaluate ``ast`` at ``(t, x)`` (scalars or arrays)."""
    return compile_expression(ast)(t, x)
