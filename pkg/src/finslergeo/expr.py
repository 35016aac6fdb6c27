"""Scalar expression language for metric components and scalar fields.

Grammar (see docs/expressions.md for the EBNF):

    expr    = term {("+"|"-") term}
    term    = unary {("*"|"/") unary}
    unary   = "-" unary | power
    power   = atom {"^" atom}
    atom    = NUMBER | IDENT | FUNC "(" expr ")" | "(" expr ")"

Precedence: ``^`` > unary ``-`` > ``*``,``/`` > ``+``,``-``; all binary
operators associate to the left.  There is no implicit multiplication.
Coordinates are written ``x0``, ``x1``, ...; a chart may add aliases
(e.g. ``u``, ``v``).  Functions: sin, cos, exp, ln, sqrt, abs.

Evaluation is generic over "scalar-like" values: plain floats or jets, so
evaluating over seeded jets yields the expression's derivatives for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from . import jets
from .jets import DomainError

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs")
_UNARY_OPS = ("neg",) + FUNCTIONS
_BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class ExprSyntaxError(ValueError):
    """Malformed source; `offset` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ExprNameError(ValueError):
    """Unknown or out-of-range identifier; `offset` as above."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ExprDomainError(ArithmeticError):
    """Evaluation left a function's domain; carries the node offset."""

    def __init__(self, reason: str, offset: int):
        self.reason = reason
        self.offset = offset
        super().__init__(f"{reason} (at byte {offset})")


@dataclass(frozen=True)
class Const:
    value: float
    span: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Coord:
    index: int
    span: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    span: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "ExpressionAst"
    span: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExpressionAst"
    right: "ExpressionAst"
    span: int = field(default=-1, compare=False)


ExpressionAst = Union[Const, Coord, Param, Unary, Binary]


# -- lexer ---------------------------------------------------------------


_SYMBOLS = "+-*/^()"


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    """Tokens as (kind, text, byte offset); kind in num/ident/sym/end."""
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "−":  # tolerate the typographic minus
            tokens.append(("sym", "-", _byte_offset(source, i)))
            i += 1
            continue
        if ch in _SYMBOLS:
            tokens.append(("sym", ch, _byte_offset(source, i)))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            tokens.append(("num", source[start:i], _byte_offset(source, start)))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(("ident", source[start:i], _byte_offset(source, start)))
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", _byte_offset(source, i))
    tokens.append(("end", "", _byte_offset(source, n)))
    return tokens


# -- parser --------------------------------------------------------------


class _Parser:
    def __init__(self, source: str, dim: int, params, aliases):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.dim = dim
        self.params = set(params) if params else set()
        self.aliases = dict(aliases) if aliases else {}
        for name in list(self.aliases) + list(self.params):
            if name in FUNCTIONS:
                raise ExprNameError(f"{name!r} is a reserved function name", 0)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_sym(self, text: str):
        kind, val, off = self.peek()
        if kind != "sym" or val != text:
            raise ExprSyntaxError(f"expected {text!r}", off)
        return self.take()

    def parse(self) -> ExpressionAst:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {val!r}", off)
        return node

    def expr(self) -> ExpressionAst:
        node = self.term()
        while True:
            kind, val, off = self.peek()
            if kind == "sym" and val in "+-":
                self.take()
                rhs = self.term()
                node = Binary("add" if val == "+" else "sub", node, rhs, off)
            else:
                return node

    def term(self) -> ExpressionAst:
        node = self.unary()
        while True:
            kind, val, off = self.peek()
            if kind == "sym" and val in "*/":
                self.take()
                rhs = self.unary()
                node = Binary("mul" if val == "*" else "div", node, rhs, off)
            else:
                return node

    def unary(self) -> ExpressionAst:
        kind, val, off = self.peek()
        if kind == "sym" and val == "-":
            self.take()
            return Unary("neg", self.unary(), off)
        return self.power()

    def power(self) -> ExpressionAst:
        node = self.atom()
        while True:
            kind, val, off = self.peek()
            if kind == "sym" and val == "^":
                self.take()
                rhs = self.atom()
                node = Binary("pow", node, rhs, off)
            else:
                return node

    def atom(self) -> ExpressionAst:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val), off)
        if kind == "sym" and val == "(":
            node = self.expr()
            self.expect_sym(")")
            return node
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_sym("(")
                arg = self.expr()
                self.expect_sym(")")
                return Unary(val, arg, off)
            return self.name(val, off)
        raise ExprSyntaxError(f"expected a value, got {val!r}", off)

    def name(self, text: str, off: int) -> ExpressionAst:
        if text in self.aliases:
            idx = self.aliases[text]
            if not 0 <= idx < self.dim:
                raise ExprNameError(
                    f"alias {text!r} maps to coordinate {idx} outside dim {self.dim}",
                    off,
                )
            return Coord(idx, off)
        if text.startswith("x") and text[1:].isdigit():
            idx = int(text[1:])
            if idx >= self.dim:
                raise ExprNameError(
                    f"coordinate {text!r} exceeds chart dimension {self.dim}", off
                )
            return Coord(idx, off)
        if text in self.params:
            return Param(text, off)
        raise ExprNameError(f"unknown identifier {text!r}", off)


def parse(
    source: str,
    dim: int,
    params: Sequence[str] | set | None = None,
    aliases: Mapping[str, int] | None = None,
) -> ExpressionAst:
    """Parse `source` into an immutable AST over `dim` coordinates.

    `params` declares the legal parameter names; `aliases` maps extra
    coordinate spellings to indices (aliases take precedence over the
    canonical ``x<k>`` forms).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return _Parser(source, dim, params, aliases).parse()


# -- evaluation ----------------------------------------------------------


def eval(
    ast: ExpressionAst,
    coords: Sequence,
    params: Mapping[str, float] | None = None,
):
    """Evaluate over scalar-like coordinates (floats or jets).

    Domain failures (log of a non-positive value, division by zero, ...) are
    reported as ExprDomainError carrying the offending node's byte offset.
    """
    params = params or {}

    def rec(node):
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Coord):
            return coords[node.index]
        if isinstance(node, Param):
            try:
                return float(params[node.name])
            except KeyError:
                raise ExprNameError(f"parameter {node.name!r} has no value", node.span)
        try:
            if isinstance(node, Unary):
                v = rec(node.arg)
                if node.op == "neg":
                    return -v
                if node.op == "sin":
                    return jets.sin(v)
                if node.op == "cos":
                    return jets.cos(v)
                if node.op == "exp":
                    return jets.exp(v)
                if node.op == "ln":
                    return jets.ln(v)
                if node.op == "sqrt":
                    return jets.sqrt(v)
                if node.op == "abs":
                    return jets.absval(v)
                raise ValueError(f"unknown unary op {node.op!r}")
            lhs = rec(node.left)
            if node.op == "pow":
                # constant integer exponents keep negative bases legal
                if isinstance(node.right, Const):
                    return jets.powx(lhs, node.right.value)
                return jets.powx(lhs, rec(node.right))
            rhs = rec(node.right)
            if node.op == "add":
                return lhs + rhs
            if node.op == "sub":
                return lhs - rhs
            if node.op == "mul":
                return lhs * rhs
            if node.op == "div":
                return jets.divide(lhs, rhs)
            raise ValueError(f"unknown binary op {node.op!r}")
        except DomainError as err:
            raise ExprDomainError(err.reason, node.span) from err
        except ZeroDivisionError:
            raise ExprDomainError("division-by-zero", node.span) from None

    return rec(ast)


# -- pretty printing -------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def pretty(ast: ExpressionAst) -> str:
    """Render with minimal parentheses; reparsing gives an identical AST."""

    def prec(node) -> int:
        if isinstance(node, Binary):
            return _PREC[node.op]
        if isinstance(node, Unary) and node.op == "neg":
            return _PREC["neg"]
        return 9

    def rec(node) -> str:
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Coord):
            return f"x{node.index}"
        if isinstance(node, Param):
            return node.name
        if isinstance(node, Unary):
            if node.op == "neg":
                inner = rec(node.arg)
                if prec(node.arg) < _PREC["neg"]:
                    inner = f"({inner})"
                return f"-{inner}"
            return f"{node.op}({rec(node.arg)})"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[node.op]
        p = _PREC[node.op]
        left = rec(node.left)
        if prec(node.left) < p:
            left = f"({left})"
        right = rec(node.right)
        # left associativity: same-precedence right children need parens
        if prec(node.right) <= p:
            right = f"({right})"
        return f"{left}{sym}{right}"

    return rec(ast)
