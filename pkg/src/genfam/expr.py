"""Scalar family expressions over base variables q1..qn and fiber variables l1..lk.

Grammar (lowest to highest binding)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' exponent)?          right associative
    exponent:= '-'? power                    must fold to an integer constant
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are ``q<i>`` (1 <= i <= n), ``l<i>`` (1 <= i <= k), a parameter from
the supplied table, or one of the functions sqrt, sin, cos, exp, log.  There
is no implicit multiplication.  ``-x^2`` parses as ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from . import autodiff
from .autodiff import DomainError, Jet2


class ExprError(ValueError):
    """Malformed or ill-scoped expression; ``pos`` is a 0-based offset."""

    def __init__(self, message, pos=None):
        where = "" if pos is None else f" at offset {pos}"
        super().__init__(f"{message}{where}")
        self.pos = pos


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "q" or "l"
    index: int  # 1-based

    @property
    def name(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Param, Unary, Binary, Pow, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_VAR_RE = re.compile(r"([ql])([1-9]\d*)$")


def tokenize(src):
    tokens = []
    pos = 0
    while True:
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            rest = len(src) - len(src[pos:].lstrip())
            if rest >= len(src):
                break
            raise ExprError(f"unexpected character {src[rest]!r}", rest)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, n, k, params):
        self.src = src
        self.n = n
        self.k = k
        self.params = params
        self.tokens = tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.peek()
        if val != text or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprError(f"expected {text!r}, found {found}", pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.advance()
            return Unary(val, self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            pos = self.peek()[2]
            negative = False
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.advance()
                negative = True
            exponent = _fold_integer(self.power(), pos)
            return Pow(base, -exponent if negative else exponent)
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in autodiff.FUNCTIONS:
                    raise ExprError(f"unknown function {val!r}", pos)
                self.advance()
                arg = self.expr()
                if self.peek()[0] == "op" and self.peek()[1] == ",":
                    raise ExprError(f"{val}() takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Call(val, arg)
            if val in autodiff.FUNCTIONS:
                raise ExprError(f"function {val!r} needs an argument list", pos)
            return self.name(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprError(f"unexpected {found}", pos)

    def name(self, val, pos):
        m = _VAR_RE.match(val)
        if m:
            kind, idx = m.group(1), int(m.group(2))
            limit = self.n if kind == "q" else self.k
            if idx > limit:
                dim = "base" if kind == "q" else "fiber"
                raise ExprError(f"variable {val!r} exceeds {dim} dimension {limit}", pos)
            return Var(kind, idx)
        if val in self.params:
            return Param(val)
        raise ExprError(f"unknown identifier {val!r}", pos)


def _fold_integer(node, pos):
    def fold(nd):
        if isinstance(nd, Num):
            return nd.value
        if isinstance(nd, Unary):
            v = fold(nd.operand)
            return -v if nd.op == "-" else v
        if isinstance(nd, Pow):
            return fold(nd.base) ** nd.exponent
        if isinstance(nd, Binary):
            a, b = fold(nd.left), fold(nd.right)
            if nd.op == "/":
                return a / b if b != 0 else math.nan
            return {"+": a + b, "-": a - b, "*": a * b}[nd.op]
        raise ExprError("exponent must be an integer constant", pos)

    value = fold(node)
    if not math.isfinite(value) or value != int(value):
        raise ExprError(f"fractional exponent {value!r}", pos)
    return int(value)


def to_source(node):
    """Fully parenthesised source text that parses back to an equal tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Pow):
        return f"({to_source(node.base)}^{node.exponent})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def _compile(node, params):
    """Turn the tree into nested closures ``f(q, l) -> scalar``."""
    if isinstance(node, Num):
        c = node.value
        return lambda q, l: c
    if isinstance(node, Var):
        i = node.index - 1
        if node.kind == "q":
            return lambda q, l: q[i]
        return lambda q, l: l[i]
    if isinstance(node, Param):
        c = float(params[node.name])
        return lambda q, l: c
    if isinstance(node, Unary):
        f = _compile(node.operand, params)
        if node.op == "-":
            return lambda q, l: -f(q, l)
        return f
    if isinstance(node, Pow):
        f = _compile(node.base, params)
        e = node.exponent
        src = to_source(node)

        def power(q, l):
            try:
                return autodiff.ipow(f(q, l), e)
            except DomainError as err:
                raise DomainError(str(err), err.subexpr or src) from None

        return power
    if isinstance(node, Binary):
        a = _compile(node.left, params)
        b = _compile(node.right, params)
        if node.op == "+":
            return lambda q, l: a(q, l) + b(q, l)
        if node.op == "-":
            return lambda q, l: a(q, l) - b(q, l)
        if node.op == "*":
            return lambda q, l: a(q, l) * b(q, l)
        src = to_source(node)

        def divide(q, l):
            try:
                return autodiff.div(a(q, l), b(q, l))
            except DomainError as err:
                raise DomainError(str(err), err.subexpr or src) from None

        return divide
    if isinstance(node, Call):
        f = _compile(node.arg, params)
        fn = autodiff.FUNCTIONS[node.func]
        src = to_source(node)

        def call(q, l):
            x = f(q, l)
            try:
                return fn(x)
            except DomainError as err:
                raise DomainError(str(err), err.subexpr or src) from None

        return call
    raise TypeError(f"not an expression node: {node!r}")


class Expression:
    """A parsed family expression bound to its dimensions and parameters."""

    def __init__(self, src, root, n, k, params):
        self.src = src
        self.root = root
        self.n = n
        self.k = k
        self.params = dict(params)
        self._fn = _compile(root, self.params)

    def __repr__(self):
        return f"Expression({self.src!r}, n={self.n}, k={self.k})"

    def __call__(self, q, l):
        return self._fn(q, l)

    def evaluate(self, q, l, jet=False):
        """Evaluate at ``(q, l)`` as a float, or as a :class:`Jet2` in all n+k variables."""
        q = list(q)
        l = list(l)
        if len(q) != self.n or len(l) != self.k:
            raise ValueError(f"expected {self.n} base and {self.k} fiber values, got {len(q)} and {len(l)}")
        if not jet:
            return float(self._fn([float(v) for v in q], [float(v) for v in l]))
        xs = Jet2.variables(q + l)
        out = self._fn(xs[: self.n], xs[self.n :])
        if not isinstance(out, Jet2):
            out = Jet2.constant(out, self.n + self.k)
        return out

    def jet_function(self):
        n = self.n
        return lambda xs: self._fn(xs[:n], xs[n:])

    def to_source(self):
        return to_source(self.root)


def parse(src, n, k=0, params=None):
    """Parse ``src`` into an :class:`Expression`."""
    params = {} if params is None else params
    if not src or not src.strip():
        raise ExprError("empty expression", 0)
    for name in params:
        if _VAR_RE.match(name) or name in autodiff.FUNCTIONS:
            raise ExprError(f"parameter name {name!r} shadows a variable or function")
    root = _Parser(src, n, k, params).parse()
    return Expression(src, root, n, k, params)


def eval_generic(expression, q, l, jet=False):
    return expression.evaluate(q, l, jet=jet)
