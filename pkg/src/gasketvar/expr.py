"""Small recursive-descent parser for nonlinearities f(x, t) and weights alpha(x).

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' INTEGER)?
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names are ``t`` and the coordinates ``x1 .. x{N-1}``; functions are
``sin cos exp abs``.  Expressions evaluate on numpy arrays with broadcasting.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


class ExprError(ValueError):
    def __init__(self, message, pos=None, text=None):
        self.pos = pos
        self.text = text
        if pos is not None:
            message = f"{message} at position {pos}"
        super().__init__(message)


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class Sign:
    """sign(arg); only produced by differentiating abs."""

    arg: object


# -- tokenizer / parser -----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if not mt:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExprError(f"unexpected character {text[bad]!r}", bad, text)
        kind = mt.lastgroup
        out.append((kind, mt.group(kind), mt.start(kind)))
        pos = mt.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                shown = "end of input" if kind == "end" else repr(val)
                raise ExprError(f"exponent must be a non-negative integer literal, found {shown}", pos, self.text)
            if self.peek()[1] == "^":
                raise ExprError("chained '^' needs parentheses", self.peek()[2], self.text)
            return Pow(base, int(val))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val not in self.names:
                raise ExprError(f"unknown identifier {val!r}", pos, self.text)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        shown = "end of input" if kind == "end" else repr(val)
        raise ExprError(f"unexpected {shown}", pos, self.text)


def coordinate_names(N):
    return tuple(f"x{i}" for i in range(1, N))


def parse(text, names):
    """Parse ``text`` allowing only the identifiers in ``names``."""
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, frozenset(names)).parse()


# -- evaluation and symbolic helpers -----------------------------------------


def evaluate(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Bin):
        a, b = evaluate(node.left, env), evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        return base**node.exp
    if isinstance(node, Call):
        return FUNCTIONS[node.fn](evaluate(node.arg, env))
    if isinstance(node, Sign):
        return np.sign(evaluate(node.arg, env))
    raise TypeError(f"not an expression node: {node!r}")


def depends_on(node, name):
    if isinstance(node, Var):
        return node.name == name
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call, Sign)):
        return depends_on(node.arg, name)
    if isinstance(node, Pow):
        return depends_on(node.base, name)
    return depends_on(node.left, name) or depends_on(node.right, name)


def _add(a, b):
    if a == Num(0.0):
        return b
    if b == Num(0.0):
        return a
    return Bin("+", a, b)


def _mul(a, b):
    if a == Num(0.0) or b == Num(0.0):
        return Num(0.0)
    if a == Num(1.0):
        return b
    if b == Num(1.0):
        return a
    return Bin("*", a, b)


def derivative(node, name):
    """Symbolic d/d(name); abs differentiates to sign."""
    if not depends_on(node, name):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Neg):
        return Neg(derivative(node.arg, name))
    if isinstance(node, Bin):
        da, db = derivative(node.left, name), derivative(node.right, name)
        if node.op in "+-":
            return _add(da, db) if node.op == "+" else Bin("-", da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        # (a/b)' = a'/b - a b' / b^2
        return Bin("-", Bin("/", da, node.right), Bin("/", _mul(node.left, db), Pow(node.right, 2)))
    if isinstance(node, Pow):
        if node.exp == 0:
            return Num(0.0)
        inner = Pow(node.base, node.exp - 1) if node.exp > 2 else (node.base if node.exp == 2 else Num(1.0))
        return _mul(_mul(Num(float(node.exp)), inner), derivative(node.base, name))
    if isinstance(node, Call):
        outer = {
            "sin": lambda a: Call("cos", a),
            "cos": lambda a: Neg(Call("sin", a)),
            "exp": lambda a: Call("exp", a),
            "abs": Sign,
        }[node.fn](node.arg)
        return _mul(outer, derivative(node.arg, name))
    raise TypeError(f"not an expression node: {node!r}")


def polynomial_in(node, name):
    """Coefficients {power: node} if ``node`` is polynomial in ``name``, else None.

    Coefficient nodes never depend on ``name``.
    """
    if not depends_on(node, name):
        return {0: node}
    if isinstance(node, Var):
        return {1: Num(1.0)}
    if isinstance(node, Neg):
        p = polynomial_in(node.arg, name)
        return None if p is None else {k: Neg(c) for k, c in p.items()}
    if isinstance(node, Bin):
        a = polynomial_in(node.left, name)
        if node.op == "/":
            if depends_on(node.right, name) or a is None:
                return None
            return {k: Bin("/", c, node.right) for k, c in a.items()}
        b = polynomial_in(node.right, name)
        if a is None or b is None:
            return None
        if node.op == "+":
            return _poly_add(a, b)
        if node.op == "-":
            return _poly_add(a, {k: Neg(c) for k, c in b.items()})
        return _poly_mul(a, b)
    if isinstance(node, Pow):
        p = polynomial_in(node.base, name)
        if p is None:
            return None
        out = {0: Num(1.0)}
        for _ in range(node.exp):
            out = _poly_mul(out, p)
        return out
    return None  # transcendental function of t


def _poly_add(a, b):
    out = dict(a)
    for k, c in b.items():
        out[k] = Bin("+", out[k], c) if k in out else c
    return out


def _poly_mul(a, b):
    out = {}
    for i, ci in a.items():
        for j, cj in b.items():
            term = _mul(ci, cj)
            out[i + j] = Bin("+", out[i + j], term) if i + j in out else term
    return out


def antiderivative_of_polynomial(coeffs, name):
    """sum_k c_k t^(k+1) / (k+1) as an expression node."""
    node = Num(0.0)
    for k in sorted(coeffs):
        term = Bin("/", _mul(coeffs[k], Pow(Var(name), k + 1)), Num(float(k + 1)))
        node = term if node == Num(0.0) else Bin("+", node, term)
    return node


def to_text(node):
    """Readable (fully parenthesised where needed) rendering of a node."""
    if isinstance(node, Num):
        v = node.value
        return repr(int(v)) if v == int(v) and math.isfinite(v) and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"-({to_text(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)})^{node.exp}"
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.arg)})"
    if isinstance(node, Sign):
        return f"sign({to_text(node.arg)})"
    raise TypeError(node)
