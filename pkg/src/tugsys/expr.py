"""Tiny expression language for boundary data.

Grammar (usual precedence, left associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x``, ``y`` and ``nrm`` (the Euclidean norm of the point);
functions are ``sin``, ``cos``, ``exp`` and ``abs``.  Expressions evaluate
vectorised over an array of points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalError, ExprSyntaxError, UnknownIdentifier

VARIABLES = ("x", "y", "nrm")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}

_TOKEN = re.compile(r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/()])")


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
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def _tokenize(src: str):
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        offset = len(src[:pos].encode())
        if pos == len(src):
            toks.append(("end", "", offset))
            return toks
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", offset)
        toks.append((m.lastgroup, m.group(), offset))
        pos = m.end()


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(text)
            raise UnknownIdentifier(text, off)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", off)


@dataclass(frozen=True)
class BoundaryExpr:
    """Parsed boundary expression; call it on an ``(P, n)`` array of points."""

    source: str
    tree: object

    def uses(self, name: str) -> bool:
        def walk(node):
            if isinstance(node, Var):
                return node.name == name
            if isinstance(node, (Neg, Call)):
                return walk(node.arg)
            if isinstance(node, BinOp):
                return walk(node.left) or walk(node.right)
            return False

        return walk(self.tree)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] < 2 and self.uses("y"):
            raise EvalError("'y' is undefined for 1-D points")
        env = {"x": pts[:, 0], "nrm": np.linalg.norm(pts, axis=1)}
        if pts.shape[1] >= 2:
            env["y"] = pts[:, 1]
        with np.errstate(all="ignore"):
            out = _eval(self.tree, env) * np.ones(len(pts))
        if not np.all(np.isfinite(out)):
            raise EvalError(f"expression {self.source!r} is not finite at some boundary point")
        return out


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    a, b = _eval(node.left, env), _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if np.any(np.asarray(b) == 0):
        raise EvalError("division by zero")
    return a / b


def parse_boundary_expr(src: str) -> BoundaryExpr:
    return BoundaryExpr(src, _Parser(src).parse())
