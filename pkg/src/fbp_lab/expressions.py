"""Tiny arithmetic expression language for boundary-data fields.

Grammar (EBNF, documented in docs/config_format.md):

    expr   = term { ("+" | "-") term } ;
    term   = unary { "*" unary } ;
    unary  = "-" unary | atom ;
    atom   = NUMBER | "x" | "y"
           | ("sin" | "cos") "(" expr ")"
           | "atan2" "(" expr "," expr ")"
           | "(" expr ")" | "|" expr "|" ;

Absolute-value bars do not nest directly; wrap the inner pair in
parentheses.  Expressions compile to vectorized callables on (..., 2)
point arrays, so they plug straight into the problem data slots.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import FbpError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
                    r"|([A-Za-z_][A-Za-z0-9_]*)"
                    r"|([-+*(),|]))")

_FUNCS = {"sin": (np.sin, 1), "cos": (np.cos, 1), "atan2": (np.arctan2, 2)}


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            if src[pos:].strip() == "":
                break
            raise FbpError("CONFIG_INVALID",
                           f"bad character {src[pos:pos+1]!r} at offset {pos} in {src!r}")
        pos = m.end()
        if m.group(1) is not None:
            tokens.append(("num", float(m.group(0))))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2)))
        else:
            tokens.append(("op", m.group(3)))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        k, v = self.toks[self.i]
        if (kind and k != kind) or (value is not None and v != value):
            raise FbpError("CONFIG_INVALID",
                           f"expected {value or kind} near token {self.i} in {self.src!r}")
        self.i += 1
        return v

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take("op")
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*"):
            self.take("op")
            node = ("*", node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take("op")
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return ("num", val)
        if kind == "name":
            self.take()
            if val in ("x", "y"):
                return ("var", val)
            if val in _FUNCS:
                self.take("op", "(")
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take("op")
                    args.append(self.expr())
                self.take("op", ")")
                if len(args) != _FUNCS[val][1]:
                    raise FbpError("CONFIG_INVALID",
                                   f"{val} takes {_FUNCS[val][1]} argument(s) in {self.src!r}")
                return ("call", val, args)
            raise FbpError("CONFIG_INVALID", f"unknown name {val!r} in {self.src!r}")
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if (kind, val) == ("op", "|"):
            self.take()
            node = self.expr()
            self.take("op", "|")
            return ("abs", node)
        raise FbpError("CONFIG_INVALID", f"unexpected {val!r} in {self.src!r}")


def _eval(node, x, y):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return x if node[1] == "x" else y
    if tag == "neg":
        return -_eval(node[1], x, y)
    if tag == "abs":
        return np.abs(_eval(node[1], x, y))
    if tag == "call":
        fn = _FUNCS[node[1]][0]
        return fn(*[_eval(a, x, y) for a in node[2]])
    a = _eval(node[1], x, y)
    b = _eval(node[2], x, y)
    return a + b if tag == "+" else a - b if tag == "-" else a * b


class Expression:
    """Compiled expression; callable on an (..., 2) array of points."""

    def __init__(self, source: str):
        self.source = source
        parser = _Parser(source)
        self._ast = parser.expr()
        parser.take("end")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = _eval(self._ast, pts[..., 0], pts[..., 1])
        return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1]).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def parse_expression(source: str) -> Expression:
    return Expression(source)
