"""Utility expressions over ``MMSE`` and ``PA``.

Grammar::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ["^" unary]
    atom  := NUMBER | "MMSE" | "PA" | "(" expr ")" | FUNC "(" expr ")"
    FUNC  := log | sqrt | exp          (log is the natural logarithm)

Expressions evaluate elementwise on numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import GameOfCodingError

VARIABLES = ("MMSE", "PA")
FUNCTIONS = {"log": np.log, "sqrt": np.sqrt, "exp": np.exp}


class UtilitySyntaxError(GameOfCodingError, ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at offset {position}")


class Expr:
    def __call__(self, mmse, pa):
        with np.errstate(all="ignore"):
            return self._eval(np.asarray(mmse, dtype=float), np.asarray(pa, dtype=float))

    def _eval(self, mmse, pa):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def _eval(self, mmse, pa):
        return np.broadcast_to(self.value, np.broadcast(mmse, pa).shape).astype(float)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _eval(self, mmse, pa):
        x = mmse if self.name == "MMSE" else pa
        return np.broadcast_to(x, np.broadcast(mmse, pa).shape).astype(float)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _eval(self, mmse, pa):
        return -self.arg._eval(mmse, pa)

    def __str__(self):
        return f"(-{self.arg})"


_BINOPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _eval(self, mmse, pa):
        return _BINOPS[self.op](self.left._eval(mmse, pa), self.right._eval(mmse, pa))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def _eval(self, mmse, pa):
        return FUNCTIONS[self.name](self.arg._eval(mmse, pa))

    def __str__(self):
        return f"{self.name}({self.arg})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),−]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise UtilitySyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        value = m.group(kind)
        if value == "−":
            value = "-"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return UtilitySyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {what}")
        return self.take()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected {tok[1]!r}")
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
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            return Const(float(value))
        if kind == "name":
            self.take()
            if value in VARIABLES:
                return Var(value)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise self.error(f"{value}() takes exactly one argument")
                self.expect(")")
                return Func(value, arg)
            raise UtilitySyntaxError(f"unknown identifier {value!r}", tok[2], self.text)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise self.error(f"unexpected {what}")


def parse_utility(text: str) -> Expr:
    """Parse a utility expression; raises :class:`UtilitySyntaxError` with the offset."""
    if not isinstance(text, str):
        raise UtilitySyntaxError("utility must be a string", 0, "")
    return _Parser(text).parse()
