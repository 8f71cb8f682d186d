"""A small infix expression language for metric entries.

Syntax::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("+" | "-") unary | power
    power   := atom ("^" unary)?          # exponent must fold to an integer
    atom    := NUMBER | "i" | x1 | y1 | x2 | y2
             | ("exp" | "sin" | "cos" | "log") "(" expr ")"
             | "complex" "(" expr "," expr ")"
             | "(" expr ")"

Variables are the real coordinates of ``z1 = x1 + i*y1`` and ``z2 = x2 + i*y2``.
Evaluation is vectorised: each variable may be bound to an array and the
result is a complex array of the broadcast shape.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationError, ExpressionSyntaxError

__all__ = [
    "VARIABLES",
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Pow",
    "ComplexOf",
    "Conj",
    "parse",
]

VARIABLES = ("x1", "y1", "x2", "y2")
FUNCTIONS = ("exp", "sin", "cos", "log")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class Expression:
    """Base node.  Subclasses implement ``_eval(env)``."""

    def __call__(self, x1=0.0, y1=0.0, x2=0.0, y2=0.0):
        return self.evaluate({"x1": x1, "y1": y1, "x2": x2, "y2": y2})

    def at(self, points) -> np.ndarray:
        """Evaluate at ``points[..., 4]`` ordered (x1, y1, x2, y2)."""
        points = np.asarray(points, dtype=float)
        env = {name: points[..., k] for k, name in enumerate(VARIABLES)}
        out = self.evaluate(env)
        return np.broadcast_to(out, points.shape[:-1]).astype(complex)

    def evaluate(self, env) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(self._eval(env), dtype=complex)

    def is_constant(self) -> bool:
        return not self.variables()

    def variables(self) -> set[str]:
        return set()

    def conj(self) -> Expression:
        return Conj(self)


@dataclass(frozen=True)
class Const(Expression):
    value: complex

    def _eval(self, env):
        return complex(self.value)

    def __str__(self):
        v = complex(self.value)
        if v.imag == 0:
            return repr(v.real)
        if v.real == 0:
            return f"{v.imag!r}*i"
        return f"complex({v.real!r}, {v.imag!r})"


@dataclass(frozen=True)
class Var(Expression):
    name: str

    def _eval(self, env):
        return np.asarray(env[self.name], dtype=float)

    def variables(self):
        return {self.name}

    def __str__(self):
        return self.name


_UNARY = {"neg": np.negative, "exp": np.exp, "sin": np.sin, "cos": np.cos}


@dataclass(frozen=True)
class Unary(Expression):
    op: str
    arg: Expression

    def _eval(self, env):
        value = np.asarray(self.arg._eval(env), dtype=complex)
        if self.op == "log":
            bad = (value.imag == 0) & (value.real <= 0)
            if np.any(bad):
                raise EvaluationError("log of a non-positive real")
            return np.log(value)
        return _UNARY[self.op](value)

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        if self.op == "neg":
            return f"(-{self.arg})"
        return f"{self.op}({self.arg})"


@dataclass(frozen=True)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression

    def _eval(self, env):
        a = np.asarray(self.left._eval(env), dtype=complex)
        b = np.asarray(self.right._eval(env), dtype=complex)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(b == 0):
            raise EvaluationError("division by zero")
        return a / b

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: int

    def _eval(self, env):
        b = np.asarray(self.base._eval(env), dtype=complex)
        if self.exponent < 0:
            if np.any(b == 0):
                raise EvaluationError("division by zero")
            return 1.0 / b ** (-self.exponent)
        return b**self.exponent

    def variables(self):
        return self.base.variables()

    def __str__(self):
        return f"({self.base})^{self.exponent}"


@dataclass(frozen=True)
class ComplexOf(Expression):
    re: Expression
    im: Expression

    def _eval(self, env):
        return np.asarray(self.re._eval(env)) + 1j * np.asarray(self.im._eval(env))

    def variables(self):
        return self.re.variables() | self.im.variables()

    def __str__(self):
        return f"complex({self.re}, {self.im})"


@dataclass(frozen=True)
class Conj(Expression):
    """Complex conjugate; produced internally for the lower triangle of a metric."""

    arg: Expression

    def _eval(self, env):
        return np.conj(self.arg._eval(env))

    def variables(self):
        return self.arg.variables()

    def conj(self):
        return self.arg

    def __str__(self):
        return f"conj({self.arg})"


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError("unexpected character", text, col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, col = self.take()
        if text != value:
            raise ExpressionSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}",
                                        self.text, col)

    def error(self, message, col):
        return ExpressionSyntaxError(message, self.text, col)

    def parse(self) -> Expression:
        node = self.expr()
        kind, text, col = self.peek()
        if kind != "end":
            raise self.error(f"unexpected {text!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] != "^":
            return base
        col = self.take()[2]
        exponent = self.unary()
        if not exponent.is_constant():
            raise self.error("exponent must be a constant integer", col)
        value = complex(exponent.evaluate({}))
        if value.imag != 0 or value.real != round(value.real):
            raise self.error("exponent must be a constant integer", col)
        return Pow(base, int(round(value.real)))

    def atom(self):
        kind, text, col = self.take()
        if kind == "num":
            return Const(complex(float(text)))
        if kind == "name":
            if text in VARIABLES:
                return Var(text)
            if text == "i":
                return Const(1j)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text == "complex":
                self.expect("(")
                re_part = self.expr()
                self.expect(",")
                im_part = self.expr()
                self.expect(")")
                return ComplexOf(re_part, im_part)
            raise self.error(f"unknown name {text!r}", col)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {text or 'end of input'!r}", col)


def parse(text: str) -> Expression:
    """Parse an entry expression.  Raises :class:`ExpressionSyntaxError` with a column."""
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    if not text.strip():
        raise ExpressionSyntaxError("empty expression", text, 0)
    return _Parser(text).parse()
