"""Scalar expression language over chart coordinates.

Expressions are parsed into a small immutable AST and evaluated in order-2
jet arithmetic, so values, gradients and Hessians come out exact (up to
rounding) without finite differencing.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt")
CONSTANTS = ("pi",)


class ExprError(ValueError):
    """Base class for expression errors; ``pos`` is a 0-based character offset."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} at offset {pos}"
        super().__init__(message)


class LexError(ExprError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, pos: int | None = None, expected: Iterable[str] = ()):
        self.expected = tuple(expected)
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, pos)


class UnknownIdentifier(ExprError):
    pass


class ArityError(ExprError):
    pass


class DomainError(ExprError):
    """Raised during evaluation, e.g. log of a non-positive number."""

    def __init__(self, message: str, node: "Node"):
        self.node = node
        super().__init__(f"{message} in '{pretty(node)}'", node.pos)


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Const:
    name: str
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    pos: int = field(default=-1, compare=False)


Node = Union[Num, Var, Const, Neg, BinOp, Call]


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'ident', 'op', 'eof'
    text: str
    pos: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            end = m.end()
            # a trailing exponent marker without digits, or a glued identifier
            if end < n and (source[end].isalpha() or source[end] in "._"):
                raise LexError(f"malformed number '{source[i:end + 1]}'", i)
            tokens.append(Token("num", m.group(), i))
            i = end
            continue
        if c.isalpha() or c == "_":
            m = _IDENT.match(source, i)
            tokens.append(Token("ident", m.group(), i))
            i = m.end()
            continue
        if c in "+-*/^(),":
            tokens.append(Token("op", c, i))
            i += 1
            continue
        raise LexError(f"unexpected character {c!r}", i)
    tokens.append(Token("eof", "", n))
    return tokens


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, symbols: frozenset[str]):
        self.tokens = tokenize(source)
        self.i = 0
        self.symbols = symbols

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise ParseError(f"unexpected {got!r}", self.tok.pos, expected=[repr(text)])
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            raise ParseError(
                f"unexpected {self.tok.text!r}", self.tok.pos,
                expected=["'+'", "'-'", "'*'", "'/'", "'^'", "end of input"],
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance()
            node = BinOp(op.text, node, self.factor(), op.pos)
        return node

    def factor(self) -> Node:
        base = self.base()
        if self.at("^"):
            op = self.advance()
            return BinOp("^", base, self.factor(), op.pos)
        return base

    def base(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), t.pos)
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                if t.text not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {t.text!r}", t.pos)
                self.advance()
                arg = self.expr()
                if self.at(","):
                    raise ArityError(f"function {t.text!r} takes exactly one argument", self.tok.pos)
                self.expect(")")
                return Call(t.text, arg, t.pos)
            if t.text in FUNCTIONS:
                raise ArityError(f"function {t.text!r} requires an argument", t.pos)
            if t.text in CONSTANTS and t.text not in self.symbols:
                return Const(t.text, t.pos)
            if t.text not in self.symbols:
                raise UnknownIdentifier(f"unknown identifier {t.text!r}", t.pos)
            return Var(t.text, t.pos)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if self.at("-"):
            self.advance()
            return Neg(self.base(), t.pos)
        got = t.text or "end of input"
        raise ParseError(f"unexpected {got!r}", t.pos, expected=["number", "identifier", "'('", "'-'"])


def parse_expression(source: str, symbols: Iterable[str] = ()) -> Node:
    """Parse ``source`` into an AST, resolving identifiers against ``symbols``."""
    return _Parser(source, frozenset(symbols)).parse()


def identifiers(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Neg, Call)):
        return identifiers(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, BinOp):
        return identifiers(node.left) | identifiers(node.right)
    return set()


def _fmt_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def pretty(node: Node) -> str:
    """Render an AST back to source; the output re-parses to an equal AST."""
    if isinstance(node, Num):
        if node.value < 0 or not math.isfinite(node.value):
            raise ValueError("number literals must be finite and non-negative")
        return _fmt_number(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        if isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left, right = pretty(node.left), pretty(node.right)
        if isinstance(node.left, BinOp):
            lp = _PREC[node.left.op]
            if lp < prec or (lp == prec and node.op == "^"):
                left = f"({left})"
        if isinstance(node.right, BinOp):
            rp = _PREC[node.right.op]
            if rp < prec or (rp == prec and node.op != "^"):
                right = f"({right})"
        return f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    """Replace identifiers by sub-expressions."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    return node


def number(x: float) -> Node:
    """Literal node for any finite float (negative values become negations)."""
    return Neg(Num(-float(x))) if x < 0 else Num(float(x))


# --------------------------------------------------------------------------
# Order-2 jets
# --------------------------------------------------------------------------

class Jet2:
    """Value, gradient and Hessian of a scalar at a point."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad, hess):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        h = np.asarray(hess, dtype=float)
        self.hess = 0.5 * (h + h.T)

    @classmethod
    def constant(cls, value: float, dim: int) -> "Jet2":
        return cls(value, np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def variable(cls, value: float, index: int, dim: int) -> "Jet2":
        grad = np.zeros(dim)
        grad[index] = 1.0
        return cls(value, grad, np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    def is_constant(self) -> bool:
        return not self.grad.any() and not self.hess.any()

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self, other
        cross = np.outer(a.grad, b.grad)
        return Jet2(
            a.value * b.value,
            a.value * b.grad + b.value * a.grad,
            a.value * b.hess + b.value * a.hess + cross + cross.T,
        )

    def scale(self, c: float) -> "Jet2":
        return Jet2(c * self.value, c * self.grad, c * self.hess)

    def compose(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with derivatives f0, f1, f2 at self.value."""
        return Jet2(f0, f1 * self.grad, f2 * np.outer(self.grad, self.grad) + f1 * self.hess)

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad.tolist()!r}, hess={self.hess.tolist()!r})"


def _reciprocal(a: Jet2, node: Node) -> Jet2:
    if a.value == 0.0:
        raise DomainError("division by zero", node)
    v = a.value
    return a.compose(1.0 / v, -1.0 / v**2, 2.0 / v**3)


def _int_power(a: Jet2, n: int, node: Node) -> Jet2:
    if n < 0:
        return _reciprocal(_int_power(a, -n, node), node)
    result = Jet2.constant(1.0, a.dim)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _apply(func: str, a: Jet2, node: Node) -> Jet2:
    x = a.value
    if func == "sin":
        s, c = math.sin(x), math.cos(x)
        return a.compose(s, c, -s)
    if func == "cos":
        s, c = math.sin(x), math.cos(x)
        return a.compose(c, -s, -c)
    if func == "tan":
        c = math.cos(x)
        if c == 0.0:
            raise DomainError("tan at a pole", node)
        t = math.tan(x)
        sec2 = 1.0 + t * t
        return a.compose(t, sec2, 2.0 * t * sec2)
    if func == "sinh":
        s, c = math.sinh(x), math.cosh(x)
        return a.compose(s, c, s)
    if func == "cosh":
        s, c = math.sinh(x), math.cosh(x)
        return a.compose(c, s, c)
    if func == "tanh":
        t = math.tanh(x)
        sech2 = 1.0 - t * t
        return a.compose(t, sech2, -2.0 * t * sech2)
    if func == "exp":
        e = math.exp(x)
        return a.compose(e, e, e)
    if func == "log":
        if x <= 0.0:
            raise DomainError("log of a non-positive number", node)
        return a.compose(math.log(x), 1.0 / x, -1.0 / x**2)
    if func == "sqrt":
        if x <= 0.0:
            raise DomainError("sqrt of a non-positive number (not differentiable)", node)
        r = math.sqrt(x)
        return a.compose(r, 0.5 / r, -0.25 / (r * x))
    raise UnknownIdentifier(f"unknown function {func!r}", node.pos)


def eval_jet2(
    node: Node,
    coords: Sequence[str],
    point: Sequence[float],
    params: Mapping[str, float] | None = None,
) -> Jet2:
    """Evaluate ``node`` as an order-2 jet at ``point``.

    Coordinates are seeded with unit gradients, parameters are constants.
    """
    dim = len(coords)
    if len(point) != dim:
        raise ValueError(f"point has {len(point)} components, chart has {dim}")
    env: dict[str, Jet2] = {}
    for name, value in (params or {}).items():
        env[name] = Jet2.constant(value, dim)
    for k, name in enumerate(coords):
        env[name] = Jet2.variable(point[k], k, dim)
    return _eval(node, env, dim)


def _eval(node: Node, env: Mapping[str, Jet2], dim: int) -> Jet2:
    if isinstance(node, Num):
        return Jet2.constant(node.value, dim)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnknownIdentifier(f"unbound identifier {node.name!r}", node.pos) from None
    if isinstance(node, Const):
        return Jet2.constant(math.pi, dim)
    if isinstance(node, Neg):
        return -_eval(node.operand, env, dim)
    if isinstance(node, Call):
        return _apply(node.func, _eval(node.arg, env, dim), node)
    a = _eval(node.left, env, dim)
    b = _eval(node.right, env, dim)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a * _reciprocal(b, node)
    # '^': integral constant exponents by repeated multiplication, else exp(b log a)
    if b.is_constant() and float(b.value).is_integer():
        return _int_power(a, int(b.value), node)
    if a.value <= 0.0:
        raise DomainError("non-integer power of a non-positive base", node)
    log_a = a.compose(math.log(a.value), 1.0 / a.value, -1.0 / a.value**2)
    return _apply("exp", b * log_a, node)


def eval_value(node: Node, coords: Sequence[str], point: Sequence[float],
               params: Mapping[str, float] | None = None) -> float:
    return eval_jet2(node, coords, point, params).value


def jet_consistency_check(
    node: Node,
    coords: Sequence[str],
    point: Sequence[float],
    step: float = 1e-4,
    params: Mapping[str, float] | None = None,
) -> float:
    """Worst deviation of the jet gradient/Hessian from central differences.

    Deviations are scaled by ``max(1, |value|, |grad|_max, |hess|_max)`` of the jet.
    """
    x0 = np.asarray(point, dtype=float)
    jet = eval_jet2(node, coords, x0, params)
    dim = len(x0)

    def f(x):
        return eval_jet2(node, coords, x, params).value

    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    f0 = jet.value
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = step
        fp, fm = f(x0 + ei), f(x0 - ei)
        grad[i] = (fp - fm) / (2 * step)
        hess[i, i] = (fp - 2 * f0 + fm) / step**2
        for j in range(i):
            ej = np.zeros(dim)
            ej[j] = step
            hess[i, j] = hess[j, i] = (
                f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)
            ) / (4 * step**2)
    scale = max(1.0, abs(jet.value), float(np.abs(jet.grad).max(initial=0.0)),
                float(np.abs(jet.hess).max(initial=0.0)))
    dev = max(float(np.abs(grad - jet.grad).max(initial=0.0)),
              float(np.abs(hess - jet.hess).max(initial=0.0)))
    return dev / scale
