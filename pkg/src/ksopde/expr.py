"""Expression trees over the chart coordinates ``(q^i, v^i_A)`` of T^1_k Q.

Every coefficient function in the package (connection components, SOPDE
coefficients, Lagrangians) is a :class:`Expr`. This module provides

- a recursive-descent parser for the textual form (``q1``, ``v2_1``, ``sin``,
  ``cos``, ``exp``, ``+ - * / ^``),
- numeric evaluation, vectorized over leading axes of the point array,
- exact symbolic differentiation with light simplification,
- forward-mode evaluation with dual numbers, kept independent of
  :func:`diff` so the two can check each other.

Coordinates are laid out as ``(q^1..q^n, v^1_1..v^n_1, ..., v^1_k..v^n_k)``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "Dims",
    "VarKind",
    "Expr",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Neg",
    "Pow",
    "Sin",
    "Cos",
    "Exp",
    "Dual",
    "ExprSyntaxError",
    "UnknownVariable",
    "IndexOutOfRange",
    "DivisionByZero",
    "DimensionMismatch",
    "parse",
    "to_text",
    "evaluate",
    "diff",
    "eval_dual",
    "central_difference",
    "variables",
    "simplify",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "as_expr",
    "ZERO",
    "ONE",
]


class ExprSyntaxError(ValueError):
    """Malformed expression text.

    Attributes:
        position: 0-based character offset of the offending token.
        expected: tokens that would have been accepted there.
    """

    def __init__(self, message: str, source: str, position: int, expected: tuple[str, ...]):
        self.source = source
        self.position = position
        self.expected = expected
        pointer = source + "\n" + " " * position + "^"
        want = ", ".join(expected) if expected else "nothing"
        super().__init__(f"{message} at position {position} (expected {want})\n{pointer}")


class UnknownVariable(ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(
            f"unknown variable {name!r}; variables are q<i> or v<i>_<A> (1-based), "
            "functions are sin, cos, exp"
        )


class IndexOutOfRange(IndexError):
    pass


class DivisionByZero(ZeroDivisionError):
    def __init__(self, subtree: "Expr"):
        self.subtree = subtree
        super().__init__(f"division by zero in {to_text(subtree)}")


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Dims:
    """Base dimension ``n`` and number of velocity copies ``k``."""

    n: int
    k: int

    def __post_init__(self):
        if not (isinstance(self.n, int) and isinstance(self.k, int)) or self.n < 1 or self.k < 1:
            raise ValueError(f"dims need integers n >= 1 and k >= 1, got n={self.n!r}, k={self.k!r}")

    @property
    def dim(self) -> int:
        """Dimension of the chart on T^1_k Q, ``n + n*k``."""
        return self.n + self.n * self.k

    def q(self, i: int) -> "Var":
        return self.check(Var(VarKind.BASE, i))

    def v(self, i: int, A: int) -> "Var":
        return self.check(Var(VarKind.VELOCITY, i, A))

    def check(self, var: "Var") -> "Var":
        if not 1 <= var.i <= self.n:
            raise IndexOutOfRange(f"{var.name}: base index must lie in 1..{self.n}")
        if var.kind is VarKind.VELOCITY and not 1 <= var.A <= self.k:
            raise IndexOutOfRange(f"{var.name}: velocity index must lie in 1..{self.k}")
        return var

    def index(self, var: "Var") -> int:
        """0-based position of ``var`` in a coordinate vector."""
        self.check(var)
        if var.kind is VarKind.BASE:
            return var.i - 1
        return self.n * var.A + var.i - 1

    def var_at(self, index: int) -> "Var":
        if not 0 <= index < self.dim:
            raise IndexOutOfRange(f"coordinate index {index} outside 0..{self.dim - 1}")
        if index < self.n:
            return Var(VarKind.BASE, index + 1)
        A, i = divmod(index - self.n, self.n)
        return Var(VarKind.VELOCITY, i + 1, A + 1)

    def coordinates(self) -> list["Var"]:
        return [self.var_at(a) for a in range(self.dim)]

    def base_vars(self) -> list["Var"]:
        return [self.q(i) for i in range(1, self.n + 1)]

    def velocity_vars(self) -> list["Var"]:
        return [self.v(i, A) for A in range(1, self.k + 1) for i in range(1, self.n + 1)]


class VarKind(enum.Enum):
    BASE = "q"
    VELOCITY = "v"


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable.

    Python operators build simplified trees through :func:`add`, :func:`mul`
    and friends; the node constructors themselves never simplify.
    """

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, bool) or not isinstance(exponent, (int, np.integer)):
            raise TypeError("only integer exponents are supported")
        return power(self, int(exponent))

    def __str__(self):
        return to_text(self)

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    kind: VarKind
    i: int
    A: int = 0

    def __post_init__(self):
        if self.kind is VarKind.BASE and self.A != 0:
            raise ValueError("base variables carry no velocity index")

    @property
    def name(self) -> str:
        if self.kind is VarKind.BASE:
            return f"q{self.i}"
        return f"v{self.i}_{self.A}"

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True, repr=False)
class _Binary(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    pass


class Sub(_Binary):
    pass


class Mul(_Binary):
    pass


class Div(_Binary):
    pass


@dataclass(frozen=True, repr=False)
class _Unary(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"{type(self).__name__}({self.arg!r})"


class Neg(_Unary):
    pass


class Sin(_Unary):
    pass


class Cos(_Unary):
    pass


class Exp(_Unary):
    pass


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def children(self):
        return (self.base,)

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def variables(e: Expr) -> set[Var]:
    """All variables occurring in ``e``."""
    found: set[Var] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node)
        else:
            stack.extend(node.children())
    return found


# ---------------------------------------------------------------------------
# Simplifying constructors
# ---------------------------------------------------------------------------


def const(x: float) -> Const:
    return Const(float(x))


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    if a == b:
        return ZERO
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(b, Const) and not isinstance(a, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, Mul) and isinstance(b.left, Const):
        return mul(Const(a.value * b.left.value), b.right)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if _is(b, -1.0):
        return neg(a)
    if isinstance(b, Const) and b.value != 0.0:
        if isinstance(a, Neg):
            return neg(div(a.arg, b))
        if isinstance(a, Mul) and isinstance(a.left, Const):
            return mul(Const(a.left.value / b.value), a.right)
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Mul) and isinstance(a.left, Const):
        return mul(Const(-a.left.value), a.right)
    return Neg(a)


def power(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and not (base.value == 0.0 and exponent < 0):
        return Const(base.value**exponent)
    return Pow(base, exponent)


def _fold(fn, node, a: Expr) -> Expr:
    if isinstance(a, Const):
        try:
            return Const(fn(a.value))
        except (OverflowError, ValueError):
            pass
    return node(a)


def _sin(a: Expr) -> Expr:
    return _fold(math.sin, Sin, a)


def _cos(a: Expr) -> Expr:
    return _fold(math.cos, Cos, a)


def _exp(a: Expr) -> Expr:
    return _fold(math.exp, Exp, a)


_REBUILD = {Add: add, Sub: sub, Mul: mul, Div: div, Neg: neg, Sin: _sin, Cos: _cos, Exp: _exp}


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the simplifying constructors (folds constant subtrees)."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    if isinstance(e, _Binary):
        return _REBUILD[type(e)](simplify(e.left), simplify(e.right))
    return _REBUILD[type(e)](simplify(e.arg))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_BASE_VAR = re.compile(r"q(\d+)")
_VELOCITY_VAR = re.compile(r"v(\d+)_(\d+)")
_FUNCS = {"sin": Sin, "cos": Cos, "exp": Exp}


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos == len(source):
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", source, pos, ("number", "variable", "function", "operator")
            )
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dims: Dims):
        self.source = source
        self.dims = dims
        self.tokens = _tokenize(source)
        self.at = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.at]

    def fail(self, message: str, expected: tuple[str, ...]):
        raise ExprSyntaxError(message, self.source, self.tok.pos, expected)

    def expect(self, text: str):
        if self.tok.text != text or self.tok.kind != "op":
            shown = self.tok.text or "end of input"
            self.fail(f"unexpected {shown!r}", (repr(text),))
        self.at += 1

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}", ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.at += 1
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.at += 1
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.at += 1
            return Neg(self.factor())
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.at += 1
            sign = 1
            if self.tok.kind == "op" and self.tok.text == "-":
                sign = -1
                self.at += 1
            if self.tok.kind != "number" or not self.tok.text.isdigit():
                self.fail("exponent must be an integer literal", ("integer",))
            exponent = sign * int(self.tok.text)
            self.at += 1
            return Pow(base, exponent)
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.at += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.at += 1
            if tok.text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCS[tok.text](arg)
            return self.variable(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.at += 1
            e = self.expr()
            self.expect(")")
            return e
        shown = tok.text or "end of input"
        self.fail(f"unexpected {shown!r}", ("number", "variable", "function", "'('", "'-'"))

    def variable(self, name: str) -> Var:
        m = _BASE_VAR.fullmatch(name)
        if m:
            return self.dims.check(Var(VarKind.BASE, int(m.group(1))))
        m = _VELOCITY_VAR.fullmatch(name)
        if m:
            return self.dims.check(Var(VarKind.VELOCITY, int(m.group(1)), int(m.group(2))))
        raise UnknownVariable(name)


def parse(source: str, dims: Dims) -> Expr:
    """Parse expression text into an unsimplified tree.

    Precedence from tight to loose is ``^``, unary minus, ``* /``, ``+ -``;
    binary operators associate to the left.

    >>> parse("v1_2", Dims(1, 2))
    Var(v1_2)
    """
    return _Parser(source, dims).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _number_text(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _prec(e: Expr) -> int:
    if isinstance(e, Const) and e.value < 0:
        return 3
    return _PREC.get(type(e), 5)


def to_text(e: Expr) -> str:
    """Render ``e`` so that :func:`parse` rebuilds the same tree.

    Exact round-tripping holds for trees with non-negative constants, which
    is every tree the parser can produce.
    """
    if isinstance(e, Const):
        if math.isnan(e.value) or math.isinf(e.value):
            raise ValueError(f"cannot print non-finite constant {e.value}")
        return "-" + _number_text(-e.value) if e.value < 0 else _number_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, (Sin, Cos, Exp)):
        return f"{type(e).__name__.lower()}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        return f"-{inner}" if _prec(e.arg) >= 3 else f"-({inner})"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    symbol = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    p = _PREC[type(e)]
    left = to_text(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_text(e.right)
    # left-associative: an equal-precedence right operand needs parentheses
    if _prec(e.right) <= p:
        right = f"({right})"
    return left + symbol + right


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _coords(p, dims: Dims) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] != dims.dim:
        raise DimensionMismatch(f"point has trailing size {p.shape[-1:] or ()}, expected {dims.dim}")
    return p


def evaluate(e: Expr, p, dims: Dims):
    """Evaluate ``e`` at ``p``, an array whose last axis holds the coordinates.

    Leading axes of ``p`` are broadcast, so a batch of points of shape
    ``(N, dim)`` yields ``N`` values.
    """
    return _eval(e, _coords(p, dims), dims)


def _eval(e: Expr, p: np.ndarray, dims: Dims):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return p[..., dims.index(e)]
    if isinstance(e, Add):
        return _eval(e.left, p, dims) + _eval(e.right, p, dims)
    if isinstance(e, Sub):
        return _eval(e.left, p, dims) - _eval(e.right, p, dims)
    if isinstance(e, Mul):
        return _eval(e.left, p, dims) * _eval(e.right, p, dims)
    if isinstance(e, Div):
        den = _eval(e.right, p, dims)
        if np.any(np.asarray(den) == 0.0):
            raise DivisionByZero(e)
        return _eval(e.left, p, dims) / den
    if isinstance(e, Neg):
        return -_eval(e.arg, p, dims)
    if isinstance(e, Pow):
        base = _eval(e.base, p, dims)
        if e.exponent < 0:
            if np.any(np.asarray(base) == 0.0):
                raise DivisionByZero(e)
            return 1.0 / base ** (-e.exponent)
        return base**e.exponent
    if isinstance(e, Sin):
        return np.sin(_eval(e.arg, p, dims))
    if isinstance(e, Cos):
        return np.cos(_eval(e.arg, p, dims))
    if isinstance(e, Exp):
        return np.exp(_eval(e.arg, p, dims))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Symbolic differentiation
# ---------------------------------------------------------------------------


def diff(e: Expr, x: Var) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``x``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e == x else ZERO
    if isinstance(e, Add):
        return add(diff(e.left, x), diff(e.right, x))
    if isinstance(e, Sub):
        return sub(diff(e.left, x), diff(e.right, x))
    if isinstance(e, Mul):
        return add(mul(diff(e.left, x), e.right), mul(e.left, diff(e.right, x)))
    if isinstance(e, Div):
        da, db = diff(e.left, x), diff(e.right, x)
        if _is(db, 0.0):
            return div(da, e.right)
        return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
    if isinstance(e, Neg):
        return neg(diff(e.arg, x))
    if isinstance(e, Pow):
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), diff(e.base, x))
    if isinstance(e, Sin):
        return mul(_cos(e.arg), diff(e.arg, x))
    if isinstance(e, Cos):
        return mul(neg(_sin(e.arg)), diff(e.arg, x))
    if isinstance(e, Exp):
        return mul(_exp(e.arg), diff(e.arg, x))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Dual numbers
# ---------------------------------------------------------------------------


class Dual:
    """``value + derivative * eps`` with ``eps**2 == 0``.

    Both parts may be numpy arrays, in which case arithmetic is elementwise.
    """

    __slots__ = ("value", "derivative")

    def __init__(self, value, derivative=0.0):
        self.value = value
        self.derivative = derivative

    def __iter__(self) -> Iterator:
        yield self.value
        yield self.derivative

    def __repr__(self):
        return f"Dual({self.value!r}, {self.derivative!r})"

    @staticmethod
    def _wrap(other) -> "Dual":
        return other if isinstance(other, Dual) else Dual(other, 0.0)

    def __add__(self, other):
        other = self._wrap(other)
        return Dual(self.value + other.value, self.derivative + other.derivative)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._wrap(other)
        return Dual(self.value - other.value, self.derivative - other.derivative)

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        other = self._wrap(other)
        return Dual(
            self.value * other.value,
            self.derivative * other.value + self.value * other.derivative,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        quotient = self.value / other.value
        return Dual(quotient, (self.derivative - quotient * other.derivative) / other.value)

    def __rtruediv__(self, other):
        return self._wrap(other) / self

    def __neg__(self):
        return Dual(-self.value, -self.derivative)

    def __pow__(self, n: int):
        if n == 0:
            return Dual(np.ones_like(self.value) if np.ndim(self.value) else 1.0, 0.0 * self.derivative)
        return Dual(self.value**n, n * self.value ** (n - 1) * self.derivative)

    def sin(self):
        return Dual(np.sin(self.value), np.cos(self.value) * self.derivative)

    def cos(self):
        return Dual(np.cos(self.value), -np.sin(self.value) * self.derivative)

    def exp(self):
        ev = np.exp(self.value)
        return Dual(ev, ev * self.derivative)


def eval_dual(e: Expr, p, seed: Var, dims: Dims) -> Dual:
    """Evaluate ``e`` and its partial derivative along ``seed`` in one forward pass."""
    p = _coords(p, dims)
    return _eval_dual(e, p, dims.index(seed), dims)


def _eval_dual(e: Expr, p: np.ndarray, seed: int, dims: Dims) -> Dual:
    if isinstance(e, Const):
        return Dual(e.value, 0.0)
    if isinstance(e, Var):
        idx = dims.index(e)
        return Dual(p[..., idx], 1.0 if idx == seed else 0.0)
    if isinstance(e, Add):
        return _eval_dual(e.left, p, seed, dims) + _eval_dual(e.right, p, seed, dims)
    if isinstance(e, Sub):
        return _eval_dual(e.left, p, seed, dims) - _eval_dual(e.right, p, seed, dims)
    if isinstance(e, Mul):
        return _eval_dual(e.left, p, seed, dims) * _eval_dual(e.right, p, seed, dims)
    if isinstance(e, Div):
        den = _eval_dual(e.right, p, seed, dims)
        if np.any(np.asarray(den.value) == 0.0):
            raise DivisionByZero(e)
        return _eval_dual(e.left, p, seed, dims) / den
    if isinstance(e, Neg):
        return -_eval_dual(e.arg, p, seed, dims)
    if isinstance(e, Pow):
        base = _eval_dual(e.base, p, seed, dims)
        if e.exponent < 0:
            if np.any(np.asarray(base.value) == 0.0):
                raise DivisionByZero(e)
            return 1.0 / base ** (-e.exponent)
        return base**e.exponent
    if isinstance(e, Sin):
        return _eval_dual(e.arg, p, seed, dims).sin()
    if isinstance(e, Cos):
        return _eval_dual(e.arg, p, seed, dims).cos()
    if isinstance(e, Exp):
        return _eval_dual(e.arg, p, seed, dims).exp()
    raise TypeError(f"not an expression node: {e!r}")


def central_difference(e: Expr, p, x: Var, dims: Dims) -> float:
    """Central finite difference of ``e`` along ``x`` at a single point.

    Step is ``1e-6 * max(1, |x(p)|)``.
    """
    p = _coords(p, dims)
    if p.ndim != 1:
        raise DimensionMismatch("central_difference takes a single point")
    idx = dims.index(x)
    h = 1e-6 * max(1.0, abs(p[idx]))
    plus, minus = p.copy(), p.copy()
    plus[idx] += h
    minus[idx] -= h
    return float((_eval(e, plus, dims) - _eval(e, minus, dims)) / (plus[idx] - minus[idx]))
