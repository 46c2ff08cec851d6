"""Scalar functions of ``t``: parsing, evaluation, symbolic differentiation.

Grammar (whitespace-insensitive)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = primary , [ "^" , unary ] ;
    primary = number | "t" | "pi" | "e"
            | func , "(" , expr , ")"
            | "(" , expr , ")" ;
    func    = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" ;

``^`` binds tighter than unary minus (``-t^2`` is ``-(t^2)``) and is right
associative. Its exponent must fold to a constant. Constant subtrees are
folded while parsing, so a variable-free input always becomes a ``Const``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ExprDomainError, NotDifferentiableError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}


class Expr:
    """Immutable expression node. Calling a node evaluates it."""

    __slots__ = ()

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float
    pos: int = field(default=-1, compare=False)

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    pos: int = field(default=-1, compare=False)

    def __repr__(self):
        return "Var()"


@dataclass(frozen=True, repr=False)
class Unary(Expr):
    op: str  # "neg" or a name from FUNCTIONS
    arg: Expr
    pos: int = field(default=-1, compare=False)

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, repr=False)
class Binary(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr
    pos: int = field(default=-1, compare=False)

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


# ----------------------------------------------------------------------------
# scalar kernels shared by folding and evaluation


def _scalar_unary(op: str, x: float, pos: int) -> float:
    if op == "neg":
        return -x
    if op == "log" and x <= 0:
        raise ExprDomainError("log of non-positive value", pos)
    if op == "sqrt" and x < 0:
        raise ExprDomainError("sqrt of negative value", pos)
    try:
        return float(getattr(math, "fabs" if op == "abs" else op)(x))
    except OverflowError:
        return math.inf


def _scalar_binary(op: str, a: float, b: float, pos: int) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise ExprDomainError("division by zero", pos)
        return a / b
    if a == 0 and b < 0:
        raise ExprDomainError("zero raised to a negative power", pos)
    if a < 0 and b != int(b):
        raise ExprDomainError("negative base with non-integer exponent", pos)
    try:
        return float(a**b)
    except OverflowError:
        return math.inf


# ----------------------------------------------------------------------------
# constructors with folding


def make_unary(op: str, arg: Expr, pos: int = -1, simplify: bool = False) -> Expr:
    if isinstance(arg, Const):
        return Const(_scalar_unary(op, arg.value, pos), pos)
    if simplify and op == "neg" and isinstance(arg, Unary) and arg.op == "neg":
        return arg.arg
    return Unary(op, arg, pos)


def make_binary(op: str, left: Expr, right: Expr, pos: int = -1, simplify: bool = False) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(_scalar_binary(op, left.value, right.value, pos), pos)
    if op == "^" and not isinstance(right, Const):
        raise ParseError("exponent must be constant", pos)
    if simplify:
        lz = isinstance(left, Const) and left.value == 0
        rz = isinstance(right, Const) and right.value == 0
        l1 = isinstance(left, Const) and left.value == 1
        r1 = isinstance(right, Const) and right.value == 1
        if op == "+":
            if lz:
                return right
            if rz:
                return left
        elif op == "-":
            if rz:
                return left
            if lz:
                return make_unary("neg", right, pos, simplify)
        elif op == "*":
            if lz or rz:
                return Const(0.0, pos)
            if l1:
                return right
            if r1:
                return left
        elif op == "/":
            if lz:
                return Const(0.0, pos)
            if r1:
                return left
        elif op == "^":
            if rz:
                return Const(1.0, pos)
            if r1:
                return left
    return Binary(op, left, right, pos)


# ----------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ParseError(f"unexpected character {text[i]!r}", _byte_offset(text, i), text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        i = m.end()
    tokens.append(("end", "", _byte_offset(text, n)))
    return tokens


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {value!r}, found {found}")
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, pos = self.advance()
            node = self.fold(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, pos = self.advance()
            node = self.fold(op, node, self.unary(), pos)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.advance()
            arg = self.unary()
            if tok[1] == "+":
                return arg
            return self.fold_unary("neg", arg, tok[2])
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                self.error("exponent must be constant", tok)
            return self.fold("^", base, exponent, tok[2])
        return base

    def primary(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value), pos)
        if kind == "name":
            if value == "t":
                return Var(pos)
            if value in CONSTANTS:
                return Const(CONSTANTS[value], pos)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.error(f"{value} takes exactly one argument")
                self.expect(")")
                return self.fold_unary(value, arg, pos)
            raise ParseError(f"unknown identifier {value!r}", pos, self.text)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected {value!r}", pos, self.text)

    def fold(self, op, left, right, pos):
        try:
            return make_binary(op, left, right, pos)
        except ExprDomainError as exc:
            raise ParseError(f"constant subexpression: {exc.args[0]}", pos, self.text) from None

    def fold_unary(self, op, arg, pos):
        try:
            return make_unary(op, arg, pos)
        except ExprDomainError as exc:
            raise ParseError(f"constant subexpression: {exc.args[0]}", pos, self.text) from None


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str):
        text = repr(float(text))
    if not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text).parse()


def as_expr(value) -> Expr:
    """Coerce a string, number or ``Expr`` to an ``Expr``."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(float(value))
    return parse(value)


# ----------------------------------------------------------------------------
# evaluation

_UFUNC = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "neg": np.negative,
}


def evaluate(e: Expr, t):
    """Evaluate ``e`` at a scalar or array of times.

    Scalars give a float, arrays give an array of the broadcast shape.
    Domain violations raise ``ExprDomainError`` naming the node offset and
    the first offending ``t``.
    """
    scalar = np.ndim(t) == 0
    tt = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, tt, tt)
    if scalar:
        return float(out)
    return np.broadcast_to(out, tt.shape).astype(float, copy=False)


def _first_t(mask, tt):
    mask = np.broadcast_to(mask, np.broadcast_shapes(np.shape(mask), tt.shape))
    idx = int(np.argmax(mask.ravel()))
    return float(np.broadcast_to(tt, mask.shape).ravel()[idx])


def _eval(e, tt, t_ref):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return tt
    if isinstance(e, Unary):
        x = _eval(e.arg, tt, t_ref)
        if e.op == "log":
            bad = np.asarray(x) <= 0
            if np.any(bad):
                raise ExprDomainError("log of non-positive value", e.pos, _first_t(bad, t_ref))
        elif e.op == "sqrt":
            bad = np.asarray(x) < 0
            if np.any(bad):
                raise ExprDomainError("sqrt of negative value", e.pos, _first_t(bad, t_ref))
        return _UFUNC[e.op](x)
    a = _eval(e.left, tt, t_ref)
    b = _eval(e.right, tt, t_ref)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        bad = np.asarray(b) == 0
        if np.any(bad):
            raise ExprDomainError("division by zero", e.pos, _first_t(bad, t_ref))
        return a / b
    k = e.right.value if isinstance(e.right, Const) else b
    if np.ndim(k) == 0 and k != int(k):
        bad = np.asarray(a) < 0
        if np.any(bad):
            raise ExprDomainError("negative base with non-integer exponent", e.pos, _first_t(bad, t_ref))
    if np.ndim(k) == 0 and k < 0:
        bad = np.asarray(a) == 0
        if np.any(bad):
            raise ExprDomainError("zero raised to a negative power", e.pos, _first_t(bad, t_ref))
    return np.power(a, k)


def scalar_function(e: Expr) -> Callable[[float], float]:
    """Compile ``e`` to a fast float -> float callable (math module).

    Domain errors fall back to ``evaluate`` so the raised error carries the
    node location.
    """
    src = _to_python(e)
    fn = eval(f"lambda t: {src}", {"math": math, "__builtins__": {}})  # noqa: S307

    def call(t: float) -> float:
        try:
            return fn(t)
        except (ValueError, ZeroDivisionError, OverflowError):
            return evaluate(e, float(t))

    call.expr = e
    return call


def _to_python(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value) if math.isfinite(e.value) else f"float({str(e.value)!r})"
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_to_python(e.arg)})"
        name = "fabs" if e.op == "abs" else e.op
        return f"math.{name}({_to_python(e.arg)})"
    op = "**" if e.op == "^" else e.op
    return f"({_to_python(e.left)} {op} {_to_python(e.right)})"


# ----------------------------------------------------------------------------
# printing, inspection, differentiation


def to_text(e: Expr) -> str:
    """Render ``e`` in the input grammar; ``parse(to_text(e))`` rebuilds it."""
    if isinstance(e, Const):
        v = e.value
        text = repr(v)
        return f"({text})" if v < 0 or text.startswith("-") else text
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    return f"({to_text(e.left)} {e.op} {to_text(e.right)})"


def contains_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Unary):
        return contains_var(e.arg)
    if isinstance(e, Binary):
        return contains_var(e.left) or contains_var(e.right)
    return False


def as_constant(e: Expr) -> float | None:
    """The value of ``e`` if it does not depend on ``t``, else ``None``."""
    if isinstance(e, Const):
        return e.value
    if contains_var(e):
        return None
    return evaluate(e, 0.0)


def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``t``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Unary):
        u = e.arg
        du = differentiate(u)
        op = e.op
        if op == "abs":
            raise NotDifferentiableError(f"abs is not differentiable (at offset {e.pos})")
        if op == "neg":
            return _u("neg", du)
        if op == "sin":
            outer = _u("cos", u)
        elif op == "cos":
            outer = _u("neg", _u("sin", u))
        elif op == "exp":
            outer = e
        elif op == "log":
            return _b("/", du, u)
        else:  # sqrt
            return _b("/", du, _b("*", Const(2.0), e))
        return _b("*", outer, du)
    a, b = e.left, e.right
    op = e.op
    if op in "+-":
        return _b(op, differentiate(a), differentiate(b))
    if op == "*":
        return _b("+", _b("*", differentiate(a), b), _b("*", a, differentiate(b)))
    if op == "/":
        num = _b("-", _b("*", differentiate(a), b), _b("*", a, differentiate(b)))
        return _b("/", num, _b("^", b, Const(2.0)))
    k = b.value
    return _b("*", _b("*", Const(k), _b("^", a, Const(k - 1.0))), differentiate(a))


def _u(op, arg):
    return make_unary(op, arg, simplify=True)


def _b(op, left, right):
    return make_binary(op, left, right, simplify=True)
