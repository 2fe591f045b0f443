"""Holomorphic prepotential expressions: parsing, printing, differentiation, evaluation.

Expressions are immutable trees over complex constants and the variables
``z1 .. zm``.  Only rational operations, integer powers, ``exp`` and ``log``
are supported, which keeps symbolic differentiation closed.

Grammar (whitespace is insignificant)::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := ("-" | "+") unary | power
    power    := primary ("^" exponent)?
    exponent := ("-" | "+") exponent | primary ("^" exponent)?
    primary  := NUMBER | "i" | "z" DIGITS | ("exp" | "log") "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus, so ``-z1^2`` is ``-(z1^2)``.  Exponents
must fold to a constant integer.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Func",
    "ParseError", "DomainError", "parse", "to_string", "differentiate",
    "evaluate", "variables", "Prepotential", "HoloJet", "jet",
]


class ParseError(ValueError):
    """Malformed prepotential text.  ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position


class DomainError(ArithmeticError):
    """Evaluation left the domain of the expression (pole, log of zero, overflow)."""


# ---------------------------------------------------------------------------
# expression tree


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n: int):
        return Pow(self, n)

    def __str__(self):
        return to_string(self)


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(complex(x))


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if isinstance(self.exponent, bool) or int(self.exponent) != self.exponent:
            raise ParseError("non-integer exponent")
        object.__setattr__(self, "exponent", int(self.exponent))


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in _FUNCS:
            raise ValueError(f"unknown function {self.name!r}")


_FUNCS = ("exp", "log")
_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def variables(e: Expr) -> set[int]:
    """Indices of the variables occurring in ``e``."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Func)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------------------
# tokenizer and parser


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "var", "i", "func", "op", "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        c = text[pos]
        if c.isspace():
            pos += 1
        elif c.isdigit() or (c == "." and pos + 1 < n and text[pos + 1].isdigit()):
            start = pos
            while pos < n and text[pos].isdigit():
                pos += 1
            if pos < n and text[pos] == ".":
                pos += 1
                while pos < n and text[pos].isdigit():
                    pos += 1
            tokens.append(_Token("num", text[start:pos], start))
        elif c.isalpha():
            start = pos
            while pos < n and text[pos].isalpha():
                pos += 1
            word = text[start:pos]
            if word == "z":
                dstart = pos
                while pos < n and text[pos].isdigit():
                    pos += 1
                if pos == dstart:
                    raise ParseError("variable 'z' needs an index", start)
                tokens.append(_Token("var", text[start:pos], start))
            elif word == "i":
                tokens.append(_Token("i", word, start))
            elif word in _FUNCS:
                tokens.append(_Token("func", word, start))
            else:
                raise ParseError(f"unknown identifier {word!r}", start)
        elif c in "+-*/^()":
            tokens.append(_Token("op", c, pos))
            pos += 1
        else:
            raise ParseError(f"unexpected character {c!r}", pos)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, m: int):
        self.tokens = _tokenize(text)
        self.k = 0
        self.m = m

    @property
    def tok(self) -> _Token:
        return self.tokens[self.k]

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.k += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            raise ParseError(f"expected {text!r}, found {self.tok.text or 'end of input'!r}", self.tok.pos)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = Add(e, self.term())
            elif self.accept("-"):
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = Mul(e, self.unary())
            elif self.accept("/"):
                e = Div(e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            pos = self.tok.pos
            self.k += 1
            return Pow(base, self.exponent(pos))
        return base

    def exponent(self, pos: int) -> int:
        e = self._exponent_expr()
        if variables(e):
            raise ParseError("non-integer exponent (exponent must be a constant)", pos)
        value = evaluate(e, [])
        if value.imag != 0 or not math.isfinite(value.real) or value.real != int(value.real):
            raise ParseError(f"non-integer exponent {value}", pos)
        return int(value.real)

    def _exponent_expr(self) -> Expr:
        if self.accept("-"):
            return Neg(self._exponent_expr())
        if self.accept("+"):
            return self._exponent_expr()
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            pos = self.tok.pos
            self.k += 1
            return Pow(base, self.exponent(pos))
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.k += 1
            return Const(float(tok.text))
        if tok.kind == "i":
            self.k += 1
            return Const(1j)
        if tok.kind == "var":
            self.k += 1
            index = int(tok.text[1:])
            if not 1 <= index <= self.m:
                raise ParseError(f"variable index out of range: {tok.text} (m = {self.m})", tok.pos)
            return Var(index)
        if tok.kind == "func":
            self.k += 1
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(tok.text, arg)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)


def parse(text: str, m: int) -> Expr:
    """Parse a prepotential in the variables ``z1 .. zm``.

    >>> parse("z1^2", 1)
    Pow(base=Var(index=1), exponent=2)
    """
    if m < 1:
        raise ValueError("arity m must be >= 1")
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text, m).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _format_real(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        r = str(int(abs(x)))
        return ("-" + r) if math.copysign(1.0, x) < 0 else r
    r = repr(abs(x))
    if "e" in r:
        mant, exp = r.split("e")
        k = int(exp)
        r = f"({mant}*10^{k})" if k > 0 else f"({mant}/10^{-k})"
    return ("-" + r) if math.copysign(1.0, x) < 0 else r


def _format_const(c: complex) -> str:
    re, im = c.real, c.imag
    if im == 0:
        s = _format_real(re)
        return f"({s})" if s.startswith("-") else s
    ims = "i" if im == 1 else f"{_format_real(im)}*i"
    if re == 0 and not math.copysign(1.0, re) < 0:
        return ims if ims == "i" else f"({ims})"
    return f"({_format_real(re)}+{ims})"


def to_string(e: Expr) -> str:
    """Render ``e`` as text accepted by :func:`parse`."""
    return _show(e, 0)


def _show(e: Expr, ctx: int) -> str:
    if isinstance(e, Const):
        return _format_const(e.value)
    if isinstance(e, Var):
        return f"z{e.index}"
    if isinstance(e, Func):
        return f"{e.name}({_show(e.arg, 0)})"
    if isinstance(e, Neg):
        s = "-" + _show(e.arg, 3)
        prec = 3
    elif isinstance(e, Pow):
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        s = f"{_show(e.base, 5)}^{exp}"
        prec = 4
    else:
        prec = _PREC[type(e)]
        # strictly higher context on the right keeps the tree shape (and float association)
        s = f"{_show(e.left, prec)}{_BINARY[type(e)]}{_show(e.right, prec + 1)}"
    return f"({s})" if prec < ctx else s


# ---------------------------------------------------------------------------
# simplifying constructors (best effort)


def _is(e: Expr, value: complex) -> bool:
    return isinstance(e, Const) and e.value == value


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return _neg(b)
    return Sub(a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return Const(0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return _neg(b)
    if _is(b, -1):
        return _neg(a)
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(a, 0):
        return Const(0)
    if _is(b, 1):
        return a
    return Div(a, b)


def _pow(a: Expr, n: int) -> Expr:
    if n == 0:
        return Const(1)
    if n == 1:
        return a
    if isinstance(a, Const) and (a.value != 0 or n > 0):
        return Const(a.value**n)
    return Pow(a, n)


def differentiate(e: Expr, k: int) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to ``z_k`` (1-based)."""
    if k < 1:
        raise ValueError("variable index must be >= 1")
    return _diff(e, k)


def _diff(e: Expr, k: int) -> Expr:
    if isinstance(e, Const):
        return Const(0)
    if isinstance(e, Var):
        return Const(1 if e.index == k else 0)
    if isinstance(e, Neg):
        return _neg(_diff(e.arg, k))
    if isinstance(e, Add):
        return _add(_diff(e.left, k), _diff(e.right, k))
    if isinstance(e, Sub):
        return _sub(_diff(e.left, k), _diff(e.right, k))
    if isinstance(e, Mul):
        return _add(_mul(_diff(e.left, k), e.right), _mul(e.left, _diff(e.right, k)))
    if isinstance(e, Div):
        du, dv = _diff(e.left, k), _diff(e.right, k)
        if _is(dv, 0):
            return _div(du, e.right)
        return _div(_sub(_mul(du, e.right), _mul(e.left, dv)), _pow(e.right, 2))
    if isinstance(e, Pow):
        du = _diff(e.base, k)
        if _is(du, 0):
            return Const(0)
        return _mul(_mul(Const(e.exponent), _pow(e.base, e.exponent - 1)), du)
    if isinstance(e, Func):
        du = _diff(e.arg, k)
        if _is(du, 0):
            return Const(0)
        if e.name == "exp":
            return _mul(e, du)
        return _div(du, e.arg)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, z: Sequence[complex]) -> complex:
    """Evaluate ``e`` at the point ``z`` (``z[0]`` is ``z1``).

    Raises :class:`DomainError` naming the offending subexpression on a
    division by zero, log of zero, or a non-finite intermediate value.
    """
    z = [complex(v) for v in z]
    return _eval(e, z)


def _check(value: complex, e: Expr) -> complex:
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise DomainError(f"non-finite value in {to_string(e)}")
    return value


def _log(a: complex) -> complex:
    # principal branch with Im in (-pi, pi]; adding 0.0 clears a negative zero
    # so the cut does not depend on the sign of a zero imaginary part
    a = complex(a)
    return cmath.log(complex(a.real, a.imag + 0.0))


def _eval(e: Expr, z: list[complex]) -> complex:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.index > len(z):
            raise ValueError(f"z{e.index} not supplied (got {len(z)} coordinates)")
        return z[e.index - 1]
    if isinstance(e, Neg):
        return -_eval(e.arg, z)
    if isinstance(e, Pow):
        b = _eval(e.base, z)
        if b == 0 and e.exponent < 0:
            raise DomainError(f"division by zero in {to_string(e)}")
        try:
            return _check(b**e.exponent, e)
        except OverflowError:
            raise DomainError(f"overflow in {to_string(e)}") from None
    if isinstance(e, Func):
        a = _eval(e.arg, z)
        if e.name == "exp":
            try:
                return _check(cmath.exp(a), e)
            except OverflowError:
                raise DomainError(f"overflow in {to_string(e)}") from None
        if a == 0:
            raise DomainError(f"log of zero in {to_string(e)}")
        return _log(a)
    a, b = _eval(e.left, z), _eval(e.right, z)
    if isinstance(e, Add):
        return _check(a + b, e)
    if isinstance(e, Sub):
        return _check(a - b, e)
    if isinstance(e, Mul):
        return _check(a * b, e)
    if b == 0:
        raise DomainError(f"division by zero in {to_string(e)}")
    return _check(a / b, e)


def _codegen(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"z{e.index - 1}"
    if isinstance(e, Neg):
        return f"(-{_codegen(e.arg)})"
    if isinstance(e, Pow):
        return f"({_codegen(e.base)})**({e.exponent})"
    if isinstance(e, Func):
        return f"_{e.name}({_codegen(e.arg)})"
    return f"({_codegen(e.left)}{_BINARY[type(e)]}{_codegen(e.right)})"


def _compile(exprs: Sequence[Expr], m: int):
    args = ", ".join(f"z{j}" for j in range(m))
    body = ", ".join(_codegen(e) for e in exprs)
    src = f"def _f({args}):\n    return ({body},)\n"
    namespace = {"_exp": cmath.exp, "_log": _log}
    exec(compile(src, "<prepotential>", "exec"), namespace)
    return namespace["_f"]


# ---------------------------------------------------------------------------
# prepotentials and jets


@dataclass(frozen=True)
class HoloJet:
    """Value and holomorphic derivatives of a prepotential at one point.

    ``grad[i] = F_i``, ``hess[i, j] = F_ij``, ``third[i, j, k] = F_ijk``;
    ``fourth`` is only filled for order-4 jets.  All tensors are exactly
    symmetric because each entry is computed once and mirrored.
    """

    m: int
    value: complex
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray | None = None
    fourth: np.ndarray | None = None


class Prepotential:
    """A holomorphic function of ``m`` complex variables with cached derivatives.

    Derivative expressions are memoised per sorted multi-index, and each
    jet order is compiled once into a single Python function.
    """

    def __init__(self, expr: Expr, m: int, text: str | None = None):
        bad = [k for k in variables(expr) if not 1 <= k <= m]
        if bad:
            raise ParseError(f"variable index out of range: z{bad[0]} (m = {m})")
        self.expr = expr
        self.m = m
        self.text = text if text is not None else to_string(expr)
        self._derivs: dict[tuple[int, ...], Expr] = {(): expr}
        self._compiled: dict[int, tuple] = {}

    @classmethod
    def from_text(cls, text: str, m: int) -> "Prepotential":
        return cls(parse(text, m), m, text)

    def __repr__(self):
        return f"Prepotential({self.text!r}, m={self.m})"

    def __getstate__(self):
        return {"text": self.text, "m": self.m, "expr": self.expr}

    def __setstate__(self, state):
        self.__init__(state["expr"], state["m"], state["text"])

    def derivative(self, *indices: int) -> Expr:
        """Symbolic partial derivative; ``indices`` are 0-based and unordered."""
        key = tuple(sorted(indices))
        if key not in self._derivs:
            parent = self.derivative(*key[:-1])
            self._derivs[key] = _diff(parent, key[-1] + 1)
        return self._derivs[key]

    def __call__(self, z: Sequence[complex]) -> complex:
        return evaluate(self.expr, z)

    def _program(self, order: int):
        if order not in self._compiled:
            keys = [()]
            for r in range(1, order + 1):
                keys.extend(itertools.combinations_with_replacement(range(self.m), r))
            exprs = [self.derivative(*key) for key in keys]
            self._compiled[order] = (keys, exprs, _compile(exprs, self.m))
        return self._compiled[order]

    def _raw(self, z: Sequence[complex], order: int) -> list[complex]:
        keys, exprs, fn = self._program(order)
        zs = [complex(v) for v in z]
        if len(zs) != self.m:
            raise ValueError(f"expected {self.m} coordinates, got {len(zs)}")
        try:
            out = [complex(v) for v in fn(*zs)]
            ok = all(cmath.isfinite(v) for v in out)
        except (ZeroDivisionError, ValueError, OverflowError):
            ok = False
        if not ok:
            # the interpreter pinpoints the failing subexpression
            out = [_eval(e, zs) for e in exprs]
        return out

    def values(self, z: Sequence[complex], order: int) -> dict[tuple[int, ...], complex]:
        """All derivatives through ``order`` at ``z``, keyed by sorted 0-based multi-index."""
        keys = self._program(order)[0]
        return dict(zip(keys, self._raw(z, order)))


@lru_cache(maxsize=None)
def _mirror(m: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Scatter plan for a symmetric rank-``r`` tensor.

    Entry ``dest[k]`` of the flattened tensor takes value number ``src[k]``,
    counted in the key order of :meth:`Prepotential._program`.
    """
    dest, src = [], []
    for n, key in enumerate(itertools.combinations_with_replacement(range(m), r)):
        for perm in set(itertools.permutations(key)):
            dest.append(np.ravel_multi_index(perm, (m,) * r))
            src.append(n)
    start = sum(math.comb(m + k - 1, k) for k in range(r))
    return np.array(dest, dtype=np.intp), np.array(src, dtype=np.intp) + start


def _tensor(vals: np.ndarray, m: int, r: int) -> np.ndarray:
    dest, src = _mirror(m, r)
    t = np.empty(m**r, dtype=complex)
    t[dest] = vals[src]
    return t.reshape((m,) * r)


def jet(F: Prepotential | Expr, z: Sequence[complex], order: int = 3, m: int | None = None) -> HoloJet:
    """Evaluate ``F`` and its holomorphic derivatives through ``order`` (2..4) at ``z``."""
    if isinstance(F, Expr):
        F = Prepotential(F, m if m is not None else len(z))
    if not 2 <= order <= 4:
        raise ValueError("jet order must be 2, 3 or 4")
    vals = np.array(F._raw(z, order))
    m = F.m
    return HoloJet(
        m=m,
        value=complex(vals[0]),
        grad=_tensor(vals, m, 1),
        hess=_tensor(vals, m, 2),
        third=_tensor(vals, m, 3) if order >= 3 else None,
        fourth=_tensor(vals, m, 4) if order >= 4 else None,
    )
