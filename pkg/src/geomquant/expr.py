"""Symbolic expressions for smooth functions on the phase space T*R^n.

The AST is closed under +, -, *, /, rational powers and the functions
exp, sin, cos, sqrt, log.  Coordinates are x1..xn, p1..pn; ``hbar`` and
``m`` are reserved parameter symbols and ``i`` is the imaginary unit.
Expressions are immutable, so they can be shared freely between threads
and evaluated concurrently.  Evaluation accepts numpy arrays for the
coordinates, which makes sampling an expression at a batch of random
phase-space points a single call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

__all__ = [
    "PhaseSpace",
    "Expr",
    "Const",
    "Sym",
    "Add",
    "Mul",
    "Pow",
    "Call",
    "I",
    "HBAR",
    "MASS",
    "ZERO",
    "ONE",
    "parse",
    "simplify",
    "differentiate",
    "derivative",
    "evaluate",
    "random_points",
    "random_polynomial",
    "max_rel_residual",
    "is_real_valued",
    "ExprError",
    "ParseError",
    "EvalError",
    "UnboundSymbolError",
    "DomainError",
    "NonFiniteError",
]

Number = Union[int, float, complex, Fraction]

_FUNCS = ("exp", "sin", "cos", "log")
_RESERVED = ("hbar", "m", "i")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ExprError):
    pass


class UnboundSymbolError(EvalError):
    pass


class DomainError(EvalError):
    pass


class NonFiniteError(DomainError):
    """Evaluation overflowed or produced NaN."""


@dataclass(frozen=True)
class PhaseSpace:
    """The ambient phase space: n degrees of freedom with parameters hbar, m."""

    n: int
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def coordinates(self) -> tuple[str, ...]:
        xs = tuple(f"x{j}" for j in range(1, self.n + 1))
        ps = tuple(f"p{j}" for j in range(1, self.n + 1))
        return xs + ps

    def coordinate_index(self, name: str) -> int:
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a coordinate of this space") from None


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _norm_num(v: Number) -> Number:
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    if isinstance(v, complex):
        # scrub IEEE signed zeros so equal values share one representation
        v = complex(v.real + 0.0, v.imag + 0.0)
        if v.imag == 0:
            return v.real
        return v
    if isinstance(v, float):
        return v + 0.0
    return v


class Expr:
    """Immutable expression node."""

    __slots__ = ("_skey_cache",)

    def skey(self) -> str:
        """Canonical structural key, used for sorting and term collection."""
        k = getattr(self, "_skey_cache", None)
        if k is None:
            k = self._skey()
            object.__setattr__(self, "_skey_cache", k)
        return k

    def _skey(self) -> str:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Expr) and self.skey() == other.skey()

    def __hash__(self):
        return hash(self.skey())

    def __str__(self):
        return to_str(self)

    __repr__ = __str__

    # operator sugar, used when building expressions programmatically
    def __add__(self, other):
        return Add((self, _as_expr(other)))

    def __radd__(self, other):
        return Add((_as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Mul((Const(-1), _as_expr(other)))))

    def __rsub__(self, other):
        return Add((_as_expr(other), Mul((Const(-1), self))))

    def __mul__(self, other):
        return Mul((self, _as_expr(other)))

    def __rmul__(self, other):
        return Mul((_as_expr(other), self))

    def __truediv__(self, other):
        return Mul((self, Pow(_as_expr(other), Fraction(-1))))

    def __rtruediv__(self, other):
        return Mul((_as_expr(other), Pow(self, Fraction(-1))))

    def __pow__(self, exponent):
        return Pow(self, Fraction(exponent))

    def __neg__(self):
        return Mul((Const(-1), self))


def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, complex, Fraction)):
        return Const(v)
    raise TypeError(f"cannot convert {v!r} to Expr")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        object.__setattr__(self, "value", _norm_num(value))

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        v = self.value
        return f"C{type(v).__name__}:{v!r}"


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        return f"S:{self.name}"


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        return "A(" + ",".join(t.skey() for t in self.terms) + ")"


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        return "M(" + ",".join(f.skey() for f in self.factors) + ")"


class Pow(Expr):
    """base ** exponent with the exponent kept as an exact Fraction."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", Fraction(exponent))

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        return f"P({self.base.skey()};{self.exponent})"


class Call(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Expr):
        if fn not in _FUNCS:
            raise ValueError(f"unknown function {fn!r}")
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _skey(self):
        return f"F{self.fn}({self.arg.skey()})"


I = Const(1j)
HBAR = Sym("hbar")
MASS = Sym("m")
ZERO = Const(0)
ONE = Const(1)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)

_COORD_RE = re.compile(r"^([xp])(\d+)$")


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        while self.pos < len(source):
            mo = _TOKEN_RE.match(source, self.pos)
            if mo is None or mo.end() == self.pos:
                stripped = source[self.pos:].lstrip()
                if not stripped:
                    break
                off = len(source) - len(stripped)
                raise ParseError(f"unexpected character {stripped[0]!r}", off)
            kind = mo.lastgroup
            self.tokens.append((kind, mo.group(kind), mo.start(kind)))
            self.pos = mo.end()
        self.tokens.append(("end", "", len(source)))
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def next(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", off)


class _Parser:
    def __init__(self, source: str, space: PhaseSpace):
        self.tk = _Tokenizer(source)
        self.space = space

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.tk.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", off)
        return e

    def expr(self) -> Expr:
        sign = 1
        kind, val, off = self.tk.peek()
        if kind == "op" and val in "+-":
            self.tk.next()
            sign = -1 if val == "-" else 1
        e = self.term()
        if sign < 0:
            e = Mul((Const(-1), e))
        while True:
            kind, val, off = self.tk.peek()
            if kind == "op" and val in "+-":
                self.tk.next()
                rhs = self.term()
                e = Add((e, rhs)) if val == "+" else Add((e, Mul((Const(-1), rhs))))
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, off = self.tk.peek()
            if kind == "op" and val in "*/":
                self.tk.next()
                rhs = self.factor()
                e = Mul((e, rhs)) if val == "*" else _div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        base = self.base()
        kind, val, off = self.tk.peek()
        if kind == "op" and val == "^":
            self.tk.next()
            exponent = self.signed_rational()
            return Pow(base, exponent)
        return base

    def signed_rational(self) -> Fraction:
        # a bare exponent is a signed integer; ratios need parentheses, so
        # "x^2/2" keeps its conventional reading (x^2)/2
        kind, val, off = self.tk.peek()
        if kind == "op" and val == "(":
            self.tk.next()
            r = self._signed_ratio(allow_slash=True)
            self.tk.expect_op(")")
            return r
        return self._signed_ratio(allow_slash=False)

    def _signed_ratio(self, allow_slash: bool) -> Fraction:
        kind, val, off = self.tk.peek()
        sign = 1
        if kind == "op" and val in "+-":
            self.tk.next()
            sign = -1 if val == "-" else 1
            kind, val, off = self.tk.peek()
        if kind != "num" or any(c in val for c in ".eE"):
            raise ParseError("exponent must be an integer or integer ratio", off)
        self.tk.next()
        num = int(val)
        kind, val, _ = self.tk.peek()
        if allow_slash and kind == "op" and val == "/":
            self.tk.next()
            dkind, dval, doff = self.tk.next()
            if dkind != "num" or any(c in dval for c in ".eE"):
                raise ParseError("exponent denominator must be an integer", doff)
            den = int(dval)
            if den == 0:
                raise ParseError("zero denominator in exponent", doff)
            return Fraction(sign * num, den)
        return Fraction(sign * num)

    def base(self) -> Expr:
        kind, val, off = self.tk.next()
        if kind == "num":
            if any(c in val for c in ".eE"):
                return Const(float(val))
            return Const(int(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.tk.expect_op(")")
            return e
        if kind == "ident":
            nk, nv, _ = self.tk.peek()
            if nk == "op" and nv == "(":
                if val == "sqrt":
                    self.tk.next()
                    arg = self.expr()
                    self.tk.expect_op(")")
                    return Pow(arg, Fraction(1, 2))
                if val in _FUNCS:
                    self.tk.next()
                    arg = self.expr()
                    self.tk.expect_op(")")
                    return Call(val, arg)
                raise ParseError(f"unknown function {val!r}", off)
            return self.ident(val, off)
        raise ParseError(f"expected a number, identifier or '(', found {val or 'end of input'!r}", off)

    def ident(self, name: str, off: int) -> Expr:
        if name == "i":
            return I
        if name in ("hbar", "m"):
            return Sym(name)
        mo = _COORD_RE.match(name)
        if mo:
            j = int(mo.group(2))
            if not 1 <= j <= self.space.n:
                raise ParseError(
                    f"coordinate index out of range: {name!r} with n={self.space.n}", off
                )
            return Sym(name)
        if name in ("x", "p"):
            if self.space.n == 1:
                return Sym(name + "1")
            raise ParseError(f"bare {name!r} is ambiguous for n={self.space.n}; use {name}<j>", off)
        return Sym(name)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and _is_exact(a.value) and _is_exact(b.value):
        if b.value != 0:
            return Const(Fraction(a.value) / Fraction(b.value))
    return Mul((a, Pow(b, Fraction(-1))))


def parse(source: str, space: PhaseSpace) -> Expr:
    """Parse ``source`` into an Expr over the given phase space."""
    return _Parser(source, space).parse()


# ---------------------------------------------------------------------------
# printing

def _num_str(v: Number) -> str:
    if isinstance(v, Fraction):
        return f"({v.numerator}/{v.denominator})" if v >= 0 else f"(-{-v.numerator}/{v.denominator})"
    if isinstance(v, complex):
        if v == 1j:
            return "i"
        re_s = _num_str(v.real) if v.real else ""
        im_s = f"{_num_str(abs(v.imag))}*i" if abs(v.imag) != 1 else "i"
        sign = "-" if v.imag < 0 else "+"
        if re_s:
            return f"({re_s} {sign} {im_s})"
        return f"({'-' if v.imag < 0 else ''}{im_s})"
    if v < 0:
        return f"(-{_plain_num(-v)})"
    return _plain_num(v)


def _plain_num(v) -> str:
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def to_str(e: Expr) -> str:
    return _print(e, 0)


def _print(e: Expr, ctx: int) -> str:
    # ctx: 0 top/paren, 1 additive, 2 multiplicative, 3 power base
    if isinstance(e, Const):
        s = _num_str(e.value)
        return s
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        parts = []
        for k, t in enumerate(e.terms):
            neg, abs_t = _split_negated(t)
            piece = _print(abs_t, 1)
            if k > 0 and piece.startswith("-"):
                piece = f"({piece})"
            if k == 0:
                parts.append(("-" if neg else "") + piece)
            else:
                parts.append((" - " if neg else " + ") + piece)
        s = "".join(parts)
        return f"({s})" if ctx >= 2 else s
    if isinstance(e, Mul):
        factors = e.factors
        neg = False
        if factors and isinstance(factors[0], Const) and factors[0].value == -1 and len(factors) > 1:
            neg = True
            factors = factors[1:]
        pieces = []
        for f in factors:
            p = _print(f, 2)
            if p.startswith("-"):
                p = f"({p})"
            pieces.append(p)
        s = "*".join(pieces) if pieces else "1"
        if neg:
            s = f"-{s}"
        if neg or (ctx >= 3 and len(factors) > 1):
            return f"({s})" if ctx >= 2 else s
        return s
    if isinstance(e, Pow):
        r = e.exponent
        if r == Fraction(1, 2):
            return f"sqrt({_print(e.base, 0)})"
        base = _print(e.base, 3)
        if isinstance(e.base, (Pow, Call)) or (isinstance(e.base, Mul) and len(e.base.factors) == 1):
            base = f"({_print(e.base, 0)})"
        exp = str(r.numerator) if r.denominator == 1 else f"({r.numerator}/{r.denominator})"
        return f"{base}^{exp}"
    if isinstance(e, Call):
        return f"{e.fn}({_print(e.arg, 0)})"
    raise TypeError(f"not an Expr: {e!r}")


def _split_negated(t: Expr):
    """Return (negated?, |t|) for pretty-printing sums."""
    if isinstance(t, Const) and isinstance(t.value, (int, float, Fraction)) and t.value < 0:
        return True, Const(-t.value)
    if isinstance(t, Mul) and t.factors and isinstance(t.factors[0], Const):
        c = t.factors[0].value
        if isinstance(c, (int, float, Fraction)) and c < 0:
            rest = t.factors[1:]
            if c == -1 and len(rest) == 1:
                return True, rest[0]
            if c == -1:
                return True, Mul(rest)
            return True, Mul((Const(-c),) + rest)
    return False, t


# ---------------------------------------------------------------------------
# simplification: a small terminating rewrite system (constant folding,
# 0/1 identities, flattening of + and *, collection of identical terms)

def simplify(e: Expr) -> Expr:
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, Add):
        return _make_add([simplify(t) for t in e.terms])
    if isinstance(e, Mul):
        return _make_mul([simplify(f) for f in e.factors])
    if isinstance(e, Pow):
        return _make_pow(simplify(e.base), e.exponent)
    if isinstance(e, Call):
        return _make_call(e.fn, simplify(e.arg))
    raise TypeError(f"not an Expr: {e!r}")


def _num_add(a: Number, b: Number) -> Number:
    if _is_exact(a) and _is_exact(b):
        return _norm_num(Fraction(a) + Fraction(b))
    return _norm_num(complex(a) + complex(b))


def _num_mul(a: Number, b: Number) -> Number:
    if _is_exact(a) and _is_exact(b):
        return _norm_num(Fraction(a) * Fraction(b))
    return _norm_num(complex(a) * complex(b))


def _make_add(terms) -> Expr:
    const: Number = 0
    collected: dict[str, list] = {}
    order: list[str] = []

    def absorb(t):
        nonlocal const
        if isinstance(t, Add):
            for s in t.terms:
                absorb(s)
            return
        if isinstance(t, Const):
            const = _num_add(const, t.value)
            return
        coeff: Number = 1
        rest = t
        if isinstance(t, Mul) and t.factors and isinstance(t.factors[0], Const):
            coeff = t.factors[0].value
            others = t.factors[1:]
            rest = others[0] if len(others) == 1 else Mul(others)
        key = rest.skey()
        if key in collected:
            collected[key][0] = _num_add(collected[key][0], coeff)
        else:
            collected[key] = [coeff, rest]
            order.append(key)

    for t in terms:
        absorb(t)

    out = []
    for key in sorted(order):
        coeff, rest = collected[key]
        if coeff == 0:
            continue
        if coeff == 1:
            out.append(rest)
        else:
            out.append(_make_mul([Const(coeff), rest]))
    if const != 0 or not out:
        out.insert(0, Const(const))
    if len(out) == 1:
        return out[0]
    return Add(out)


def _make_mul(factors) -> Expr:
    coeff: Number = 1
    collected: dict[str, list] = {}
    order: list[str] = []

    def absorb(f):
        nonlocal coeff
        if isinstance(f, Mul):
            for g in f.factors:
                absorb(g)
            return
        if isinstance(f, Const):
            coeff = _num_mul(coeff, f.value)
            return
        base, exp = (f.base, f.exponent) if isinstance(f, Pow) else (f, Fraction(1))
        key = base.skey()
        if key in collected:
            collected[key][1] += exp
        else:
            collected[key] = [base, exp]
            order.append(key)

    for f in factors:
        absorb(f)

    if coeff == 0:
        return Const(0)
    out = []
    for key in sorted(order):
        base, exp = collected[key]
        if exp == 0:
            continue
        out.append(_make_pow(base, exp))
    # _make_pow may fold to constants; sweep them into the coefficient
    kept = []
    for f in out:
        if isinstance(f, Const):
            coeff = _num_mul(coeff, f.value)
        else:
            kept.append(f)
    if coeff == 0:
        return Const(0)
    if not kept:
        return Const(coeff)
    # distribute over a single Add factor; with two or more the product
    # stays factored to avoid blowup
    adds = [f for f in kept if isinstance(f, Add)]
    if len(adds) == 1:
        others = [Const(coeff)] + [f for f in kept if not isinstance(f, Add)]
        return _make_add([_make_mul(others + [t]) for t in adds[0].terms])
    if coeff != 1:
        kept.insert(0, Const(coeff))
    if len(kept) == 1:
        return kept[0]
    return Mul(kept)


def _make_pow(base: Expr, exponent: Fraction) -> Expr:
    exponent = Fraction(exponent)
    if exponent == 0:
        return Const(1)
    if exponent == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if _is_exact(v):
            if exponent.denominator == 1:
                if v == 0 and exponent < 0:
                    return Pow(base, exponent)  # defer the domain error to eval
                return Const(Fraction(v) ** exponent.numerator if v != 0 or exponent > 0 else 0)
            if v == 0:
                return Const(0) if exponent > 0 else Pow(base, exponent)
            if v == 1:
                return Const(1)
        if v == 1:
            return Const(1)
    if isinstance(base, Pow) and exponent.denominator == 1:
        # (b^r)^k = b^(rk) is exact for integer k
        return _make_pow(base.base, base.exponent * exponent)
    if isinstance(base, Mul) and exponent.denominator == 1:
        return _make_mul([_make_pow(f, exponent) for f in base.factors])
    return Pow(base, exponent)


def _make_call(fn: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        if arg.value == 0:
            if fn == "exp":
                return Const(1)
            if fn == "sin":
                return Const(0)
            if fn == "cos":
                return Const(1)
        if arg.value == 1 and fn == "log":
            return Const(0)
    return Call(fn, arg)


# ---------------------------------------------------------------------------
# differentiation

def derivative(e: Expr, name: str) -> Expr:
    """Exact symbolic partial derivative with respect to the symbol ``name``."""
    return simplify(_diff(e, name))


def differentiate(e: Expr, var: str, space: PhaseSpace) -> Expr:
    """Partial derivative with respect to a declared coordinate."""
    if var not in space.coordinates:
        raise KeyError(f"{var!r} is not a coordinate of this space")
    return derivative(e, var)


def _diff(e: Expr, name: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == name else ZERO
    if isinstance(e, Add):
        return Add(tuple(_diff(t, name) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        fs = e.factors
        for k in range(len(fs)):
            terms.append(Mul(fs[:k] + (_diff(fs[k], name),) + fs[k + 1:]))
        return Add(tuple(terms))
    if isinstance(e, Pow):
        r = e.exponent
        return Mul((Const(r), Pow(e.base, r - 1), _diff(e.base, name)))
    if isinstance(e, Call):
        darg = _diff(e.arg, name)
        if e.fn == "exp":
            return Mul((Call("exp", e.arg), darg))
        if e.fn == "sin":
            return Mul((Call("cos", e.arg), darg))
        if e.fn == "cos":
            return Mul((Const(-1), Call("sin", e.arg), darg))
        if e.fn == "log":
            return Mul((darg, Pow(e.arg, Fraction(-1))))
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# evaluation

def evaluate(e: Expr, space: PhaseSpace, point, params: dict | None = None):
    """Evaluate at a phase-space point (or a batch: array of shape (2n, ...)).

    Binds hbar and m from the space; extra free symbols come from ``params``.
    Domain problems (division by zero, log of a non-positive real, non-finite
    results) raise DomainError instead of propagating NaNs.
    """
    pt = np.asarray(point)
    if pt.shape[0] != space.dim:
        raise ValueError(f"point must have {space.dim} components, got {pt.shape[0]}")
    if not np.iscomplexobj(pt):
        pt = pt.astype(np.float64)
    env = {name: pt[k] for k, name in enumerate(space.coordinates)}
    env["hbar"] = space.hbar
    env["m"] = space.mass
    if params:
        env.update(params)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        out = _eval(e, env)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("evaluation produced a non-finite value")
    if np.ndim(out) == 0:
        out = np.asarray(out)[()]
        if isinstance(out, np.generic):
            out = out.item()
        if isinstance(out, complex) and out.imag == 0:
            out = out.real
        return out
    return out


def _eval(e: Expr, env: dict):
    if isinstance(e, Const):
        v = e.value
        return float(v) if isinstance(v, Fraction) else v
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundSymbolError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Add):
        acc = _eval(e.terms[0], env)
        for t in e.terms[1:]:
            acc = acc + _eval(t, env)
        return acc
    if isinstance(e, Mul):
        acc = _eval(e.factors[0], env)
        for f in e.factors[1:]:
            acc = acc * _eval(f, env)
        return acc
    if isinstance(e, Pow):
        return _eval_pow(_eval(e.base, env), e.exponent)
    if isinstance(e, Call):
        v = _eval(e.arg, env)
        if e.fn == "exp":
            return np.exp(v)
        if e.fn == "sin":
            return np.sin(v)
        if e.fn == "cos":
            return np.cos(v)
        if e.fn == "log":
            if not np.iscomplexobj(np.asarray(v)) and np.any(np.asarray(v) <= 0):
                raise DomainError("log of a non-positive real value")
            return np.log(v)
    raise TypeError(f"not an Expr: {e!r}")


def _eval_pow(base, exponent: Fraction):
    arr = np.asarray(base)
    if exponent.denominator == 1:
        k = exponent.numerator
        if k < 0 and np.any(arr == 0):
            raise DomainError("division by zero")
        return base ** k
    r = float(exponent)
    if np.iscomplexobj(arr):
        if exponent < 0 and np.any(arr == 0):
            raise DomainError("division by zero")
        return base ** r
    if np.any(arr < 0):
        return (arr.astype(np.complex128)) ** r
    if exponent < 0 and np.any(arr == 0):
        raise DomainError("division by zero")
    return base ** r


# ---------------------------------------------------------------------------
# sampling helpers

def random_points(space: PhaseSpace, rng: np.random.Generator, count: int = 100,
                  box: float = 1.0) -> np.ndarray:
    """Uniform sample of phase-space points, shape (2n, count)."""
    return rng.uniform(-box, box, size=(space.dim, count))


def random_polynomial(space: PhaseSpace, rng: np.random.Generator,
                      degree: int = 4, terms: int = 3,
                      coeff_range: int = 3) -> Expr:
    """A random polynomial observable: `terms` monomials of total degree
    at most `degree`, with small integer coefficients."""
    out = []
    for _ in range(terms):
        c = int(rng.integers(-coeff_range, coeff_range + 1)) or 1
        t: Expr = Const(c)
        budget = int(rng.integers(0, degree + 1))
        for name in space.coordinates:
            if budget <= 0:
                break
            k = int(rng.integers(0, budget + 1))
            if k:
                t = Mul((t, Pow(Sym(name), Fraction(k))))
                budget -= k
        out.append(t)
    return simplify(Add(tuple(out)))


def max_rel_residual(e1: Expr, e2: Expr, space: PhaseSpace, points: np.ndarray,
                     params: dict | None = None) -> float:
    """max over points of |e1 - e2| / (1 + |e1| + |e2|)."""
    v1 = np.asarray(evaluate(e1, space, points, params))
    v2 = np.asarray(evaluate(e2, space, points, params))
    v1, v2 = np.broadcast_arrays(v1, v2)
    return float(np.max(np.abs(v1 - v2) / (1.0 + np.abs(v1) + np.abs(v2))))


def is_real_valued(e: Expr, space: PhaseSpace, points: np.ndarray,
                   params: dict | None = None, tol: float = 1e-10) -> bool:
    """True when the imaginary part vanishes at every sample point."""
    v = np.asarray(evaluate(e, space, points, params))
    if not np.iscomplexobj(v):
        return True
    return bool(np.max(np.abs(v.imag)) <= tol * (1.0 + np.max(np.abs(v))))
