"""Symbolic scalar fields on a flat complex phase chart.

Coordinates are the positions z1..zm and the fibre velocities w1..wm,
treated as independent formal variables.  Differentiation is the formal
(Wirtinger) partial with respect to one of these symbols: conj, re and im
are opaque to it and differentiate to zero.  Evaluation maps every symbol
to a complex number and computes in complex arithmetic throughout.

The concrete grammar accepted by :func:`parse_expression`::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | 'i' | symbol | func '(' expr ')' | '(' expr ')'
    symbol := ('z'|'w') digits
    func   := sin | cos | exp | log | conj | re | im

A number is an unsigned decimal literal, optionally with a fractional part
and a scientific exponent (``2``, ``0.5``, ``1e-3``).  There is no unary
minus; the printer renders negations as ``(0 - x)`` so that printed text
always re-parses.
"""

from __future__ import annotations

import cmath
from typing import Callable, Dict, Mapping, Tuple


class ExprError(Exception):
    """Base class for expression-layer failures."""


class ParseError(ExprError):
    """Malformed or out-of-range input text.

    Carries the character offset at which parsing failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalDomainError(ExprError):
    """A singular operation was hit during evaluation.

    ``subtree`` is the offending node (the division, log or power whose
    argument was out of domain), not the whole expression.
    """

    def __init__(self, message: str, subtree: "Expr"):
        super().__init__(f"{message}: {subtree}")
        self.subtree = subtree


class Expr:
    """Base node.  Subclasses set ``args`` (child tuple) and a payload."""

    args: Tuple["Expr", ...] = ()

    def _payload(self):
        return ()

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self._payload() == other._payload()
            and self.args == other.args
        )

    def __hash__(self):
        return hash((type(self).__name__, self._payload(), self.args))

    def __repr__(self):
        return f"{type(self).__name__}({str(self)!r})"

    def __str__(self):
        return self._print()

    # Precedence levels: 1 add/sub, 2 mul/div, 3 pow, 4 atom.
    def _print(self, prec: int = 0) -> str:
        raise NotImplementedError

    def evaluate(self, point: Mapping["Sym", complex]) -> complex:
        raise NotImplementedError

    def diff(self, s: "Sym") -> "Expr":
        raise NotImplementedError

    # Convenience algebra, used when assembling derived expressions in code.
    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Sub(self, _coerce(other))

    def __rsub__(self, other):
        return Sub(_coerce(other), self)

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __truediv__(self, other):
        return Div(self, _coerce(other))

    def __rtruediv__(self, other):
        return Div(_coerce(other), self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("exponent must be a plain integer")
        return Pow(self, n)

    def __neg__(self):
        return Neg(self)

    def contains_symbol(self) -> bool:
        return any(a.contains_symbol() for a in self.args)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, complex)):
        return Num(value)
    raise TypeError(f"cannot use {value!r} in an expression")


def _fmt_unsigned(x: float) -> str:
    """Format a nonnegative real as an unsigned decimal literal."""
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_real_atom(x: float) -> Tuple[str, int]:
    """Print a real constant; negative values become '(0 - v)'."""
    if x >= 0:
        return _fmt_unsigned(x), 4
    return f"(0 - {_fmt_unsigned(-x)})", 4


class Num(Expr):
    """Complex literal."""

    def __init__(self, value):
        self.value = complex(value)

    def _payload(self):
        return (self.value,)

    def _print(self, prec: int = 0) -> str:
        re, im = self.value.real, self.value.imag
        if im == 0.0:
            return _fmt_real_atom(re)[0]
        if im == 1.0:
            imag = "i"
        elif im == -1.0:
            imag = "(0 - i)"
        elif im > 0:
            imag = f"{_fmt_unsigned(im)}*i"
        else:
            imag = f"(0 - {_fmt_unsigned(-im)}*i)"
        if re == 0.0:
            if im > 0 and im != 1.0 and prec > 2:
                return f"({imag})"
            return imag
        text = f"({_fmt_real_atom(re)[0]} + {imag})"
        return text

    def evaluate(self, point):
        return self.value

    def diff(self, s):
        return Num(0)

    def contains_symbol(self) -> bool:
        return False


class Sym(Expr):
    """A phase-space coordinate: kind 'z' (position) or 'w' (velocity)."""

    def __init__(self, kind: str, index: int):
        if kind not in ("z", "w"):
            raise ValueError(f"symbol kind must be 'z' or 'w', got {kind!r}")
        if index < 1:
            raise ValueError(f"symbol index must be >= 1, got {index}")
        self.kind = kind
        self.index = index

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}"

    def _payload(self):
        return (self.kind, self.index)

    def _print(self, prec: int = 0) -> str:
        return self.name

    def evaluate(self, point):
        try:
            return complex(point[self])
        except KeyError:
            raise EvalDomainError("no value supplied for symbol", self) from None

    def diff(self, s):
        return Num(1 if self == s else 0)

    def contains_symbol(self) -> bool:
        return True


class _Binary(Expr):
    _symbol = "?"
    _prec = 0

    def __init__(self, left, right):
        self.args = (_coerce(left), _coerce(right))

    @property
    def left(self):
        return self.args[0]

    @property
    def right(self):
        return self.args[1]

    def _print(self, prec: int = 0) -> str:
        # Right child needs parens at equal precedence: '-' and '/' are
        # left-associative in the grammar.
        text = (
            f"{self.left._print(self._prec)}"
            f" {self._symbol} "
            f"{self.right._print(self._prec + 1)}"
        )
        if prec > self._prec:
            return f"({text})"
        return text


class Add(_Binary):
    _symbol = "+"
    _prec = 1

    def _print(self, prec: int = 0) -> str:
        text = f"{self.left._print(1)} + {self.right._print(1)}"
        if prec > 1:
            return f"({text})"
        return text

    def evaluate(self, point):
        return self.left.evaluate(point) + self.right.evaluate(point)

    def diff(self, s):
        return Add(self.left.diff(s), self.right.diff(s))


class Sub(_Binary):
    _symbol = "-"
    _prec = 1

    def evaluate(self, point):
        return self.left.evaluate(point) - self.right.evaluate(point)

    def diff(self, s):
        return Sub(self.left.diff(s), self.right.diff(s))


class Mul(_Binary):
    _symbol = "*"
    _prec = 2

    def _print(self, prec: int = 0) -> str:
        text = f"{self.left._print(2)} * {self.right._print(2)}"
        if prec > 2:
            return f"({text})"
        return text

    def evaluate(self, point):
        return self.left.evaluate(point) * self.right.evaluate(point)

    def diff(self, s):
        return Add(
            Mul(self.left.diff(s), self.right),
            Mul(self.left, self.right.diff(s)),
        )


class Div(_Binary):
    _symbol = "/"
    _prec = 2

    def evaluate(self, point):
        denom = self.right.evaluate(point)
        if denom == 0:
            raise EvalDomainError("division by zero", self)
        return self.left.evaluate(point) / denom

    def diff(self, s):
        return Div(
            Sub(
                Mul(self.left.diff(s), self.right),
                Mul(self.left, self.right.diff(s)),
            ),
            Pow(self.right, 2),
        )


class Pow(Expr):
    """Integer power of a subexpression."""

    _prec = 3

    def __init__(self, base, exponent: int):
        if not isinstance(exponent, int) or isinstance(exponent, bool):
            raise TypeError("Pow exponent must be a plain integer")
        self.args = (_coerce(base),)
        self.exponent = exponent

    @property
    def base(self):
        return self.args[0]

    def _payload(self):
        return (self.exponent,)

    def _print(self, prec: int = 0) -> str:
        if self.exponent < 0:
            # The grammar has no signed exponents; render via a division.
            text = f"1 / {self.base._print(4)}^{-self.exponent}"
            if prec > 2:
                return f"({text})"
            return text
        text = f"{self.base._print(4)}^{self.exponent}"
        if prec > 3:
            return f"({text})"
        return text

    def evaluate(self, point):
        b = self.base.evaluate(point)
        if b == 0 and self.exponent < 0:
            raise EvalDomainError("zero base with negative exponent", self)
        return b ** self.exponent

    def diff(self, s):
        if self.exponent == 0:
            return Num(0)
        return Mul(
            Mul(Num(self.exponent), Pow(self.base, self.exponent - 1)),
            self.base.diff(s),
        )


class _Unary(Expr):
    _name = "?"

    def __init__(self, arg):
        self.args = (_coerce(arg),)

    @property
    def arg(self):
        return self.args[0]

    def _print(self, prec: int = 0) -> str:
        return f"{self._name}({self.arg._print(0)})"


class Neg(_Unary):
    """Negation; printed as (0 - x) to stay inside the grammar."""

    def _print(self, prec: int = 0) -> str:
        return f"(0 - {self.arg._print(2)})"

    def evaluate(self, point):
        return -self.arg.evaluate(point)

    def diff(self, s):
        return Neg(self.arg.diff(s))


class Conj(_Unary):
    _name = "conj"

    def evaluate(self, point):
        return self.arg.evaluate(point).conjugate()

    def diff(self, s):
        return Num(0)


class Re(_Unary):
    _name = "re"

    def evaluate(self, point):
        return complex(self.arg.evaluate(point).real)

    def diff(self, s):
        return Num(0)


class Im(_Unary):
    _name = "im"

    def evaluate(self, point):
        return complex(self.arg.evaluate(point).imag)

    def diff(self, s):
        return Num(0)


class Sin(_Unary):
    _name = "sin"

    def evaluate(self, point):
        return _lift_cmath(cmath.sin, self.arg.evaluate(point), self)

    def diff(self, s):
        return Mul(Cos(self.arg), self.arg.diff(s))


class Cos(_Unary):
    _name = "cos"

    def evaluate(self, point):
        return _lift_cmath(cmath.cos, self.arg.evaluate(point), self)

    def diff(self, s):
        return Mul(Neg(Sin(self.arg)), self.arg.diff(s))


class Exp(_Unary):
    _name = "exp"

    def evaluate(self, point):
        return _lift_cmath(cmath.exp, self.arg.evaluate(point), self)

    def diff(self, s):
        return Mul(Exp(self.arg), self.arg.diff(s))


class Log(_Unary):
    _name = "log"

    def evaluate(self, point):
        v = self.arg.evaluate(point)
        if v == 0:
            raise EvalDomainError("log of zero", self)
        return cmath.log(v)

    def diff(self, s):
        return Div(self.arg.diff(s), self.arg)


def _lift_cmath(fn, value, node):
    try:
        return fn(value)
    except (OverflowError, ValueError):
        raise EvalDomainError("argument out of range", node) from None


_FUNCTIONS = {
    "sin": Sin,
    "cos": Cos,
    "exp": Exp,
    "log": Log,
    "conj": Conj,
    "re": Re,
    "im": Im,
}


# ---------------------------------------------------------------------------
# Parsing


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text):
            return ""
        return self.text[self.pos]

    def take(self) -> str:
        c = self.peek()
        self.pos += 1
        return c

    def read_number(self) -> float:
        start = self.pos
        text = self.text
        while self.pos < len(text) and text[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(text) and text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(text) and text[self.pos].isdigit():
                self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # not an exponent after all
        return float(text[start:self.pos])

    def read_name(self) -> str:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        return text[start:self.pos]


class _Parser:
    def __init__(self, text: str, m: int):
        self.lex = _Lexer(text)
        self.m = m

    def parse(self) -> Expr:
        e = self.expr()
        self.lex.skip_ws()
        if self.lex.pos != len(self.lex.text):
            raise ParseError(
                f"unexpected trailing input {self.lex.text[self.lex.pos:]!r}",
                self.lex.pos,
            )
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            c = self.lex.peek()
            if c == "+":
                self.lex.take()
                e = Add(e, self.term())
            elif c == "-":
                self.lex.take()
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            c = self.lex.peek()
            if c == "*":
                self.lex.take()
                e = Mul(e, self.factor())
            elif c == "/":
                self.lex.take()
                e = Div(e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        e = self.base()
        if self.lex.peek() == "^":
            self.lex.take()
            self.lex.skip_ws()
            start = self.lex.pos
            digits = ""
            while self.lex.pos < len(self.lex.text) and self.lex.text[self.lex.pos].isdigit():
                digits += self.lex.text[self.lex.pos]
                self.lex.pos += 1
            if not digits:
                raise ParseError("expected an integer exponent after '^'", start)
            e = Pow(e, int(digits))
        return e

    def base(self) -> Expr:
        c = self.lex.peek()
        if c == "":
            raise ParseError("unexpected end of input", self.lex.pos)
        if c == "(":
            self.lex.take()
            e = self.expr()
            if self.lex.peek() != ")":
                raise ParseError("expected ')'", self.lex.pos)
            self.lex.take()
            return e
        if c.isdigit() or c == ".":
            self.lex.skip_ws()
            return Num(self.lex.read_number())
        if c.isalpha():
            self.lex.skip_ws()
            start = self.lex.pos
            name = self.lex.read_name()
            if name == "i":
                return Num(1j)
            if name in _FUNCTIONS:
                if self.lex.peek() != "(":
                    raise ParseError(f"expected '(' after {name!r}", self.lex.pos)
                self.lex.take()
                e = self.expr()
                if self.lex.peek() != ")":
                    raise ParseError("expected ')'", self.lex.pos)
                self.lex.take()
                return _FUNCTIONS[name](e)
            if name[0] in ("z", "w") and name[1:].isdigit():
                index = int(name[1:])
                if not 1 <= index <= self.m:
                    raise ParseError(
                        f"symbol {name!r} out of range for dimension m={self.m}",
                        start,
                    )
                return Sym(name[0], index)
            raise ParseError(f"unknown symbol {name!r}", start)
        raise ParseError(f"unexpected character {c!r}", self.lex.pos)


def parse_expression(text: str, m: int) -> Expr:
    """Parse ``text`` over coordinates z1..zm, w1..wm."""
    if m < 1:
        raise ValueError(f"dimension m must be >= 1, got {m}")
    return _Parser(text, m).parse()


# ---------------------------------------------------------------------------
# Simplification

_ZERO = Num(0)
_ONE = Num(1)


def simplify(e: Expr) -> Expr:
    """Constant folding plus the obvious unit/zero laws, applied bottom-up.

    The result evaluates identically to the input wherever the input is
    defined.  (As usual for x*0 -> 0, folding can enlarge the domain.)
    """
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Pow):
        base = simplify(e.base)
        if e.exponent == 0:
            return _ONE
        if e.exponent == 1:
            return base
        if isinstance(base, Num) and not (base.value == 0 and e.exponent < 0):
            try:
                return Num(base.value ** e.exponent)
            except OverflowError:
                pass
        return Pow(base, e.exponent)
    if isinstance(e, _Unary):
        arg = simplify(e.arg)
        if isinstance(e, Neg):
            if isinstance(arg, Num):
                return Num(-arg.value)
            if isinstance(arg, Neg):
                return arg.arg
            return Neg(arg)
        if isinstance(arg, Num):
            if isinstance(e, Conj):
                return Num(arg.value.conjugate())
            if isinstance(e, Re):
                return Num(arg.value.real)
            if isinstance(e, Im):
                return Num(arg.value.imag)
            if not (isinstance(e, Log) and arg.value == 0):
                try:
                    return Num(type(e)(arg).evaluate({}))
                except EvalDomainError:
                    pass
        return type(e)(arg)
    if isinstance(e, _Binary):
        left = simplify(e.left)
        right = simplify(e.right)
        lnum = left.value if isinstance(left, Num) else None
        rnum = right.value if isinstance(right, Num) else None
        if isinstance(e, Add):
            if lnum == 0:
                return right
            if rnum == 0:
                return left
            if lnum is not None and rnum is not None:
                return Num(lnum + rnum)
            return Add(left, right)
        if isinstance(e, Sub):
            if rnum == 0:
                return left
            if lnum is not None and rnum is not None:
                return Num(lnum - rnum)
            if lnum == 0:
                return simplify(Neg(right))
            return Sub(left, right)
        if isinstance(e, Mul):
            if lnum == 0 or rnum == 0:
                return _ZERO
            if lnum == 1:
                return right
            if rnum == 1:
                return left
            if lnum is not None and rnum is not None:
                return Num(lnum * rnum)
            return Mul(left, right)
        if isinstance(e, Div):
            if lnum == 0:
                return _ZERO
            if rnum == 1:
                return left
            if lnum is not None and rnum is not None and rnum != 0:
                return Num(lnum / rnum)
            return Div(left, right)
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Free-function convenience API


def evaluate(e: Expr, point: Mapping[Sym, complex]) -> complex:
    """Evaluate ``e`` at a total assignment of symbols to complex values."""
    return e.evaluate(point)


def diff(e: Expr, s: Sym) -> Expr:
    """Formal partial derivative of ``e`` with respect to the symbol ``s``."""
    return e.diff(s)


def position_symbols(m: int) -> Tuple[Sym, ...]:
    return tuple(Sym("z", i) for i in range(1, m + 1))


def velocity_symbols(m: int) -> Tuple[Sym, ...]:
    return tuple(Sym("w", i) for i in range(1, m + 1))


def make_point(z_values, w_values) -> Dict[Sym, complex]:
    """Build an evaluation point from position and velocity value vectors."""
    point: Dict[Sym, complex] = {}
    for i, v in enumerate(z_values, start=1):
        point[Sym("z", i)] = complex(v)
    for i, v in enumerate(w_values, start=1):
        point[Sym("w", i)] = complex(v)
    return point


# ---------------------------------------------------------------------------
# Compiled evaluation (internal fast path for the dynamics layer)


def _emit(e: Expr) -> str:
    if isinstance(e, Num):
        return f"({e.value!r})"
    if isinstance(e, Sym):
        return f"{e.kind}[{e.index - 1}]"
    if isinstance(e, Add):
        return f"({_emit(e.left)} + {_emit(e.right)})"
    if isinstance(e, Sub):
        return f"({_emit(e.left)} - {_emit(e.right)})"
    if isinstance(e, Mul):
        return f"({_emit(e.left)} * {_emit(e.right)})"
    if isinstance(e, Div):
        return f"({_emit(e.left)} / {_emit(e.right)})"
    if isinstance(e, Pow):
        return f"({_emit(e.base)} ** {e.exponent})"
    if isinstance(e, Neg):
        return f"(-{_emit(e.arg)})"
    if isinstance(e, Conj):
        return f"({_emit(e.arg)}).conjugate()"
    if isinstance(e, Re):
        return f"complex(({_emit(e.arg)}).real)"
    if isinstance(e, Im):
        return f"complex(({_emit(e.arg)}).imag)"
    if isinstance(e, Sin):
        return f"_sin({_emit(e.arg)})"
    if isinstance(e, Cos):
        return f"_cos({_emit(e.arg)})"
    if isinstance(e, Exp):
        return f"_exp({_emit(e.arg)})"
    if isinstance(e, Log):
        return f"_log({_emit(e.arg)})"
    raise TypeError(f"unknown node {e!r}")


def compile_expr(e: Expr) -> Callable[[Tuple[complex, ...], Tuple[complex, ...]], complex]:
    """Compile ``e`` to a callable ``f(z_tuple, w_tuple) -> complex``.

    Domain failures are re-raised as :class:`EvalDomainError` carrying the
    whole expression (the tree walker in :meth:`Expr.evaluate` can be used
    to pinpoint the exact subtree when that matters).
    """
    namespace = {
        "_sin": cmath.sin,
        "_cos": cmath.cos,
        "_exp": cmath.exp,
        "_log": cmath.log,
    }
    code = compile(_emit(e), "<expr>", "eval")

    def fn(z, w, _code=code, _ns=namespace, _e=e):
        try:
            return eval(_code, {"__builtins__": {}, "complex": complex, **_ns}, {"z": z, "w": w})
        except ZeroDivisionError:
            raise EvalDomainError("division by zero", _e) from None
        except (ValueError, OverflowError):
            raise EvalDomainError("argument out of range", _e) from None

    return fn
