"""Coefficient fields.

Two interchangeable backends share one small interface:

* exact: rational functions over Q in named parameters, optionally extended
  by a single algebraic generator with a monic minimal polynomial;
* bigfloat: complex numbers at a fixed binary precision (mpmath).

Elements are plain Python objects supporting ``+ - * / **`` with each other
and with ``int``; the :class:`Field` handle supplies embeddings, zero tests,
rendering and parsing.

>>> F = make_field(FieldSpec())
>>> F.parse("2/3") * F.parse("3/4")
mpq(1,2)
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import gmpy2
import mpmath
import sympy
from gmpy2 import mpq
from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement, field as sympy_field


class FieldError(ValueError):
    """Malformed field specification or an illegal operation."""


class ZeroDivisorError(ZeroDivisionError):
    """Inversion hit a zero divisor: the asserted-irreducible polynomial factors."""

    def __init__(self, factor: str):
        super().__init__(f"minimal polynomial is reducible; factor found: {factor}")
        self.factor = factor


@dataclass(frozen=True)
class FieldSpec:
    """Declarative description of a coefficient field.

    ``generator`` is ``(name, coeffs)`` with ``coeffs`` the minimal polynomial
    listed low-to-high degree as strings over the parameter field; it must be
    monic.
    """

    parameters: tuple[str, ...] = ()
    generator: tuple[str, tuple[str, ...]] | None = None
    backend: str = "exact"
    precision_bits: int = 256
    zero_tolerance: float = 1e-60

    def to_json(self) -> dict:
        out: dict[str, Any] = {"backend": self.backend, "parameters": list(self.parameters)}
        if self.generator is not None:
            out["generator"] = {"name": self.generator[0], "minpoly": list(self.generator[1])}
        if self.backend == "bigfloat":
            out["precision_bits"] = self.precision_bits
            out["zero_tolerance"] = repr(self.zero_tolerance)
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "FieldSpec":
        gen = doc.get("generator")
        generator = None
        if gen:
            generator = (str(gen["name"]), tuple(str(c) for c in gen["minpoly"]))
        return cls(
            parameters=tuple(doc.get("parameters", ())),
            generator=generator,
            backend=doc.get("backend", "exact"),
            precision_bits=int(doc.get("precision_bits", 256)),
            zero_tolerance=float(doc.get("zero_tolerance", 1e-60)),
        )


class Field:
    """Common interface; concrete fields override the primitives."""

    exact: bool = True
    zero: Any
    one: Any

    def __call__(self, value: Any) -> Any:
        return self.embed(value)

    def frac(self, p: int, q: int = 1) -> Any:
        """The rational number p/q embedded in the field."""
        return self.embed(mpq(p, q))

    def embed(self, value: Any) -> Any:
        raise NotImplementedError

    def is_zero(self, a: Any) -> bool:
        raise NotImplementedError

    def eq(self, a: Any, b: Any) -> bool:
        return self.is_zero(a - b)

    def reduce(self, a: Any) -> Any:
        """Canonical form; exact elements are kept canonical by construction."""
        return self.embed(a)

    def inv(self, a: Any) -> Any:
        if self.is_zero(a):
            raise ZeroDivisionError("inverse of zero")
        return self.one / a

    def sqrt(self, a: Any) -> Any:
        raise FieldError(f"no square root of {self.render(a)} in this field")

    def magnitude(self, a: Any) -> float:
        """A float size used for defect reports (0.0 exactly for exact zero)."""
        return 0.0 if self.is_zero(a) else 1.0

    def render(self, a: Any) -> str:
        raise NotImplementedError

    def parse(self, s: str) -> Any:
        raise NotImplementedError

    def param(self, name: str) -> Any:
        raise FieldError(f"unknown parameter {name!r}")


MPQ = type(mpq(0))
RATIONAL_TYPES = (int, Fraction, MPQ)


class RationalField(Field):
    """Q with gmpy2 ``mpq`` elements."""

    def __init__(self) -> None:
        self.zero = mpq(0)
        self.one = mpq(1)

    def embed(self, value: Any) -> MPQ:
        if isinstance(value, MPQ):
            return value
        if isinstance(value, str):
            return self.parse(value)
        if isinstance(value, Fraction):
            return mpq(value.numerator, value.denominator)
        return mpq(value)

    def is_zero(self, a: Any) -> bool:
        return a == 0

    def eq(self, a: Any, b: Any) -> bool:
        return a == b

    def sqrt(self, a: Any) -> MPQ:
        a = self.embed(a)
        if a >= 0:
            p, q = gmpy2.isqrt(a.numerator), gmpy2.isqrt(a.denominator)
            if p * p == a.numerator and q * q == a.denominator:
                return mpq(p, q)
        raise FieldError(f"{a} is not a square in Q")

    def magnitude(self, a: Any) -> float:
        return abs(float(a))

    def render(self, a: Any) -> str:
        return str(self.embed(a))

    def parse(self, s: str) -> MPQ:
        s = s.strip()
        try:
            return mpq(Fraction(s))
        except ValueError:
            try:
                expr = sympy.sympify(s)
            except (sympy.SympifyError, TypeError) as exc:
                raise FieldError(f"not a rational number: {s!r}") from exc
            if not expr.is_Rational:
                raise FieldError(f"not a rational number: {s!r}")
            return mpq(int(expr.p), int(expr.q))

    def __repr__(self) -> str:
        return "QQ"


class ParameterField(Field):
    """Q(p1, ..., pk) using sympy's sparse rational-function field."""

    def __init__(self, names: Sequence[str]):
        if not names:
            raise FieldError("parameter field needs at least one parameter")
        self.names = tuple(names)
        self.K, *gens = sympy_field(",".join(self.names), QQ)
        self._gens = dict(zip(self.names, gens))
        self._symbols = {n: sympy.Symbol(n) for n in self.names}
        self.zero = self.K.zero
        self.one = self.K.one

    def embed(self, value: Any) -> FracElement:
        if isinstance(value, FracElement):
            return value
        if isinstance(value, str):
            return self.parse(value)
        if isinstance(value, Fraction):
            return self.K(QQ(value.numerator, value.denominator))
        return self.K(QQ(value) if isinstance(value, MPQ) else value)

    def is_zero(self, a: Any) -> bool:
        return not a

    def eq(self, a: Any, b: Any) -> bool:
        return a == b

    def param(self, name: str) -> FracElement:
        if name not in self._gens:
            raise FieldError(f"unknown parameter {name!r}")
        return self._gens[name]

    def render(self, a: Any) -> str:
        return str(self.embed(a).as_expr())

    def parse(self, s: str) -> FracElement:
        expr = sympy.sympify(s, locals=self._symbols)
        free = {str(x) for x in expr.free_symbols}
        if not free <= set(self.names):
            raise FieldError(f"unknown symbols {sorted(free - set(self.names))} in {s!r}")
        return self.K.from_expr(expr)

    def __repr__(self) -> str:
        return f"QQ({', '.join(self.names)})"


class AlgElement:
    """Element of base[g]/(m(g)); coefficients low-to-high, length deg(m)."""

    __slots__ = ("F", "c")

    def __init__(self, F: "AlgebraicField", c: tuple):
        self.F = F
        self.c = c

    def _lift(self, other: Any) -> "AlgElement | None":
        if isinstance(other, AlgElement):
            return other
        if isinstance(other, RATIONAL_TYPES) or self.F.base_accepts(other):
            return self.F.from_base(other)
        return None

    def __add__(self, other: Any) -> "AlgElement":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return AlgElement(self.F, tuple(a + b for a, b in zip(self.c, o.c)))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "AlgElement":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return AlgElement(self.F, tuple(a - b for a, b in zip(self.c, o.c)))

    def __rsub__(self, other: Any) -> "AlgElement":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self) -> "AlgElement":
        return AlgElement(self.F, tuple(-a for a in self.c))

    def __pos__(self) -> "AlgElement":
        return self

    def __mul__(self, other: Any) -> "AlgElement":
        if isinstance(other, AlgElement):
            return self.F.mul(self, other)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        s = o.c[0]
        return AlgElement(self.F, tuple(a * s for a in self.c))

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "AlgElement":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        if all(not b for b in o.c[1:]):
            s = o.c[0]
            if not s:
                raise ZeroDivisionError("division by zero")
            return AlgElement(self.F, tuple(a / s for a in self.c))
        return self.F.mul(self, self.F.invert(o))

    def __rtruediv__(self, other: Any) -> "AlgElement":
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, n: int) -> "AlgElement":
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return (self.F.one / self) ** (-n)
        result, base = self.F.one, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other: Any) -> bool:
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.c == o.c

    def __hash__(self) -> int:
        return hash(self.c)

    def __bool__(self) -> bool:
        return any(bool(a) for a in self.c)

    def __repr__(self) -> str:
        return self.F.render(self)


class AlgebraicField(Field):
    """base(g) with g a root of a monic minimal polynomial of degree d >= 1."""

    def __init__(self, base: Field, name: str, minpoly: Sequence[Any]):
        coeffs = [base.embed(c) for c in minpoly]
        if len(coeffs) < 2:
            raise FieldError("minimal polynomial must have degree >= 1")
        if not base.eq(coeffs[-1], base.one):
            raise FieldError("minimal polynomial must be monic")
        self.base = base
        self.name = name
        self.m = coeffs
        self.d = len(coeffs) - 1
        self.zero = AlgElement(self, tuple([base.zero] * self.d))
        self.one = self.from_base(base.one)
        self.gen = AlgElement(self, tuple(base.one if i == 1 else base.zero for i in range(self.d))) \
            if self.d > 1 else self.from_base(-coeffs[0])
        # g^(d+j) expressed in the basis 1..g^(d-1), for j = 0..d-2
        self._red: list[list[Any]] = []
        cur = [-c for c in coeffs[:-1]]
        for _ in range(max(self.d - 1, 0)):
            self._red.append(cur)
            top = cur[-1]
            cur = [base.zero] + cur[:-1]
            cur = [a - top * c for a, c in zip(cur, coeffs[:-1])]
        if self.d >= 1:
            self._red.append(cur)

    def base_accepts(self, value: Any) -> bool:
        return isinstance(value, FracElement) and isinstance(self.base, ParameterField)

    def from_base(self, value: Any) -> AlgElement:
        b = self.base.embed(value)
        return AlgElement(self, (b,) + tuple([self.base.zero] * (self.d - 1)))

    def embed(self, value: Any) -> AlgElement:
        if isinstance(value, AlgElement):
            return value
        if isinstance(value, str):
            return self.parse(value)
        return self.from_base(value)

    def mul(self, a: AlgElement, b: AlgElement) -> AlgElement:
        d = self.d
        if d == 2:
            a0, a1 = a.c
            b0, b1 = b.c
            hi = a1 * b1
            if not hi:
                return AlgElement(self, (a0 * b0, a0 * b1 + a1 * b0))
            r0, r1 = self._red[0]
            return AlgElement(self, (a0 * b0 + hi * r0, a0 * b1 + a1 * b0 + hi * r1))
        z = self.base.zero
        prod = [z] * (2 * d - 1)
        for i, ai in enumerate(a.c):
            if not ai:
                continue
            for j, bj in enumerate(b.c):
                if bj:
                    prod[i + j] = prod[i + j] + ai * bj
        out = prod[:d]
        for k in range(d, 2 * d - 1):
            t = prod[k]
            if t:
                red = self._red[k - d]
                out = [o + t * r for o, r in zip(out, red)]
        return AlgElement(self, tuple(out))

    def invert(self, a: AlgElement) -> AlgElement:
        """Extended Euclid in base[t]; a nontrivial gcd exposes a factor of m."""
        B = self.base
        if not a:
            raise ZeroDivisionError("inverse of zero")
        r0, r1 = list(self.m), _pstrip(list(a.c))
        s0, s1 = [B.zero], [B.one]
        while len(r1) > 1:
            q, r = _pdivmod(r0, r1, B)
            r0, r1 = r1, r
            s0, s1 = s1, _psub(s0, _pmul(q, s1, B), B)
        if len(r1) == 0:
            g = _pmonic(r0, B)
            raise ZeroDivisorError(_prender(g, self.name, B))
        inv_c = B.one / r1[0]
        coeffs = [c * inv_c for c in s1] + [B.zero] * self.d
        return AlgElement(self, tuple(coeffs[: self.d]))

    def is_zero(self, a: Any) -> bool:
        return not self.embed(a)

    def eq(self, a: Any, b: Any) -> bool:
        return self.embed(a) == self.embed(b)

    def param(self, name: str) -> AlgElement:
        if name == self.name:
            return self.gen
        return self.from_base(self.base.param(name))

    def sqrt(self, a: Any) -> AlgElement:
        a = self.embed(a)
        B = self.base
        if all(not c for c in a.c[1:]):
            try:
                return self.from_base(B.sqrt(a.c[0]))
            except FieldError:
                pass
            if self.d == 2 and not self.m[1]:
                # g^2 = q: try a = s^2 q, sqrt = s g
                q = -self.m[0]
                s = B.sqrt(a.c[0] / q)
                return AlgElement(self, (B.zero, s))
        raise FieldError(f"no square root of {self.render(a)} found in {self!r}")

    def render(self, a: Any) -> str:
        a = self.embed(a)
        terms = []
        for j, c in enumerate(a.c):
            if not c:
                continue
            cs = self.base.render(c)
            if j == 0:
                terms.append(cs)
                continue
            mon = self.name if j == 1 else f"{self.name}**{j}"
            if cs == "1":
                terms.append(mon)
            elif cs == "-1":
                terms.append("-" + mon)
            else:
                terms.append(f"({cs})*{mon}")
        return " + ".join(terms) if terms else "0"

    def parse(self, s: str) -> AlgElement:
        names = list(getattr(self.base, "names", ())) + [self.name]
        syms = {n: sympy.Symbol(n) for n in names}
        expr = sympy.sympify(s, locals=syms)
        gsym = syms[self.name]
        poly = sympy.Poly(sympy.expand(expr), gsym)
        out = self.zero
        for (k,), coeff in zip(poly.monoms(), poly.coeffs()):
            out = out + self.base.parse(str(coeff)) * (self.gen ** k)
        return out

    def __repr__(self) -> str:
        return f"{self.base!r}[{self.name}]/({_prender(self.m, self.name, self.base)})"


class ComplexField(Field):
    """Complex numbers at a fixed binary precision, backed by an mpmath context."""

    exact = False

    def __init__(self, precision_bits: int, zero_tolerance: float):
        if precision_bits < 64:
            raise FieldError("precision_bits must be >= 64")
        if not zero_tolerance > 0:
            raise FieldError("zero_tolerance must be positive")
        self.ctx = mpmath.MPContext()
        self.ctx.prec = precision_bits
        self.precision_bits = precision_bits
        self.tolerance = self.ctx.mpf(zero_tolerance)
        self.zero = self.ctx.mpc(0)
        self.one = self.ctx.mpc(1)

    def embed(self, value: Any) -> Any:
        ctx = self.ctx
        if isinstance(value, str):
            return self.parse(value)
        if isinstance(value, (Fraction, MPQ)):
            return ctx.mpc(ctx.mpf(int(value.numerator)) / int(value.denominator))
        return ctx.mpc(value)

    def is_zero(self, a: Any) -> bool:
        return abs(a) <= self.tolerance

    def eq(self, a: Any, b: Any) -> bool:
        return abs(a - b) <= self.tolerance * max(1, abs(a), abs(b))

    def sqrt(self, a: Any) -> Any:
        return self.ctx.sqrt(self.embed(a))

    def magnitude(self, a: Any) -> float:
        return float(abs(a))

    def render(self, a: Any) -> str:
        a = self.embed(a)
        digits = int(self.precision_bits * 0.30103) + 2
        return f"{self.ctx.nstr(a.real, digits)}{'+' if a.imag >= 0 else '-'}{self.ctx.nstr(abs(a.imag), digits)}j"

    def parse(self, s: str) -> Any:
        s = s.strip().replace(" ", "")
        if s.endswith("j"):
            body = s[:-1]
            # split at the last sign that is not an exponent sign
            for i in range(len(body) - 1, 0, -1):
                if body[i] in "+-" and body[i - 1] not in "eE":
                    return self.ctx.mpc(self.ctx.mpf(body[:i]), self.ctx.mpf(body[i:]))
            return self.ctx.mpc(0, self.ctx.mpf(body))
        try:
            return self.ctx.mpc(self.ctx.mpf(s))
        except (ValueError, TypeError):
            q = Fraction(s)
            return self.embed(q)

    def __repr__(self) -> str:
        return f"CC[{self.precision_bits} bits]"


def make_field(spec: FieldSpec) -> Field:
    """Build a field handle from its declarative description."""
    if spec.backend == "bigfloat":
        if spec.parameters or spec.generator:
            raise FieldError("bigfloat backend takes numeric curves only")
        return ComplexField(spec.precision_bits, spec.zero_tolerance)
    if spec.backend != "exact":
        raise FieldError(f"unknown backend {spec.backend!r}")
    base: Field = ParameterField(spec.parameters) if spec.parameters else RationalField()
    if spec.generator is None:
        return base
    name, coeffs = spec.generator
    return AlgebraicField(base, name, [base.parse(c) for c in coeffs])


# --- polynomial helpers over a base field (low-to-high coefficient lists) ---

def _pstrip(p: list) -> list:
    while p and not p[-1]:
        p.pop()
    return p


def _psub(a: list, b: list, B: Field) -> list:
    n = max(len(a), len(b))
    out = [(a[i] if i < len(a) else B.zero) - (b[i] if i < len(b) else B.zero) for i in range(n)]
    return _pstrip(out)


def _pmul(a: list, b: list, B: Field) -> list:
    if not a or not b:
        return []
    out = [B.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return _pstrip(out)


def _pdivmod(a: list, b: list, B: Field) -> tuple[list, list]:
    a = list(a)
    q = [B.zero] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(_pstrip(a)) >= len(b):
        shift = len(a) - len(b)
        f = a[-1] / lead
        q[shift] = f
        for i, c in enumerate(b):
            a[i + shift] = a[i + shift] - f * c
        a[-1] = B.zero
        _pstrip(a)
    return _pstrip(q), a


def _pmonic(p: list, B: Field) -> list:
    lead = p[-1]
    return [c / lead for c in p]


def _prender(p: Sequence, name: str, B: Field) -> str:
    terms = []
    for j, c in enumerate(p):
        if c:
            cs = B.render(c)
            terms.append(cs if j == 0 else f"({cs})*{name}" + (f"**{j}" if j > 1 else ""))
    return " + ".join(terms) or "0"
