"""Rational functions and differentials on the Riemann sphere.

Polynomials are coefficient lists low-to-high in the global coordinate z.
Local parameters are ``z - p`` at a finite point and ``w = 1/z`` at infinity;
differentials carry the Jacobian ``dz = -dw/w^2`` there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .scalars import Field, FieldError
from .series import INF, LaurentSeries, PrecisionError


@dataclass(frozen=True)
class SpherePoint:
    """A finite point ``value`` or, when ``value`` is None, the point at infinity."""

    value: Any = None

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def render(self, F: Field) -> str:
        return "inf" if self.value is None else F.render(self.value)


INFINITY = SpherePoint(None)


def finite(F: Field, v: Any) -> SpherePoint:
    return SpherePoint(F.embed(v))


# --- polynomial helpers ---

def pstrip(F: Field, p: list) -> list:
    p = list(p)
    while p and F.is_zero(p[-1]):
        p.pop()
    return p


def padd(F: Field, a: Sequence, b: Sequence) -> list:
    n = max(len(a), len(b))
    return pstrip(F, [(a[i] if i < len(a) else F.zero) + (b[i] if i < len(b) else F.zero) for i in range(n)])


def psub(F: Field, a: Sequence, b: Sequence) -> list:
    n = max(len(a), len(b))
    return pstrip(F, [(a[i] if i < len(a) else F.zero) - (b[i] if i < len(b) else F.zero) for i in range(n)])


def pmul(F: Field, a: Sequence, b: Sequence) -> list:
    if not a or not b:
        return []
    out = [F.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if F.is_zero(x):
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return pstrip(F, out)


def pscale(F: Field, a: Sequence, c: Any) -> list:
    return pstrip(F, [c * x for x in a])


def pdivmod(F: Field, a: Sequence, b: Sequence) -> tuple[list, list]:
    b = pstrip(F, b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = pstrip(F, a)
    if len(a) < len(b):
        return [], a
    q = [F.zero] * (len(a) - len(b) + 1)
    inv = F.inv(b[-1])
    for shift in range(len(a) - len(b), -1, -1):
        f = a[shift + len(b) - 1] * inv
        q[shift] = f
        if not F.is_zero(f):
            for i, c in enumerate(b):
                a[i + shift] -= f * c
        a[shift + len(b) - 1] = F.zero
    return pstrip(F, q), pstrip(F, a[: len(b) - 1])


def pgcd(F: Field, a: Sequence, b: Sequence) -> list:
    a, b = pstrip(F, a), pstrip(F, b)
    while b:
        a, b = b, pdivmod(F, a, b)[1]
    if not a:
        return []
    inv = F.inv(a[-1])
    return [c * inv for c in a]


def peval(F: Field, p: Sequence, z: Any) -> Any:
    acc = F.zero
    for c in reversed(p):
        acc = acc * z + c
    return acc


def pderiv(F: Field, p: Sequence) -> list:
    return pstrip(F, [c * k for k, c in enumerate(p)][1:])


def ptaylor(F: Field, p: Sequence, c: Any) -> list:
    """Coefficients of p(c + w) in w."""
    out: list = []
    for a in reversed(p):
        # out <- out * (w + c) + a
        new = [F.zero] * (len(out) + 1)
        for i, x in enumerate(out):
            new[i + 1] += x
            new[i] += x * c
        new[0] += a
        out = new
    return pstrip(F, out)


def root_multiplicity(F: Field, p: Sequence, c: Any) -> int:
    """Multiplicity of z = c as a root of p (exact synthetic division)."""
    p = pstrip(F, p)
    if not p:
        raise ValueError("multiplicity of a root of the zero polynomial")
    k = 0
    while len(p) > 1:
        q, r = pdivmod(F, p, [-c, F.one])
        if r and not F.is_zero(r[0]):
            break
        p = q
        k += 1
    return k


def polyroots(F: Field, p: Sequence) -> list:
    """All roots of p with multiplicity (bigfloat backend only)."""
    if F.exact:
        raise FieldError("root discovery is only offered on the bigfloat backend")
    p = pstrip(F, p)
    if len(p) <= 1:
        return []
    ctx = F.ctx
    roots = ctx.polyroots(list(reversed(p)), maxsteps=400, extraprec=2 * F.precision_bits)
    return [ctx.mpc(r) for r in roots]


class RationalFunction:
    """num/den with gcd removed (exact fields) and monic denominator."""

    __slots__ = ("F", "num", "den")

    def __init__(self, F: Field, num: Iterable[Any], den: Iterable[Any] = (1,), reduce: bool = True):
        num = pstrip(F, [F.embed(c) for c in num])
        den = pstrip(F, [F.embed(c) for c in den])
        if not den:
            raise ZeroDivisionError("zero denominator")
        if reduce:
            if not num:
                den = [F.one]
            elif F.exact and len(den) > 1:
                g = pgcd(F, num, den)
                if len(g) > 1:
                    num = pdivmod(F, num, g)[0]
                    den = pdivmod(F, den, g)[0]
            lead = F.inv(den[-1])
            num = [c * lead for c in num]
            den = [c * lead for c in den]
        self.F = F
        self.num = num
        self.den = den

    @classmethod
    def const(cls, F: Field, c: Any) -> "RationalFunction":
        return cls(F, [c])

    @classmethod
    def z(cls, F: Field) -> "RationalFunction":
        return cls(F, [0, 1])

    def _coerce(self, o: Any) -> "RationalFunction":
        return o if isinstance(o, RationalFunction) else RationalFunction(self.F, [o])

    def __add__(self, o: Any) -> "RationalFunction":
        o = self._coerce(o)
        F = self.F
        if self.den == o.den:
            return RationalFunction(F, padd(F, self.num, o.num), self.den)
        return RationalFunction(F, padd(F, pmul(F, self.num, o.den), pmul(F, o.num, self.den)),
                                pmul(F, self.den, o.den))

    __radd__ = __add__

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(self.F, [-c for c in self.num], self.den, reduce=False)

    def __sub__(self, o: Any) -> "RationalFunction":
        return self + (-self._coerce(o))

    def __rsub__(self, o: Any) -> "RationalFunction":
        return self._coerce(o) - self

    def __mul__(self, o: Any) -> "RationalFunction":
        o = self._coerce(o)
        F = self.F
        return RationalFunction(F, pmul(F, self.num, o.num), pmul(F, self.den, o.den))

    __rmul__ = __mul__

    def __truediv__(self, o: Any) -> "RationalFunction":
        o = self._coerce(o)
        if not o.num:
            raise ZeroDivisionError("division by the zero function")
        F = self.F
        return RationalFunction(F, pmul(F, self.num, o.den), pmul(F, self.den, o.num))

    def __rtruediv__(self, o: Any) -> "RationalFunction":
        return self._coerce(o) / self

    def __pow__(self, k: int) -> "RationalFunction":
        if k < 0:
            return RationalFunction(self.F, [1]) / (self ** (-k))
        out = RationalFunction(self.F, [1])
        for _ in range(k):
            out = out * self
        return out

    def is_zero(self) -> bool:
        return not self.num

    def derive(self) -> "RationalFunction":
        F = self.F
        n = psub(F, pmul(F, pderiv(F, self.num), self.den), pmul(F, self.num, pderiv(F, self.den)))
        return RationalFunction(F, n, pmul(F, self.den, self.den))

    def __call__(self, z: Any) -> Any:
        F = self.F
        d = peval(F, self.den, z)
        if F.is_zero(d):
            raise ZeroDivisionError("evaluation at a pole")
        return peval(F, self.num, z) / d

    def substitute(self, g: "RationalFunction") -> "RationalFunction":
        """self(g(z))."""
        def horner(p):
            acc = RationalFunction(self.F, [])
            for c in reversed(p):
                acc = acc * g + c
            return acc
        return horner(self.num) / horner(self.den)

    def eq(self, o: "RationalFunction") -> bool:
        d = self - o
        return not d.num or all(self.F.is_zero(c) for c in d.num)

    def __repr__(self) -> str:
        F = self.F
        return f"({[F.render(c) for c in self.num]})/({[F.render(c) for c in self.den]})"

    def render(self) -> dict:
        F = self.F
        return {"num": [F.render(c) for c in self.num], "den": [F.render(c) for c in self.den]}


RationalDifferential = RationalFunction  # f(z) dz; the dz is implicit


def order_at(f: RationalFunction, p: SpherePoint) -> int:
    """Vanishing order of f at p (negative for poles)."""
    F = f.F
    if not f.num:
        raise ValueError("order of the zero function")
    if p.is_infinite:
        return (len(f.den) - 1) - (len(f.num) - 1)
    return root_multiplicity(F, f.num, p.value) - root_multiplicity(F, f.den, p.value)


def _local_polys(f: RationalFunction, p: SpherePoint) -> tuple[list, int, list, int]:
    """num and den in the local parameter: (num_w, shift_n, den_w, shift_d) with value
    w^shift_n num_w(w) / (w^shift_d den_w(w))."""
    F = f.F
    if p.is_infinite:
        # q(1/w) = w^-deg * reversed(q)(w)
        return list(reversed(f.num)), -(len(f.num) - 1), list(reversed(f.den)), -(len(f.den) - 1)
    return ptaylor(F, f.num, p.value), 0, ptaylor(F, f.den, p.value), 0


def expand_at(f: RationalFunction, p: SpherePoint, order: int, var: str = "w") -> LaurentSeries:
    """Laurent expansion of f in the standard local parameter through degree ``order``."""
    F = f.F
    if not f.num:
        return LaurentSeries.zero(F, order, var)
    nw, sn, dw, sd = _local_polys(f, p)
    num = LaurentSeries(F, sn, nw, INF, var)
    den = LaurentSeries(F, sd, dw, INF, var)
    if len(den.coeffs) == 1:
        return (num * den.invert()).truncate(order)
    v = num.val - den.val
    if order < v:
        return LaurentSeries.zero(F, order, var)
    # den relative precision order - v suffices
    den_t = den.truncate(den.val + (order - v))
    return (num * den_t.invert()).truncate(order)


def differential_at(f: RationalFunction, p: SpherePoint, order: int, var: str = "w") -> LaurentSeries:
    """Coefficient series g(w) with f(z)dz = g(w)dw in the standard local parameter."""
    if not p.is_infinite:
        return expand_at(f, p, order, var)
    # dz = -dw/w^2
    return -(expand_at(f, p, order + 2, var).shift(-2))


def residue_at(omega: RationalFunction, p: SpherePoint) -> Any:
    return differential_at(omega, p, -1).residue()


def poles(f: RationalFunction, candidates: Iterable[SpherePoint]) -> list[SpherePoint]:
    return [p for p in candidates if order_at(f, p) < 0]


def pole_divisor_check(f: RationalFunction, allowed: Iterable[SpherePoint]) -> bool:
    """True iff every pole of f (including infinity) lies in ``allowed``.

    Strips the maximal powers of (z - b) from the denominator for allowed
    finite b and tests that a constant remains; infinity by degrees.
    """
    F = f.F
    allowed = list(allowed)
    den = f.den
    for b in allowed:
        if b.is_infinite:
            continue
        while len(den) > 1:
            q, r = pdivmod(F, den, [-b.value, F.one])
            if r and not F.is_zero(r[0]):
                break
            den = q
    if len(den) > 1:
        return False
    if len(f.num) > len(f.den) and INFINITY not in allowed:
        return False
    return True


def chart_compose(f: RationalFunction, center: SpherePoint, Z: LaurentSeries, order: int) -> LaurentSeries:
    """f(z(s)) through degree ``order`` where z = center + Z(s) (or z = 1/Z(s) at infinity)."""
    if Z.valuation != 1:
        raise ValueError("chart map must have valuation 1")
    loc = expand_at(f, center, order, Z.var)
    return loc.compose(Z).truncate(order)


def chart_pullback(omega: RationalFunction, center: SpherePoint, Z: LaurentSeries, order: int) -> LaurentSeries:
    """Coefficient of ds in the pullback of omega(z)dz along the chart, through degree ``order``."""
    loc = differential_at(omega, center, order, Z.var)
    return (loc.compose(Z) * Z.derive()).truncate(order)


def global_residue_sum(omega: RationalFunction, points: Iterable[SpherePoint]) -> Any:
    """Sum of residues over the given points; zero when they include every pole."""
    F = omega.F
    total = F.zero
    for p in points:
        total += residue_at(omega, p)
    return total


def denominator_fully_accounted(f: RationalFunction, points: Iterable[SpherePoint]) -> bool:
    """Whether all finite poles of f lie in ``points`` (exact divisor test)."""
    return pole_divisor_check(f, list(points) + [INFINITY])


def precision_guard(s: LaurentSeries, deg: int) -> None:
    if s.trunc < deg:
        raise PrecisionError(f"need degree {deg}, have {s.trunc}", deg)
