"""Truncated formal Laurent series over a coefficient field.

A :class:`LaurentSeries` stores ``coeffs`` for degrees ``val, val+1, ...``
and a truncation degree ``trunc``: every coefficient up to ``trunc`` is
known, degrees past the stored list are known zeros.  ``trunc`` may be
``math.inf`` for Laurent polynomials, which are exact.

Every operation returns the precision it can certify and no more.  Reading a
coefficient beyond ``trunc`` raises :class:`PrecisionError`.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Iterable, Sequence

from .scalars import Field

INF = math.inf
KARATSUBA_THRESHOLD = 48


class SeriesError(ValueError):
    """Ill-defined series operation."""


class PrecisionError(SeriesError):
    """A requested coefficient lies beyond the certified truncation."""

    def __init__(self, msg: str, needed: int | None = None):
        super().__init__(msg)
        self.needed = needed


def _conv(F: Field, a: Sequence, b: Sequence, n: int) -> list:
    """First n coefficients of the product of coefficient lists a and b."""
    la, lb = len(a), len(b)
    n = min(n, la + lb - 1)
    if n <= 0:
        return []
    if F.exact and la >= KARATSUBA_THRESHOLD and lb >= KARATSUBA_THRESHOLD and n >= la + lb - 1 - 4:
        return _karatsuba(F, list(a), list(b))[:n]
    zero = F.zero
    out = [zero] * n
    for i in range(min(la, n)):
        ai = a[i]
        if not ai:
            continue
        top = min(lb, n - i)
        for j in range(top):
            bj = b[j]
            if bj:
                out[i + j] += ai * bj
    return out


def _karatsuba(F: Field, a: list, b: list) -> list:
    la, lb = len(a), len(b)
    if la < KARATSUBA_THRESHOLD or lb < KARATSUBA_THRESHOLD:
        return _conv(F, a, b, la + lb - 1) if la and lb else []
    h = max(la, lb) // 2
    a0, a1 = a[:h], a[h:]
    b0, b1 = b[:h], b[h:]
    z0 = _karatsuba(F, a0, b0) if a0 and b0 else []
    z2 = _karatsuba(F, a1, b1) if a1 and b1 else []
    sa = _padd(F, a0, a1)
    sb = _padd(F, b0, b1)
    z1 = _karatsuba(F, sa, sb)
    mid = _psub(F, _psub(F, z1, z0), z2)
    out = [F.zero] * (la + lb - 1)
    for i, c in enumerate(z0):
        out[i] += c
    for i, c in enumerate(mid):
        if i + h < len(out):
            out[i + h] += c
    for i, c in enumerate(z2):
        out[i + 2 * h] += c
    return out


def _padd(F: Field, a: list, b: list) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else F.zero) + (b[i] if i < len(b) else F.zero) for i in range(n)]


def _psub(F: Field, a: list, b: list) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else F.zero) - (b[i] if i < len(b) else F.zero) for i in range(n)]


class LaurentSeries:
    """Immutable truncated Laurent series ``sum c[j] t^(val+j) + O(t^(trunc+1))``."""

    __slots__ = ("F", "val", "coeffs", "trunc", "var")

    def __init__(self, F: Field, val: int, coeffs: Iterable[Any], trunc: float = INF,
                 var: str = "t", normalize: bool = True):
        cs = [F.embed(c) for c in coeffs] if normalize else list(coeffs)
        if trunc != INF:
            trunc = int(trunc)
            keep = trunc - val + 1
            if keep < len(cs):
                cs = cs[:max(keep, 0)]
        if normalize:
            k = 0
            while k < len(cs) and F.is_zero(cs[k]):
                k += 1
            if k:
                cs = cs[k:]
                val += k
            while cs and F.is_zero(cs[-1]):
                cs.pop()
        if not cs:
            val = trunc + 1 if trunc != INF else 0
        self.F = F
        self.val = val
        self.coeffs = cs
        self.trunc = trunc
        self.var = var

    # --- constructors ---
    @classmethod
    def zero(cls, F: Field, trunc: float = INF, var: str = "t") -> "LaurentSeries":
        return cls(F, 0, [], trunc, var)

    @classmethod
    def const(cls, F: Field, c: Any, var: str = "t") -> "LaurentSeries":
        return cls(F, 0, [c], INF, var)

    @classmethod
    def monomial(cls, F: Field, deg: int, c: Any = 1, var: str = "t") -> "LaurentSeries":
        return cls(F, deg, [c], INF, var)

    @classmethod
    def from_dict(cls, F: Field, d: dict, trunc: float = INF, var: str = "t") -> "LaurentSeries":
        if not d:
            return cls.zero(F, trunc, var)
        lo, hi = min(d), max(d)
        return cls(F, lo, [d.get(j, F.zero) for j in range(lo, hi + 1)], trunc, var)

    def _new(self, val: int, coeffs: list, trunc: float) -> "LaurentSeries":
        return LaurentSeries(self.F, val, coeffs, trunc, self.var, normalize=True)

    # --- inspection ---
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def top(self) -> int:
        """Highest stored degree (val - 1 when nothing is stored)."""
        return self.val + len(self.coeffs) - 1

    @property
    def valuation(self) -> float:
        """Order of vanishing; ``trunc + 1`` for a series known to vanish to its window."""
        return self.val if self.coeffs else (self.trunc + 1)

    def __getitem__(self, d: int) -> Any:
        if d > self.trunc:
            raise PrecisionError(f"coefficient of {self.var}^{d} beyond truncation {self.trunc}", d)
        j = d - self.val
        if 0 <= j < len(self.coeffs):
            return self.coeffs[j]
        return self.F.zero

    def items(self):
        for j, c in enumerate(self.coeffs):
            if not self.F.is_zero(c):
                yield self.val + j, c

    def truncate(self, trunc: float) -> "LaurentSeries":
        if trunc >= self.trunc:
            return self
        return self._new(self.val, self.coeffs, trunc)

    def require(self, deg: int) -> None:
        if self.trunc < deg:
            raise PrecisionError(f"series known to {self.var}^{self.trunc}, need {deg}", deg)

    # --- arithmetic ---
    def _coerce(self, other: Any) -> "LaurentSeries":
        if isinstance(other, LaurentSeries):
            if other.var != self.var:
                raise SeriesError(f"variable mismatch: {self.var} vs {other.var}")
            return other
        return LaurentSeries(self.F, 0, [self.F.embed(other)], INF, self.var)

    def __add__(self, other: Any) -> "LaurentSeries":
        o = self._coerce(other)
        trunc = min(self.trunc, o.trunc)
        if not o.coeffs:
            return self.truncate(trunc)
        if not self.coeffs:
            return o.truncate(trunc)
        lo = min(self.val, o.val)
        hi = max(self.top, o.top)
        if trunc != INF:
            hi = min(hi, trunc)
        out = [self.F.zero] * (hi - lo + 1)
        for j, c in enumerate(self.coeffs):
            d = self.val + j - lo
            if d < len(out):
                out[d] = c
        for j, c in enumerate(o.coeffs):
            d = o.val + j - lo
            if d < len(out):
                out[d] = out[d] + c
        return self._new(lo, out, trunc)

    __radd__ = __add__

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(self.F, self.val, [-c for c in self.coeffs], self.trunc, self.var, normalize=False)

    def __sub__(self, other: Any) -> "LaurentSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "LaurentSeries":
        return self._coerce(other) - self

    def scale(self, c: Any) -> "LaurentSeries":
        c = self.F.embed(c)
        if self.F.is_zero(c):
            return LaurentSeries.zero(self.F, self.trunc, self.var) if self.trunc != INF else \
                LaurentSeries.zero(self.F, INF, self.var)
        return LaurentSeries(self.F, self.val, [c * x for x in self.coeffs], self.trunc, self.var,
                             normalize=not self.F.exact)

    def __mul__(self, other: Any) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            return self.scale(other)
        o = self._coerce(other)
        # a zero factor still contributes its uncertainty
        va, vb = self.valuation, o.valuation
        trunc = min(self.trunc + vb, o.trunc + va)
        if not self.coeffs or not o.coeffs:
            return LaurentSeries.zero(self.F, trunc, self.var)
        val = self.val + o.val
        n = len(self.coeffs) + len(o.coeffs) - 1
        if trunc != INF:
            n = min(n, trunc - val + 1)
        return self._new(val, _conv(self.F, self.coeffs, o.coeffs, n), trunc)

    __rmul__ = __mul__

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by t^k."""
        return LaurentSeries(self.F, self.val + k, self.coeffs, self.trunc + k, self.var, normalize=False) \
            if self.coeffs else LaurentSeries.zero(self.F, self.trunc + k, self.var)

    def invert(self) -> "LaurentSeries":
        if not self.coeffs:
            raise SeriesError("cannot invert a series that vanishes to its known order")
        F = self.F
        v = self.val
        a = self.coeffs
        if self.trunc == INF and len(a) == 1:
            return LaurentSeries(F, -v, [F.inv(a[0])], INF, self.var)
        if self.trunc == INF:
            raise PrecisionError("inverse of a polynomial is an infinite series; truncate first")
        L = self.trunc - v + 1
        inv0 = F.inv(a[0])
        b = [inv0]
        for n in range(1, L):
            s = F.zero
            for k in range(1, min(n, len(a) - 1) + 1):
                ak = a[k]
                if ak:
                    s += ak * b[n - k]
            b.append(-s * inv0)
        return self._new(-v, b, -v + L - 1)

    def __truediv__(self, other: Any) -> "LaurentSeries":
        if isinstance(other, LaurentSeries):
            return self * other.invert()
        return self.scale(self.F.inv(self.F.embed(other)))

    def __pow__(self, k: int) -> "LaurentSeries":
        if k < 0:
            return self.invert() ** (-k)
        result = LaurentSeries.const(self.F, self.F.one, self.var)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # --- calculus ---
    def derive(self) -> "LaurentSeries":
        F = self.F
        out = [c * (self.val + j) for j, c in enumerate(self.coeffs)]
        return self._new(self.val - 1, out, self.trunc - 1)

    def residue(self) -> Any:
        return self[-1]

    def integrate(self) -> "LaurentSeries":
        """Termwise primitive with zero constant term; a t^-1 term is an error."""
        F = self.F
        out = []
        for j, c in enumerate(self.coeffs):
            d = self.val + j
            if d == -1:
                if not F.is_zero(c):
                    raise SeriesError("primitive of t^-1 is not a Laurent series")
                out.append(F.zero)
            else:
                out.append(c / (d + 1))
        if self.val <= -1 <= self.trunc or not self.coeffs:
            pass
        return self._new(self.val + 1, out, self.trunc + 1) if self.coeffs else \
            LaurentSeries.zero(F, self.trunc + 1, self.var)

    def subs_neg(self) -> "LaurentSeries":
        """f(-t)."""
        out = [c if (self.val + j) % 2 == 0 else -c for j, c in enumerate(self.coeffs)]
        return LaurentSeries(self.F, self.val, out, self.trunc, self.var, normalize=False)

    def even_part(self) -> "LaurentSeries":
        out = [c if (self.val + j) % 2 == 0 else self.F.zero for j, c in enumerate(self.coeffs)]
        return self._new(self.val, out, self.trunc)

    def odd_part(self) -> "LaurentSeries":
        out = [c if (self.val + j) % 2 else self.F.zero for j, c in enumerate(self.coeffs)]
        return self._new(self.val, out, self.trunc)

    def map(self, fn: Callable[[Any], Any]) -> "LaurentSeries":
        return self._new(self.val, [fn(c) for c in self.coeffs], self.trunc)

    def rename(self, var: str) -> "LaurentSeries":
        return LaurentSeries(self.F, self.val, self.coeffs, self.trunc, var, normalize=False)

    # --- composition ---
    def compose(self, inner: "LaurentSeries") -> "LaurentSeries":
        """self(inner(s)); the result lives in inner's variable."""
        F = self.F
        if not self.coeffs:
            v = inner.valuation
            if self.trunc == INF:
                return LaurentSeries.zero(F, INF, inner.var)
            if v <= 0:
                raise SeriesError("composition with an inner series of valuation <= 0 is ill-defined")
            return LaurentSeries.zero(F, v * (self.trunc + 1) - 1, inner.var)
        v = inner.valuation
        poly_outer = self.trunc == INF and self.val >= 0
        if not poly_outer:
            if v < 1:
                raise SeriesError("inner series must have valuation >= 1")
            if self.val < 0 and v != 1:
                raise SeriesError("negative powers need an inner series of valuation exactly 1")
        elif v == INF:
            raise SeriesError("inner series is unknown")
        # Horner on the polynomial part P with self = t^val * P(t)
        acc = LaurentSeries.const(F, self.coeffs[-1], inner.var)
        for c in reversed(self.coeffs[:-1]):
            acc = acc * inner + LaurentSeries.const(F, c, inner.var)
        if self.val > 0:
            acc = acc * (inner ** self.val)
        elif self.val < 0:
            acc = acc * (inner.invert() ** (-self.val))
        if self.trunc != INF:
            acc = acc.truncate(v * (self.trunc + 1) - 1)
        return acc

    def revert(self) -> "LaurentSeries":
        """Compositional inverse of a valuation-1 series (Lagrange inversion)."""
        if self.valuation != 1:
            raise SeriesError("revert needs valuation exactly 1")
        F = self.F
        if self.trunc == INF and len(self.coeffs) == 1:
            return LaurentSeries(F, 1, [F.inv(self.coeffs[0])], INF, self.var)
        if self.trunc == INF:
            raise PrecisionError("reversion of a polynomial is infinite; truncate first")
        T = int(self.trunc)
        phi = self.shift(-1).invert()  # t / a(t), known to degree T-1
        out = [F.zero] * T
        power = LaurentSeries.const(F, F.one, self.var)
        for n in range(1, T + 1):
            power = (power * phi).truncate(T - 1)
            out[n - 1] = power[n - 1] / n
        return self._new(1, out, T)

    def nth_root(self, n: int, branch: Any) -> "LaurentSeries":
        """The n-th root whose leading coefficient is ``branch``."""
        F = self.F
        if not self.coeffs:
            raise SeriesError("root of a series that vanishes to its known order")
        if self.val % n:
            raise SeriesError(f"valuation {self.val} not divisible by {n}")
        branch = F.embed(branch)
        a0 = self.coeffs[0]
        if not F.eq(branch ** n, a0):
            raise SeriesError("branch does not match the leading coefficient")
        if self.trunc == INF and len(self.coeffs) == 1:
            return LaurentSeries(F, self.val // n, [branch], INF, self.var)
        if self.trunc == INF:
            raise PrecisionError("root of a polynomial is infinite; truncate first")
        L = int(self.trunc) - self.val + 1
        inv0 = F.inv(a0)
        h = [c * inv0 for c in self.coeffs[:L]] + [F.zero] * max(0, L - len(self.coeffs))
        alpha = F.frac(1, n)
        g = [F.one]
        for j in range(1, L):
            s = F.zero
            for i in range(1, j + 1):
                hi = h[i]
                if hi:
                    s += ((alpha + 1) * i - j) * hi * g[j - i]
            g.append(s / j)
        return self._new(self.val // n, [branch * c for c in g], self.val // n + L - 1)

    # --- misc ---
    def eq(self, other: "LaurentSeries", upto: float | None = None) -> bool:
        """Coefficientwise equality on the common known window."""
        hi = min(self.trunc, other.trunc)
        if upto is not None:
            hi = min(hi, upto)
        lo = min(self.val if self.coeffs else hi, other.val if other.coeffs else hi)
        if hi == INF:
            hi = max(self.top, other.top)
        return all(self.F.eq(self[d], other[d]) for d in range(int(lo), int(hi) + 1))

    def __repr__(self) -> str:
        F = self.F
        terms = [f"({F.render(c)})*{self.var}^{d}" for d, c in self.items()]
        tail = "" if self.trunc == INF else f" + O({self.var}^{self.trunc + 1})"
        return (" + ".join(terms) or "0") + tail


def pullback(f: LaurentSeries, W: LaurentSeries) -> LaurentSeries:
    """Pull back the differential f(t)dt along t = W(s): f(W(s)) W'(s) ds."""
    return f.compose(W) * W.derive()


class BiSeries:
    """Box-truncated double power series sum c[i][j] s1^i s2^j, i <= D1, j <= D2."""

    __slots__ = ("F", "c", "D1", "D2")

    def __init__(self, F: Field, c: list, D1: int, D2: int):
        self.F = F
        self.D1 = D1
        self.D2 = D2
        self.c = c

    @classmethod
    def zero(cls, F: Field, D1: int, D2: int) -> "BiSeries":
        return cls(F, [[F.zero] * (D2 + 1) for _ in range(D1 + 1)], D1, D2)

    @classmethod
    def from_first(cls, f: LaurentSeries, D1: int, D2: int) -> "BiSeries":
        out = cls.zero(f.F, D1, D2)
        f.require(D1)
        for i in range(D1 + 1):
            out.c[i][0] = f[i]
        return out

    @classmethod
    def from_second(cls, f: LaurentSeries, D1: int, D2: int) -> "BiSeries":
        out = cls.zero(f.F, D1, D2)
        f.require(D2)
        for j in range(D2 + 1):
            out.c[0][j] = f[j]
        return out

    def __add__(self, o: "BiSeries") -> "BiSeries":
        return BiSeries(self.F, [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.c, o.c)],
                        self.D1, self.D2)

    def __sub__(self, o: "BiSeries") -> "BiSeries":
        return BiSeries(self.F, [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.c, o.c)],
                        self.D1, self.D2)

    def scale(self, k: Any) -> "BiSeries":
        k = self.F.embed(k)
        return BiSeries(self.F, [[k * a for a in r] for r in self.c], self.D1, self.D2)

    def add_const(self, k: Any) -> "BiSeries":
        c = [list(r) for r in self.c]
        c[0][0] = c[0][0] + k
        return BiSeries(self.F, c, self.D1, self.D2)

    def __mul__(self, o: "BiSeries") -> "BiSeries":
        F = self.F
        D1, D2 = self.D1, self.D2
        out = [[F.zero] * (D2 + 1) for _ in range(D1 + 1)]
        rows_o = [(k, [(l, b) for l, b in enumerate(r) if b]) for k, r in enumerate(o.c)]
        rows_o = [(k, r) for k, r in rows_o if r]
        for i, ra in enumerate(self.c):
            for j, a in enumerate(ra):
                if not a:
                    continue
                for k, rb in rows_o:
                    if i + k > D1:
                        break
                    row = out[i + k]
                    for l, b in rb:
                        if j + l > D2:
                            break
                        row[j + l] += a * b
        return BiSeries(F, out, D1, D2)

    def min_total_degree(self) -> int:
        best = self.D1 + self.D2 + 1
        for i, r in enumerate(self.c):
            for j, a in enumerate(r):
                if a and i + j < best:
                    best = i + j
        return best

    def geometric_sum(self, weights: Callable[[int], Any], jmax: int | None = None) -> "BiSeries":
        """sum_j weights(j) self^j; self must have no constant term."""
        F = self.F
        if self.c[0][0]:
            raise SeriesError("geometric sum needs a series without constant term")
        if jmax is None:
            jmax = self.D1 + self.D2
        out = BiSeries.zero(F, self.D1, self.D2).add_const(F.embed(weights(0)))
        power = None
        for j in range(1, jmax + 1):
            power = self if power is None else power * self
            w = F.embed(weights(j))
            if power.min_total_degree() > self.D1 + self.D2:
                break
            if not F.is_zero(w):
                out = out + power.scale(w)
        return out

    def d1d2(self) -> "BiSeries":
        """Mixed derivative; loses one order in each variable."""
        F = self.F
        c = [[self.c[i + 1][j + 1] * ((i + 1) * (j + 1)) for j in range(self.D2)] for i in range(self.D1)]
        return BiSeries(F, c, self.D1 - 1, self.D2 - 1)

    def coefficient(self, i: int, j: int) -> Any:
        if i > self.D1 or j > self.D2:
            raise PrecisionError(f"bivariate coefficient ({i},{j}) beyond box ({self.D1},{self.D2})")
        return self.c[i][j]

    def diagonal(self, var: str = "t") -> LaurentSeries:
        """f(s, s), known to degree min(D1, D2)."""
        D = min(self.D1, self.D2)
        F = self.F
        out = [F.zero] * (D + 1)
        for i in range(D + 1):
            for j in range(D + 1 - i):
                out[i + j] += self.c[i][j]
        return LaurentSeries(F, 0, out, D, var)

    def row(self, j: int, var: str = "t") -> LaurentSeries:
        """Coefficient of s2^j as a series in s1."""
        return LaurentSeries(self.F, 0, [r[j] for r in self.c], self.D1, var)

    def col(self, i: int, var: str = "t") -> LaurentSeries:
        """Coefficient of s1^i as a series in s2."""
        return LaurentSeries(self.F, 0, list(self.c[i]), self.D2, var)

    def transpose(self) -> "BiSeries":
        c = [[self.c[i][j] for i in range(self.D1 + 1)] for j in range(self.D2 + 1)]
        return BiSeries(self.F, c, self.D2, self.D1)
