"""Genus-zero spectral curves: validation, local charts, Bergman kernel and dzeta.

A curve is given by rational functions x(z), y(z) on the sphere together with
declared critical points (simple zeros of dx) and boundary points (poles of
x).  Charts are computed lazily and extended on demand.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .ratcalc import (
    INFINITY,
    RationalFunction,
    SpherePoint,
    differential_at,
    expand_at,
    order_at,
    pderiv,
    pdivmod,
    pmul,
    pole_divisor_check,
    polyroots,
    psub,
    pstrip,
)
from .scalars import Field, FieldError, FieldSpec, make_field
from .series import INF, BiSeries, LaurentSeries, PrecisionError


class CurveError(ValueError):
    """The curve data violates a structural requirement."""


@dataclass(frozen=True)
class BoundarySpec:
    point: str
    r: int
    scale: str = "1"
    branch: str = "1"

    def to_json(self) -> dict:
        return {"point": self.point, "r": self.r, "scale": self.scale, "branch": self.branch}

    @classmethod
    def from_json(cls, doc: dict) -> "BoundarySpec":
        return cls(str(doc["point"]), int(doc["r"]), str(doc.get("scale", "1")), str(doc.get("branch", "1")))


@dataclass(frozen=True)
class CurveSpec:
    """Declarative spectral curve; polynomials low-to-high, scalars as strings."""

    name: str
    field: FieldSpec
    x: tuple[tuple[str, ...], tuple[str, ...]]
    y: tuple[tuple[str, ...], tuple[str, ...]]
    critical_points: tuple[str, ...] = ()
    boundaries: tuple[BoundarySpec, ...] = ()
    eta_branches: tuple[int, ...] = ()
    x_zeros: tuple[str, ...] | None = None
    y_prefactor: tuple[str, str] | None = None  # (symbol, value of symbol^2)

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "name": self.name,
            "field": self.field.to_json(),
            "x": {"num": list(self.x[0]), "den": list(self.x[1])},
            "y": {"num": list(self.y[0]), "den": list(self.y[1])},
            "critical_points": list(self.critical_points),
            "boundaries": [b.to_json() for b in self.boundaries],
            "eta_branches": list(self.eta_branches),
        }
        if self.x_zeros is not None:
            doc["x_zeros"] = list(self.x_zeros)
        if self.y_prefactor is not None:
            doc["y"]["prefactor"] = {"symbol": self.y_prefactor[0], "square": self.y_prefactor[1]}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "CurveSpec":
        try:
            y = doc["y"]
            pref = y.get("prefactor")
            return cls(
                name=str(doc.get("name", "curve")),
                field=FieldSpec.from_json(doc.get("field", {})),
                x=(tuple(map(str, doc["x"]["num"])), tuple(map(str, doc["x"].get("den", ["1"])))),
                y=(tuple(map(str, y["num"])), tuple(map(str, y.get("den", ["1"])))),
                critical_points=tuple(map(str, doc.get("critical_points", ()))),
                boundaries=tuple(BoundarySpec.from_json(b) for b in doc.get("boundaries", ())),
                eta_branches=tuple(int(s) for s in doc.get("eta_branches", ())),
                x_zeros=tuple(map(str, doc["x_zeros"])) if "x_zeros" in doc else None,
                y_prefactor=(str(pref["symbol"]), str(pref["square"])) if pref else None,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise CurveError(f"malformed curve spec: {exc!r}") from exc

    def with_branches(self, branches: tuple[int, ...]) -> "CurveSpec":
        return CurveSpec(self.name, self.field, self.x, self.y, self.critical_points, self.boundaries,
                         tuple(branches), self.x_zeros, self.y_prefactor)

    def with_y(self, num: tuple[str, ...], den: tuple[str, ...]) -> "CurveSpec":
        return CurveSpec(self.name, self.field, self.x, (tuple(num), tuple(den)), self.critical_points,
                         self.boundaries, self.eta_branches, self.x_zeros, self.y_prefactor)


def parse_point(F: Field, s: str) -> SpherePoint:
    s = str(s).strip()
    if s.lower() in ("inf", "infinity", "oo"):
        return INFINITY
    return SpherePoint(F.parse(s))


class Chart:
    """A local coordinate s near ``center``: z = center + Z(s), or z = 1/Z(s) at infinity."""

    def __init__(self, curve: "CurveData", kind: str, index: Any, center: SpherePoint,
                 builder: Callable[[int], LaurentSeries], var: str):
        self.curve = curve
        self.kind = kind
        self.index = index
        self.center = center
        self.var = var
        self._builder = builder
        self._Z: LaurentSeries | None = None
        self._lock = threading.Lock()

    def Z(self, order: int) -> LaurentSeries:
        cur = self._Z
        if cur is not None and cur.trunc >= order:
            return cur
        with self._lock:
            cur = self._Z
            if cur is None or cur.trunc < order:
                target = max(order, 2 * cur.trunc if cur is not None and cur.trunc != INF else order)
                cur = self._builder(target)
                self._Z = cur
        return cur

    def function(self, f: RationalFunction, order: int) -> LaurentSeries:
        """f(z(s)) through degree ``order``."""
        if f.is_zero():
            return LaurentSeries.zero(f.F, order, self.var)
        loc = expand_at(f, self.center, order, self.var)
        if loc.is_zero():
            return LaurentSeries.zero(f.F, order, self.var)
        Z = self.Z(order - min(loc.val, 0) + 1)
        return loc.compose(Z).truncate(order)

    def differential(self, omega: RationalFunction, order: int) -> LaurentSeries:
        """Coefficient of ds in the pullback of omega(z)dz, through degree ``order``."""
        if omega.is_zero():
            return LaurentSeries.zero(omega.F, order, self.var)
        loc = differential_at(omega, self.center, order, self.var)
        if loc.is_zero():
            return LaurentSeries.zero(omega.F, order, self.var)
        Z = self.Z(order - min(loc.val, 0) + 2)
        return (loc.compose(Z) * Z.derive()).truncate(order)

    def __repr__(self) -> str:
        return f"Chart({self.kind}, {self.index})"


@dataclass
class Boundary:
    point: SpherePoint
    r: int
    scale: Any
    branch: Any


class CurveData:
    """A validated spectral curve with lazily computed charts and dzeta table."""

    def __init__(self, spec: CurveSpec, F: Field, x: RationalFunction, y: RationalFunction,
                 critical: list[SpherePoint], boundaries: list[Boundary], sigma: list[int],
                 x_zeros: list[SpherePoint] | None):
        self.spec = spec
        self.F = F
        self.x = x
        self.y = y
        self.dx = x.derive()
        self.dy = y.derive()
        self.critical = critical
        self.boundaries = boundaries
        self.sigma = sigma
        self.x_zeros = x_zeros
        self.N = len(critical)
        self.xcrit = [x(p.value) for p in critical]
        self._lock = threading.Lock()
        self._charts: dict = {}
        self._dzeta: dict = {}
        self._c1: dict = {}

    # --- critical-point data ---
    def eta_slope(self, beta: int) -> Any:
        """d(eta)/dz at the critical point: sigma * sqrt(x'')."""
        c = self._c1.get(beta)
        if c is None:
            x2 = self.dx.derive()(self.critical[beta].value)
            c = self.F.sqrt(x2) * self.sigma[beta]
            self._c1[beta] = c
        return c

    def critical_chart(self, beta: int) -> Chart:
        key = ("crit", beta)
        ch = self._charts.get(key)
        if ch is not None:
            return ch
        p = self.critical[beta]
        xb = self.xcrit[beta]
        F = self.F

        def build(order: int) -> LaurentSeries:
            X = expand_at(self.x, p, order + 1, "eta") - xb
            eta = X.scale(2).nth_root(2, self.eta_slope(beta))
            return eta.revert()

        with self._lock:
            ch = self._charts.setdefault(key, Chart(self, "critical", beta, p, build, "eta"))
        return ch

    def boundary_chart(self, i: int) -> Chart:
        key = ("bdry", i)
        ch = self._charts.get(key)
        if ch is not None:
            return ch
        b = self.boundaries[i]

        def build(order: int) -> LaurentSeries:
            lam = self.lambda_expansion(i, order)
            return lam.invert().revert().rename("mu")

        with self._lock:
            ch = self._charts.setdefault(key, Chart(self, "boundary", i, b.point, build, "mu"))
        return ch

    def lambda_expansion(self, i: int, order: int) -> LaurentSeries:
        """lambda_i in the standard local parameter w at b_i, known to relative order ``order``."""
        b = self.boundaries[i]
        loc = expand_at(self.x, b.point, -b.r + order, "w").scale(self.F.inv(b.scale))
        return loc.nth_root(b.r, b.branch)

    def point_chart(self, p: SpherePoint, name: str = "s") -> Chart:
        key = ("point", p, name)
        ch = self._charts.get(key)
        if ch is not None:
            return ch
        F = self.F
        Z = LaurentSeries(F, 1, [F.one], INF, name)
        with self._lock:
            ch = self._charts.setdefault(key, Chart(self, "point", p, p, lambda order: Z, name))
        return ch

    # --- dzeta table ---
    def dzeta(self, beta: int, k: int) -> RationalFunction:
        """Coefficient of dz in dzeta_k^beta."""
        key = (beta, k)
        val = self._dzeta.get(key)
        if val is not None:
            return val
        F = self.F
        if k == 0:
            zb = self.critical[beta].value
            c1 = self.eta_slope(beta)
            val = RationalFunction(F, [-F.inv(c1)], [zb * zb, -2 * zb, 1])
        else:
            val = self._next_dzeta(self.dzeta(beta, k - 1), k)
        with self._lock:
            self._dzeta.setdefault(key, val)
        return self._dzeta[key]

    def _next_dzeta(self, prev: RationalFunction, k: int) -> RationalFunction:
        """-(prev/x')' with the denominator fixed in advance to prod (z - z^gamma)^(2k+2).

        All zeros of dx are critical points, so this is the exact pole divisor and a
        polynomial division replaces the gcd; a nonzero remainder falls back to it.
        """
        F = self.F
        hn = pmul(F, prev.num, self.dx.den)
        hd = pmul(F, prev.den, self.dx.num)
        num = psub(F, pmul(F, hn, pderiv(F, hd)), pmul(F, pderiv(F, hn), hd))
        den = pmul(F, hd, hd)
        P = [F.one]
        for p in self.critical:
            P = pmul(F, P, [-p.value, F.one])
        target = [F.one]
        for _ in range(2 * k + 2):
            target = pmul(F, target, P)
        q, r = pdivmod(F, pmul(F, num, target), den)
        if not F.exact or not pstrip(F, r):
            return RationalFunction(F, q, target, reduce=False)
        return RationalFunction(F, num, den)

    def labels(self, K: int) -> list[tuple[int, int]]:
        return [(b, k) for k in range(K + 1) for b in range(self.N)]

    # --- Bergman kernel ---
    def bergman(self, ch1: Chart, ch2: Chart, D1: int, D2: int) -> BiSeries:
        """B(z1, z2) = b(s1, s2) ds1 ds2 for charts with distinct centers."""
        F = self.F
        c1, c2 = ch1.center, ch2.center
        if c1 == c2:
            raise CurveError("bergman() needs distinct centers; use bergman_regular()")
        if c1.is_infinite:
            return self.bergman(ch2, ch1, D2, D1).transpose()
        Z1 = ch1.Z(D1 + 1).truncate(D1 + 1)
        Z2 = ch2.Z(D2 + 1).truncate(D2 + 1)
        dZ1 = BiSeries.from_first(Z1.derive(), D1, D2)
        dZ2 = BiSeries.from_second(Z2.derive(), D1, D2)
        if c2.is_infinite:
            eps = (BiSeries.from_first(Z1, D1, D2).add_const(c1.value)) * BiSeries.from_second(Z2, D1, D2)
            inv2 = eps.geometric_sum(lambda j: j + 1, D2)
            return (dZ1 * dZ2 * inv2).scale(-1)
        c = c1.value - c2.value
        delta = BiSeries.from_first(Z1, D1, D2) - BiSeries.from_second(Z2, D1, D2)
        ic = F.inv(c)
        inv2 = delta.geometric_sum(lambda j: (j + 1) * (-1) ** j * ic ** (j + 2))
        return dZ1 * dZ2 * inv2

    def bergman_regular(self, ch: Chart, D1: int, D2: int) -> BiSeries:
        """B minus ds1 ds2/(s1-s2)^2 on one chart: d1 d2 log((Z(s1)-Z(s2))/(s1-s2))."""
        F = self.F
        E1, E2 = D1 + 1, D2 + 1
        Z = ch.Z(E1 + E2 + 1)
        # f(s1,s2) = sum_n w_n h_{n-1}(s1,s2), h the complete homogeneous polynomial
        f = BiSeries.zero(F, E1, E2)
        for n in range(1, E1 + E2 + 2):
            wn = Z[n]
            if F.is_zero(wn):
                continue
            for a in range(0, min(n - 1, E1) + 1):
                b = n - 1 - a
                if b <= E2:
                    f.c[a][b] += wn
        w1 = f.c[0][0]
        g = f.scale(F.inv(w1)).add_const(-F.one)
        log = g.geometric_sum(lambda j: 0 if j == 0 else F.frac((-1) ** (j + 1), j))
        return log.d1d2()

    def involution_kernel(self, beta: int, order: int) -> LaurentSeries:
        """B(z(eta), z(-eta)) = r_B(eta) deta^2."""
        ch = self.critical_chart(beta)
        Z = ch.Z(order + 4)
        dZ = Z.derive()
        diff = Z - Z.subs_neg()
        return (-(dZ * dZ.subs_neg()) * (diff * diff).invert()).truncate(order)

    # --- reporting ---
    def prefactor_value(self) -> Any:
        """Numeric value of the y prefactor (bigfloat) or None when absent."""
        if self.spec.y_prefactor is None:
            return None
        return self.F.sqrt(self.F.parse(self.spec.y_prefactor[1]))


def _rational(F: Field, pair) -> RationalFunction:
    num, den = pair
    return RationalFunction(F, [F.parse(c) for c in num], [F.parse(c) for c in den])


def validate(spec: CurveSpec) -> CurveData:
    """Check the structural hypotheses and build a :class:`CurveData`."""
    F = make_field(spec.field)
    try:
        x = _rational(F, spec.x)
        y = _rational(F, spec.y)
    except (FieldError, ValueError, TypeError) as exc:
        raise CurveError(f"cannot parse x or y: {exc}") from exc
    if len(x.num) <= 1 and len(x.den) <= 1:
        raise CurveError("x is constant")
    dx = x.derive()
    dy = y.derive()

    bds = []
    for b in spec.boundaries:
        p = parse_point(F, b.point)
        ordx = order_at(x, p)
        if ordx >= 0:
            raise CurveError(f"boundary {b.point} is not a pole of x")
        if -ordx != b.r:
            raise CurveError(f"boundary {b.point}: pole order {-ordx} of x differs from r={b.r}")
        bds.append(Boundary(p, b.r, F.parse(b.scale), F.parse(b.branch)))
    bpts = [b.point for b in bds]
    if len(set(bpts)) != len(bpts):
        raise CurveError("boundary points are not distinct")
    if not pole_divisor_check(x, bpts):
        raise CurveError("x has poles that are not declared boundaries")
    for b in bds:
        loc = expand_at(x, b.point, -b.r, "w")
        lead = loc[-b.r] / b.scale
        if not F.eq(b.branch ** b.r, lead):
            raise CurveError(f"branch at boundary {b.point.render(F)} inconsistent: branch^r != {F.render(lead)}")

    crit_strs = list(spec.critical_points)
    if crit_strs:
        crit = [parse_point(F, s) for s in crit_strs]
    elif not F.exact:
        crit = [SpherePoint(r) for r in polyroots(F, dx.num)]
    else:
        raise CurveError("critical points must be declared on the exact backend")
    expected = sum(b.r + 1 for b in bds) - 2
    if len(crit) != expected:
        raise CurveError(f"{len(crit)} critical points declared but dx has {expected} zeros")
    for i, p in enumerate(crit):
        if p.is_infinite:
            raise CurveError("critical points must be finite")
        if p in bpts:
            raise CurveError("critical point coincides with a boundary")
        for q in crit[:i]:
            if F.eq(p.value, q.value):
                raise CurveError("critical points are not distinct")
    for p in crit:
        if not F.is_zero(dx(p.value)):
            raise CurveError(f"dx does not vanish at {p.render(F)}")
        if F.is_zero(dx.derive()(p.value)):
            raise CurveError(f"critical point {p.render(F)} is not simple")
        if not y.is_zero():
            pole = order_at(y, p) < 0 if F.exact else F.is_zero(_den_value(y, p.value))
            if pole:
                raise CurveError(f"y has a pole at the critical point {p.render(F)}")
        if F.is_zero(dy(p.value)):
            raise CurveError(f"dy vanishes at the critical point {p.render(F)}")

    sigma = list(spec.eta_branches) or [1] * len(crit)
    if len(sigma) != len(crit) or any(s not in (1, -1) for s in sigma):
        raise CurveError("eta_branches must give a sign +1/-1 per critical point")

    zeros = None
    if spec.x_zeros is not None:
        zeros = [parse_point(F, s) for s in spec.x_zeros]
        total = 0
        for p in zeros:
            k = order_at(x, p) if F.exact else (1 if F.is_zero(x(p.value)) else 0)
            if k <= 0:
                raise CurveError(f"declared zero {p.render(F)} of x is not a zero")
            total += k
        if F.exact and total != sum(b.r for b in bds):
            raise CurveError("declared zeros of x do not exhaust its zero divisor")
    return CurveData(spec, F, x, y, crit, bds, sigma, zeros)


def _den_value(f: RationalFunction, z: Any) -> Any:
    acc = f.F.zero
    for c in reversed(f.den):
        acc = acc * z + c
    return acc
