"""Boundary expansions, descendent tensors and the descendent Virasoro checks.

Descendent variables are pairs (i, k): boundary index and mode k >= 1.  Near
boundary i we use mu = 1/lambda_i, so that d(lambda^-k)/k = mu^(k-1) d(mu) and a
coefficient of prod mu_j^(k_j - 1) d(mu_j) is a correlator <alpha_k1 ...>.

Operators are held in a normalized block form (OperatorTable) shared by the
tables built here, the transcribed reference tables and transported tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations, product
from typing import Any, Callable, Iterable

from .ancestor import CHECK_TOLERANCE, CheckReport, Tally, _Probe
from .curve import Chart, CurveData, CurveError
from .ratcalc import (INFINITY, RationalFunction, SpherePoint, expand_at, order_at, pdivmod, pole_divisor_check,
                      polyroots, pstrip, residue_at)
from .recursion import AncestorTensor, Label, Recursion, remove_one
from .series import INF, LaurentSeries, PrecisionError

Var = tuple[int, int]


class DescendentError(ValueError):
    """Degenerate input for a boundary-side computation."""


class TransportError(ValueError):
    """The substitution is not graded, or a coefficient does not lie on its image."""


def _power(F, c: Any, m: int) -> Any:
    out = F.one
    base = c if m >= 0 else F.inv(c)
    for _ in range(abs(m)):
        out = out * base
    return out


def _xpow(data: CurveData, e: int) -> RationalFunction:
    if e == 0:
        return RationalFunction.const(data.F, data.F.one)
    return data.x ** e


def y_scale(data: CurveData) -> Any:
    """The y prefactor c_y (1 when absent): omega_{g,n} carries c_y^(2-2g-n)."""
    c = data.prefactor_value()
    return data.F.one if c is None else c


# --- (0,1) data ---

@dataclass
class BoundaryRow:
    index: int
    r: int
    scale: Any
    v: list
    a01: dict
    cutoff: int
    series: LaurentSeries

    def v_at(self, k: int) -> Any:
        return self.v[k] if 0 <= k < len(self.v) else None

    @property
    def vmax(self) -> int:
        return len(self.v) - 1

    def resynthesize(self, F) -> LaurentSeries:
        """y dx in the mu chart rebuilt from v and <alpha>_{0,1}."""
        d = {-k - 1: -vk for k, vk in enumerate(self.v)}
        for k, a in self.a01.items():
            d[k - 1] = d.get(k - 1, F.zero) + a
        return LaurentSeries.from_dict(F, d, self.cutoff - 1, "mu")

    def to_json(self, F) -> dict:
        return {"boundary": self.index, "r": self.r, "scale": F.render(self.scale),
                "v": [F.render(x) for x in self.v],
                "w01": {str(k): F.render(a) for k, a in sorted(self.a01.items())}}


def boundary_w01(data: CurveData, i: int, cutoff: int) -> BoundaryRow:
    """v_k (polynomial part of y dx in lambda_i) and <alpha_k>_{0,1} for k <= cutoff."""
    F = data.F
    b = data.boundaries[i]
    ch = data.boundary_chart(i)
    s = ch.differential(data.y * data.dx, cutoff - 1)
    c = y_scale(data)
    if c != F.one:
        s = s.scale(c)
    s.require(cutoff - 1)
    val = s.valuation
    v = [-s[-k - 1] for k in range(0, -int(val))] if val < 0 else []
    while v and F.is_zero(v[-1]):
        v.pop()
    a01 = {k: s[k - 1] for k in range(1, cutoff + 1)}
    return BoundaryRow(i, b.r, b.scale, v, a01, cutoff, s)


def boundary_rows(data: CurveData, cutoff: int) -> list[BoundaryRow]:
    return [boundary_w01(data, i, cutoff) for i in range(len(data.boundaries))]


# --- higher correlators ---

class DescendentTensor:
    """Symmetric table of <alpha^{i1}_{k1} ... >_{g,n}, complete for total degree <= cutoff."""

    def __init__(self, g: int, n: int, F, cutoff: int, entries: dict | None = None):
        self.g = g
        self.n = n
        self.F = F
        self.cutoff = cutoff
        self.entries: dict[tuple[Var, ...], Any] = {}
        for k, v in (entries or {}).items():
            self.set(k, v)

    def set(self, key: Iterable[Var], value: Any) -> None:
        key = tuple(sorted(key))
        if not self.F.is_zero(value):
            self.entries[key] = value
        else:
            self.entries.pop(key, None)

    def __getitem__(self, key: Iterable[Var]) -> Any:
        key = tuple(sorted(key))
        if sum(k for _, k in key) > self.cutoff:
            raise PrecisionError(f"degree {sum(k for _, k in key)} beyond cutoff {self.cutoff}",
                                 sum(k for _, k in key))
        return self.entries.get(key, self.F.zero)

    def items(self):
        return sorted(self.entries.items())

    def scaled(self, c: Any) -> "DescendentTensor":
        return DescendentTensor(self.g, self.n, self.F, self.cutoff,
                                {k: c * v for k, v in self.entries.items()})

    def eq(self, other: "DescendentTensor") -> bool:
        """Equality on the common window of total degree <= min(cutoffs)."""
        top = min(self.cutoff, other.cutoff)
        keys = {k for k in set(self.entries) | set(other.entries) if sum(d for _, d in k) <= top}
        return all(self.F.eq(self.entries.get(k, self.F.zero), other.entries.get(k, self.F.zero))
                   for k in keys)

    def rows(self) -> list[dict]:
        return [{"g": self.g, "n": self.n, "indices": [list(v) for v in k], "value": self.F.render(val)}
                for k, val in self.items()]

    def to_json(self) -> dict:
        return {"g": self.g, "n": self.n, "cutoff": self.cutoff, "entries": self.rows()}


class BoundaryLegs:
    """[mu^(k-1)] of dzeta_lab at each boundary, k = 1..order."""

    def __init__(self, data: CurveData):
        self.data = data
        self._tab: dict = {}

    def column(self, i: int, lab: Label, order: int) -> list:
        cur = self._tab.get((i, lab))
        if cur is None or len(cur) - 1 < order:
            s = self.data.boundary_chart(i).differential(self.data.dzeta(*lab), order - 1)
            s.require(order - 1)
            cur = [None] + [s[k - 1] for k in range(1, order + 1)]
            self._tab[(i, lab)] = cur
        return cur


def boundary_legs(data: CurveData) -> BoundaryLegs:
    legs = data.__dict__.get("_boundary_legs")
    if legs is None:
        legs = data.__dict__.setdefault("_boundary_legs", BoundaryLegs(data))
    return legs


def contract(T: AncestorTensor, data: CurveData, cutoff: int) -> dict:
    """Push an ancestor tensor to the boundaries: {sorted (i,k) tuple: value}, degree <= cutoff.

    Legs are fixed one target at a time in sorted order; at each step every distinct
    label of a remaining key is assigned to the new target, which enumerates each
    arrangement of the symmetric tensor exactly once.
    """
    F = data.F
    n = T.n
    legs = boundary_legs(data)
    labels = sorted({lab for key in T.entries for lab in key})
    nb = len(data.boundaries)
    cols = {(i, lab): legs.column(i, lab, cutoff) for i in range(nb) for lab in labels}
    targets = [(i, k) for i in range(nb) for k in range(1, cutoff + 1)]
    out: dict = {}

    def rec(prefix: tuple, cur: dict, start: int, budget: int) -> None:
        remaining = n - len(prefix)
        if remaining == 0:
            val = cur.get(())
            if val is not None and not F.is_zero(val):
                out[prefix] = val
            return
        for ti in range(start, len(targets)):
            i, k = targets[ti]
            if k + remaining - 1 > budget:
                continue
            new: dict = {}
            for key, val in cur.items():
                for lab in set(key):
                    e = cols[(i, lab)][k]
                    if F.is_zero(e):
                        continue
                    rest = remove_one(key, lab)
                    t = val * e
                    new[rest] = new[rest] + t if rest in new else t
            if new:
                rec(prefix + ((i, k),), new, ti, budget - k)

    rec((), dict(T.entries), 0, cutoff)
    return out


def _w02(data: CurveData, cutoff: int) -> DescendentTensor:
    F = data.F
    out = DescendentTensor(0, 2, F, cutoff)
    nb = len(data.boundaries)
    D = max(cutoff - 2, 0)
    for i in range(nb):
        for j in range(i, nb):
            chi, chj = data.boundary_chart(i), data.boundary_chart(j)
            B = data.bergman_regular(chi, D, D) if i == j else data.bergman(chi, chj, D, D)
            for k in range(1, cutoff):
                for l in range(1, cutoff - k + 1):
                    out.set(((i, k), (j, l)), B.coefficient(k - 1, l - 1))
    return out


def descendent_tensor(eng: Recursion, g: int, n: int, cutoff: int,
                      tensors: dict | None = None) -> DescendentTensor:
    """<alpha ...>_{g,n} through total degree ``cutoff`` (regularized for (0,2))."""
    data = eng.data
    F = data.F
    cache = None
    if not tensors:
        cache = eng.__dict__.setdefault("_descendent_cache", {})
        hit = cache.get((g, n))
        if hit is not None and hit.cutoff >= cutoff:
            return hit
    if (g, n) == (0, 1):
        out = DescendentTensor(0, 1, F, cutoff)
        for row in boundary_rows(data, cutoff):
            for k, a in row.a01.items():
                out.set(((row.index, k),), a)
    elif (g, n) == (0, 2):
        out = _w02(data, cutoff)
    else:
        T = tensors[(g, n)] if tensors and (g, n) in tensors else eng.tensor(g, n)
        out = DescendentTensor(g, n, F, cutoff, contract(T, data, cutoff))
        c = y_scale(data)
        if c != F.one:
            out = out.scaled(_power(F, c, 2 - 2 * g - n))
    if cache is not None:
        cache[(g, n)] = out
    return out


def omega03_pushforward(data: CurveData, cutoff: int) -> DescendentTensor:
    """<alpha alpha alpha>_{0,3} straight from the residue formula for omega_{0,3}.

    With the recursion kernel used here, omega_{0,3} = -sum_beta B(z^beta,z1)B(z^beta,z2)
    B(z^beta,z3)/(x''(z^beta) y'(z^beta)), so no ancestor data enters.
    """
    F = data.F
    nb = len(data.boundaries)
    coef = []
    legs = []
    for beta, p in enumerate(data.critical):
        zb = p.value
        w = data.dx.derive()(zb) * data.dy(zb)
        coef.append(-F.inv(w))
        leg = RationalFunction(F, [F.one], [zb * zb, -2 * zb, F.one])
        row = {}
        for i in range(nb):
            s = data.boundary_chart(i).differential(leg, cutoff - 1)
            row[i] = [None] + [s[k - 1] for k in range(1, cutoff + 1)]
        legs.append(row)
    out = DescendentTensor(0, 3, F, cutoff)
    targets = [(i, k) for i in range(nb) for k in range(1, cutoff + 1)]
    for a in range(len(targets)):
        for b in range(a, len(targets)):
            for c in range(b, len(targets)):
                key = (targets[a], targets[b], targets[c])
                if sum(k for _, k in key) > cutoff:
                    continue
                acc = F.zero
                for beta in range(data.N):
                    t = coef[beta]
                    for (i, k) in key:
                        t = t * legs[beta][i][k]
                    acc = acc + t
                out.set(key, acc)
    c = y_scale(data)
    return out if c == F.one else out.scaled(F.inv(c))


# --- hypothesis and constant ---

def _cancelled(data: CurveData, f: RationalFunction) -> RationalFunction:
    """On bigfloat, divide out common roots of num and den.

    Candidates are the roots of the factors of x and y themselves, which are simple
    for sensible curves; powers of them would stall the root finder.
    """
    F = f.F
    if F.exact or len(f.den) <= 1:
        return f
    cands: list = []
    for poly in (data.x.num, data.x.den, data.y.num, data.y.den):
        for rho in polyroots(F, poly):
            if not any(F.eq(rho, c) for c in cands):
                cands.append(rho)
    num, den = list(f.num), list(f.den)
    for rho in cands:
        while len(num) > 1 and len(den) > 1 and F.is_zero(_peval(F, num, rho)) and F.is_zero(_peval(F, den, rho)):
            num = pdivmod(F, num, [-rho, F.one])[0]
            den = pdivmod(F, den, [-rho, F.one])[0]
    return RationalFunction(F, num, den)


def _condition_form(data: CurveData, m: int) -> RationalFunction:
    return _cancelled(data, _xpow(data, m + 1) * data.y)


def validate_condition(data: CurveData, m: int) -> bool:
    """x^(m+1) y has poles only at boundary points."""
    return pole_divisor_check(_condition_form(data, m), [b.point for b in data.boundaries])


def offending_poles(data: CurveData, m: int) -> list[str]:
    """Poles of x^(m+1) y away from the boundaries (rendered)."""
    F = data.F
    f = _condition_form(data, m)
    bpts = {b.point for b in data.boundaries}
    out = []
    if INFINITY not in bpts and order_at(f, INFINITY) < 0:
        out.append("inf")
    den = list(f.den)
    for b in bpts:
        if b.is_infinite:
            continue
        while len(den) > 1:
            q, r = pdivmod(F, den, [-b.value, F.one])
            if pstrip(F, r):
                break
            den = q
    if len(den) <= 1:
        return out
    known = list(data.x_zeros or []) + list(data.critical)
    for p in known:
        if p not in bpts and order_at(f, p) < 0:
            out.append(p.render(F))
            while len(den) > 1:
                q, r = pdivmod(F, den, [-p.value, F.one])
                if pstrip(F, r):
                    break
                den = q
    if len(den) > 1:
        if F.exact:
            out.append("roots of " + " + ".join(f"({F.render(c)})z^{j}" for j, c in enumerate(den)))
        else:
            out.extend(F.render(z) for z in polyroots(F, den))
    return out


def x_zero_points(data: CurveData) -> list[SpherePoint]:
    if data.x_zeros is not None:
        return list(data.x_zeros)
    F = data.F
    if F.exact:
        raise CurveError("zeros of x must be declared for the exact backend")
    return [SpherePoint(z) for z in polyroots(F, data.x.num)]


def c_constant(data: CurveData, m: int) -> Any:
    """c_m = -sum over zeros of x of Res x^(m+1) y omega_{0,1}, prefactor included."""
    F = data.F
    form = _xpow(data, m + 1) * data.y * data.y * data.dx
    acc = F.zero
    crit = set(data.critical)
    for p in x_zero_points(data):
        if p in crit and order_at(form, p) < 0:
            raise DescendentError(f"zero {p.render(F)} of x collides with a critical point")
        acc = acc - residue_at(form, p)
    c = y_scale(data)
    return acc if c == F.one else acc * c * c


# --- operator tables ---

BLOCKS = ("const_h2", "const", "quad_h2", "lin_h2", "lin", "shift", "second_h2")
_SYMMETRIC = ("quad_h2", "second_h2")


@dataclass
class OperatorTable:
    """A second-order differential operator in normalized blocks.

    const_h2/hbar^2 + const + sum quad_h2[a,b] p_a p_b/hbar^2 + sum lin_h2[a] p_a/hbar^2
    + sum lin[a,b] p_a d/dp_b + sum shift[b] d/dp_b + hbar^2 sum second_h2[a,b] d^2/dp_a dp_b,
    with quad_h2 and second_h2 summed over ordered pairs.
    """

    name: str
    m: int
    blocks: dict = field(default_factory=lambda: {b: {} for b in BLOCKS})

    def add(self, block: str, key: tuple, value: Any) -> None:
        tab = self.blocks[block]
        tab[key] = tab[key] + value if key in tab else value

    def canonical(self, F, keep: Callable[[Var], bool] | None = None) -> dict:
        """Symmetric blocks folded onto sorted pairs; zeros dropped; optional variable filter."""
        out: dict = {}
        for b in BLOCKS:
            tab: dict = {}
            for key, val in self.blocks[b].items():
                if keep is not None and not all(keep(v) for v in _vars_of(b, key)):
                    continue
                if b in _SYMMETRIC:
                    key = tuple(sorted(key))
                tab[key] = tab[key] + val if key in tab else val
            out[b] = {k: v for k, v in tab.items() if not F.is_zero(v)}
        return out

    def diff(self, other: "OperatorTable", F, keep: Callable[[Var], bool] | None = None) -> list[dict]:
        a, b = self.canonical(F, keep), other.canonical(F, keep)
        out = []
        for blk in BLOCKS:
            for key in sorted(set(a[blk]) | set(b[blk])):
                x, y = a[blk].get(key, F.zero), b[blk].get(key, F.zero)
                if not F.eq(x, y):
                    out.append({"block": blk, "key": [list(v) for v in _vars_of(blk, key)],
                                "left": F.render(x), "right": F.render(y)})
        return out

    def restrict(self, keep: Callable[[Var], bool]) -> "OperatorTable":
        out = OperatorTable(self.name, self.m)
        for b in BLOCKS:
            for key, val in self.blocks[b].items():
                if all(keep(v) for v in _vars_of(b, key)):
                    out.add(b, key, val)
        return out

    def to_json(self, F) -> dict:
        can = self.canonical(F)
        doc = {"name": self.name, "m": self.m}
        doc["constant"] = {"hbar^-2": F.render(can["const_h2"].get((), F.zero)),
                           "hbar^0": F.render(can["const"].get((), F.zero)),
                           "quadratic_hbar^-2": [[list(k[0]), list(k[1]), F.render(v)]
                                                 for k, v in sorted(can["quad_h2"].items())],
                           "linear_hbar^-2": [[list(k[0]), F.render(v)] for k, v in sorted(can["lin_h2"].items())]}
        doc["linear"] = {"p_d": [[list(k[0]), list(k[1]), F.render(v)] for k, v in sorted(can["lin"].items())],
                         "d": [[list(k[0]), F.render(v)] for k, v in sorted(can["shift"].items())]}
        doc["second_order_hbar^2"] = [[list(k[0]), list(k[1]), F.render(v)]
                                      for k, v in sorted(can["second_h2"].items())]
        return doc


def _vars_of(block: str, key: tuple) -> tuple:
    if block in ("const_h2", "const"):
        return ()
    if block in ("lin_h2", "shift"):
        return (key[0],)
    return key


@dataclass
class DescendentVirasoroOp:
    m: int
    r: list
    scales: list
    cutoff: int
    proven: bool
    c_m: Any
    table: OperatorTable

    def to_json(self, F) -> dict:
        return {"m": self.m, "r": self.r, "scales": [F.render(c) for c in self.scales],
                "cutoff": self.cutoff, "proven": self.proven, "c_m": F.render(self.c_m),
                **self.table.to_json(F)}


def descendent_virasoro(data: CurveData, m: int, cutoff: int, name: str = "TR") -> DescendentVirasoroOp:
    """The descendent operator with every boundary block weighted by c_i^m.

    Linear terms are kept while the differentiated mode stays <= cutoff.
    """
    F = data.F
    rows = boundary_rows(data, max(cutoff, 1))
    c_m = c_constant(data, m)
    T = OperatorTable(name, m)
    T.add("const_h2", (), c_m / 2)
    for row in rows:
        i, r = row.index, row.r
        s = _power(F, row.scale, m)
        w = s * F.frac(1, r)

        def vt(k):
            x = row.v_at(k)
            return F.zero if x is None else x

        if m == -1:
            half = w / 2
            for a in range(0, r + 1):
                b = r - a
                # (p_a - v_a)(p_b - v_b) with p_0 = 0
                if a >= 1 and b >= 1:
                    T.add("quad_h2", ((i, a), (i, b)), half)
                if a >= 1:
                    T.add("lin_h2", ((i, a),), -half * vt(b))
                if b >= 1:
                    T.add("lin_h2", ((i, b),), -half * vt(a))
                T.add("const_h2", (), half * vt(a) * vt(b))
        if m == 0:
            T.add("const_h2", (), vt(0) * vt(0) * F.frac(1, 2 * r))
            T.add("const", (), F.frac(r * r - 1, 24 * r))
        for k in range(0, cutoff + 1):
            b = r * m + k
            if b < 1 or b > cutoff:
                continue
            coef = w * b
            if k >= 1:
                T.add("lin", ((i, k), (i, b)), coef)
            if not F.is_zero(vt(k)):
                T.add("shift", ((i, b),), -coef * vt(k))
        for k in range(1, r * m):
            l = r * m - k
            T.add("second_h2", ((i, k), (i, l)), w * (k * l) / 2)
    return DescendentVirasoroOp(m, [row.r for row in rows], [row.scale for row in rows], cutoff,
                                validate_condition(data, m), c_m, T)


# --- correlator-level identity ---

class _Correlators:
    """Correlator lookup with the negative-index conventions installed."""

    def __init__(self, eng: Recursion, cutoff: int, tensors: dict | None):
        self.eng = eng
        self.F = eng.data.F
        self.cutoff = cutoff
        self.tensors = tensors
        self.rows = boundary_rows(eng.data, cutoff)
        self._t: dict = {}

    def table(self, g: int, n: int) -> DescendentTensor:
        t = self._t.get((g, n))
        if t is None:
            t = descendent_tensor(self.eng, g, n, self.cutoff, self.tensors)
            self._t[(g, n)] = t
        return t

    def __call__(self, g: int, key: tuple) -> Any:
        F = self.F
        n = len(key)
        if g < 0 or n == 0:
            return F.zero
        if (g, n) == (0, 1):
            i, k = key[0]
            if k >= 1:
                return self.rows[i].a01[k]
            v = self.rows[i].v_at(-k)
            return F.zero if v is None else -v
        neg = [a for a in key if a[1] <= 0]
        if neg:
            if (g, n) == (0, 2) and len(neg) == 1:
                (i, k), (j, l) = key if key[0][1] <= 0 else (key[1], key[0])
                if i == j and -k == l:
                    return F(l)
            return F.zero
        if 2 * g - 2 + n < 0:
            return F.zero
        return self.table(g, n)[key]


def descendent_tuples(nb: int, n: int, max_degree: int) -> list[tuple]:
    targets = [(i, k) for i in range(nb) for k in range(1, max_degree + 1)]
    out = []

    def rec(prefix, start, budget):
        if len(prefix) == n:
            out.append(prefix)
            return
        for t in range(start, len(targets)):
            if targets[t][1] + (n - len(prefix) - 1) <= budget:
                rec(prefix + (targets[t],), t, budget - targets[t][1])

    rec((), 0, max_degree)
    return out


def _hypothesis_skip(identity: str, data: CurveData, m: int, g, n) -> CheckReport:
    poles = offending_poles(data, m)
    rep = CheckReport.skip(identity, m, g, n,
                           f"x^(m+1) y has poles away from the boundaries at {', '.join(poles)}")
    rep.details["poles"] = poles
    return rep


def check_descendent_correlator_identity(eng: Recursion, m: int, g: int, n: int,
                                         tuples: Iterable[tuple] | None = None, *,
                                         max_degree: int = 12, tensors: dict | None = None,
                                         tol: float = CHECK_TOLERANCE,
                                         corr: _Correlators | None = None) -> CheckReport:
    """The correlator form of the descendent constraint for one (g, n), tuple by tuple."""
    data = eng.data
    F = data.F
    if 2 * g - 1 + n <= 0:
        raise ValueError("need 2g - 2 + n + 1 > 0")
    if not validate_condition(data, m):
        return _hypothesis_skip("descendent", data, m, g, n)
    nb = len(data.boundaries)
    tuples = list(tuples) if tuples is not None else descendent_tuples(nb, n, max_degree)
    maxJ = max((max((k for _, k in J), default=0) for J in tuples), default=0)
    degJ = max((sum(k for _, k in J) for J in tuples), default=0)
    if corr is None:
        rows0 = boundary_rows(data, 1)
        vmax = max(row.vmax for row in rows0)
        rm = max(max(row.r * m for row in rows0), 0)
        corr = _Correlators(eng, degJ + rm + max(vmax, 0) + 1, tensors)
    rows = corr.rows
    delta = F.zero
    if m == 0 and g == 1 and n == 0:
        for row in rows:
            delta = delta + F.frac(row.r * row.r - 1, 24 * row.r)
    tally = Tally(F, tol)
    for J in tuples:
        J = tuple(J)
        lhs = delta
        rhs = F.zero
        for row in rows:
            i, r = row.index, row.r
            w = _power(F, row.scale, m) * F.frac(1, r)
            rm = r * m
            acc = F.zero
            for k in range(min(1, -maxJ), rm + max(row.vmax, 0) + 1):
                a = corr(0, ((i, rm - k),))
                if F.is_zero(a):
                    continue
                b = corr(g, ((i, k),) + J)
                if not F.is_zero(b):
                    acc = acc + a * b
            lhs = lhs + w * acc
            acc2 = F.zero
            for k in range(-maxJ, rm + maxJ + 1):
                l = rm - k
                if g >= 1 and k >= 1 and l >= 1:
                    acc2 = acc2 + corr(g - 1, ((i, k), (i, l)) + J)
                for size in range(n + 1):
                    for I in combinations(range(n), size):
                        JI = tuple(J[t] for t in I)
                        JJ = tuple(J[t] for t in range(n) if t not in I)
                        for g1 in range(g + 1):
                            g2 = g - g1
                            if (g1 == 0 and not JI) or (g2 == 0 and not JJ):
                                continue
                            # evaluate the factor carrying a non-positive index first
                            if l <= 0:
                                f2 = corr(g2, ((i, l),) + JJ)
                                if F.is_zero(f2):
                                    continue
                                f1 = corr(g1, ((i, k),) + JI)
                            else:
                                f1 = corr(g1, ((i, k),) + JI)
                                if F.is_zero(f1):
                                    continue
                                f2 = corr(g2, ((i, l),) + JJ)
                            if not F.is_zero(f2):
                                acc2 = acc2 + f1 * f2
            rhs = rhs - w * acc2 / 2
        tally.add(lhs, rhs, J)
    return CheckReport.from_tally("descendent", m, g, n, tally, (), tuples=len(tuples))


def correlator_context(eng: Recursion, ms: Iterable[int], max_degree: int,
                       tensors: dict | None = None) -> _Correlators:
    """One correlator table sized for every m in ``ms``."""
    rows0 = boundary_rows(eng.data, 1)
    vmax = max(row.vmax for row in rows0)
    rm = max(max(row.r * m for row in rows0) for m in ms)
    return _Correlators(eng, max_degree + max(rm, 0) + max(vmax, 0) + 1, tensors)


# --- boundary-residue form ---

def generic_point_charts(data: CurveData, count: int) -> list[Chart]:
    """Distinct finite point charts away from critical points, boundaries and zeros/poles of x, y."""
    F = data.F
    special = set(data.critical) | {b.point for b in data.boundaries} | set(data.x_zeros or [])
    out = []
    for p, q in ((1, 3), (2, 7), (3, 11), (5, 13), (7, 17), (11, 19), (13, 23), (17, 29), (19, 31)):
        if len(out) == count:
            break
        z = F.frac(p, q)
        pt = SpherePoint(z)
        if pt in special:
            continue
        if any(F.is_zero(_peval(F, pol, z)) for pol in (data.x.den, data.y.den, data.dx.num)):
            continue
        out.append(data.point_chart(pt, "s"))
    if len(out) < count:
        raise CurveError("not enough generic probe points")
    return out


def _peval(F, p, z):
    acc = F.zero
    for c in reversed(p):
        acc = acc * z + c
    return acc


def _weight(R: tuple, slots: tuple, F) -> Any:
    """sum over distinct arrangements of labels R onto slots (table, exponent); None is zero."""
    if not R:
        return F.one
    acc = None
    for perm in set(permutations(R)):
        t = None
        for lab, (tab, d) in zip(perm, slots):
            c = tab[lab].get(d)
            if c is None:
                t = None
                break
            t = c if t is None else t * c
        if t is not None:
            acc = t if acc is None else acc + t
    return acc


def _exponent_tuples(n: int, dmax: int, total: int) -> list[tuple]:
    return [e for e in product(range(dmax + 1), repeat=n) if sum(e) <= total]


def check_prop41_residue(eng: Recursion, m: int, g: int, n: int, *, probe_order: int | None = None,
                         max_total: int | None = None, tensors: dict | None = None,
                         tol: float = CHECK_TOLERANCE) -> CheckReport:
    """-sum_i Res_{b_i} x^(m+1) y omega_{g,n+1} = 1/2 sum_i oint_{b_i} (x^(m+1)/dx) (bracket at z, z).

    Spectator j sits at its own generic point p_j (z_j = p_j + s_j) and the identity is
    compared coefficient by coefficient in the s_j.  Each contour around b_i is taken to
    enclose the spectators assigned to that boundary, so besides the residues at the
    boundaries the right side picks up Res_{z=z_j}, which only the omega_{0,2}(z, z_j)
    splittings contribute.  The bracket uses the regularized omega_{0,2}(z,z) for
    (g,n) = (1,0).  Prefactors of y cancel on both sides.
    """
    data = eng.data
    F = data.F
    if 2 * g - 1 + n <= 0:
        raise ValueError("(g, n+1) must be stable")
    if not validate_condition(data, m):
        return _hypothesis_skip("prop41", data, m, g, n)

    def get(gg, nn):
        if tensors and (gg, nn) in tensors:
            return tensors[(gg, nn)]
        return eng.tensor(gg, nn)

    Dout = 3 * g - 3 + n + 1
    probe_order = probe_order if probe_order is not None else min(Dout + 1, 3)
    max_total = max_total if max_total is not None else max(Dout, 1) + 1
    charts = generic_point_charts(data, n)
    probes = [_Probe(data, ch, probe_order + 1) for ch in charts]
    labels = data.labels(Dout)
    ptabs = [pr.table(labels) for pr in probes]
    es = _exponent_tuples(n, probe_order, max_total)
    pts = [ch.center.value for ch in charts]
    bpts = [b.point for b in data.boundaries]

    T_main = get(g, n + 1)
    slices = T_main.slices()
    xm1 = _xpow(data, m + 1)
    xy = xm1 * data.y
    lhs_res: dict = {}
    for a in {lab for key in T_main.entries for lab in key}:
        form = xy * data.dzeta(*a)
        acc = F.zero
        for p in bpts:
            acc = acc - residue_at(form, p)
        lhs_res[a] = acc

    # near b_i: x^(m+1)/dx = h(mu)/dmu, so Res (x^(m+1)/dx) A dmu B dmu = [mu^-1] h A B
    blocks = []
    for i, b in enumerate(data.boundaries):
        ch = data.boundary_chart(i)
        h = ch.function(xm1, 4) / ch.differential(data.dx, 4)
        h.require(-1)
        blocks.append((ch, h, max(b.r * m, 0) + 1))
    # near p_j (z = p_j + s, dz = ds): H(s) = x^(m+1)/x'
    Hloc = [expand_at(xm1 / data.dx, ch.center, probe_order + 2, "s") for ch in charts]

    sercache: dict = {}

    def S(i, lab):
        s = sercache.get((i, lab))
        if s is None:
            ch, _, need = blocks[i]
            s = ch.differential(data.dzeta(*lab), need)
            sercache[(i, lab)] = s
        return s

    def B_rf(j, d):
        """Coefficient of s_j^d dz ds_j in B(z, p_j + s_j) as a rational function of z."""
        den = [F.one]
        for _ in range(d + 2):
            den = _pmul_lin(F, den, pts[j])
        return RationalFunction(F, [F(d + 1)], den)

    bcache: dict = {}

    def Bspec(i, j, d):
        key = (i, j, d)
        s = bcache.get(key)
        if s is None:
            ch, _, need = blocks[i]
            s = ch.differential(B_rf(j, d), need)
            bcache[key] = s
        return s

    def slots_of(pos: tuple, e: tuple) -> tuple:
        return tuple((ptabs[j], e[j]) for j in pos)

    def W(i, gp, pos, e):
        """omega_{gp,|pos|+1}(z near b_i, spectators pos) as a mu-series."""
        if gp == 0 and len(pos) == 1:
            return Bspec(i, pos[0], e[pos[0]])
        T = get(gp, len(pos) + 1)
        s = LaurentSeries.zero(F, blocks[i][2], "mu")
        for R, av in T.slices().items():
            w = _weight(R, slots_of(pos, e), F)
            if w is None or F.is_zero(w):
                continue
            for a, val in av.items():
                s = s + S(i, a).scale(val * w)
        return s

    def Wloc(j, gp, pos, e, order):
        """omega_{gp,|pos|+1}(z = p_j + s, other spectators) as an s-series (j not in pos)."""
        if gp == 0 and len(pos) == 1:
            return expand_at(B_rf(pos[0], e[pos[0]]), charts[j].center, order, "s")
        T = get(gp, len(pos) + 1)
        s = LaurentSeries.zero(F, order, "s")
        for R, av in T.slices().items():
            w = _weight(R, slots_of(pos, e), F)
            if w is None or F.is_zero(w):
                continue
            for a, val in av.items():
                s = s + LaurentSeries.from_dict(F, probes[j].label(a), order, "s").scale(val * w)
        return s

    T_minus = get(g - 1, n + 2) if g >= 1 and not (g == 1 and n == 0) else None
    pslices = T_minus.pair_slices() if T_minus is not None else {}
    pair_res: dict = {}

    def pres(i, a, b):
        v = pair_res.get((i, a, b))
        if v is None:
            v = (blocks[i][1] * S(i, a) * S(i, b))[-1]
            pair_res[(i, a, b)] = v
        return v

    diag_res = []
    if g == 1 and n == 0:
        for i, b in enumerate(data.boundaries):
            ch, h, need = blocks[i]
            reg = data.bergman_regular(ch, need, need).diagonal("mu")
            sing = LaurentSeries(F, -2, [F.frac(b.r * b.r - 1, 12)], INF, "mu")
            diag_res.append((h * (reg + sing))[-1])

    allpos = tuple(range(n))
    tally = Tally(F, tol)
    for e in es:
        lhs = F.zero
        for R, av in slices.items():
            w = _weight(R, slots_of(allpos, e), F)
            if w is None:
                continue
            for a, val in av.items():
                lhs = lhs + lhs_res[a] * val * w
        rhs = F.zero
        for i in range(len(data.boundaries)):
            acc = diag_res[i] if diag_res else F.zero
            for R, pairs in pslices.items():
                w = _weight(R, slots_of(allpos, e), F)
                if w is None or F.is_zero(w):
                    continue
                for (a, b), val in pairs.items():
                    acc = acc + w * val * pres(i, a, b)
            Wc: dict = {}
            for size in range(n + 1):
                for I in combinations(allpos, size):
                    J = tuple(t for t in allpos if t not in I)
                    for g1 in range(g + 1):
                        g2 = g - g1
                        if (g1 == 0 and not I) or (g2 == 0 and not J):
                            continue
                        for key in ((g1, I), (g2, J)):
                            if key not in Wc:
                                Wc[key] = W(i, key[0], key[1], e)
                        acc = acc + (blocks[i][1] * Wc[(g1, I)] * Wc[(g2, J)])[-1]
            rhs = rhs + acc / 2
        # residues at the spectators: the two orderings of each omega_{0,2}(z, z_j) splitting
        for j in allpos:
            rest = tuple(t for t in allpos if t != j)
            if g == 0 and not rest:
                continue
            order = e[j] + 2
            phi = Wloc(j, g, rest, e, order)
            G = (Hloc[j] * phi).truncate(order)
            rhs = rhs + (e[j] + 1) * G[e[j] + 1]
        tally.add(lhs, rhs, e)
    return CheckReport.from_tally("prop41", m, g, n, tally, (), exponents=len(es),
                                  probe_points=[F.render(p) for p in pts])


def _pmul_lin(F, p: list, c: Any) -> list:
    """p * (z - c)."""
    out = [F.zero] * (len(p) + 1)
    for j, a in enumerate(p):
        out[j + 1] = out[j + 1] + a
        out[j] = out[j] - c * a
    return out


# --- transport ---

@dataclass
class TransportMap:
    """t-variable -> {p-variable: coefficient}: the substitution t = A p."""

    rows: dict
    name: str = ""

    def columns(self) -> dict:
        cols: dict = {}
        for t, row in self.rows.items():
            for p, c in row.items():
                cols.setdefault(p, []).append((t, c))
        return cols

    def support(self) -> set:
        return {p for row in self.rows.values() for p in row}

    def check_graded(self, F) -> dict:
        """Pivot per row; rows must have pairwise disjoint supports."""
        seen: dict = {}
        piv = {}
        for t, row in self.rows.items():
            nz = [p for p, c in row.items() if not F.is_zero(c)]
            if not nz:
                raise TransportError(f"row {t} is empty")
            for p in nz:
                if p in seen:
                    raise TransportError(f"rows {seen[p]} and {t} share {p}: not graded")
                seen[p] = t
            piv[t] = min(nz)
        return piv

    def to_json(self, F) -> dict:
        return {"name": self.name,
                "rows": [[list(t), [[list(p), F.render(c)] for p, c in sorted(row.items())]]
                         for t, row in sorted(self.rows.items())]}


def _solve_linear(F, form: dict, tmap: TransportMap, piv: dict) -> dict:
    out = {}
    resid = dict(form)
    for t, p in piv.items():
        c = form.get(p)
        if c is None or F.is_zero(c):
            continue
        d = c / tmap.rows[t][p]
        out[t] = d
        for q, a in tmap.rows[t].items():
            resid[q] = resid.get(q, F.zero) - d * a
    bad = [q for q, v in resid.items() if not F.is_zero(v)]
    if bad:
        raise TransportError(f"linear coefficient not on the image (residual at {sorted(bad)[:3]})")
    return out


def _solve_quadratic(F, Q: dict, tmap: TransportMap, piv: dict) -> dict:
    """Q over sorted p-pairs -> coefficients over sorted t-pairs."""
    owner = {p: t for t, p in piv.items()}
    out: dict = {}
    for (a, b), q in Q.items():
        if F.is_zero(q):
            continue
        if a in owner and b in owner:
            I, J = owner[a], owner[b]
            norm = tmap.rows[I][a] * tmap.rows[J][b]
            key = tuple(sorted((I, J)))
            out[key] = q / norm
    # verify
    resid = {k: v for k, v in Q.items()}
    for (I, J), e in out.items():
        for a, ca in tmap.rows[I].items():
            for b, cb in tmap.rows[J].items():
                if I == J and b < a:
                    continue
                key = tuple(sorted((a, b)))
                contrib = e * ca * cb if (I == J and a == b) else e * ca * cb
                if I == J and a != b:
                    contrib = 2 * e * ca * cb
                resid[key] = resid.get(key, F.zero) - contrib
    bad = [k for k, v in resid.items() if not F.is_zero(v)]
    if bad:
        raise TransportError(f"quadratic coefficient not on the image (residual at {sorted(bad)[:3]})")
    return out


def transport_operator(op: OperatorTable | DescendentVirasoroOp, tmap: TransportMap, F,
                       name: str | None = None) -> OperatorTable:
    """Rewrite an operator on functions of t(p) in the t variables (chain rule).

    Terms that touch p-variables outside the map's support are dropped: on functions
    of t those derivatives vanish, and the caller compares inside the map's window.
    """
    table = op.table if isinstance(op, DescendentVirasoroOp) else op
    piv = tmap.check_graded(F)
    supp = tmap.support()
    can = table.restrict(lambda v: v in supp).canonical(F)
    cols = tmap.columns()
    out = OperatorTable(name or table.name + "->t", table.m)
    for blk in ("const_h2", "const"):
        for key, val in can[blk].items():
            out.add(blk, key, val)
    for (a, b), s in can["second_h2"].items():
        # canonical form folds ordered pairs; unfold symmetrically
        pairs = [(a, b)] if a == b else [(a, b), (b, a)]
        ss = s if a == b else s / 2
        for x, y in pairs:
            for J, ca in cols.get(x, ()):
                for K, cb in cols.get(y, ()):
                    out.add("second_h2", (J, K), ss * ca * cb)
    for (b,), c in can["shift"].items():
        for J, cb in cols.get(b, ()):
            out.add("shift", (J,), c * cb)
    forms: dict = {}
    for (a, b), l in can["lin"].items():
        for J, cb in cols.get(b, ()):
            f = forms.setdefault(J, {})
            f[a] = f.get(a, F.zero) + l * cb
    for J, f in forms.items():
        for I, d in _solve_linear(F, f, tmap, piv).items():
            out.add("lin", (I, J), d)
    if can["lin_h2"]:
        f = {a: v for (a,), v in can["lin_h2"].items()}
        for I, d in _solve_linear(F, f, tmap, piv).items():
            out.add("lin_h2", (I,), d)
    if can["quad_h2"]:
        # canonical quad_h2 over sorted pairs is the coefficient of p_a p_b (a != b) or p_a^2
        for key, e in _solve_quadratic(F, can["quad_h2"], tmap, piv).items():
            out.add("quad_h2", key, e)
    return out


def identity_map(variables: Iterable[Var], F) -> TransportMap:
    return TransportMap({v: {v: F.one} for v in variables}, "identity")


def s_of_p(data: CurveData, m_max: int, cutoff: int) -> dict:
    """c^{m,beta}_{i,k}: [mu^(k-1)] of dzeta_m^beta at boundary i, as {(beta, m): {(i, k): c}}."""
    legs = boundary_legs(data)
    F = data.F
    out: dict = {}
    for lab in data.labels(m_max):
        row = {}
        for i in range(len(data.boundaries)):
            col = legs.column(i, lab, cutoff)
            for k in range(1, cutoff + 1):
                if not F.is_zero(col[k]):
                    row[(i, k)] = col[k]
        out[lab] = row
    return out
