"""Built-in genus-zero curves, transcribed operator tables and the Airy Virasoro oracle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import mpmath

from .curve import BoundarySpec, CurveError, CurveSpec, validate
from .descendent import DescendentTensor, DescendentVirasoroOp, OperatorTable, TransportMap
from .scalars import Field, FieldError, FieldSpec, RationalField, make_field
from .series import PrecisionError

TABLE_VERSION = "1"
M_RANGE = (-1, 12)
DATA_DIR = Path(__file__).with_name("data") / f"v{TABLE_VERSION}"

Var = tuple[int, int]


class CatalogError(ValueError):
    pass


class OracleError(ValueError):
    pass


# --- curve constructors ---

def airy() -> CurveSpec:
    """x = z^2/2, y = z; lambda = z at infinity."""
    return CurveSpec(
        name="airy",
        field=FieldSpec(),
        x=(("0", "0", "1/2"), ("1",)),
        y=(("0", "1"), ("1",)),
        critical_points=("0",),
        boundaries=(BoundarySpec("inf", 2, "1/2", "1"),),
        eta_branches=(1,),
        x_zeros=("0",),
    )


def _mp_render(ctx, z) -> str:
    digits = int(ctx.prec * 0.30103) + 4
    z = ctx.mpc(z)
    re, im = ctx.nstr(z.real, digits), ctx.nstr(abs(z.imag), digits)
    return f"{re}{'-' if z.imag < 0 else '+'}{im}j"


def r_bessel(r: int, eps: Any = 1, precision_bits: int = 256) -> CurveSpec:
    """x = -z^r + eps z, y = sqrt(-r)/z with the square root carried as the prefactor c_y."""
    if not isinstance(r, int) or r < 2:
        raise CurveError("r must be an integer >= 2")
    ctx = mpmath.MPContext()
    ctx.prec = precision_bits + 32
    e = ctx.mpc(ctx.mpmathify(str(eps).replace(" ", "")) if isinstance(eps, str) else eps)
    if e == 0:
        raise CurveError("eps = 0 gives a non-simple critical point at z = 0")
    unit = [ctx.expjpi(ctx.mpf(2 * j) / (r - 1)) for j in range(r - 1)]
    crit_base = ctx.root(e / r, r - 1)
    zero_base = ctx.root(e, r - 1)
    xi = ctx.expjpi(ctx.mpf(-1) / r)
    es = _mp_render(ctx, e)
    return CurveSpec(
        name=f"r_bessel_{r}",
        field=FieldSpec(backend="bigfloat", precision_bits=precision_bits,
                        zero_tolerance=float(mpmath.mpf(2) ** (-(precision_bits * 3) // 4))),
        x=(("0", es) + ("0",) * (r - 2) + ("-1",), ("1",)),
        y=(("1",), ("0", "1")),
        critical_points=tuple(_mp_render(ctx, crit_base * u) for u in unit),
        boundaries=(BoundarySpec("inf", r, "1", _mp_render(ctx, xi)),),
        eta_branches=(1,) * (r - 1),
        x_zeros=("0",) + tuple(_mp_render(ctx, zero_base * u) for u in unit),
        y_prefactor=("c_y", str(-r)),
    )


def _rational(s: Any) -> Fraction:
    try:
        return Fraction(str(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise CurveError(f"not a rational parameter: {s!r}") from exc


def _qsqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def _egdd_polys(uv: str, upv: str, neg_half_uv: str):
    x = ((uv, upv, "1"), ("0", "1"))
    y = ((neg_half_uv, "0", "1/2"), (uv, upv, "1"))
    return x, y


def egdd(u: Any = 1, v: Any = 4, backend: str | None = None, precision_bits: int = 256) -> CurveSpec:
    """x = z + uv/z + u + v, y = 1/2 - u/(2(z+u)) - v/(2(z+v)); boundaries 0 and infinity.

    The exact backend works over Q(i) and needs the critical points and the eta slopes
    sqrt(x''(+-alpha)) to live there; otherwise (or on request) the bigfloat backend is used.
    """
    U, V = _rational(u), _rational(v)
    if U == V:
        raise CurveError("u = v: the two zeros of x collide")
    if U * V == 0:
        raise CurveError("uv = 0: the boundary at z = 0 disappears")
    uv, upv = U * V, U + V
    x, y = _egdd_polys(str(uv), str(upv), str(-uv / 2))
    name = f"egdd_{U}_{V}".replace("/", "|")
    bds = (BoundarySpec("0", 1, "1", str(uv)), BoundarySpec("inf", 1))
    zeros = (str(-U), str(-V))
    if backend in (None, "exact"):
        q = _qsqrt(uv)
        crit = None
        if q is not None:
            crit = (str(q), str(-q))
        elif _qsqrt(-uv) is not None:
            q = _qsqrt(-uv)
            crit = (f"({q})*i", f"-({q})*i")
        if crit is not None:
            spec = CurveSpec(name, FieldSpec(generator=("i", ("1", "0", "1"))), x, y, crit, bds, (1, 1), zeros)
            try:
                data = validate(spec)
                for beta in range(data.N):
                    data.eta_slope(beta)
                return spec
            except FieldError:
                pass
        if backend == "exact":
            raise CurveError(f"egdd({U}, {V}) has no exact model over Q(i); use the bigfloat backend")
    ctx = mpmath.MPContext()
    ctx.prec = precision_bits + 32
    a = ctx.sqrt(ctx.mpc(int(uv.numerator)) / int(uv.denominator))
    return CurveSpec(name, FieldSpec(backend="bigfloat", precision_bits=precision_bits,
                                     zero_tolerance=float(mpmath.mpf(2) ** (-(precision_bits * 3) // 4))),
                     x, y, (_mp_render(ctx, a), _mp_render(ctx, -a)), bds, (1, 1), zeros)


def egdd_symbolic() -> CurveSpec:
    """eGdd over Q(u, v)(alpha), alpha^2 = uv: for constants and v-tables (no eta slopes)."""
    x, y = _egdd_polys("u*v", "u+v", "-u*v/2")
    return CurveSpec("egdd_symbolic", FieldSpec(parameters=("u", "v"), generator=("alpha", ("-u*v", "0", "1"))),
                     x, y, ("alpha", "-alpha"), (BoundarySpec("0", 1, "1", "u*v"), BoundarySpec("inf", 1)),
                     (1, 1), ("-u", "-v"))


def by_name(name: str, params: dict | None = None) -> CurveSpec:
    params = dict(params or {})
    try:
        if name == "airy":
            if params:
                raise CatalogError("airy takes no parameters")
            return airy()
        if name == "r_bessel":
            r = int(params.pop("r", 3))
            eps = params.pop("eps", params.pop("epsilon", "1"))
            bits = int(params.pop("precision_bits", 256))
            if params:
                raise CatalogError(f"unknown r_bessel parameters {sorted(params)}")
            return r_bessel(r, eps, bits)
        if name == "egdd":
            u, v = params.pop("u", "1"), params.pop("v", "4")
            backend = params.pop("backend", None)
            if params:
                raise CatalogError(f"unknown egdd parameters {sorted(params)}")
            return egdd(u, v, backend)
        if name == "egdd_symbolic":
            return egdd_symbolic()
    except ValueError as exc:
        if isinstance(exc, (CatalogError, CurveError)):
            raise
        raise CatalogError(str(exc)) from exc
    raise CatalogError(f"unknown catalog curve {name!r}")


def export(directory: Path = DATA_DIR) -> list[Path]:
    """Write the default instantiations as curve-spec JSON documents."""
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for fname, spec in (("airy.json", airy()), ("egdd_1_4.json", egdd(1, 4)),
                        ("r_bessel_3_1.json", r_bessel(3, 1)), ("egdd_symbolic.json", egdd_symbolic())):
        p = directory / fname
        p.write_text(json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n")
        out.append(p)
    return out


# --- reference tables ---

@dataclass
class ReferenceOperatorTable:
    name: str
    side: str
    m: int
    version: str
    table: OperatorTable
    variables: str

    def to_json(self, F: Field) -> dict:
        return {"example": self.name, "side": self.side, "m": self.m, "version": self.version,
                "variables": self.variables, **self.table.to_json(F)}


def _dfact(n: int) -> int:
    """n!! with (-1)!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _fact(n: int) -> int:
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out


def _airy_tr(F: Field, m: int, K: int) -> OperatorTable:
    T = OperatorTable("airy:TR", m)
    if m == -1:
        T.add("quad_h2", ((0, 1), (0, 1)), F.frac(1, 4))
    if m == 0:
        T.add("const", (), F.frac(1, 16))
    den = 2 ** (m + 1) if m >= -1 else 1
    for k in range(0, K + 1):
        a, b = 2 * k + 1, 2 * k + 2 * m + 1
        if b < 1 or b > K or a > K:
            continue
        c = F.frac(2 * k + 2 * m + 1, den)
        T.add("lin", ((0, a), (0, b)), c)
        if a == 3:
            T.add("shift", ((0, b),), -c)
    for k in range(0, m):
        l = m - 1 - k
        T.add("second_h2", ((0, 2 * k + 1), (0, 2 * l + 1)), F.frac((2 * k + 1) * (2 * l + 1), 2 ** (m + 2)))
    return T


def _airy_geo(F: Field, m: int, K: int) -> OperatorTable:
    T = OperatorTable("airy:geometric", m)
    if m == -1:
        T.add("quad_h2", ((0, 0), (0, 0)), F.frac(1, 2))
    if m == 0:
        T.add("const", (), F.frac(1, 16))
    den = 2 ** (m + 1)
    for k in range(0, K + 1):
        if k + m < 0 or k + m > K:
            continue
        c = F.frac(_dfact(2 * k + 2 * m + 1), den * _dfact(2 * k - 1))
        T.add("lin", ((0, k), (0, k + m)), c)
        if k == 1:
            T.add("shift", ((0, k + m),), -c)
    for k in range(0, m):
        l = m - 1 - k
        T.add("second_h2", ((0, k), (0, l)), F.frac(_dfact(2 * k + 1) * _dfact(2 * l + 1), 2 ** (m + 2)))
    return T


def _egdd_vals(F: Field, params: dict | None):
    params = params or {}
    if "u" in params or "v" in params:
        u, v = F.parse(str(params.get("u", "1"))), F.parse(str(params.get("v", "4")))
    else:
        try:
            u, v = F.param("u"), F.param("v")
        except FieldError:
            u, v = F.parse("1"), F.parse("4")
    return u, v


def _egdd_tr(F: Field, m: int, K: int, params: dict | None) -> OperatorTable:
    u, v = _egdd_vals(F, params)
    T = OperatorTable("egdd:TR", m)
    if m == 0:
        T.add("const_h2", (), u * v)
    if m >= 1 and m <= K:
        T.add("shift", ((1, m),), F.frac(m, 2) * (u + v))
        T.add("shift", ((0, m),), -F.frac(m, 2) * (u + v))
    for i in (0, 1):
        for k in range(1, K + 1):
            if m + k < 1 or m + k > K:
                continue
            T.add("lin", ((i, k), (i, m + k)), F.frac(m + k))
            if k == 1:
                T.add("shift", ((i, m + 1),), F.frac(m + 1, 2) * (1 if i == 0 else -1))
        for k in range(1, m):
            T.add("second_h2", ((i, k), (i, m - k)), F.frac(k * (m - k), 2))
    return T


def _egdd_geo(F: Field, m: int, K: int, params: dict | None) -> OperatorTable:
    """On the image t^1 = 0, so only the t^0 blocks and the t~^1_0 = (u+v)/2 cross term survive."""
    u, v = _egdd_vals(F, params)
    T = OperatorTable("egdd:geometric", m)
    if m == 0:
        T.add("const_h2", (), u * v)
    for k in range(0, K + 1):
        if k + m < 0 or k + m > K:
            continue
        c = F.frac(_fact(k + m + 1), _fact(k))
        T.add("lin", ((0, k), (0, k + m)), c)
        if k == 0:
            T.add("shift", ((0, m),), -c)
    for k in range(1, m):
        T.add("second_h2", ((0, k - 1), (0, m - k - 1)), F.frac(_fact(k) * _fact(m - k)))
    if 1 <= m <= K + 1:
        T.add("shift", ((0, m - 1),), F.frac(_fact(m)) * (u + v))
    return T


def _rb_vals(F: Field, params: dict | None):
    params = params or {}
    r = int(params.get("r", 3))
    eps = F.parse(str(params.get("eps", "1")))
    sq = F.sqrt(F.frac(-r))
    xi = F.embed(F.ctx.expjpi(F.ctx.mpf(-1) / r)) if not F.exact else None
    return r, eps, sq, xi


def _poch(F: Field, a: Any, n: int) -> Any:
    """Gamma(a + n)/Gamma(a) for integer n (possibly negative)."""
    out = F.one
    if n >= 0:
        for j in range(n):
            out = out * (a + j)
    else:
        for j in range(1, -n + 1):
            out = out / (a - j)
    return out


def _rb_tr(F: Field, m: int, K: int, params: dict | None) -> OperatorTable:
    r, eps, sq, xi = _rb_vals(F, params)
    T = OperatorTable(f"r_bessel_{r}:TR", m)
    if m == 0:
        T.add("const_h2", (), F.frac(r - 1, 2) * eps * eps)
        T.add("const", (), F.frac(r * r - 1, 24 * r))
    for k in range(0, K + 1):
        for a in range(1, r):
            src, dst = r * k + a, r * m + r * k + a
            if dst < 1 or dst > K or src > K:
                continue
            c = F.frac(dst, r)
            T.add("lin", ((0, src), (0, dst)), c)
            if src == r - 1:
                T.add("shift", ((0, dst),), -c * r * sq * xi)
    for k in range(1, m + 1):
        for a in range(1, r):
            i, j = r * k - a, r * m - r * k + a
            T.add("second_h2", ((0, i), (0, j)), F.frac(j * i, 2 * r))
    return T


def _rb_geo(F: Field, m: int, K: int, params: dict | None) -> OperatorTable:
    r, eps, sq, xi = _rb_vals(F, params)
    T = OperatorTable(f"r_bessel_{r}:geometric", m)
    if m == 0:
        T.add("const_h2", (), F.frac(r - 1, 2) * eps * eps)
        T.add("const", (), F.frac(r * r - 1, 24 * r))
    for k in range(0, K + 1):
        for a in range(1, r):
            if k + m > K:
                continue
            c = _poch(F, F.frac(a, r) + k, m + 1)
            T.add("lin", ((a, k), (a, k + m)), c)
            if k == 0 and a == r - 1:
                T.add("shift", ((a, m),), -c * r)
    for k in range(1, m + 1):
        for a in range(1, r):
            c = _poch(F, F.frac(a, r) - k, m + 1)
            if k % 2:
                c = -c
            T.add("second_h2", ((r - a, k - 1), (a, m - k)), c / 2)
    return T


_TABLES = {
    ("airy", "tr"): lambda F, m, K, p: _airy_tr(F, m, K),
    ("airy", "geometric"): lambda F, m, K, p: _airy_geo(F, m, K),
    ("egdd", "tr"): _egdd_tr,
    ("egdd", "geometric"): _egdd_geo,
    ("r_bessel", "tr"): _rb_tr,
    ("r_bessel", "geometric"): _rb_geo,
}

_VARS = {
    ("airy", "tr"): "(0,k) = p_k at infinity",
    ("airy", "geometric"): "(0,k) = t_k",
    ("egdd", "tr"): "(0,k) = p^0_k, (1,k) = p^inf_k",
    ("egdd", "geometric"): "(0,k) = t^0_k on the image t^1 = 0",
    ("r_bessel", "tr"): "(0,k) = p_k at infinity",
    ("r_bessel", "geometric"): "(a,k) = t^a_k, a = 1..r-1",
}


def reference_operators(name: str, m: int, side: str = "tr", *, cutoff: int = 12,
                        F: Field | None = None, params: dict | None = None) -> ReferenceOperatorTable:
    """Transcribed operator table, truncated to variables of index <= cutoff.

    eGdd and r-Bessel tables are tabulated for m >= 0, Airy for m >= -1.
    """
    if (name, side) not in _TABLES:
        raise CatalogError(f"no reference table for {name!r} side {side!r}")
    lo = -1 if name == "airy" else 0
    if not (lo <= m <= M_RANGE[1]):
        raise CatalogError(f"m = {m} outside the tabulated range {lo}..{M_RANGE[1]}")
    if F is None:
        if name == "r_bessel":
            F = make_field(FieldSpec(backend="bigfloat"))
        else:
            F = RationalField()
    if name == "r_bessel" and F.exact:
        raise CatalogError("r_bessel tables need the bigfloat backend")
    T = _TABLES[(name, side)](F, m, cutoff, params)
    return ReferenceOperatorTable(name, side, m, TABLE_VERSION, T, _VARS[(name, side)])


# --- transport maps ---

def airy_map(F: Field, K: int) -> TransportMap:
    """t_k = (2k-1)!! p_{2k+1}."""
    return TransportMap({(0, k): {(0, 2 * k + 1): F.frac(_dfact(2 * k - 1))}
                         for k in range(0, (K - 1) // 2 + 1)}, "airy")


def egdd_map(F: Field, K: int) -> TransportMap:
    """t^0_k = k! (p^inf_{k+1} - p^0_{k+1}); t^1 = 0."""
    return TransportMap({(0, k): {(1, k + 1): F.frac(_fact(k)), (0, k + 1): -F.frac(_fact(k))}
                         for k in range(0, K)}, "egdd")


def r_bessel_map(F: Field, K: int, params: dict | None = None) -> TransportMap:
    """t^a_n = -xi^a/sqrt(-r) Gamma(a/r + n)/Gamma(a/r) p_{a + rn}."""
    r, _, sq, xi = _rb_vals(F, params)
    rows = {}
    for a in range(1, r):
        for n in range(0, K + 1):
            if a + r * n > K:
                break
            rows[(a, n)] = {(0, a + r * n): -(xi ** a) / sq * _poch(F, F.frac(a, r), n)}
    return TransportMap(rows, f"r_bessel_{r}")


def transport_map(name: str, F: Field, K: int, params: dict | None = None) -> TransportMap:
    if name == "airy":
        return airy_map(F, K)
    if name == "egdd":
        return egdd_map(F, K)
    if name == "r_bessel":
        return r_bessel_map(F, K, params)
    raise CatalogError(f"no transport map for {name!r}")


def t_window(name: str, K: int, params: dict | None = None) -> int:
    """Largest t-index whose image p-variables all have index <= K."""
    if name == "airy":
        return (K - 1) // 2
    if name == "egdd":
        return K - 1
    r = int((params or {}).get("r", 3))
    return (K - (r - 1)) // r


# --- Virasoro oracle ---

def _pivots(F: Field, ops: list[DescendentVirasoroOp]) -> dict:
    piv: dict = {}
    for op in ops:
        if len(op.r) != 1 or op.r[0] != 2:
            raise OracleError("the oracle handles a single boundary with r = 2 only")
        sh = {k[0]: v for k, v in op.table.canonical(F)["shift"].items()}
        if len(sh) != 1:
            raise OracleError(f"operator m={op.m} has {len(sh)} shift terms; triangular pivot not found")
        (b, s), = sh.items()
        if b in piv:
            raise OracleError(f"operators m={piv[b][0].m} and m={op.m} pivot on the same variable {b}")
        piv[b] = (op, s)
    return piv


def _msub(M: tuple, v: Var) -> tuple | None:
    lst = list(M)
    try:
        lst.remove(v)
    except ValueError:
        return None
    return tuple(lst)


def _madd(M: tuple, *vs: Var) -> tuple:
    return tuple(sorted(M + vs))


def _subsets(K: tuple):
    """Distinct sub-multisets (as sorted tuples) of the multiset K with their complements."""
    from collections import Counter
    from itertools import product as iproduct
    c = sorted(Counter(K).items())
    for choice in iproduct(*[range(mult + 1) for _, mult in c]):
        a, b = [], []
        for (v, mult), j in zip(c, choice):
            a += [v] * j
            b += [v] * (mult - j)
        yield tuple(a), tuple(b)


def virasoro_oracle_solve(ops: list[DescendentVirasoroOp], F: Field, max_chi: int,
                          degree_cutoff: int, verify: bool = True) -> dict:
    """Solve L_m Z = 0 for the stable correlators with 2g-2+n <= max_chi, total degree <= cutoff.

    Z = exp(sum_g hbar^(2g-2) F_g) with F_g = sum 1/n! <alpha_k1..alpha_kn>_g prod p_kj/kj.
    Each L_m carries exactly one dilaton-shift derivative d/dp_b; that variable is the pivot
    used to solve for every monomial containing it. The unstable part of F_0 is taken to vanish.
    Returns {(g, n): DescendentTensor}.
    """
    if not ops:
        raise OracleError("no operators given")
    cut = min(op.cutoff for op in ops)
    if cut < degree_cutoff:
        raise PrecisionError(f"operators known to index {cut} < degree cutoff {degree_cutoff}", cut)
    piv = _pivots(F, ops)
    cans = {op.m: op.table.canonical(F) for op, _ in piv.values()}
    pvars = sorted(piv)
    memo: dict = {}

    def f(g: int, M: tuple) -> Any:
        n = len(M)
        if g < 0 or 2 * g - 2 + n <= 0 or n == 0:
            return F.zero
        if any(v not in piv for v in M):
            return F.zero
        if sum(k for _, k in M) > degree_cutoff:
            raise PrecisionError("oracle recursion left the degree window", degree_cutoff)
        key = (g, M)
        if key in memo:
            return memo[key]
        b = max(M)
        op, s = piv[b]
        K = _msub(M, b)
        rest = residual(g, K, cans[op.m], skip=b)
        val = -rest / (s * (K.count(b) + 1))
        memo[key] = val
        return val

    def dF(g: int, K: tuple, b: Var) -> Any:
        """[p^K] d/dp_b F_g."""
        return f(g, _madd(K, b)) * (K.count(b) + 1)

    def residual(g: int, K: tuple, can: dict, skip: Var | None = None) -> Any:
        acc = F.zero
        n = len(K)
        if g == 0:
            if n == 0:
                acc += can["const_h2"].get((), F.zero)
            if n == 1:
                acc += can["lin_h2"].get(K, F.zero)
            if n == 2:
                acc += can["quad_h2"].get(K, F.zero)
        if g == 1 and n == 0:
            acc += can["const"].get((), F.zero)
        for (b,), s in can["shift"].items():
            if b != skip:
                acc += s * dF(g, K, b)
        for (a, b), l in can["lin"].items():
            Ka = _msub(K, a)
            if Ka is not None:
                acc += l * dF(g, Ka, b)
        for (a, b), s in can["second_h2"].items():
            # canonical folds the ordered pairs onto sorted keys, so s multiplies d_a d_b once
            acc += s * _d2(g - 1, K, a, b)
            for K1, K2 in _subsets(K):
                for g1 in range(0, g + 1):
                    acc += s * dF(g1, K1, a) * dF(g - g1, K2, b)
        return acc

    def _d2(g: int, K: tuple, a: Var, b: Var) -> Any:
        """[p^K] d^2/dp_a dp_b F_g."""
        M = _madd(K, a, b)
        ca, cb = K.count(a), K.count(b)
        if a == b:
            return f(g, M) * (ca + 2) * (ca + 1)
        return f(g, M) * (ca + 1) * (cb + 1)

    out: dict = {}
    for chi in range(1, max_chi + 1):
        for g in range(0, chi // 2 + 2):
            n = chi - 2 * g + 2
            if n < 1:
                continue
            T = DescendentTensor(g, n, F, degree_cutoff)
            for M in _monomials(pvars, n, degree_cutoff):
                c = f(g, M)
                if not F.is_zero(c):
                    T.set(M, c * _corr_factor(F, M))
            out[(g, n)] = T
    if verify:
        _verify(F, cans, residual, pvars, max_chi, degree_cutoff)
    return out


def _monomials(pvars: list, n: int, budget: int):
    def rec(prefix, start, left, room):
        if left == 0:
            yield tuple(prefix)
            return
        for j in range(start, len(pvars)):
            k = pvars[j][1]
            if k * left > room:
                break
            yield from rec(prefix + [pvars[j]], j, left - 1, room - k)
    yield from rec([], 0, n, budget)


def _corr_factor(F: Field, M: tuple) -> Any:
    """<alpha_M> = f(M) * prod k * prod multiplicity!."""
    from collections import Counter
    c = F.one
    for (_, k) in M:
        c = c * k
    for mult in Counter(M).values():
        c = c * _fact(mult)
    return c


def _verify(F, cans, residual, pvars, max_chi, cutoff) -> None:
    """Every equation [hbar^(2g-2) p^K] Z^-1 L_m Z = 0 inside the window must hold."""
    for m, can in sorted(cans.items()):
        top = max(k for ((_, k),) in can["shift"])
        for chi in range(1, max_chi + 1):
            for g in range(0, chi // 2 + 2):
                n = chi - 2 * g + 2
                if n < 1:
                    continue
                for K in _monomials(pvars, n - 1, cutoff - top):
                    r = residual(g, K, can)
                    if not F.is_zero(r):
                        raise OracleError(f"L_{m} equation at g={g}, p^{list(K)} fails by {F.render(r)}")
