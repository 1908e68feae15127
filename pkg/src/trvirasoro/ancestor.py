"""CohFT data read off the curve and the ancestor-side Virasoro checks.

Matrices are nested lists M[beta][gamma] = M^beta_gamma in the normalized
canonical basis; vector-valued series in psi are dicts {degree: [N scalars]}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import comb
from typing import Any, Iterable

from .curve import Chart, CurveData
from .ratcalc import RationalFunction, denominator_fully_accounted, residue_at
from .recursion import AncestorTensor, Label, Recursion, dfact
from .series import LaurentSeries, PrecisionError

CHECK_TOLERANCE = 1e-50

Matrix = list[list[Any]]


class ExtractionError(ArithmeticError):
    """R-matrix coefficients disagree between dzeta orders, or R is not symplectic."""


# --- small matrix helpers ---

def mat_zero(F, N: int) -> Matrix:
    return [[F.zero] * N for _ in range(N)]


def mat_id(F, N: int) -> Matrix:
    M = mat_zero(F, N)
    for i in range(N):
        M[i][i] = F.one
    return M


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    N = len(A)
    out = []
    for i in range(N):
        row = []
        for j in range(N):
            acc = A[i][0] * B[0][j]
            for t in range(1, N):
                acc = acc + A[i][t] * B[t][j]
            row.append(acc)
        out.append(row)
    return out


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(A: Matrix, c: Any) -> Matrix:
    return [[c * a for a in r] for r in A]


def mat_T(A: Matrix) -> Matrix:
    return [list(r) for r in zip(*A)]


def mat_vec(A: Matrix, v: list) -> list:
    return [sum((A[i][j] * v[j] for j in range(1, len(v))), A[i][0] * v[0]) for i in range(len(A))]


def diag(F, entries: list) -> Matrix:
    M = mat_zero(F, len(entries))
    for i, e in enumerate(entries):
        M[i][i] = e
    return M


def close(F, a: Any, b: Any, tol: float = CHECK_TOLERANCE) -> bool:
    if F.exact:
        return F.eq(a, b)
    scale = max(1.0, F.magnitude(a), F.magnitude(b))
    return F.magnitude(a - b) <= tol * scale


def mat_close(F, A: Matrix, B: Matrix, tol: float = CHECK_TOLERANCE) -> bool:
    return all(close(F, a, b, tol) for ra, rb in zip(A, B) for a, b in zip(ra, rb))


# --- reports ---

class Tally:
    """Accumulates LHS/RHS comparisons: exact equality, or the largest relative defect."""

    def __init__(self, F, tol: float = CHECK_TOLERANCE):
        self.F = F
        self.tol = tol
        self.count = 0
        self.first_bad: tuple | None = None
        self.max_abs = 0.0
        self.scale = 1.0

    def add(self, lhs: Any, rhs: Any, where: Any = None) -> None:
        F = self.F
        self.count += 1
        d = lhs - rhs
        if F.exact:
            if not F.is_zero(d) and self.first_bad is None:
                self.first_bad = (where, F.render(d))
            return
        self.scale = max(self.scale, F.magnitude(lhs), F.magnitude(rhs))
        self.max_abs = max(self.max_abs, F.magnitude(d))

    def merge(self, other: "Tally") -> None:
        self.count += other.count
        if self.first_bad is None:
            self.first_bad = other.first_bad
        self.max_abs = max(self.max_abs, other.max_abs)
        self.scale = max(self.scale, other.scale)

    @property
    def relative(self) -> float:
        return self.max_abs / self.scale

    @property
    def passed(self) -> bool:
        if self.F.exact:
            return self.first_bad is None
        return self.relative < self.tol

    @property
    def status(self) -> str:
        return "exact_zero" if self.F.exact else "max_defect"

    @property
    def defect(self) -> str:
        if self.F.exact:
            return "0" if self.first_bad is None else self.first_bad[1]
        return f"{self.relative:.3e}"

    def summary(self) -> dict:
        out = {"status": self.status, "defect": self.defect, "passed": self.passed,
               "comparisons": self.count}
        if self.first_bad is not None:
            out["first_mismatch"] = repr(self.first_bad[0])
        return out


@dataclass
class CheckReport:
    identity: str
    m: int | None
    g: int | None
    n: int | None
    status: str
    defect: str
    passed: bool
    per_gamma: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @classmethod
    def from_tally(cls, identity: str, m, g, n, tally: Tally, per_gamma=(), **details) -> "CheckReport":
        return cls(identity, m, g, n, tally.status, tally.defect, tally.passed,
                   list(per_gamma), dict(details))

    @classmethod
    def skip(cls, identity: str, m, g, n, reason: str) -> "CheckReport":
        return cls(identity, m, g, n, "skip", "", True, [], {"reason": reason})

    @property
    def skipped(self) -> bool:
        return self.status == "skip"

    def to_json(self) -> dict:
        return {"identity": self.identity, "m": self.m, "g": self.g, "n": self.n,
                "per_gamma": self.per_gamma, "status": self.status, "defect": self.defect,
                "passed": self.passed, **({"details": self.details} if self.details else {})}


# --- R-matrix, vacuum, T ---

@dataclass
class RMatrixSeries:
    F: Any
    R: list  # R[j] is an N x N matrix
    consistency_checked_to: int = 0

    @property
    def K(self) -> int:
        return len(self.R) - 1

    @property
    def N(self) -> int:
        return len(self.R[0])

    def inverse(self) -> list:
        """Coefficients of R(z)^(-1) to the same order."""
        F, N = self.F, self.N
        inv = [mat_id(F, N)]
        for n in range(1, len(self.R)):
            acc = mat_zero(F, N)
            for j in range(1, n + 1):
                acc = mat_add(acc, mat_mul(self.R[j], inv[n - j]))
            inv.append(mat_scale(acc, -1))
        return inv

    def symplectic_defect(self, tol: float = CHECK_TOLERANCE) -> int | None:
        """First k with sum_{a+b=k} (-1)^b R_a^T R_b != delta_{k,0}, or None."""
        F, N = self.F, self.N
        for k in range(len(self.R)):
            acc = mat_zero(F, N)
            scale = 1.0
            for a in range(k + 1):
                term = mat_mul(mat_T(self.R[a]), self.R[k - a])
                if not F.exact:
                    scale = max(scale, max(F.magnitude(x) for row in term for x in row))
                acc = mat_add(acc, term if (k - a) % 2 == 0 else mat_scale(term, -1))
            target = mat_id(F, N) if k == 0 else mat_zero(F, N)
            # relative to the largest summand on bigfloat
            if not mat_close(F, mat_scale(mat_sub(acc, target), 1 / scale) if not F.exact else acc,
                             mat_zero(F, N) if not F.exact else target, tol):
                return k
        return None

    def to_json(self) -> list:
        return [[[self.F.render(c) for c in row] for row in Rj] for Rj in self.R]


class LocalLegs:
    """Cached expansions of dzeta_k^beta in the eta-chart of each critical point."""

    def __init__(self, data: CurveData):
        self.data = data
        self._cache: dict = {}

    def __call__(self, gamma: int, lab: Label, order: int) -> LaurentSeries:
        key = (gamma, lab)
        s = self._cache.get(key)
        if s is None or s.trunc < order:
            ch = self.data.critical_chart(gamma)
            s = ch.differential(self.data.dzeta(*lab), order)
            self._cache[key] = s
        return s


def legs_for(data: CurveData) -> LocalLegs:
    legs = getattr(data, "_local_legs", None)
    if legs is None:
        legs = LocalLegs(data)
        data._local_legs = legs
    return legs


def r_matrix(data: CurveData, K: int, consistency: int | None = None,
             tol: float = CHECK_TOLERANCE) -> RMatrixSeries:
    """R_0..R_K from the principal parts of dzeta at each critical point.

    (R_j)^beta_gamma = -[eta^(-2(k-j)-2)] dzeta_k^beta|_gamma / (2(k-j)+1)!!, for any k >= j;
    the value is read at k = j and confirmed for every k up to ``consistency`` (default K).
    """
    F, N = data.F, data.N
    top = K if consistency is None else max(K, consistency)
    legs = legs_for(data)
    R = [mat_zero(F, N) for _ in range(K + 1)]
    seen = [[[False] * N for _ in range(N)] for _ in range(K + 1)]
    for k in range(top + 1):
        check = k <= (K if consistency is None else consistency)
        for beta in range(N):
            for gamma in range(N):
                if k > K and not check:
                    continue
                s = legs(gamma, (beta, k), -1)
                scale = max((F.magnitude(s[d]) for d in range(s.val, 0)), default=0.0)
                for d in range(s.val, 0):
                    # odd poles never occur in the local expansion; bigfloat noise is relative
                    if check and d % 2 and not (F.is_zero(s[d]) or F.magnitude(s[d]) <= tol * scale):
                        raise ExtractionError(f"odd pole eta^{d} in dzeta_{k}^{beta} at {gamma}")
                for j in range(0, min(k, K) + 1):
                    val = -s[-2 * (k - j) - 2] / dfact(2 * (k - j) + 1)
                    if not seen[j][beta][gamma]:
                        R[j][beta][gamma] = val
                        seen[j][beta][gamma] = True
                    elif check and not close(F, R[j][beta][gamma], val, tol):
                        raise ExtractionError(
                            f"R_{j}[{beta}][{gamma}] differs between dzeta orders (k={k})")
    out = RMatrixSeries(F, R, top if consistency is None else consistency)
    if not mat_close(F, R[0], mat_id(F, N), tol):
        raise ExtractionError("R_0 is not the identity")
    bad = out.symplectic_defect(tol)
    if bad is not None:
        raise ExtractionError(f"symplectic condition fails at order {bad}")
    return out


def vacuum(data: CurveData, K: int) -> list:
    """v_m^beta = -sum_gamma Res_{z^gamma} y dzeta_m^beta, as v[m][beta]."""
    F = data.F
    out = []
    for m in range(K + 1):
        row = []
        for beta in range(data.N):
            form = data.y * data.dzeta(beta, m)
            acc = F.zero
            for p in data.critical:
                acc = acc - residue_at(form, p)
            row.append(acc)
        out.append(row)
    return out


def unit_vector(F, N: int) -> list:
    return [F.one] * N


def t_vector(R: RMatrixSeries, v: list, K: int | None = None) -> list:
    """T(z) = z*1bar - z*R(z)^(-1) v(z); returns T[0..K+1] (T[0] = 0)."""
    F, N = R.F, R.N
    K = min(R.K, len(v) - 1) if K is None else K
    inv = R.inverse()
    one = unit_vector(F, N)
    T = [[F.zero] * N]
    for d in range(K + 1):
        acc = [F.zero] * N
        for j in range(d + 1):
            acc = [a + b for a, b in zip(acc, mat_vec(inv[j], v[d - j]))]
        T.append([(one[i] if d == 0 else F.zero) - acc[i] for i in range(N)])
    return T


def vacuum_from_t(R: RMatrixSeries, T: list) -> list:
    """v(z) = R(z)(1bar - T(z)/z), the inverse of t_vector."""
    F, N = R.F, R.N
    one = unit_vector(F, N)
    w = [[(one[i] if d == 0 else F.zero) - T[d + 1][i] for i in range(N)] for d in range(len(T) - 1)]
    out = []
    for d in range(len(w)):
        acc = [F.zero] * N
        for j in range(min(d, R.K) + 1):
            acc = [a + b for a, b in zip(acc, mat_vec(R.R[j], w[d - j]))]
        out.append(acc)
    return out


def t_from_local_y(data: CurveData, K: int) -> list:
    """T read from the odd part of y in each eta chart: y_odd = -sum (T_{i+1} - delta_{i0}) eta^(2i+1)/(2i+1)!!."""
    F, N = data.F, data.N
    T = [[F.zero] * N for _ in range(K + 2)]
    for gamma in range(N):
        Y = data.critical_chart(gamma).function(data.y, 2 * K + 2)
        for i in range(K + 1):
            T[i + 1][gamma] = -Y[2 * i + 1] * dfact(2 * i + 1) + (F.one if i == 0 else F.zero)
    return T


# --- homogeneity ---

@dataclass
class EulerData:
    """``homogeneous`` needs both the dzeta identity (a condition on x alone) and the
    vacuum condition (mu + delta/2 + m) v_m = -E v_(m+1), which is where y enters."""

    E: Matrix
    mu: Matrix
    homogeneous: bool
    defect: RationalFunction | None = None
    r_homogeneity_checked_to: int = -1
    curve_homogeneous: bool = False
    delta: Any = None
    vacuum_defect: int | None = None

    def to_json(self, F) -> dict:
        return {"E": [F.render(self.E[i][i]) for i in range(len(self.E))],
                "mu": [[F.render(c) for c in row] for row in self.mu],
                "homogeneous": self.homogeneous,
                "curve_homogeneous": self.curve_homogeneous,
                "delta": None if self.delta is None else F.render(self.delta),
                "vacuum_defect_at": self.vacuum_defect,
                "r_homogeneity_checked_to": self.r_homogeneity_checked_to}


def euler_matrix(data: CurveData) -> Matrix:
    return diag(data.F, list(data.xcrit))


def check_homogeneity(data: CurveData, K: int = 4, R: RMatrixSeries | None = None,
                      tol: float = CHECK_TOLERANCE) -> EulerData:
    F, N = data.F, data.N
    R = R if R is not None and R.K >= K + 1 else r_matrix(data, K + 1)
    E = euler_matrix(data)
    mu = mat_sub(mat_mul(R.R[1], E), mat_mul(E, R.R[1]))
    homogeneous = True
    worst = None
    for beta in range(N):
        lhs = (data.x - data.xcrit[beta]) * data.dzeta(beta, 1)
        rhs = RationalFunction.const(F, F.zero)
        for gamma in range(N):
            c = mu[beta][gamma] + (F.frac(3, 2) if beta == gamma else F.zero)
            rhs = rhs + data.dzeta(gamma, 0) * c
        d = lhs - rhs
        if F.exact:
            ok = d.is_zero()
        else:
            ok = all(close(F, c, F.zero, tol) for c in d.num)
        if not ok:
            homogeneous = False
            worst = d
    out = EulerData(E, mu, homogeneous, worst, curve_homogeneous=homogeneous)
    if homogeneous:
        for m in range(K):
            lhs = mat_sub(mat_mul(R.R[m + 1], E), mat_mul(E, R.R[m + 1]))
            rhs = mat_add(mat_scale(R.R[m], m), mat_mul(mu, R.R[m]))
            if not mat_close(F, lhs, rhs, tol):
                raise ExtractionError(f"[R_{m + 1}, E] != (m + mu) R_{m} although the curve is homogeneous")
        out.r_homogeneity_checked_to = K - 1
        out.delta, out.vacuum_defect = _vacuum_homogeneity(data, E, mu, K, tol)
        out.homogeneous = out.vacuum_defect is None
    return out


def _vacuum_homogeneity(data: CurveData, E: Matrix, mu: Matrix, K: int, tol: float) -> tuple:
    """delta read off from m = 0 and the first m < K where the vacuum condition fails (or None)."""
    F, N = data.F, data.N
    v = vacuum(data, K)
    # w_m = (mu + m) v_m + E v_(m+1) must equal -(delta/2) v_m
    w = [[sum((mu[i][j] * v[m][j] for j in range(N)), F.zero) + m * v[m][i] + E[i][i] * v[m + 1][i]
          for i in range(N)] for m in range(K)]
    piv = max(range(N), key=lambda i: F.magnitude(v[0][i]))
    if F.is_zero(v[0][piv]):
        return None, 0
    delta = -2 * w[0][piv] / v[0][piv]
    for m in range(K):
        for i in range(N):
            if not close(F, w[m][i], -delta * v[m][i] / 2, tol):
                return delta, m
    return delta, None


# --- the D operator ---

class DOperator:
    """D = R(z)(E + z^2 d/dz + 3z/2)R(z)^(-1) on vector Laurent series, exact through degree ``hi``.

    With ``mu`` given, the homogeneous form E + z^2 d/dz + (mu + 3/2) z is used instead.
    """

    def __init__(self, F, E: Matrix, R: RMatrixSeries | None = None, mu: Matrix | None = None):
        self.F = F
        self.E = E
        self.N = len(E)
        self.R = R
        self.mu = mu
        self.Rinv = R.inverse() if R is not None else None

    def _series_mul(self, Ms: list, V: dict, lo: int, hi: int) -> dict:
        if hi - lo >= len(Ms):
            raise ValueError(f"R known to order {len(Ms) - 1}, need {hi - lo}: raise the cutoff")
        out = {}
        for d in range(lo, hi + 1):
            acc = None
            for j in range(d - lo + 1):
                w = V.get(d - j)
                if w is None:
                    continue
                t = mat_vec(Ms[j], w)
                acc = t if acc is None else [a + b for a, b in zip(acc, t)]
            if acc is not None:
                out[d] = acc
        return out

    def _core(self, W: dict, lo: int, hi: int) -> dict:
        F = self.F
        out = {}
        for d in range(lo, hi + 1):
            acc = [self.E[i][i] * c for i, c in enumerate(W[d])] if d in W else None
            prev = W.get(d - 1)
            if prev is not None:
                c = F.frac(2 * d + 1, 2)
                t = [c * p for p in prev]
                if self.mu is not None:
                    t = [a + b for a, b in zip(t, mat_vec(self.mu, prev))]
                acc = t if acc is None else [a + b for a, b in zip(acc, t)]
            if acc is not None:
                out[d] = acc
        return out

    def apply(self, V: dict, lo: int, hi: int) -> dict:
        if self.mu is not None or self.R is None:
            return self._core(V, lo, hi)
        W = self._series_mul(self.Rinv, V, lo, hi)
        W = self._core(W, lo, hi)
        return self._series_mul(self.R.R, W, lo, hi)

    def power(self, V: dict, p: int, lo: int, hi: int) -> dict:
        for _ in range(p):
            V = self.apply(V, lo, hi)
        return V

    def basis(self, beta: int, k: int) -> dict:
        v = [self.F.zero] * self.N
        v[beta] = self.F.one
        return {k: v}


def c_tables(D: DOperator, m: int, kmin: int, kmax: int, cutoff: int) -> dict:
    """(C_m)^{l,gamma}_{k,beta} for kmin <= k <= kmax and l <= cutoff: {(k, beta, l, gamma): value}."""
    F = D.F
    out = {}
    for k in range(kmin, kmax + 1):
        for beta in range(D.N):
            V = D.power(D.basis(beta, k), m + 1, k, cutoff)
            for l, vec in V.items():
                for gamma, c in enumerate(vec):
                    if not F.is_zero(c):
                        out[(k, beta, l, gamma)] = c
    return out


@dataclass
class AncestorVirasoroOp:
    m: int
    constant: Any
    quadratic: dict  # (beta, gamma) -> coefficient of s_0^beta s_0^gamma / hbar^2
    linear: dict  # ((k, beta), (l, gamma)) -> coefficient of stilde_k^beta d/ds_l^gamma
    second: dict  # ((k, beta), (l, gamma)) -> coefficient of hbar^2 d^2/ds_k^beta ds_l^gamma
    shift: list  # v_{k-1}: stilde_k = s_k - shift[k]
    cutoff: int

    def to_json(self, F) -> dict:
        def block(d):
            return [[list(a), list(b), F.render(v)] for (a, b), v in sorted(d.items())]
        return {"m": self.m, "constant": F.render(self.constant),
                "quadratic": [[b, c, F.render(v)] for (b, c), v in sorted(self.quadratic.items())],
                "linear": block(self.linear), "second_order": block(self.second),
                "dilaton_shift": [[F.render(c) for c in row] for row in self.shift],
                "cutoff": self.cutoff}


def ancestor_virasoro(data: CurveData, m: int, cutoff: int, R: RMatrixSeries | None = None,
                      v: list | None = None, homogeneous_mu: Matrix | None = None) -> AncestorVirasoroOp:
    """The operator L_m with C_m tables truncated at psi-degree ``cutoff``."""
    if m < -1:
        raise ValueError("m must be >= -1")
    if cutoff < m + 1:
        raise ValueError(f"cutoff {cutoff} too small for m = {m}")
    F, N = data.F, data.N
    need = cutoff + m + 3
    R = R if R is not None and R.K >= need else r_matrix(data, need)
    v = v if v is not None and len(v) > cutoff else vacuum(data, cutoff)
    E = euler_matrix(data)
    D = DOperator(F, E, R, homogeneous_mu)
    xs = list(data.xcrit)
    const = F.zero
    for b in range(N):
        const = const + R.R[1][b][b] * xs[b] ** (m + 1) / 2
        if m + 1:
            const = const + F.frac(m + 1, 16) * xs[b] ** m
    quad = {(b, b): xs[b] ** (m + 1) / 2 for b in range(N) if not F.is_zero(xs[b] ** (m + 1))}
    tabs = c_tables(D, m, -m - 2, cutoff - 1, cutoff)
    linear = {}
    second = {}
    for (k, beta, l, gamma), c in tabs.items():
        if k >= -1 and l >= 0:
            linear[((k + 1, beta), (l, gamma))] = c
        kk = -k - 2
        if 0 <= kk <= m - 1 and 0 <= l <= m - kk - 1:
            second[((kk, beta), (l, gamma))] = c * (-1) ** (kk + 1) / 2
    shift = [[F.zero] * N] + [list(v[k - 1]) for k in range(1, cutoff + 1)]
    return AncestorVirasoroOp(m, const, quad, linear, second, shift, cutoff)


# --- residue helpers in eta charts ---

def x_weights(F, xg: Any, m: int) -> list:
    """x^(m+1)/eta = sum_j w_j eta^(2j-1) with x = x^gamma + eta^2/2."""
    return [comb(m + 1, j) * xg ** (m + 1 - j) / F.frac(2 ** j) for j in range(m + 2)]


def coef_product(f: LaurentSeries, g: LaurentSeries, t: int) -> Any:
    """[eta^t] (f g), checking that both factors are known far enough."""
    F = f.F
    if f.is_zero() or g.is_zero():
        return F.zero
    lo, hi = f.val, t - g.val
    if hi > f.trunc - 1 or t - lo > g.trunc - 1:
        raise PrecisionError(f"product coefficient {t} out of range", max(hi, t - lo) + 1)
    acc = F.zero
    for i in range(lo, hi + 1):
        a = f[i]
        if F.is_zero(a):
            continue
        b = g[t - i]
        if not F.is_zero(b):
            acc = acc + a * b
    return acc


def bar(s: LaurentSeries) -> LaurentSeries:
    """u(eta) -> -u(-eta), the pullback of a differential under the involution."""
    return -(s.subs_neg())


def pair_moments(f: LaurentSeries, g: LaurentSeries, jmax: int) -> list:
    """[eta^(-2j)] (f * gbar) for j = 0..jmax."""
    gb = bar(g)
    return [coef_product(f, gb, -2 * j) for j in range(jmax + 1)]


def contract_moments(F, moments: list, w: list) -> Any:
    acc = F.zero
    for j, c in enumerate(w):
        if j < len(moments):
            acc = acc + c * moments[j]
    return acc


# --- the per-critical-point residue identity ---

def spectator_weight(R: tuple, e: tuple, probe: dict) -> Any:
    """sum over distinct arrangements of the label multiset R onto positions with exponents e.

    None stands for an exact zero; an empty R has weight 1.
    """
    if not R:
        return 1
    acc = None
    for perm in set(permutations(R)):
        t = None
        for lab, d in zip(perm, e):
            c = probe[lab].get(d)
            if c is None:
                t = None
                break
            t = c if t is None else t * c
        if t is not None:
            acc = t if acc is None else acc + t
    return acc


def exponent_multisets(n: int, dmax: int, total: int, start: int = 0) -> Iterable[tuple]:
    if n == 0:
        yield ()
        return
    for d in range(start, min(dmax, total) + 1):
        for rest in exponent_multisets(n - 1, dmax, total - d, d):
            yield (d,) + rest


class _Probe:
    """Expansion data of dzeta labels and of B in a fixed spectator chart."""

    def __init__(self, data: CurveData, chart: Chart, order: int):
        self.data = data
        self.chart = chart
        self.order = order
        self._labels: dict = {}
        self._bcols: dict = {}

    def label(self, lab: Label) -> dict:
        c = self._labels.get(lab)
        if c is None:
            s = self.chart.differential(self.data.dzeta(*lab), self.order)
            c = {d: v for d, v in s.items() if d >= 0}
            self._labels[lab] = c
        return c

    def table(self, labels: Iterable[Label]) -> dict:
        return {lab: self.label(lab) for lab in labels}

    def bergman_columns(self, gamma: int, eta_order: int) -> list:
        """[B(z(eta), probe) coefficient of s^d, d = 0..order] as eta-series."""
        key = gamma
        cur = self._bcols.get(key)
        if cur is not None and cur[0] >= eta_order:
            return cur[1]
        ch = self.data.critical_chart(gamma)
        B = self.data.bergman(ch, self.chart, eta_order, self.order)
        cols = [B.row(d, "eta") for d in range(self.order + 1)]
        self._bcols[key] = (eta_order, cols)
        return cols


def _tensor_source(eng: Recursion, overrides: dict | None):
    def get(g: int, n: int) -> AncestorTensor:
        if overrides and (g, n) in overrides:
            return overrides[(g, n)]
        return eng.tensor(g, n)
    return get


def default_probe_chart(data: CurveData) -> Chart:
    return data.boundary_chart(0)


def check_lemma_residue(eng: Recursion, ms: Iterable[int], g: int, n: int, *,
                        chart: Chart | None = None, probe_order: int | None = None,
                        max_total: int | None = None, tensors: dict | None = None,
                        tol: float = CHECK_TOLERANCE) -> list[CheckReport]:
    """Per critical point: Res x^(m+1) y omega_{g,n+1} = 1/2 Res (x^(m+1)/dx) R_{g,n}(z, zbar).

    Spectators z_1..z_n all sit in ``chart`` and the identity is compared on every
    exponent multiset e (each e_j <= probe_order, sum <= max_total).  Returns one
    report per m; each also carries the summed identity computed through the global
    residue theorem when all poles of y lie at boundaries or declared zeros of x.
    """
    ms = sorted(set(ms))
    if 2 * g - 2 + n + 1 <= 0:
        raise ValueError("(g, n+1) must be stable")
    data = eng.data
    F, N = data.F, data.N
    get = _tensor_source(eng, tensors)
    Dout = 3 * g - 3 + n + 1
    chart = chart or default_probe_chart(data)
    probe_order = probe_order if probe_order is not None else 2 * Dout + 1
    max_total = max_total if max_total is not None else 2 * max(Dout - 1, 0) + n
    probe = _Probe(data, chart, probe_order)
    jmax = max(ms) + 1
    eta_order = 2 * Dout + 6
    legs = legs_for(data)
    labels_all = data.labels(Dout)
    ptab = probe.table(labels_all)
    es = list(exponent_multisets(n, probe_order, max_total))

    T_main = get(g, n + 1)
    # LHS residues, global form
    lhs_res: dict = {}
    for (a,) in {(lab,) for key in T_main.entries for lab in key}:
        form0 = data.y * data.dzeta(*a)
        for m in ms:
            form = form0 * (data.x ** (m + 1)) if m + 1 else form0
            lhs_res[(m, a)] = [residue_at(form, p) for p in data.critical]
    slices = T_main.slices()

    coef_cache: dict = {}

    def leg_coefficients(e):
        """sum over spectator slices of the tensor, weighted at exponents e, per first leg."""
        out = coef_cache.get(e)
        if out is None:
            out = {}
            for R, av in slices.items():
                w = spectator_weight(R, e, ptab)
                if w is None:
                    continue
                for a, val in av.items():
                    out[a] = out.get(a, F.zero) + val * w
            coef_cache[e] = out
        return out

    def lhs_value(m, gamma, e):
        acc = F.zero
        for a, c in leg_coefficients(e).items():
            acc = acc + lhs_res[(m, a)][gamma] * c
        return acc

    summed_poles = list(({b.point for b in data.boundaries} | set(data.x_zeros or []))
                        - set(data.critical))
    summed_ok = (data.x_zeros is not None and
                 denominator_fully_accounted(data.y, summed_poles))
    summed_res: dict = {}
    if summed_ok:
        for (m, a) in lhs_res:
            form = data.y * data.dzeta(*a) * (data.x ** (m + 1) if m + 1 else 1)
            acc = F.zero
            for p in summed_poles:
                acc = acc - residue_at(form, p)
            summed_res[(m, a)] = acc

    tallies = {m: [Tally(F, tol) for _ in range(N)] for m in ms}
    summed = {m: Tally(F, tol) for m in ms}
    for gamma in range(N):
        w_of = {m: x_weights(F, data.xcrit[gamma], m) for m in ms}
        bcols = None
        W_cache: dict = {}

        def W(gp: int, ep: tuple) -> LaurentSeries:
            """omega_{gp,|ep|+1}(z(eta), spectators at exponents ep) as an eta-series."""
            nonlocal bcols
            key = (gp, ep)
            s = W_cache.get(key)
            if s is not None:
                return s
            if gp == 0 and len(ep) == 1:
                if bcols is None:
                    bcols = probe.bergman_columns(gamma, eta_order)
                s = bcols[ep[0]]
            else:
                T = get(gp, len(ep) + 1)
                s = LaurentSeries.zero(F, eta_order, "eta")
                for R, av in T.slices().items():
                    w = spectator_weight(R, ep, ptab)
                    if w is None or (w != 1 and F.is_zero(w)):
                        continue
                    for a, val in av.items():
                        s = s + legs(gamma, a, eta_order).scale(val * w)
            W_cache[key] = s
            return s

        pair_cache: dict = {}

        def pair_term(R_slice_key, pairs: dict) -> list:
            mom = pair_cache.get(R_slice_key)
            if mom is None:
                mom = [F.zero] * (jmax + 1)
                for (a, b), val in pairs.items():
                    pm = pair_moments(legs(gamma, a, eta_order), legs(gamma, b, eta_order), jmax)
                    mom = [x + val * y for x, y in zip(mom, pm)]
                pair_cache[R_slice_key] = mom
            return mom

        rB_mom = None
        if g == 1 and n == 0:
            rB = data.involution_kernel(gamma, 2 * jmax + 2)
            rB_mom = [rB[-2 * j] if -2 * j >= rB.val else F.zero for j in range(jmax + 1)]
        T_minus = get(g - 1, n + 2) if g >= 1 and not (g == 1 and n == 0) else None
        pslices = T_minus.pair_slices() if T_minus is not None else {}

        for e in es:
            mom = [F.zero] * (jmax + 1)
            if rB_mom is not None:
                mom = list(rB_mom)
            for R, pairs in pslices.items():
                w = spectator_weight(R, e, ptab)
                if w is None or (w != 1 and F.is_zero(w)):
                    continue
                pm = pair_term(R, pairs)
                mom = [x + w * y for x, y in zip(mom, pm)]
            positions = range(n)
            for size in range(n + 1):
                for I in combinations(positions, size):
                    eI = tuple(e[i] for i in I)
                    eJ = tuple(e[i] for i in positions if i not in I)
                    for g1 in range(g + 1):
                        g2 = g - g1
                        if (g1 == 0 and not eI) or (g2 == 0 and not eJ):
                            continue
                        f1, f2 = W(g1, eI), W(g2, eJ)
                        if f1.is_zero() or f2.is_zero():
                            continue
                        pm = pair_moments(f1, f2, jmax)
                        mom = [x + y for x, y in zip(mom, pm)]
            for m in ms:
                rhs = contract_moments(F, mom, w_of[m]) / 2
                lhs = lhs_value(m, gamma, e)
                tallies[m][gamma].add(lhs, rhs, (gamma, e))
    reports = []
    for m in ms:
        total = Tally(F, tol)
        per = []
        for gamma in range(N):
            total.merge(tallies[m][gamma])
            per.append({"gamma": gamma, **tallies[m][gamma].summary()})
        details = {"exponents": len(es), "probe_chart": repr(chart)}
        if summed_ok:
            # the summed identity: global-residue LHS against the sum of per-gamma right sides
            for e in es:
                acc_l = F.zero
                for a, c in leg_coefficients(e).items():
                    acc_l = acc_l + summed_res[(m, a)] * c
                acc_r = F.zero
                for gamma in range(N):
                    acc_r = acc_r + lhs_value(m, gamma, e)
                summed[m].add(acc_l, acc_r, ("summed", e))
            total.merge(summed[m])
            details["summed"] = summed[m].summary()
        reports.append(CheckReport.from_tally("lemma", m, g, n, total, per, **details))
    return reports


# --- the auxiliary identities behind the operator form ---

class AncestorContext:
    """R, vacuum and D data shared by the operator-form identities."""

    def __init__(self, data: CurveData, K: int = 12, L: int = 3, mmax: int = 3):
        self.data = data
        self.K = K
        self.L = L
        self.mmax = mmax
        self.R = r_matrix(data, K + L + mmax + 4, consistency=min(K, 8))
        self.v = vacuum(data, K)
        self.E = euler_matrix(data)
        self.D = DOperator(data.F, self.E, self.R)


def check_prop32_identities(data: CurveData, m: int, *, K: int = 12, L: int = 3,
                            chart: Chart | None = None, probe_order: int = 6,
                            ctx: AncestorContext | None = None,
                            tol: float = CHECK_TOLERANCE) -> list[CheckReport]:
    """The five series identities (0)-(4) turning the residue identity into the operator L_m."""
    F, N = data.F, data.N
    ctx = ctx if ctx is not None and ctx.K >= K and ctx.L >= L and ctx.mmax >= m else \
        AncestorContext(data, K, L, max(m, 0))
    D, R = ctx.D, ctx.R
    legs = legs_for(data)
    chart = chart or default_probe_chart(data)
    probe = _Probe(data, chart, probe_order)
    xs = list(data.xcrit)
    W = [x_weights(F, xs[g], m) for g in range(N)]
    jm = m + 1
    order = 2 * (K + L) + 8
    reports = []

    def res_pair(gamma, f, g):
        return contract_moments(F, pair_moments(f, g, jm), W[gamma])

    # (0) the vacuum identity
    t0 = Tally(F, tol)
    rhs = D.power({k: list(ctx.v[k]) for k in range(K + 1)}, m + 1, 0, K)
    for k in range(K + 1):
        for beta in range(N):
            form = data.y * data.dzeta(beta, k) * (data.x ** (m + 1) if m + 1 else 1)
            lhs = F.zero
            for p in data.critical:
                lhs = lhs - residue_at(form, p)
            t0.add(lhs, rhs.get(k, [F.zero] * N)[beta], (k, beta))
    reports.append(CheckReport.from_tally("prop32-0", m, None, None, t0))

    # (1) B(z1,z) B(zbar,z2)
    t1 = Tally(F, tol)
    cols = [probe.bergman_columns(gamma, order) for gamma in range(N)]
    z0 = [probe.label((gamma, 0)) for gamma in range(N)]
    for a in range(probe_order + 1):
        for b in range(a, probe_order + 1):
            lhs = F.zero
            rhs = F.zero
            for gamma in range(N):
                lhs = lhs - res_pair(gamma, cols[gamma][a], cols[gamma][b])
                rhs = rhs + xs[gamma] ** (m + 1) * z0[gamma].get(a, F.zero) * z0[gamma].get(b, F.zero)
            t1.add(lhs, rhs, (a, b))
    reports.append(CheckReport.from_tally("prop32-1", m, None, None, t1))

    # (2) B(z, zbar)
    t2 = Tally(F, tol)
    lhs = F.zero
    rhs = F.zero
    for gamma in range(N):
        rB = data.involution_kernel(gamma, 2 * jm + 2)
        lhs = lhs - contract_moments(F, [rB[-2 * j] if -2 * j >= rB.val else F.zero
                                         for j in range(jm + 1)], W[gamma])
        rhs = rhs + R.R[1][gamma][gamma] * xs[gamma] ** (m + 1)
        if m + 1:
            rhs = rhs + F.frac(m + 1, 8) * xs[gamma] ** m
    t2.add(lhs, rhs, "trace")
    reports.append(CheckReport.from_tally("prop32-2", m, None, None, t2))

    # (3) dzeta_l^sigma(z) against sum ebar_beta psi^k dzeta_k^beta(zbar)
    t3 = Tally(F, tol)
    for sigma in range(N):
        for l in range(L + 1):
            img = D.power(D.basis(sigma, -l - 2), m + 1, -l - 2, K)
            sign = (-1) ** (l + 1)
            for k in range(K + 1):
                for beta in range(N):
                    lhs = F.zero
                    for gamma in range(N):
                        lhs = lhs - res_pair(gamma, legs(gamma, (sigma, l), order),
                                             legs(gamma, (beta, k), order))
                    r = img.get(k, [F.zero] * N)[beta] * sign
                    t3.add(lhs, r, (sigma, l, k, beta))
    reports.append(CheckReport.from_tally("prop32-3", m, None, None, t3))

    # (4) B(z1, z) against sum ebar_beta psi^k dzeta_k^beta(zbar)
    t4 = Tally(F, tol)
    imgs = {(b, k): D.power(D.basis(b, k - 1), m + 1, k - 1, K) for b in range(N) for k in range(K + 2)}
    ptab = probe.table(data.labels(K + 1))
    for k in range(K + 1):
        for beta in range(N):
            for a in range(probe_order + 1):
                lhs = F.zero
                for gamma in range(N):
                    lhs = lhs - res_pair(gamma, cols[gamma][a], legs(gamma, (beta, k), order))
                rhs = F.zero
                for (b2, k2), img in imgs.items():
                    c = img.get(k)
                    if c is None or F.is_zero(c[beta]):
                        continue
                    rhs = rhs + c[beta] * ptab[(b2, k2)].get(a, F.zero)
                t4.add(lhs, rhs, (k, beta, a))
    reports.append(CheckReport.from_tally("prop32-4", m, None, None, t4))
    return reports
