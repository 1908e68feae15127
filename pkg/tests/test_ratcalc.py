import sympy as sp
from hypothesis import given, settings, strategies as st

from trvirasoro.ratcalc import (INFINITY, RationalFunction, denominator_fully_accounted, expand_at, finite,
                                global_residue_sum, order_at, pole_divisor_check, residue_at)
from trvirasoro.scalars import FieldSpec, make_field

QQ = make_field(FieldSpec())
z = sp.Symbol("z")

ints = st.integers(-5, 5)
roots = st.lists(st.integers(-4, 4), min_size=1, max_size=4)
numerators = st.lists(ints, min_size=1, max_size=5)


def poly_from_roots(rs):
    p = [QQ.one]
    for r in rs:
        q = [QQ.zero] * (len(p) + 1)
        for i, c in enumerate(p):
            q[i] += -r * c
            q[i + 1] += c
        p = q
    return p


def to_sympy(f: RationalFunction):
    num = sum(sp.Rational(str(c)) * z ** i for i, c in enumerate(f.num))
    den = sum(sp.Rational(str(c)) * z ** i for i, c in enumerate(f.den))
    return num / den


@settings(max_examples=40, deadline=None)
@given(numerators, roots)
def test_residues_match_sympy(num, rs):
    f = RationalFunction(QQ, [QQ(c) for c in num], poly_from_roots(rs))
    if f.is_zero():
        return
    expr = to_sympy(f)
    for r in set(rs):
        assert sp.Rational(str(residue_at(f, finite(QQ, r)))) == sp.residue(expr, z, r)
    # residue at infinity of f dz is -Res_{w=0} f(1/w)/w^2
    w = sp.Symbol("w")
    want = -sp.residue(expr.subs(z, 1 / w) / w ** 2, w, 0)
    assert sp.Rational(str(residue_at(f, INFINITY))) == want


@settings(max_examples=40, deadline=None)
@given(numerators, roots)
def test_global_residue_theorem(num, rs):
    f = RationalFunction(QQ, [QQ(c) for c in num], poly_from_roots(rs))
    points = [finite(QQ, r) for r in set(rs)] + [INFINITY]
    assert denominator_fully_accounted(f, points)
    assert QQ.is_zero(global_residue_sum(f, points))


@settings(max_examples=30, deadline=None)
@given(numerators, roots, st.integers(-4, 4))
def test_expansion_matches_sympy(num, rs, c):
    f = RationalFunction(QQ, [QQ(k) for k in num], poly_from_roots(rs))
    if f.is_zero():
        return
    p = finite(QQ, c)
    s = expand_at(f, p, 6)
    ser = sp.series(to_sympy(f).subs(z, z + c), z, 0, 7).removeO()
    for d in range(s.val, 7):
        assert sp.Rational(str(s[d])) == sp.expand(ser).coeff(z, d)
    assert order_at(f, p) == s.val


def test_order_at_infinity():
    Z = RationalFunction.z(QQ)
    f = (Z ** 3 + 1) / (Z - 2)
    assert order_at(f, INFINITY) == -2
    assert order_at(f, finite(QQ, 2)) == -1
    assert order_at(f, finite(QQ, -1)) == 1


def test_pole_divisor_check():
    Z = RationalFunction.z(QQ)
    f = 1 / ((Z - 1) ** 2 * (Z + 3))
    assert pole_divisor_check(f, [finite(QQ, 1), finite(QQ, -3)])
    assert not pole_divisor_check(f, [finite(QQ, 1)])
    assert not pole_divisor_check(Z ** 2, [finite(QQ, 0)])
    assert pole_divisor_check(Z ** 2, [INFINITY])


def test_reduction_and_substitution():
    Z = RationalFunction.z(QQ)
    f = (Z ** 2 - 1) / (Z - 1)
    assert f.eq(Z + 1)
    g = f.substitute(Z * 2)
    assert g.eq(Z * 2 + 1)
    assert f.derive().eq(RationalFunction.const(QQ, 1))
