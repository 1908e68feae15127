from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from trvirasoro.scalars import FieldSpec, make_field
from trvirasoro.series import BiSeries, LaurentSeries, PrecisionError, SeriesError

QQ = make_field(FieldSpec())
t = sp.Symbol("t")
N = 10

small = st.fractions(min_value=-9, max_value=9, max_denominator=5)
coeff_lists = st.lists(small, min_size=1, max_size=6)


def ls(cs, val=0, trunc=N):
    return LaurentSeries(QQ, val, cs, trunc)


def to_sympy(s: LaurentSeries, hi=N):
    return sum(sp.Rational(str(s[d])) * t ** d for d in range(s.val, hi + 1))


def sympy_coeffs(expr, lo, hi):
    ser = sp.series(expr, t, 0, hi + 1).removeO()
    return [sp.expand(ser).coeff(t, d) for d in range(lo, hi + 1)]


def assert_matches(s: LaurentSeries, expr, lo, hi):
    want = sympy_coeffs(expr, lo, hi)
    got = [sp.Rational(str(s[d])) for d in range(lo, hi + 1)]
    assert got == want


@settings(max_examples=40, deadline=None)
@given(coeff_lists, coeff_lists)
def test_product_is_commutative_and_truncation_safe(a, b):
    A, B = ls(a), ls(b)
    assert (A * B).eq(B * A)
    assert (A * B).trunc >= N


@settings(max_examples=40, deadline=None)
@given(coeff_lists)
def test_invert_roundtrip(a):
    A = ls(a)
    if A.is_zero():
        return
    prod = A * A.invert()
    assert prod.eq(LaurentSeries.const(QQ, 1), upto=prod.trunc)


@settings(max_examples=40, deadline=None)
@given(st.lists(small, min_size=1, max_size=5).filter(lambda c: c[0] != 0))
def test_revert_is_compositional_inverse(c):
    A = ls(c, val=1)
    R = A.revert()
    assert A.compose(R).eq(LaurentSeries.monomial(QQ, 1), upto=N)
    assert R.compose(A).eq(LaurentSeries.monomial(QQ, 1), upto=N)


@settings(max_examples=30, deadline=None)
@given(st.lists(small, min_size=0, max_size=5), st.integers(2, 4))
def test_nth_root_power(rest, n):
    A = ls([Fraction(1)] + rest)
    root = A.nth_root(n, 1)
    assert (root ** n).eq(A, upto=N)


def test_invert_against_sympy():
    A = ls([1, -1, -1])
    assert_matches(A.invert(), 1 / (1 - t - t ** 2), 0, N)


def test_laurent_inverse_against_sympy():
    A = ls([2, 3, 0, 1], val=2)
    inv = A.invert()
    assert inv.val == -2
    assert_matches(inv.shift(2), t ** 2 / (2 * t ** 2 + 3 * t ** 3 + t ** 5), 0, N - 4)


def test_compose_against_sympy():
    outer = ls([1, 2, 0, -1])
    inner = ls([1, 1], val=1)
    assert_matches(outer.compose(inner), 1 + 2 * (t + t ** 2) - (t + t ** 2) ** 3, 0, N)


def test_revert_against_sympy():
    # inverse of t + t^2 is (sqrt(1 + 4t) - 1)/2
    A = ls([1, 1], val=1)
    assert_matches(A.revert(), (sp.sqrt(1 + 4 * t) - 1) / 2, 1, N)


def test_nth_root_against_sympy():
    A = ls([4, 1, 3])
    assert_matches(A.nth_root(2, -2), -sp.sqrt(4 + t + 3 * t ** 2), 0, N)


def test_derive_integrate_residue():
    A = ls([5, 1, 2, 3], val=-2)
    assert A.residue() == 1
    exact = A - LaurentSeries.monomial(QQ, -1, 1)
    assert exact.integrate().derive().eq(exact)
    assert_matches(ls([1, 1, 1, 1]).derive(), 1 + 2 * t + 3 * t ** 2, 0, 2)


def test_precision_error_beyond_window():
    A = ls([1, 2], trunc=3)
    with pytest.raises(PrecisionError):
        A[4]
    with pytest.raises(PrecisionError):
        A.require(5)


def test_revert_needs_valuation_one():
    with pytest.raises(SeriesError):
        ls([1, 1]).revert()


def test_nth_root_branch_mismatch():
    with pytest.raises(SeriesError):
        ls([4, 1]).nth_root(2, 3)


def test_biseries_product_and_transpose():
    f = ls([1, 1], trunc=4)
    g = ls([2, 0, 1], trunc=4)
    B = BiSeries.from_first(f, 4, 4) * BiSeries.from_second(g, 4, 4)
    assert B.coefficient(1, 2) == 1
    assert B.coefficient(1, 0) == 2
    assert B.transpose().coefficient(2, 1) == 1
