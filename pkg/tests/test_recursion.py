import itertools
import os

import pytest
from hypothesis import given, settings, strategies as st

from trvirasoro.curve import validate
from trvirasoro.descendent import descendent_tensor
from trvirasoro.ratcalc import INFINITY, RationalFunction, denominator_fully_accounted, global_residue_sum, residue_at
from trvirasoro.recursion import AncestorTensor, Recursion, dfact

STABLE = [(0, 3), (1, 1), (0, 4), (1, 2), (2, 1)]
ENGINES = ["airy", "egdd", "r_bessel"]


def wk(desc, ks):
    """Intersection number <tau_k1 ... tau_kn> from Airy descendent correlators."""
    val = desc[tuple((0, 2 * k + 1) for k in ks)]
    for k in ks:
        val = val / dfact(2 * k + 1)
    return val


@pytest.mark.parametrize("g, ks, expected", [
    (0, (0, 0, 0), "1"),
    (1, (1,), "1/24"),
    (0, (0, 0, 0, 1), "1"),
    (1, (1, 1), "1/24"),
    (1, (0, 2), "1/24"),
    (2, (4,), "1/1152"),
    (2, (2, 3), "29/5760"),
])
def test_witten_kontsevich_numbers(airy_eng, g, ks, expected):
    F = airy_eng.F
    desc = descendent_tensor(airy_eng, g, len(ks), 2 * sum(ks) + len(ks))
    assert wk(desc, ks) == F.parse(expected)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=4))
def test_string_equation(airy_eng, ks):
    n = len(ks) + 1
    total = sum(ks)
    g, rem = divmod(total - n + 3, 3)
    if rem or g < 0 or g > 2 or 2 * g - 3 + n <= 0:
        return
    F = airy_eng.F
    big = descendent_tensor(airy_eng, g, n, 2 * total + n)
    lhs = wk(big, (0,) + tuple(ks))
    rhs = F.zero
    small = descendent_tensor(airy_eng, g, n - 1, 2 * total + n)
    for j, k in enumerate(ks):
        if k:
            rhs += wk(small, ks[:j] + [k - 1] + ks[j + 1:])
    assert lhs == rhs


@pytest.mark.parametrize("name", ENGINES)
@pytest.mark.parametrize("g, n", STABLE)
def test_tensor_symmetry_and_support(engines, name, g, n):
    eng = engines[name]
    T = eng.tensor(g, n)
    assert T.support_ok()
    assert all(sum(k for _, k in key) <= 3 * g - 3 + n for key, _ in T.items())
    for key, v in list(T.items())[:20]:
        for perm in itertools.permutations(key):
            assert eng.F.eq(T[perm], v)


@pytest.mark.parametrize("name", ENGINES)
@pytest.mark.parametrize("g, j", [(0, 1), (1, 0), (1, 2), (2, 1)])
def test_global_residue_theorem(engines, name, g, j):
    eng = engines[name]
    data, F = eng.data, eng.F
    n = 3 if g == 0 else 1
    # spectators frozen on the label (0, 0), leaving a form in the first variable
    omega = RationalFunction.const(F, 0)
    for key, v in eng.tensor(g, n).items():
        rest = list(key[1:])
        if all(x == (0, 0) for x in rest):
            omega = omega + data.dzeta(*key[0]) * v
    form = omega * data.x ** j
    points = list(data.critical) + [b.point for b in data.boundaries if not b.point.is_infinite] + [INFINITY]
    assert denominator_fully_accounted(omega, data.critical)
    residues = [residue_at(form, p) for p in points]
    scale = max(F.magnitude(r) for r in residues)
    assert F.magnitude(sum(residues, F.zero)) <= 1e-60 * max(scale, 1.0)
    if F.exact:
        assert F.is_zero(global_residue_sum(form, points))


@pytest.mark.parametrize("name", ENGINES)
def test_eta_branch_covariance(engines, name):
    eng = engines[name]
    data, F = eng.data, eng.F
    sig = tuple(-s if b == 0 else s for b, s in enumerate(data.sigma))
    flipped = Recursion(validate(data.spec.with_branches(sig)))
    for g, n in [(0, 3), (1, 1), (1, 2)]:
        a, b = eng.tensor(g, n), flipped.tensor(g, n)
        for key, v in a.items():
            s = 1
            for beta, _ in key:
                s *= sig[beta] * data.sigma[beta]
            assert F.eq(b[key], v * s)
        if F.exact:
            cut = 3 * (3 * g - 3 + n) + 3
            assert descendent_tensor(flipped, g, n, cut).eq(descendent_tensor(eng, g, n, cut))


@pytest.mark.parametrize("c", ["3", "-1/2"])
def test_y_scaling(airy_data, airy_eng, c):
    F = airy_data.F
    cc = F.parse(c)
    num, den = airy_data.spec.y
    scaled_y = tuple(F.render(F.parse(a) * cc) for a in num)
    eng = Recursion(validate(airy_data.spec.with_y(scaled_y, den)))
    for g, n in [(0, 3), (1, 1), (0, 4), (1, 2), (2, 1)]:
        factor = cc ** (2 - 2 * g - n)
        assert eng.tensor(g, n).eq(airy_eng.tensor(g, n).scaled(factor))
        cut = 3 * (3 * g - 3 + n) + 3
        assert descendent_tensor(eng, g, n, cut).eq(descendent_tensor(airy_eng, g, n, cut).scaled(factor))


@pytest.mark.parametrize("name", ["egdd", "r_bessel"])
def test_determinism_under_workers(engines, name):
    eng = engines[name]
    par = Recursion(eng.data, workers=4)
    for g, n in [(0, 4), (1, 2), (2, 1)]:
        assert par.tensor(g, n).to_json() == eng.tensor(g, n).to_json()


def test_critical_order_irrelevant(egdd_data, egdd_eng):
    rev = Recursion(egdd_data, critical_order=[1, 0])
    for g, n in [(1, 2), (2, 1)]:
        assert rev.tensor(g, n).eq(egdd_eng.tensor(g, n))


def test_cache_is_byte_identical(egdd_data, tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d, w in zip(dirs, (1, 3)):
        eng = Recursion(egdd_data, workers=w, cache_dir=str(d))
        eng.tensor(1, 2)
    names = sorted(os.listdir(dirs[0]))
    assert names == sorted(os.listdir(dirs[1]))
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    # a warm engine loads instead of recomputing and sees the same tensor
    warm = Recursion(egdd_data, cache_dir=str(dirs[0]))
    assert warm.tensor(1, 2).eq(Recursion(egdd_data).tensor(1, 2))


def test_tensor_json_roundtrip(egdd_eng):
    T = egdd_eng.tensor(1, 2)
    assert AncestorTensor.from_json(T.to_json(), egdd_eng.F).eq(T)


def test_unstable_rejected(airy_eng):
    with pytest.raises(ValueError):
        airy_eng.tensor(0, 2)
