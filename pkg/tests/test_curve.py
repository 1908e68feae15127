import json

import pytest

from trvirasoro import catalog
from trvirasoro.curve import BoundarySpec, CurveError, CurveSpec, validate
from trvirasoro.ratcalc import INFINITY, denominator_fully_accounted, global_residue_sum, order_at
from trvirasoro.recursion import dfact
from trvirasoro.scalars import FieldSpec

CURVES = ["airy_data", "egdd_data", "rb_data"]


def _airy_like(**kw):
    base = dict(name="t", field=FieldSpec(), x=(("0", "0", "1/2"), ("1",)), y=(("0", "1"), ("1",)),
                critical_points=("0",), boundaries=(BoundarySpec("inf", 2, "1/2", "1"),))
    base.update(kw)
    return CurveSpec(**base)


@pytest.mark.parametrize("fixture", CURVES)
def test_dzeta_local_shape(fixture, request):
    data = request.getfixturevalue(fixture)
    F = data.F
    for beta in range(data.N):
        ch = data.critical_chart(beta)
        X = ch.function(data.x, 5)
        assert F.eq(X[2], F.frac(1, 2)) and F.is_zero(X[1]) and F.is_zero(X[3])
        for k in range(3):
            s = ch.differential(data.dzeta(beta, k), 1)
            assert s.val == -2 * k - 2
            assert F.eq(s[-2 * k - 2], F(-dfact(2 * k + 1)))
            assert F.is_zero(s[-1])


@pytest.mark.parametrize("fixture", CURVES)
def test_dzeta_poles_and_global_residues(fixture, request):
    data = request.getfixturevalue(fixture)
    F = data.F
    pts = list(data.critical) + [INFINITY]
    for beta in range(data.N):
        for k in range(3):
            w = data.dzeta(beta, k)
            assert denominator_fully_accounted(w, data.critical)
            assert F.is_zero(global_residue_sum(w, pts))
            if F.exact:
                assert order_at(w, data.critical[beta]) == -2 * k - 2


def test_eta_branch_flips_slope(egdd_data):
    flipped = validate(egdd_data.spec.with_branches((-1, 1)))
    F = egdd_data.F
    assert F.eq(flipped.eta_slope(0), -egdd_data.eta_slope(0))
    assert F.eq(flipped.eta_slope(1), egdd_data.eta_slope(1))


@pytest.mark.parametrize("spec", [catalog.airy(), catalog.egdd(1, 4), catalog.r_bessel(3, 1), catalog.egdd_symbolic()])
def test_spec_json_roundtrip(spec):
    doc = json.loads(json.dumps(spec.to_json()))
    assert CurveSpec.from_json(doc) == spec


def test_lambda_expansion_inverts_x(egdd_data):
    F = egdd_data.F
    for i, b in enumerate(egdd_data.boundaries):
        ch = egdd_data.boundary_chart(i)
        X = ch.function(egdd_data.x, 4)
        # x = scale * lambda^r with lambda = 1/mu
        assert F.eq(X[-b.r], b.scale)
        for d in range(-b.r + 1, 5):
            assert F.is_zero(X[d])


@pytest.mark.parametrize("kw, fragment", [
    (dict(boundaries=(BoundarySpec("inf", 3, "1/2", "1"),)), "pole order"),
    (dict(boundaries=(BoundarySpec("inf", 2, "1/2", "2"),)), "branch"),
    (dict(boundaries=()), "not declared"),
    (dict(critical_points=("1",)), "does not vanish"),
    (dict(critical_points=()), "declared"),
    (dict(y=(("1", "0", "1"), ("1",))), "dy vanishes"),
    (dict(y=(("1",), ("0", "1"))), "pole at the critical"),
    (dict(eta_branches=(2,)), "eta_branches"),
    (dict(x_zeros=("1",)), "not a zero"),
    (dict(x=(("1",), ("1",))), "constant"),
])
def test_validation_errors(kw, fragment):
    with pytest.raises(CurveError, match=fragment):
        validate(_airy_like(**kw))


def test_non_simple_critical_point():
    spec = _airy_like(x=(("0", "0", "0", "1/3"), ("1",)), boundaries=(BoundarySpec("inf", 3, "1/3", "1"),))
    with pytest.raises(CurveError):
        validate(spec)


def test_malformed_json():
    with pytest.raises(CurveError):
        CurveSpec.from_json({"name": "x"})
