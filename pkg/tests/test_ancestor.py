import pytest

from trvirasoro.ancestor import (AncestorContext, ExtractionError, check_homogeneity, check_lemma_residue,
                                 check_prop32_identities, ancestor_virasoro, mat_mul, r_matrix, t_from_local_y,
                                 t_vector, vacuum, vacuum_from_t)
from trvirasoro.curve import validate
from trvirasoro.ratcalc import RationalFunction
from trvirasoro.recursion import AncestorTensor

CURVES = ["airy_data", "egdd_data", "rb_data"]


def perturbed_egdd(data):
    F = data.F
    y = data.y + RationalFunction.z(F) ** 2 / 100
    spec = data.spec.with_y(tuple(F.render(c) for c in y.num), tuple(F.render(c) for c in y.den))
    return validate(spec)


@pytest.mark.parametrize("fixture", CURVES)
def test_r_matrix_symplectic_and_consistent(fixture, request):
    data = request.getfixturevalue(fixture)
    R = r_matrix(data, 6, consistency=8)
    assert R.symplectic_defect() is None
    assert R.consistency_checked_to == 8


def test_airy_r_is_identity(airy_data):
    R = r_matrix(airy_data, 6)
    assert all(R.R[j] == [[0]] for j in range(1, 7))


def test_r1_offdiagonal_from_bergman(egdd_data):
    # Res Res B/(eta eta) picks B at the two critical points for beta != gamma
    F = egdd_data.F
    R = r_matrix(egdd_data, 2)
    z = [p.value for p in egdd_data.critical]
    c = [egdd_data.eta_slope(b) for b in range(2)]
    want = F.inv((z[0] - z[1]) ** 2 * c[0] * c[1])
    assert R.R[1][0][1] == want and R.R[1][1][0] == want


def test_mu_squares_to_quarter(egdd_data):
    eu = check_homogeneity(egdd_data, 5)
    F = egdd_data.F
    mu2 = mat_mul(eu.mu, eu.mu)
    assert mu2 == [[F.frac(1, 4), 0], [0, F.frac(1, 4)]]


@pytest.mark.parametrize("fixture", CURVES)
def test_t_vector_two_routes(fixture, request):
    data = request.getfixturevalue(fixture)
    F = data.F
    K = 5
    R = r_matrix(data, K)
    v = vacuum(data, K)
    T = t_vector(R, v, K)
    T_loc = t_from_local_y(data, K)
    for d in range(K + 2):
        for b in range(data.N):
            assert F.eq(T[d][b], T_loc[d][b]) or F.magnitude(T[d][b] - T_loc[d][b]) < 1e-60 * (1 + F.magnitude(T[d][b]))
    back = vacuum_from_t(R, T)
    for m in range(K + 1):
        for b in range(data.N):
            assert F.magnitude(back[m][b] - v[m][b]) <= 1e-60 * (1 + F.magnitude(v[m][b]))


@pytest.mark.parametrize("fixture, delta", [("airy_data", "0"), ("egdd_data", "3")])
def test_homogeneity_verdicts(fixture, delta, request):
    data = request.getfixturevalue(fixture)
    eu = check_homogeneity(data, 5)
    assert eu.homogeneous and eu.curve_homogeneous
    assert eu.r_homogeneity_checked_to == 4
    assert data.F.eq(eu.delta, data.F.parse(delta))


def test_perturbed_y_breaks_homogeneity(egdd_data):
    eu = check_homogeneity(perturbed_egdd(egdd_data), 5)
    assert eu.curve_homogeneous
    assert not eu.homogeneous
    assert eu.vacuum_defect == 0


def test_homogeneous_d_operator_gives_same_tables(egdd_data):
    eu = check_homogeneity(egdd_data, 5)
    F = egdd_data.F
    for m in range(-1, 3):
        plain = ancestor_virasoro(egdd_data, m, 6)
        hom = ancestor_virasoro(egdd_data, m, 6, homogeneous_mu=eu.mu)
        assert plain.to_json(F) == hom.to_json(F)


@pytest.mark.parametrize("eng_name", ["airy", "egdd"])
@pytest.mark.parametrize("g, n", [(0, 2), (1, 0), (1, 1), (0, 3), (2, 0)])
def test_lemma_exact(engines, eng_name, g, n):
    for rep in check_lemma_residue(engines[eng_name], range(-1, 4), g, n):
        assert rep.passed and rep.status == "exact_zero", rep.to_json()


@pytest.mark.parametrize("g, n", [(0, 2), (1, 0), (1, 1)])
def test_lemma_r_bessel(rb_eng, g, n):
    for rep in check_lemma_residue(rb_eng, range(-1, 4), g, n):
        assert rep.passed and float(rep.defect) < 1e-50


def test_lemma_detects_tampering(egdd_eng):
    T = egdd_eng.tensor(1, 2)
    bad = AncestorTensor(1, 2, T.F, dict(T.entries))
    key = next(iter(T.entries))
    bad.set(key, T[key] * 2)
    reps = check_lemma_residue(egdd_eng, [0, 1], 1, 1, tensors={(1, 2): bad})
    assert not any(r.passed for r in reps)


@pytest.mark.parametrize("fixture, ms", [("airy_data", range(-1, 4)), ("egdd_data", range(0, 3))])
def test_prop32_small(fixture, ms, request):
    data = request.getfixturevalue(fixture)
    ctx = AncestorContext(data, 6, 2, 3)
    for m in ms:
        for rep in check_prop32_identities(data, m, K=6, L=2, ctx=ctx):
            assert rep.passed and rep.status == "exact_zero", rep.to_json()


def test_prop32_r_bessel_low_depth(rb_data):
    ctx = AncestorContext(rb_data, 6, 2, 3)
    for rep in check_prop32_identities(rb_data, 1, K=6, L=2, ctx=ctx):
        assert rep.passed, rep.to_json()


def test_ancestor_operator_rejects_bad_m(airy_data):
    with pytest.raises(ValueError):
        ancestor_virasoro(airy_data, -2, 4)
    with pytest.raises(ValueError):
        ancestor_virasoro(airy_data, 5, 3)
