import json
from importlib import resources

import jsonschema
import pytest

from trvirasoro import catalog
from trvirasoro.catalog import CatalogError, OracleError
from trvirasoro.curve import CurveError, CurveSpec, validate
from trvirasoro.descendent import descendent_tensor, descendent_virasoro
from trvirasoro.recursion import Recursion

DATA = resources.files("trvirasoro") / "data"


def schema():
    return json.loads((DATA / "curve_spec.schema.json").read_text())


@pytest.mark.parametrize("fname", ["airy.json", "egdd_1_4.json", "r_bessel_3_1.json", "egdd_symbolic.json"])
def test_shipped_specs_validate(fname):
    doc = json.loads((DATA / "v1" / fname).read_text())
    jsonschema.validate(doc, schema())
    spec = CurveSpec.from_json(doc)
    if fname != "egdd_symbolic.json":
        validate(spec)


def test_shipped_specs_match_constructors():
    pairs = {"airy.json": catalog.airy(), "egdd_1_4.json": catalog.egdd(1, 4),
             "r_bessel_3_1.json": catalog.r_bessel(3, 1), "egdd_symbolic.json": catalog.egdd_symbolic()}
    for fname, spec in pairs.items():
        assert CurveSpec.from_json(json.loads((DATA / "v1" / fname).read_text())) == spec


def test_schema_rejects_garbage():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"name": "x", "x": {"num": [1]}}, schema())


def test_egdd_field_choice():
    assert catalog.egdd(1, 4).field.generator == ("i", ("1", "0", "1"))
    assert catalog.egdd(1, 2).field.backend == "bigfloat"
    validate(catalog.egdd(1, 2))
    validate(catalog.egdd(-1, 4))
    with pytest.raises(CurveError):
        catalog.egdd(1, 2, backend="exact")


@pytest.mark.parametrize("args", [dict(u=2, v=2), dict(u=0, v=3)])
def test_egdd_degenerate(args):
    with pytest.raises(CurveError):
        catalog.egdd(**args)


@pytest.mark.parametrize("args", [dict(r=1), dict(r=3, eps=0)])
def test_r_bessel_degenerate(args):
    with pytest.raises(CurveError):
        catalog.r_bessel(**args)


def test_r_bessel_other_r():
    data = validate(catalog.r_bessel(4, 2, precision_bits=160))
    assert data.N == 3
    assert data.boundaries[0].r == 4


def test_by_name():
    assert catalog.by_name("airy") == catalog.airy()
    assert catalog.by_name("egdd", {"u": "1", "v": "9"}) == catalog.egdd(1, 9)
    with pytest.raises(CatalogError):
        catalog.by_name("nope")
    with pytest.raises(CatalogError):
        catalog.by_name("airy", {"u": "1"})
    with pytest.raises(CatalogError):
        catalog.by_name("egdd", {"w": "1"})


def test_reference_ranges():
    with pytest.raises(CatalogError):
        catalog.reference_operators("egdd", -1)
    with pytest.raises(CatalogError):
        catalog.reference_operators("airy", 13)
    with pytest.raises(CatalogError):
        catalog.reference_operators("airy", 0, "other")
    ref = catalog.reference_operators("airy", 1, cutoff=6)
    doc = ref.to_json(ref.table and __import__("trvirasoro.scalars", fromlist=["RationalField"]).RationalField())
    assert doc["version"] == catalog.TABLE_VERSION and doc["m"] == 1


def test_transport_map_graded(egdd_data):
    tm = catalog.transport_map("egdd", egdd_data.F, 8)
    assert tm.check_graded(egdd_data.F)


def test_oracle_small(airy_data):
    D = 10
    ops = [descendent_virasoro(airy_data, m, D) for m in range(-1, 4)]
    sol = catalog.virasoro_oracle_solve(ops, airy_data.F, 3, D)
    eng = Recursion(airy_data)
    for (g, n), T in sol.items():
        assert descendent_tensor(eng, g, n, D).eq(T)


def test_oracle_rejects_two_boundaries(egdd_data):
    ops = [descendent_virasoro(egdd_data, m, 6) for m in range(0, 3)]
    with pytest.raises(OracleError):
        catalog.virasoro_oracle_solve(ops, egdd_data.F, 2, 6)
