import csv
import io
import json

import pytest

from trvirasoro import catalog, cli
from trvirasoro.series import PrecisionError


def run(*argv):
    buf = io.StringIO()
    code = cli.main(list(argv), out=buf)
    return code, buf.getvalue()


def lines(text):
    return [json.loads(x) for x in text.splitlines() if x.strip()]


def test_analyze_airy():
    code, out = run("analyze", "--curve", "airy")
    doc = json.loads(out)
    assert code == 0
    assert len(doc["critical_points"]) == 1 and doc["boundaries"][0]["r"] == 2
    assert doc["homogeneous"] is True and doc["mu"] == [["0"]]
    assert doc["hypothesis"]["-1"]["holds"] is True


def test_analyze_egdd():
    code, out = run("analyze", "--curve", "egdd")
    doc = json.loads(out)
    assert code == 0
    assert [c["point"] for c in doc["critical_points"]] == ["2", "-2"]
    assert doc["hypothesis"]["-1"] == {"holds": False, "poles": ["-1", "-4"]}
    assert doc["delta"] == "3"


def test_analyze_spec_file(tmp_path):
    path = tmp_path / "curve.json"
    path.write_text(json.dumps(catalog.egdd(1, 9).to_json()))
    code, out = run("analyze", "--curve", str(path))
    assert code == 0 and json.loads(out)["name"] == "egdd_1_9"


def test_malformed_spec(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x"}')
    code, out = run("analyze", "--curve", str(path))
    assert code == 2 and "error" in json.loads(out)


def test_invalid_curve(tmp_path):
    spec = catalog.airy().to_json()
    spec["critical_points"] = ["1"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    code, out = run("analyze", "--curve", str(path))
    assert code == 2 and json.loads(out)["error"]["kind"] == "CurveError"


def test_invariants_json_and_csv():
    code, out = run("invariants", "--curve", "airy", "--kind", "descendent", "-g", "1", "-n", "1", "--degree", "3")
    doc = json.loads(out)
    assert code == 0
    assert {"indices": [[0, 3]], "value": "1/8", "g": 1, "n": 1} in doc["entries"]
    code, out = run("invariants", "--curve", "airy", "--kind", "ancestor", "-g", "0", "-n", "3", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows


def test_unstable_invariants():
    code, out = run("invariants", "--curve", "airy", "--kind", "ancestor", "-g", "0", "-n", "2")
    assert code == 2


def test_check_descendent_with_gate():
    code, out = run("check", "--curve", "egdd", "--identity", "descendent", "-m", "-1..2", "--gn", "1,1",
                    "--degree", "6")
    recs = lines(out)
    assert code == 0
    by_m = {r["m"]: r for r in recs if r.get("identity") == "descendent"}
    assert by_m[-1]["status"] == "skip"
    assert all(by_m[m]["status"] == "exact_zero" for m in (0, 1, 2))
    assert recs[-1]["summary"]["failed"] == 0


def test_check_lemma_and_prop41():
    code, out = run("check", "--curve", "airy", "--identity", "lemma", "-m", "-1..2", "--gn", "1,1")
    assert code == 0 and all(r["passed"] for r in lines(out)[:-1])
    code, out = run("check", "--curve", "r_bessel", "--identity", "prop41", "-m", "0..1", "--gn", "1,0")
    assert code == 0


def test_check_symplectic_and_homogeneity():
    code, out = run("check", "--curve", "egdd", "--identity", "symplectic", "-K", "6")
    assert code == 0 and lines(out)[0]["status"] == "exact"
    code, out = run("check", "--curve", "egdd", "--identity", "homogeneity", "-K", "5")
    assert code == 0 and lines(out)[0]["details"]["homogeneous"] is True


def test_operators_transport():
    code, out = run("operators", "--curve", "egdd", "-m", "2", "--transport", "--degree", "10")
    doc = json.loads(out)
    assert code == 0 and doc["diff"] == [] and doc["mode"] == "compare"
    code, out = run("operators", "--curve", "r_bessel", "-m", "1", "--transport", "--degree", "8")
    assert code == 0 and json.loads(out)["mode"] == "report-only"


def test_operators_reference_mismatch_fails():
    code, out = run("operators", "--curve", "airy", "-m", "-1", "--reference", "--degree", "8")
    doc = json.loads(out)
    assert code == 1 and len(doc["reference_diff"]) == 1


def test_usage_errors():
    assert run("analyze")[0] == 2
    assert run("frobnicate")[0] == 2
    assert run("check", "--curve", "airy", "--identity", "lemma", "-m", "x..y")[0] == 2
    assert run("analyze", "--curve", "egdd", "--param", "w=3")[0] == 2
    assert run("--help")[0] == 0


def test_precision_exit_code(monkeypatch):
    def boom(*a, **k):
        raise PrecisionError("window too small", 9)
    monkeypatch.setattr(cli, "cmd_analyze", boom)
    code, out = run("analyze", "--curve", "airy")
    assert code == 3 and json.loads(out)["error"]["kind"] == "precision"


def test_cache_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(cli.CACHE_ENV, str(tmp_path))
    code, _ = run("invariants", "--curve", "egdd", "--kind", "ancestor", "-g", "1", "-n", "1")
    assert code == 0 and any(tmp_path.iterdir())
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    run("invariants", "--curve", "egdd", "--kind", "ancestor", "-g", "1", "-n", "1", "--workers", "3")
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "trvirasoro", "analyze", "--curve", "airy"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["name"] == "airy"
