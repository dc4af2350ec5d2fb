import json
import math
from pathlib import Path

import pytest

from caffine import catalog as cat
from caffine.cli import dumps, main
from helpers import perturbed_sphere

GOLDEN = Path(__file__).parent / "golden"


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def sphere_file(tmp_path):
    path = tmp_path / "sphere.json"
    cat.make_quadric(2, 1).save(path)
    return path


@pytest.fixture
def sl3_file(tmp_path):
    path = tmp_path / "sl3.json"
    cat.make_det_sym(3).save(path)
    return path


def test_verify_sphere(sphere_file, tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = _run(["verify", "--chart", sphere_file, "--grid", 7, "--tol", "1e-9", "-o", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] is True and rep["points"] == 49


def test_classify_sl3(sl3_file, capsys):
    code, out, _ = _run(["classify", "--chart", sl3_file, "--point", "0,0,0,0,0"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["label"] == "SL_R(3)"
    assert rep["k0"] == 2 and rep["p"] == 0


def test_classify_expect_mismatch(sl3_file, capsys):
    code, out, _ = _run(["classify", "--chart", sl3_file, "--expect", "SL_C(3)"], capsys)
    assert code == 1
    assert json.loads(out)["expected_label"] == "SL_C(3)"


def test_verify_perturbed_sphere(tmp_path, capsys):
    path = tmp_path / "p.json"
    perturbed_sphere().save(path)
    code, out, _ = _run(["verify", "--chart", path], capsys)
    assert code == 1
    rep = json.loads(out)
    assert rep["max_residual"] > 1e-3 and rep["worst_point"] is not None


def test_reports_are_byte_identical(sl3_file, capsys):
    a = _run(["classify", "--chart", sl3_file, "--seed", 5], capsys)[1]
    b = _run(["classify", "--chart", sl3_file, "--seed", 5], capsys)[1]
    assert a == b


def test_jobs_do_not_change_report(tmp_path, capsys):
    path = tmp_path / "p.json"
    perturbed_sphere().save(path)
    a = _run(["verify", "--chart", path, "--grid", 4, "--jobs", 1], capsys)[1]
    b = _run(["verify", "--chart", path, "--grid", 4, "--jobs", 2], capsys)[1]
    assert a == b


def test_seed_from_environment(sl3_file, capsys, monkeypatch):
    monkeypatch.setenv("CAFFINE_SEED", "17")
    assert json.loads(_run(["classify", "--chart", sl3_file], capsys)[1])["seed"] == 17
    assert json.loads(_run(["classify", "--chart", sl3_file, "--seed", 3], capsys)[1])["seed"] == 3
    monkeypatch.setenv("CAFFINE_SEED", "x")
    assert _run(["classify", "--chart", sl3_file], capsys)[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--chart", "missing.json"],
        ["verify", "--chart", "{sphere}", "--grid", 1],
        ["verify", "--chart", "{sphere}", "--tol", "-1"],
        ["invariants", "--chart", "{sphere}", "--point", "0.1"],
        ["invariants", "--chart", "{sphere}", "--point", "2,0"],
        ["invariants", "--chart", "{sphere}", "--point", "a,b"],
        ["frobnicate"],
        ["catalog", "emit", "nope"],
        ["catalog-emit", "power", "alphas=[-1,1,1]"],
        ["catalog-emit", "power", "alphas"],
        ["catalog-emit", "power", "beta=2"],
    ],
)
def test_invalid_input_exit_2(argv, sphere_file, capsys):
    argv = [str(sphere_file) if a == "{sphere}" else a for a in argv]
    code, out, err = _run(argv, capsys)
    assert code == 2
    body = json.loads(out)["error"]
    assert set(body) == {"code", "message", "location"}
    assert body["message"] and err.startswith("caffine: ")


def test_malformed_chart_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x", "n": 1, "components": ["u1", "v1"], "domain": [[0, 1]]}')
    code, out, _ = _run(["invariants", "--chart", path], capsys)
    assert code == 2
    err = json.loads(out)["error"]
    assert err["code"] == "UnknownIdentifier"
    assert err["location"] == {"component": 1, "position": 0}


def test_numerical_failure_exit_3(tmp_path, capsys):
    path = tmp_path / "plane.json"
    path.write_text(
        json.dumps({"name": "plane", "n": 2, "components": ["u1", "u2", "1 + u1 + u2"],
                    "domain": [[-0.3, 0.3], [-0.3, 0.3]]})
    )
    code, out, _ = _run(["invariants", "--chart", path], capsys)
    assert code == 3
    assert json.loads(out)["error"]["code"] == "DegenerateMetric"


def test_catalog_list_and_emit(tmp_path, capsys):
    code, out, _ = _run(["catalog-list"], capsys)
    ids = [e["id"] for e in json.loads(out)["entries"]]
    assert code == 0 and ids == list(cat.CATALOG)
    assert _run(["catalog", "list"], capsys)[1] == out
    path = tmp_path / "s.json"
    code, _, _ = _run(["catalog", "emit", "sphere", "n=3", "-o", path], capsys)
    assert code == 0
    from caffine.geometry import ImmersionChart

    assert ImmersionChart.load(path) == cat.make_quadric(3, 1)


def test_calabi_compose_and_decompose(tmp_path, capsys):
    cat.make_quadric(1, 1).save(tmp_path / "circle.json")
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"lambda": 2, "left": "circle.json", "right": {"point": [1.0]}}))
    chart = tmp_path / "prod.json"
    assert _run(["calabi-compose", "--spec", spec, "-o", chart], capsys)[0] == 0
    code, out, _ = _run(["calabi-decompose", "--chart", chart, "--grid", 2], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert rep["structure"]["kind"] == "point"
    assert rep["structure"]["lambda"] == pytest.approx(2.0, rel=1e-8)


def test_calabi_compose_bad_spec(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"lambda": -1, "left": {"n": 1, "components": ["u1", "1"], "domain": [[0, 1]]}, "right": {"point": [1]}}))
    code, out, _ = _run(["calabi-compose", "--spec", spec], capsys)
    assert code == 2 and json.loads(out)["error"]["code"] == "InvalidLambda"
    spec.write_text("{")
    assert _run(["calabi-compose", "--spec", spec], capsys)[0] == 2


def test_dumps_number_format():
    text = dumps({"a": 0.1, "b": float("nan"), "c": [1, 2.0, -0.0], "d": True, "e": None})
    data = json.loads(text)
    assert data == {"a": 0.1, "b": None, "c": [1, 2.0, 0.0], "d": True, "e": None}
    assert "0.10000000000000001" in text
    assert float("0.10000000000000001") == 0.1


@pytest.mark.parametrize(
    "name,argv",
    [
        ("verify_sphere", ["verify", "--chart", "{sphere}", "--grid", 7, "--tol", "1e-9"]),
        ("classify_sl3", ["classify", "--chart", "{sl3}", "--point", "0,0,0,0,0"]),
        ("invariants_case_b", ["invariants", "--chart", "{case_b}", "--point", "0.1,0.2"]),
    ],
)
def test_golden_reports(name, argv, tmp_path, capsys):
    charts = {"sphere": cat.make_quadric(2, 1), "sl3": cat.make_det_sym(3), "case_b": cat.make_case_b(2)}
    paths = {}
    for key, ch in charts.items():
        # chart names, not file paths, appear in reports
        paths[key] = tmp_path / f"{key}.json"
        ch.save(paths[key])
    argv = [str(paths[a[1:-1]]) if isinstance(a, str) and a.startswith("{") else a for a in argv]
    code, out, _ = _run(argv, capsys)
    assert code == 0
    golden = GOLDEN / f"{name}.json"
    got = json.loads(out)
    want = json.loads(golden.read_text())
    _assert_close(got, want)


def _assert_close(got, want, path="$"):
    if isinstance(want, dict):
        assert set(got) == set(want), path
        for k in want:
            _assert_close(got[k], want[k], f"{path}.{k}")
    elif isinstance(want, list):
        assert len(got) == len(want), path
        for i, (g, w) in enumerate(zip(got, want)):
            _assert_close(g, w, f"{path}[{i}]")
    elif isinstance(want, float) and not isinstance(want, bool):
        # residuals sit at rounding level; everything else must match closely
        assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12), path
    else:
        assert got == want, path
