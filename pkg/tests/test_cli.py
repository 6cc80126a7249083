import json

import numpy as np
import pytest

from liouville_conj.cli import main


def _spec(tmp_path, name, a, profile):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({"a": a, "profile": profile}))
    return str(path)


def _report(out, run_id):
    return json.loads((out / run_id / "report.json").read_text())


@pytest.fixture
def specs(tmp_path):
    lam = np.linspace(0.9, 4.1, 33)
    return {
        "ell2": _spec(tmp_path, "ell2", [3.0, 2.0, 1.0], {"kind": "sqrt"}),
        "ell3": _spec(tmp_path, "ell3", [4.0, 3.0, 2.0, 1.0], {"kind": "sqrt"}),
        "sphere": _spec(tmp_path, "sphere", [3.0, 2.0, 1.0], {"kind": "constant", "value": 1.0}),
        "inverse": _spec(tmp_path, "inverse", [3.0, 2.0, 1.5, 1.0],
                         {"kind": "tabulated", "lam": lam.tolist(), "values": (1 / lam).tolist()}),
    }


@pytest.mark.parametrize("name,code", [("ell2", 0), ("sphere", 0), ("inverse", 1)])
def test_validate_exit_codes(tmp_path, specs, name, code):
    assert main(["validate", "--spec", specs[name], "--out", str(tmp_path), "--run-id", "v"]) == code
    rep = _report(tmp_path, "v")
    assert rep["pass"] == (code == 0)
    assert rep["condition_report"]["derivative_minima"]


def test_validate_round_sphere_warns(tmp_path, specs, caplog):
    main(["validate", "--spec", specs["sphere"], "--out", str(tmp_path)])
    assert "round-sphere" in caplog.text


@pytest.mark.parametrize("argv,spec", [
    (["validate", "--spec", "/nonexistent/spec.json"], None),
    (["trace"], None),
    (["conjugate", "--grid", "8,8"], "ell2"),
    (["trace", "--u", "0.1,0.2"], "ell2"),
])
def test_usage_errors_exit_2(tmp_path, specs, argv, spec):
    if spec is not None:
        argv = argv + ["--spec", specs[spec]]
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_corrupted_spec_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["suite", "--spec", str(bad), "--out", str(tmp_path), "--quick"]) == 2


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_trace_outputs(tmp_path, specs):
    code = main(["trace", "--spec", specs["ell3"], "--out", str(tmp_path), "--run-id", "t",
                 "--u", "0.7,2.0", "--horizon", "20"])
    assert code == 0
    rep = _report(tmp_path, "t")
    assert rep["ledger"]["max_F_drift"] < 1e-8
    assert abs(rep["orbit_quadrature"]["G=1"]["residual"]) < 1e-6
    header = (tmp_path / "t" / "trace.csv").read_text().splitlines()[0].split(",")
    assert header == ["t", "x1", "x2", "x3", "xi1", "xi2", "xi3", "f1", "f2", "f3", "y1", "y2"]
    assert (tmp_path / "t" / "events.json").exists()


def test_trace_breach_exit_1(tmp_path, specs):
    code = main(["trace", "--spec", specs["ell2"], "--out", str(tmp_path), "--u", "0.8",
                 "--tol-rtol", "1e-4", "--tol-atol", "1e-4", "--tol-drift-tol", "1e-14"])
    assert code == 1


def test_conjugate_two_dimensional(tmp_path, specs):
    code = main(["conjugate", "--spec", specs["ell2"], "--out", str(tmp_path), "--run-id", "c",
                 "--grid", "64"])
    assert code == 0
    rep = _report(tmp_path, "c")
    assert rep["cusp_count"]["count"] == 4
    files = {p.name for p in (tmp_path / "c").iterdir()}
    assert {"config.json", "report.json", "field_1.csv", "locus_1.obj", "locus_1.json"} <= files


def test_conjugate_three_dimensional(tmp_path, specs):
    code = main(["conjugate", "--spec", specs["ell3"], "--out", str(tmp_path), "--run-id", "c3",
                 "--grid", "8,8"])
    assert code == 0
    rep = _report(tmp_path, "c3")
    assert rep["d4"]["2"]["candidates"] == rep["d4"]["2"]["samples"] == 4
    assert rep["ordering"]["pass"]


def test_conjugate_round_sphere_point_locus(tmp_path, specs):
    assert main(["conjugate", "--spec", specs["sphere"], "--out", str(tmp_path), "--run-id", "s",
                 "--grid", "16"]) == 0
    rep = _report(tmp_path, "s")
    assert rep["round_sphere_locus"]["diameter"] < 1e-5
    assert rep["cusp_count"]["degenerate"]


def test_suite_is_deterministic(tmp_path):
    args = ["suite", "--quick", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a"), "--run-id", "r"]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--run-id", "r"]) == 0
    a = (tmp_path / "a" / "r" / "report.json").read_bytes()
    b = (tmp_path / "b" / "r" / "report.json").read_bytes()
    assert a == b
    assert json.loads(a)["seed"] == 7
