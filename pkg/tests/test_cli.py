import json
import subprocess
import sys

import numpy as np
import pytest

from conicstab.cli import main
from conicstab.problem_io import bundled_path
from conicstab.report import clean


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def base_doc():
    return json.loads(bundled_path("orthant_nlp").read_text())


def test_analyze_example_json(capsys):
    code, out, _ = run(capsys, "analyze", "example_6_4", "--no-probe")
    assert code == 0
    rep = json.loads(out)
    assert rep["calmness"]["status"] == "certified"
    assert rep["multiplier"]["lambda"] == [1.0, 0.0, -1.0]
    assert "timings" not in rep
    assert rep["toolVersion"] and len(rep["inputHash"]) == 64


def test_every_verdict_has_provenance(capsys):
    _, out, _ = run(capsys, "analyze", "power_surface")
    rep = json.loads(out)
    for key in ("feasibility", "multiplier", "pdc", "graphicalDerivative", "calmness", "probe"):
        assert rep[key]["provenance"] in ("certified", "sampled", "empirical"), key
    for key in ("A1", "A2", "A3"):
        assert "provenance" in rep["assumptions"][key]
    assert rep["probe"]["skipped"] is True      # disabled in the bundled file
    flat, curved = rep["coneProbes"]
    assert flat["extendedPolyhedricity"]["status"] == "holds"
    assert curved["extendedPolyhedricity"]["status"] == "fails"
    assert curved["extendedPolyhedricity"]["witness"] is not None


def test_text_format_and_timings(capsys):
    code, out, _ = run(capsys, "analyze", "example_6_4", "--no-probe", "--format", "text", "--timings")
    assert code == 0 and "calmness     certified" in out and "timings" in out


def test_exit_code_parse_error(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2 and "line 1" in err
    d = base_doc()
    d["reference"]["ybar"] = [0.0]
    code, _, err = run(capsys, "analyze", write(tmp_path, "dims.json", d))
    assert code == 2 and "$.reference.ybar" in err
    code, _, err = run(capsys, "analyze", "no_such_problem")
    assert code == 2


def test_exit_code_infeasible(capsys, tmp_path):
    d = base_doc()
    d["reference"]["ybar"] = [-1.0, 0.0]
    code, out, _ = run(capsys, "analyze", write(tmp_path, "infeasible.json", d))
    assert code == 3 and json.loads(out)["exitCode"] == 3


def test_exit_code_assumption_failure(capsys, tmp_path):
    # g(y) = (y1, y1) at the vertex of the orthant: nondegeneracy fails
    d = base_doc()
    d["g"] = [[{"coeff": 1.0, "exponents": [1, 0]}], [{"coeff": 1.0, "exponents": [1, 0]}]]
    d["reference"]["ybar"] = [0.0, 0.0]
    code, out, _ = run(capsys, "analyze", write(tmp_path, "degenerate.json", d))
    assert code == 4 and json.loads(out)["assumptions"]["A2"]["holds"] is False


def test_overrides(capsys):
    code, out, _ = run(capsys, "analyze", "example_6_4", "--seed", "3", "--radii", "1e-2,1e-3",
                       "--face-cap", "64", "--tol-kkt", "1e-9", "--directions", "4")
    rep = json.loads(out)
    assert code == 0 and rep["seed"] == 3 and rep["tolerances"]["kkt"] == 1e-9
    assert [r["radius"] for r in rep["probe"]["rows"]] == [1e-2, 1e-3]
    with pytest.raises(SystemExit):
        main(["analyze", "example_6_4", "--tol-kkt", "1.0"])


def test_gderiv(capsys):
    code, out, _ = run(capsys, "gderiv", "example_6_4", "--u", "0,0,0")
    rep = json.loads(out)
    assert code == 0 and rep["trivial"] and rep["flag"] == "equality"
    assert all(np.allclose(p["point"], 0) for p in rep["pieces"] if not p["empty"])
    code, out, _ = run(capsys, "gderiv", "example_6_4", "--u", "0.3,-0.2,0.1")
    assert all(c["scaledMember"] for c in json.loads(out)["homogeneityCheck"])
    code, out, _ = run(capsys, "gderiv", "f_zero_degenerate", "--u", "0,0", "--format", "text")
    assert code == 0 and "flag=inclusion-only" in out
    code, _, _ = run(capsys, "gderiv", "example_6_4", "--u", "0,0")
    assert code == 2


def test_selftest_pass_fault_and_determinism(capsys):
    code, first, _ = run(capsys, "selftest")
    assert code == 0 and "FAIL" not in first
    code, second, _ = run(capsys, "selftest")
    assert first == second
    code, out, _ = run(capsys, "selftest", "--fault", "lorentz_projection")
    assert code == 1 and "FAIL  fd-consistency[lorentz3]" in out
    # fault is cleared afterwards
    assert run(capsys, "selftest")[0] == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "conicstab", "analyze", "orthant_nlp", "--no-probe"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["calmness"]["status"] == "certified"


def test_clean_rounding():
    assert clean({"a": -0.0, "b": np.float64(1.0 / 3.0), "c": np.inf, "d": [np.int64(2), np.bool_(True)]}) == \
        {"a": 0.0, "b": 0.333333333333, "c": "inf", "d": [2, True]}
