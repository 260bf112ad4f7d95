import copy
import json
from pathlib import Path

import jsonschema
import pytest

from conicstab.errors import ProblemFileError
from conicstab.problem_io import SCHEMA, bundled_names, bundled_path, load_problem, parse_problem, resolve

BUNDLED = ["example_6_4.json", "f_zero_degenerate.json", "orthant_nlp.json", "power_surface.json",
           "soc_vertex.json"]


def doc(name="example_6_4"):
    return json.loads(bundled_path(name).read_text())


def test_bundled_corpus_loads():
    assert bundled_names() == BUNDLED
    for name in BUNDLED:
        spec = load_problem(bundled_path(name))
        assert spec.problem.n >= 1 and len(spec.digest) == 64


def test_shipped_schema_matches_code():
    shipped = Path(__file__).resolve().parents[1] / "docs" / "problem.schema.json"
    assert json.loads(shipped.read_text()) == json.loads(json.dumps(SCHEMA))
    jsonschema.Draft202012Validator.check_schema(SCHEMA)


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("cone"), "$"),
    (lambda d: d["dims"].update(l="x"), "$.dims.l"),
    (lambda d: d["reference"].update(xbar=[1.0]), "$.reference.xbar"),
    (lambda d: d["g"][0][0].update(exponents=[1, 0]), "$.g[0][0].exponents"),
    (lambda d: d.setdefault("options", {}).update(tolerances={"kkt": 1.0}), "$.options.tolerances.kkt"),
    (lambda d: d.setdefault("options", {}).update(tolerances={"mem": 1e-20}), "$.options.tolerances.mem"),
    (lambda d: d["cone"].update(axis=9), "$.cone.axis"),
    (lambda d: d["dims"].update(l=4), "$.cone"),
    (lambda d: d.update(extra=1), "$"),
])
def test_field_precise_errors(mutate, path):
    d = copy.deepcopy(doc())
    mutate(d)
    with pytest.raises(ProblemFileError) as err:
        parse_problem(d)
    assert err.value.path == path


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "dims": {"n": 1,\n')
    with pytest.raises(ProblemFileError) as err:
        load_problem(p)
    assert "line" in err.value.path


def test_options_and_probes():
    d = doc("power_surface")
    d["options"] = {"seed": 5, "radii": [0.1, 0.01], "faceCap": 64, "tolerances": {"kkt": 1e-8}}
    spec = parse_problem(d)
    assert spec.options.seed == 5 and spec.options.radii == (0.1, 0.01) and spec.options.face_cap == 64
    assert spec.options.tolerances.kkt == 1e-8
    assert [p["label"] for p in spec.probes] == ["flat", "curved"]


def test_digest_tracks_content(tmp_path):
    a = load_problem(bundled_path("example_6_4")).digest
    p = tmp_path / "copy.json"
    p.write_bytes(bundled_path("example_6_4").read_bytes() + b"\n")
    assert load_problem(p).digest != a


def test_resolve_prefers_existing_path(tmp_path):
    p = tmp_path / "example_6_4.json"
    p.write_text("{}")
    assert resolve(p) == p
    assert resolve("example_6_4") == bundled_path("example_6_4")
