"""Problem files: JSON in, ``GEProblem`` out.

Structural validation uses a JSON schema; dimension consistency is checked
afterwards. Every failure raises :class:`ProblemFileError` naming the field.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .config import FACE_CAP, PDC_SAMPLES, Tolerances
from .cones import Cone, cone_from_dict
from .errors import ProblemFileError
from .geometry import GEProblem
from .polynomial import PolynomialMap

_NUMBER = {"type": "number"}
_VECTOR = {"type": "array", "items": _NUMBER}
_MATRIX = {"type": "array", "items": _VECTOR}
_TOL = {"type": "number", "minimum": 1e-14, "maximum": 1e-2}
_TERM = {
    "type": "object",
    "required": ["coeff", "exponents"],
    "properties": {"coeff": _NUMBER,
                   "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
    "additionalProperties": False,
}
_MAP = {"type": "array", "items": {"type": "array", "items": _TERM}}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "conicstab problem file",
    "type": "object",
    "required": ["dims", "cone", "g", "f", "reference"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dims": {
            "type": "object",
            "required": ["n", "m", "l"],
            "properties": {k: {"type": "integer", "minimum": 1} for k in "nml"},
            "additionalProperties": False,
        },
        "cone": {"$ref": "#/$defs/cone"},
        "g": _MAP,
        "f": _MAP,
        "reference": {
            "type": "object",
            "required": ["xbar", "ybar"],
            "properties": {"xbar": _VECTOR, "ybar": _VECTOR},
            "additionalProperties": False,
        },
        "options": {
            "type": "object",
            "properties": {
                "tolerances": {
                    "type": "object",
                    "properties": {k: _TOL for k in ("mem", "num", "kkt", "pdc", "rank")},
                    "additionalProperties": False,
                },
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "seed": {"type": "integer", "minimum": 0},
                "faceCap": {"type": "integer", "minimum": 1},
                "directions": {"type": "integer", "minimum": 1},
                "pdcSamples": {"type": "integer", "minimum": 1},
                "probe": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "cone_probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["point"],
                "properties": {"point": _VECTOR, "label": {"type": "string"}},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
    "$defs": {
        "cone": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["orthant", "lorentz", "polyhedral", "free", "zero", "product", "power_surface"]},
                "dim": {"type": "integer", "minimum": 1},
                "sign": {"enum": ["+", "-"]},
                "axis": {"type": "integer", "minimum": 1},
                "ineq": _MATRIX,
                "eq": _MATRIX,
                "factors": {"type": "array", "items": {"$ref": "#/$defs/cone"}, "minItems": 1},
            },
            "additionalProperties": False,
        }
    },
}


@dataclass
class Options:
    tolerances: Tolerances = field(default_factory=Tolerances)
    radii: tuple = (1e-2, 1e-3, 1e-4)
    seed: int = 0
    face_cap: int = FACE_CAP
    directions: int = 32
    pdc_samples: int = PDC_SAMPLES
    probe: bool = True


@dataclass
class ProblemSpec:
    problem: GEProblem
    options: Options
    probes: list
    digest: str
    source: str


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _cone_dim(spec: dict, where: str) -> int:
    kind = spec["type"]
    if kind == "product":
        if "factors" not in spec:
            raise ProblemFileError(where + ".factors", "a product cone needs factors")
        dims = [_cone_dim(f, f"{where}.factors[{i}]") for i, f in enumerate(spec["factors"])]
        total = sum(dims)
        if "dim" in spec and spec["dim"] != total:
            raise ProblemFileError(where + ".dim", f"declared {spec['dim']} but factors sum to {total}")
        return total
    if kind == "power_surface":
        if spec.get("dim", 3) != 3:
            raise ProblemFileError(where + ".dim", "the power-surface cone lives in R^3")
        return 3
    if "dim" not in spec:
        raise ProblemFileError(where + ".dim", f"required for cone type {kind!r}")
    dim = spec["dim"]
    if kind == "lorentz" and spec.get("axis", 1) > dim:
        raise ProblemFileError(where + ".axis", f"axis {spec['axis']} exceeds dim {dim}")
    for key in ("ineq", "eq"):
        for i, row in enumerate(spec.get(key, [])):
            if len(row) != dim:
                raise ProblemFileError(f"{where}.{key}[{i}]", f"row has length {len(row)}, expected {dim}")
    return dim


def _poly(comps, in_dim, out_dim, where) -> PolynomialMap:
    if len(comps) != out_dim:
        raise ProblemFileError(where, f"expected {out_dim} components, got {len(comps)}")
    terms = []
    for i, comp in enumerate(comps):
        row = []
        for j, t in enumerate(comp):
            if len(t["exponents"]) != in_dim:
                raise ProblemFileError(f"{where}[{i}][{j}].exponents",
                                       f"length {len(t['exponents'])}, expected {in_dim}")
            row.append((t["coeff"], t["exponents"]))
        terms.append(row)
    return PolynomialMap(in_dim, out_dim, terms)


def parse_problem(doc, source: str = "<memory>", raw: Optional[bytes] = None) -> ProblemSpec:
    """Validate a decoded problem document and build the problem."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), [str(x) for x in e.absolute_path]))
    if errors:
        err = errors[0]
        raise ProblemFileError(_path(err.absolute_path), err.message)
    dims = doc["dims"]
    n, m, l = dims["n"], dims["m"], dims["l"]
    cdim = _cone_dim(doc["cone"], "$.cone")
    if cdim != l:
        raise ProblemFileError("$.cone", f"cone dimension {cdim} differs from dims.l = {l}")
    ref = doc["reference"]
    if len(ref["xbar"]) != n:
        raise ProblemFileError("$.reference.xbar", f"length {len(ref['xbar'])}, expected n = {n}")
    if len(ref["ybar"]) != m:
        raise ProblemFileError("$.reference.ybar", f"length {len(ref['ybar'])}, expected m = {m}")
    g = _poly(doc["g"], m, l, "$.g")
    f = _poly(doc["f"], n + m, m, "$.f")
    cone: Cone = cone_from_dict(doc["cone"])
    problem = GEProblem(f, g, cone, np.array(ref["xbar"], float), np.array(ref["ybar"], float),
                        name=doc.get("name", Path(source).stem))
    opts = doc.get("options", {})
    options = Options(
        tolerances=Tolerances().updated(**opts.get("tolerances", {})),
        radii=tuple(opts.get("radii", Options.radii)),
        seed=opts.get("seed", 0),
        face_cap=opts.get("faceCap", FACE_CAP),
        directions=opts.get("directions", 32),
        pdc_samples=opts.get("pdcSamples", PDC_SAMPLES),
        probe=opts.get("probe", True),
    )
    probes = []
    for i, pr in enumerate(doc.get("cone_probes", [])):
        if len(pr["point"]) != l:
            raise ProblemFileError(f"$.cone_probes[{i}].point", f"length {len(pr['point'])}, expected {l}")
        probes.append({"point": np.array(pr["point"], float), "label": pr.get("label", f"probe{i}")})
    if raw is None:
        raw = json.dumps(doc, sort_keys=True).encode()
    return ProblemSpec(problem, options, probes, hashlib.sha256(raw).hexdigest(), source)


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ProblemFileError("$", f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"$ (line {exc.lineno}, column {exc.colno})", exc.msg) from exc
    return parse_problem(doc, str(path), raw)


def bundled_names() -> list:
    return sorted(p.name for p in resources.files("conicstab").joinpath("data").iterdir()
                  if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled problem file."""
    if not name.endswith(".json"):
        name += ".json"
    p = resources.files("conicstab").joinpath("data", name)
    if not p.is_file():
        raise FileNotFoundError(f"no bundled problem named {name!r}; available: {bundled_names()}")
    return Path(str(p))


def resolve(name_or_path) -> Path:
    """A path as given if it exists, otherwise a bundled file of that name."""
    p = Path(name_or_path)
    if p.exists():
        return p
    return bundled_path(p.name)
