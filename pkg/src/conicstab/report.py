"""Analysis pipeline and report rendering.

The JSON report is the single source of truth; the text form is rendered
from it. Floats are rounded to 12 significant digits so that reports are
byte-identical across runs with the same input and seed.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .cones import PolyCone
from .derivatives import graphical_derivative_solution_map
from .errors import (Infeasible, NoMultiplier, NonPolyhedralCriticalCone, NormalityViolation,
                     NotMember, OutsideChart, Unsupported)
from .geometry import check_nondegeneracy, recover_multiplier, theta_convexity_probe
from .problem_io import ProblemSpec
from .projcalc import critical_cone, extended_polyhedricity, pdc_check, second_order_tangent_set
from .stability import certify_isolated_calmness, empirical_calmness_probe

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_ASSUMPTION = 0, 1, 2, 3, 4


def clean(obj):
    """JSON-safe copy with rounded floats and no negative zeros."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    return obj


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2, sort_keys=True) + "\n"


@dataclass
class RunConfig:
    seed: Optional[int] = None
    tol_kkt: Optional[float] = None
    radii: Optional[tuple] = None
    face_cap: Optional[int] = None
    directions: Optional[int] = None
    probe: Optional[bool] = None
    timings: bool = False


def _cone_probe(cone, point, seed) -> dict:
    out = {"point": point}
    try:
        out["member"] = cone.contains(point)
        out["tangentCone"] = cone.tangent_cone(point).to_dict()
        N = cone.normal_cone(point)
        out["normalCone"] = N.to_dict()
        ep = extended_polyhedricity(cone, point)
        out["extendedPolyhedricity"] = ep.to_dict()
        b = None
        if isinstance(N, PolyCone):
            rays, _ = N.generators()
            b = rays[0] if rays.shape[0] else np.zeros(cone.dim)
        if b is not None:
            cc = critical_cone(cone, point, b)
            out["criticalCone"] = {"b": b, **cc.to_dict()}
            if ep.witness_h is not None:
                h = ep.witness_h
            elif cc.is_polyhedral:
                rays, lin = cc.cone.generators()
                h = lin[0] if lin.shape[0] else (rays[0] if rays.shape[0] else np.zeros(cone.dim))
            else:
                h = np.zeros(cone.dim)
            T2 = second_order_tangent_set(cone, point, h)
            out["secondOrderTangentSet"] = {"h": h, "set": T2.to_dict(), "containsZero": T2.contains_zero()}
        out["pdc"] = pdc_check(cone, point, seed=seed).to_dict()
    except (NotMember, OutsideChart, Unsupported) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def _provenance(status: str, sampled: bool) -> str:
    return "sampled" if sampled else "certified"


def analyze(spec: ProblemSpec, cfg: RunConfig = RunConfig()):
    """Run the full pipeline; returns ``(report, exit_code)``."""
    P = spec.problem
    opts = spec.options
    seed = opts.seed if cfg.seed is None else cfg.seed
    tol = opts.tolerances if cfg.tol_kkt is None else opts.tolerances.updated(kkt=cfg.tol_kkt)
    radii = tuple(opts.radii if cfg.radii is None else cfg.radii)
    face_cap = opts.face_cap if cfg.face_cap is None else cfg.face_cap
    directions = opts.directions if cfg.directions is None else cfg.directions
    run_probe = opts.probe if cfg.probe is None else cfg.probe
    timings = {}
    clock = time.perf_counter

    def stamp(name, t0):
        timings[name] = clock() - t0

    report = {
        "toolVersion": __version__,
        "inputHash": spec.digest,
        "problem": {"name": P.name, "dims": {"n": P.n, "m": P.m, "l": P.l}, "cone": P.theta.to_dict(),
                    "xbar": P.xbar, "ybar": P.ybar},
        "seed": seed,
        "tolerances": {"mem": tol.mem, "num": tol.num, "kkt": tol.kkt, "pdc": tol.pdc, "rank": tol.rank},
    }

    def finish(code):
        if cfg.timings:
            report["timings"] = timings
        report["exitCode"] = code
        return report, code

    t0 = clock()
    gbar = P.g(P.ybar)
    member = P.theta.contains(gbar, tol.mem)
    report["feasibility"] = {"gbar": gbar, "member": member, "provenance": "certified"}
    if not member:
        report["error"] = "infeasible reference point: g(ybar) is not in the cone"
        return finish(EXIT_INFEASIBLE)
    a2 = check_nondegeneracy(P, tol.mem, tol.rank)
    report["assumptions"] = {
        "A1": {"holds": bool(P.theta.cone_reducible), "provenance": "catalogue"},
        "A2": {**a2.to_dict(), "provenance": "certified"},
        "A3": {"holds": bool(P.theta.second_order_regular), "provenance": "catalogue"},
    }
    stamp("assumptions", t0)
    if not a2.holds:
        report["error"] = "nondegeneracy fails at the reference point"
        return finish(EXIT_ASSUMPTION)

    t0 = clock()
    try:
        mult = recover_multiplier(P, tol.kkt, tol.mem)
    except (NoMultiplier, NormalityViolation) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        return finish(EXIT_INFEASIBLE)
    report["multiplier"] = {**mult.to_dict(), "provenance": "certified"}
    L = P.lagrangian_hessian(mult.lam)
    report["lagrangianHessian"] = L
    stamp("multiplier", t0)

    t0 = clock()
    pdc = pdc_check(P.theta, gbar, samples=opts.pdc_samples, seed=seed, tol=tol.pdc, mem_tol=tol.mem)
    report["pdc"] = {**pdc.to_dict(), "provenance": "certified" if pdc.status == "certified" else "sampled"}
    stamp("pdc", t0)

    t0 = clock()
    cc = critical_cone(P.theta, gbar, mult.lam, tol.mem)
    report["criticalCone"] = cc.to_dict()
    if cc.is_polyhedral:
        ds = graphical_derivative_solution_map(P, np.zeros(P.n), mult, pdc, face_cap)
        report["graphicalDerivative"] = {"u": np.zeros(P.n), **ds.to_dict(), "provenance": "certified"}
    else:
        report["graphicalDerivative"] = {"u": np.zeros(P.n), "status": "unavailable",
                                         "reason": "critical cone is not polyhedral"}
    stamp("graphicalDerivative", t0)

    t0 = clock()
    verdict = certify_isolated_calmness(P, mult, pdc, face_cap, seed, tol_kkt=tol.kkt)
    report["calmness"] = {**verdict.to_dict(),
                          "provenance": "certified" if verdict.method.startswith("faces") else "sampled"}
    stamp("calmness", t0)

    report["convexityProbe"] = theta_convexity_probe(P, seed=seed).to_dict()

    if spec.probes:
        t0 = clock()
        report["coneProbes"] = [{"label": pr["label"], **_cone_probe(P.theta, pr["point"], seed)}
                                for pr in spec.probes]
        stamp("coneProbes", t0)

    if run_probe:
        t0 = clock()
        probe = empirical_calmness_probe(P, radii, directions, seed)
        report["probe"] = {**probe.to_dict(), "provenance": "empirical"}
        stamp("probe", t0)
    else:
        report["probe"] = {"skipped": True, "provenance": "empirical"}
    return finish(EXIT_OK)


def gderiv(spec: ProblemSpec, u, cfg: RunConfig = RunConfig()):
    """``DS(xbar, ybar)(u)`` listing with a homogeneity spot check."""
    P = spec.problem
    seed = spec.options.seed if cfg.seed is None else cfg.seed
    face_cap = spec.options.face_cap if cfg.face_cap is None else cfg.face_cap
    u = np.asarray(u, dtype=float)
    if u.shape != (P.n,):
        raise ValueError(f"u must have length {P.n}")
    if not P.in_gamma(P.ybar):
        return {"error": "infeasible reference point"}, EXIT_INFEASIBLE
    if not check_nondegeneracy(P).holds:
        return {"error": "nondegeneracy fails at the reference point"}, EXIT_ASSUMPTION
    try:
        mult = recover_multiplier(P)
    except (NoMultiplier, NormalityViolation) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}, EXIT_INFEASIBLE
    pdc = pdc_check(P.theta, P.g(P.ybar), seed=seed)
    try:
        ds = graphical_derivative_solution_map(P, u, mult, pdc, face_cap)
    except NonPolyhedralCriticalCone as exc:
        return {"error": str(exc)}, EXIT_ASSUMPTION
    ds2 = graphical_derivative_solution_map(P, 2.0 * u, mult, pdc, face_cap)
    pieces = []
    checks = []
    for piece in ds.set.pieces:
        x = piece.feasible_point()
        entry = {"face": piece.face, "label": piece.label, "empty": x is None}
        if x is not None:
            v = x[:P.m]
            entry["point"] = v
            entry["trivial"] = piece.nonzero_witness() is None
            checks.append({"face": piece.face, "v": v, "scaledMember": ds2.contains(2.0 * v)})
        pieces.append(entry)
    report = {"u": u, "status": ds.status, "equality": ds.equality, "trivial": ds.is_trivial(),
              "pieces": pieces, "homogeneityCheck": checks,
              "flag": "equality" if ds.status == "equality" else "inclusion-only"}
    return report, EXIT_OK


def _fmt(x) -> str:
    if isinstance(x, list):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render_text(report: dict) -> str:
    """Human-readable rendering of a cleaned report."""
    r = clean(report)
    lines = []
    if "problem" in r:
        p = r["problem"]
        lines.append(f"problem {p['name']}  n={p['dims']['n']} m={p['dims']['m']} l={p['dims']['l']}  "
                     f"cone={p['cone']['type']}")
    if "error" in r:
        lines.append(f"ERROR: {r['error']}")
    if "assumptions" in r:
        a = r["assumptions"]
        lines.append(f"assumptions  A1={a['A1']['holds']}  A2={a['A2']['holds']} "
                     f"(rank {a['A2']['rank']}/{a['A2']['required']})  A3={a['A3']['holds']}")
    if "multiplier" in r:
        lines.append(f"multiplier   lambda={_fmt(r['multiplier']['lambda'])}  "
                     f"residual={_fmt(r['multiplier']['residual'])}  unique={r['multiplier']['unique']}")
    if "lagrangianHessian" in r:
        lines.append(f"grad_y L     {_fmt(r['lagrangianHessian'])}")
    if "pdc" in r:
        lines.append(f"PDC          {r['pdc']['status']} [{r['pdc']['method']}]")
    if "criticalCone" in r:
        c = r["criticalCone"]
        if c.get("isPolyhedral"):
            lines.append(f"critical     rays={_fmt(c['rays'])} lineality={_fmt(c['lineality'])}")
            lines.append(f"  polar      ineq={_fmt(c['polar']['ineq'])} eq={_fmt(c['polar']['eq'])}")
        else:
            lines.append(f"critical     nonpolyhedral {c['cone']}")
    if "graphicalDerivative" in r:
        g = r["graphicalDerivative"]
        lines.append(f"DS(0)        trivial={g.get('trivial')} status={g.get('status')} "
                     f"pieces={len(g.get('pieces', []))}")
    if "calmness" in r:
        c = r["calmness"]
        lines.append(f"calmness     {c['status']} necessary={c['necessary']} ({c['interpretation']}) "
                     f"[{c['method']}]")
        if c.get("witness"):
            lines.append(f"  witness    v={_fmt(c['witness']['v'])} residual={_fmt(c['witness']['residual'])}")
    for pr in r.get("coneProbes", []):
        ep = pr.get("extendedPolyhedricity", {})
        lines.append(f"cone probe   {pr['label']} at {_fmt(pr['point'])}: extended polyhedricity "
                     f"{ep.get('status')}")
    if "probe" in r and not r["probe"].get("skipped"):
        pb = r["probe"]
        lines.append(f"probe        fitted l={_fmt(pb['fittedModulus'])} variation={_fmt(pb['variation'])} "
                     f"unbounded={pb['unbounded']} unreliable={pb['unreliable']}")
        for row in pb["rows"]:
            lines.append(f"  r={row['radius']:<8g} maxRatio={_fmt(row['maxRatio'])} solved={row['solved']} "
                         f"empty={row['empty']} diverged={row['diverged']}")
    if "pieces" in r and "u" in r and "problem" not in r:
        lines.append(f"DS(u) u={_fmt(r['u'])} flag={r['flag']} trivial={r['trivial']}")
        for pc in r["pieces"]:
            lines.append(f"  face {pc['face']}: " + ("empty" if pc["empty"] else f"point {_fmt(pc['point'])}"))
        for ch in r["homogeneityCheck"]:
            lines.append(f"  2v in DS(2u) for face {ch['face']}: {ch['scaledMember']}")
    if "timings" in r:
        lines.append("timings      " + " ".join(f"{k}={v:.3f}s" for k, v in r["timings"].items()))
    return "\n".join(lines) + "\n"
