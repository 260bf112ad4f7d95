"""Isolated calmness of the solution map.

Certification checks that the adjoint inclusion

    0 in grad_y L v + grad g(ybar)' N_K(grad g(ybar) v)

has only the trivial solution, face by face of the critical cone ``K``.
The empirical probe solves perturbed equilibria and tabulates
``||y - ybar|| / ||x - xbar||``; its output is never a certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import polyhedral as ph
from .config import FACE_CAP, TAU_KKT, TAU_MEM
from .cones import Lorentz, PolyCone, Product
from .errors import AssumptionsUnverified, NoMultiplier, NormalityViolation
from .faces import enumerate_faces
from .geometry import (GEProblem, check_nondegeneracy, recover_multiplier, semismooth_newton)
from .derivatives import Piece, face_pieces, graphical_derivative_solution_map
from .projcalc import PDCVerdict, critical_cone, pdc_check


@dataclass
class CalmnessVerdict:
    status: str                     # certified / refuted / inconclusive
    necessary: bool
    method: str
    witness: Optional[dict] = None
    faces_checked: int = 0
    note: str = ""

    @property
    def interpretation(self) -> str:
        if self.status == "certified":
            return "isolatedly calm"
        if self.status == "refuted":
            return "not isolatedly calm" if self.necessary else \
                "sufficient criterion fails; undecided because grad_x f is not surjective"
        return "undecided"

    def to_dict(self) -> dict:
        return {"status": self.status, "necessary": self.necessary, "method": self.method,
                "interpretation": self.interpretation, "facesChecked": self.faces_checked,
                "witness": self.witness, "note": self.note}


def _adjoint_residual(L, J, K, v, mu) -> float:
    """Residual of ``0 = L v + J' mu`` with ``mu in N_K(J v)``."""
    p = J @ v
    r = [float(np.linalg.norm(L @ v + J.T @ mu))]
    r.append(float(np.linalg.norm(p - K.project(p))))              # p in K
    r.append(float(np.linalg.norm(K.polar().project(mu) - mu)))    # mu in K polar
    r.append(abs(float(mu @ p)))                                   # complementarity
    return max(r)


def _witness_from_piece(piece: Piece, x, normal_rays, normal_lin, L, J, K):
    v, a, b = piece.split(x)
    mu = normal_rays.T @ a + normal_lin.T @ b
    scale = float(np.linalg.norm(v))
    v, mu = v / scale, mu / scale
    return {"v": v.tolist(), "mu": mu.tolist(), "face": piece.face,
            "residual": _adjoint_residual(L, J, K, v, mu)}


def certify_isolated_calmness(problem: GEProblem, multiplier=None, pdc: Optional[PDCVerdict] = None,
                              face_cap: int = FACE_CAP, seed: int = 0, angle_samples: int = 64,
                              tol_kkt: float = TAU_KKT) -> CalmnessVerdict:
    """Decide triviality of the adjoint inclusion.

    ``necessary`` records surjectivity of ``grad_x f(xbar, ybar)``; when it
    holds the verdict characterizes isolated calmness, otherwise only
    ``certified`` is conclusive.
    """
    if not check_nondegeneracy(problem).holds:
        raise AssumptionsUnverified("nondegeneracy fails at the reference point")
    if multiplier is None:
        multiplier = recover_multiplier(problem)
    z = problem.g(problem.ybar)
    if pdc is None:
        pdc = pdc_check(problem.theta, z, seed=seed)
    Fx, _ = problem.f_jac(problem.xbar, problem.ybar)
    necessary = bool(Fx.size and ph.rank(Fx) == problem.m)
    note = "" if pdc.status == "certified" else f"PDC {pdc.status}; verdict relies on an unverified hypothesis"
    cc = critical_cone(problem.theta, z, multiplier.lam)
    L = problem.lagrangian_hessian(multiplier.lam)
    J = problem.g.jacobian(problem.ybar)
    if not cc.is_polyhedral:
        verdict = _nonpolyhedral_search(cc.cone, L, J, face_cap, angle_samples, seed, tol_kkt)
        verdict.necessary = necessary
        verdict.note = "; ".join(s for s in (verdict.note, note) if s)
        return verdict
    ds = graphical_derivative_solution_map(problem, np.zeros(problem.n), multiplier, pdc, face_cap)
    K = cc.cone
    for piece in ds.set.pieces:
        x = piece.nonzero_witness()
        if x is None:
            continue
        F = ds.faces.faces[piece.face]
        w = _witness_from_piece(piece, x, F.normal_rays, F.normal_lineality, L, J, K)
        if w["residual"] <= tol_kkt:
            return CalmnessVerdict("refuted", necessary, "faces:lp", w, len(ds.faces), note)
    return CalmnessVerdict("certified", necessary, "faces:lp", None, len(ds.faces), note)


# ---------------------------------------------------------------------------
# fallback when the critical cone has a full Lorentz block
# ---------------------------------------------------------------------------

def _sphere_points(k: int, count: int, rng) -> np.ndarray:
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if k == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5 ** 0.5) * i
        return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    P = rng.standard_normal((count, k))
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def _nonpolyhedral_search(K, L, J, face_cap, samples, seed, tol_kkt) -> CalmnessVerdict:
    """Refutation search over polyhedral inner approximations; never certifies."""
    blocks = K.factors if isinstance(K, Product) else [K]
    slices = K.slices if isinstance(K, Product) else [slice(0, K.dim)]
    soc = [i for i, f in enumerate(blocks) if isinstance(f, Lorentz)]
    if len(soc) != 1:
        return CalmnessVerdict("inconclusive", False, "regimes:unsupported",
                               note="more than one nonpolyhedral block in the critical cone")
    ib = soc[0]
    Q, sb = blocks[ib], slices[ib]
    rest_idx = np.concatenate([np.arange(K.dim)[s] for i, s in enumerate(slices) if i != ib]) \
        if len(blocks) > 1 else np.zeros(0, dtype=int)
    Jb, Jp = J[sb], J[rest_idx]
    others = [f for i, f in enumerate(blocks) if i != ib]
    P = PolyCone.block_diag(others) if others else None
    rng = np.random.default_rng(seed)
    omegas = _sphere_points(Q.dim - 1, samples, rng)
    D = np.array([Q._orig(1.0, w) for w in omegas])      # boundary rays
    N = np.array([Q._orig(-1.0, w) for w in omegas])     # matching outward normals
    m = L.shape[1]
    d = Q.dim
    faces = enumerate_faces(P, cap=face_cap).faces if P is not None else [None]

    def build(F, extra_nonneg_cols, regime_rows_v, regime_rows_aux, mu_cols):
        # variables: v | face normal rays (>=0) | regime aux (>=0) | face normal lineality (free)
        Rn = F.normal_rays if F is not None else np.zeros((0, 0))
        Bn = F.normal_lineality if F is not None else np.zeros((0, 0))
        E = F.cone.B @ Jp if F is not None else np.zeros((0, m))
        k_face = Rn.shape[0]
        k_reg = extra_nonneg_cols
        top_a = np.hstack([Jp.T @ Rn.T if k_face else np.zeros((m, 0)), mu_cols])
        top_b = Jp.T @ Bn.T if Bn.shape[0] else np.zeros((m, 0))
        rows_v = [L, E, regime_rows_v]
        rows_a = [top_a, np.zeros((E.shape[0], k_face + k_reg)),
                  np.hstack([np.zeros((d, k_face)), regime_rows_aux])]
        rows_b = [top_b, np.zeros((E.shape[0], top_b.shape[1])), np.zeros((d, top_b.shape[1]))]
        ineq = F.cone.A @ Jp if F is not None else np.zeros((0, m))
        return Piece(np.vstack(rows_v), np.vstack(rows_a), np.vstack(rows_b),
                     np.zeros(m + E.shape[0] + d), ineq.reshape(-1, m),
                     face=-1 if F is None else F.index)

    def mu_of(piece, x, F, regime_mu):
        v, a, b = piece.split(x)
        mu = np.zeros(K.dim)
        k_face = F.normal_rays.shape[0] if F is not None else 0
        if F is not None:
            mu[rest_idx] = F.normal_rays.T @ a[:k_face] + F.normal_lineality.T @ b
        mu[sb] = regime_mu(a[k_face:])
        return v, mu

    checked = 0
    for F in faces:
        regimes = [
            ("interior", D.shape[0], Jb, -D.T, np.zeros((m, D.shape[0])), lambda a: np.zeros(d)),
            ("vertex", N.shape[0], Jb, np.zeros((d, N.shape[0])), Jb.T @ N.T, lambda a: N.T @ a),
        ]
        for k in range(D.shape[0]):
            regimes.append((f"boundary{k}", 2, Jb, np.column_stack([-D[k], np.zeros(d)]),
                            np.column_stack([np.zeros(m), Jb.T @ N[k]]),
                            lambda a, k=k: a[1] * N[k]))
        for name, k_reg, rv, ra, mc, regime_mu in regimes:
            piece = build(F, k_reg, rv, ra, mc)
            checked += 1
            x = piece.nonzero_witness()
            if x is None:
                continue
            v, mu = mu_of(piece, x, F, regime_mu)
            s = float(np.linalg.norm(v))
            v, mu = v / s, mu / s
            res = _adjoint_residual(L, J, K, v, mu)
            if res <= tol_kkt:
                return CalmnessVerdict("refuted", False, "regimes:inner-approximation",
                                       {"v": v.tolist(), "mu": mu.tolist(), "regime": name,
                                        "residual": res}, checked)
    if P is None:
        w = _angular_polish(Q, L, J, omegas, rng)
        if w is not None and w["residual"] <= tol_kkt:
            return CalmnessVerdict("refuted", False, "regimes:angular-scan", w, checked)
    return CalmnessVerdict("inconclusive", False, "regimes:inner-approximation", None, checked,
                           "no counterexample found; a nonpolyhedral critical cone is never certified")


def _angular_polish(Q: Lorentz, L, J, omegas, rng):
    """Boundary regime for a pure Lorentz critical cone.

    For a boundary ray ``d(w)`` with normal ``n(w)`` the regime is the linear
    system ``L v + s J' n = 0``, ``J v = rho d`` in ``(v, rho, s)``; a kernel
    vector with ``rho, s >= 0`` is a solution. The smallest singular value is
    scanned over the sampled directions and refined locally.
    """
    m = L.shape[1]
    k = Q.dim - 1

    def unit(par):
        if k == 1:
            return np.array([1.0 if par[0] >= 0 else -1.0])
        if k == 2:
            return np.array([np.cos(par[0]), np.sin(par[0])])
        w = np.asarray(par, dtype=float)
        return w / np.linalg.norm(w)

    def matrix(w):
        d, n = Q._orig(1.0, w), Q._orig(-1.0, w)
        top = np.hstack([L, np.zeros((m, 1)), (J.T @ n)[:, None]])
        bot = np.hstack([J, -d[:, None], np.zeros((Q.dim, 1))])
        return np.vstack([top, bot])

    def smin(par):
        return float(np.linalg.svd(matrix(unit(par)), compute_uv=False)[-1])

    if k == 2:
        pars = [np.array([np.arctan2(w[1], w[0])]) for w in omegas]
    elif k == 1:
        pars = [np.array([1.0]), np.array([-1.0])]
    else:
        pars = [w.copy() for w in omegas]
    vals = [smin(p) for p in pars]
    order = np.argsort(vals)[:4]
    best = None
    for i in order:
        p0 = pars[i]
        if k == 2:
            r = minimize_scalar(lambda t: smin(np.array([t])), bracket=(p0[0] - 0.1, p0[0] + 0.1),
                                tol=1e-14)
            p, val = np.array([r.x]), float(r.fun)
        elif k == 1:
            p, val = p0, vals[i]
        else:
            r = minimize(smin, p0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16})
            p, val = r.x, float(r.fun)
        w = unit(p)
        _, s, vt = np.linalg.svd(matrix(w))
        x = vt[-1]
        v, rho, sig = x[:m], x[m], x[m + 1]
        if rho < 0 or sig < 0:
            v, rho, sig = -v, -rho, -sig
        if rho < -1e-12 or sig < -1e-12 or np.linalg.norm(v) < 1e-8:
            continue
        scale = float(np.linalg.norm(v))
        v = v / scale
        mu = max(sig, 0.0) / scale * Q._orig(-1.0, w)
        res = _adjoint_residual(L, J, Q, v, mu)
        if best is None or res < best["residual"]:
            best = {"v": v.tolist(), "mu": mu.tolist(), "regime": "boundary-scan", "residual": res}
    return best


# ---------------------------------------------------------------------------
# empirical probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeRow:
    radius: float
    max_ratio: float
    solved: int
    empty: int
    diverged: int

    def to_dict(self) -> dict:
        return {"radius": self.radius, "maxRatio": self.max_ratio, "solved": self.solved,
                "empty": self.empty, "diverged": self.diverged}


@dataclass
class ProbeResult:
    rows: list
    fitted_modulus: float
    variation: float
    growth: float
    unbounded: bool
    monotone: bool
    unreliable: bool
    neighborhood: float
    directions: int

    def to_dict(self) -> dict:
        return {"method": "empirical", "rows": [r.to_dict() for r in self.rows],
                "fittedModulus": self.fitted_modulus, "variation": self.variation,
                "growth": self.growth, "unbounded": self.unbounded, "monotone": self.monotone,
                "unreliable": self.unreliable, "neighborhood": self.neighborhood,
                "directions": self.directions}


def _ge_newton(problem: GEProblem, x, y0, lam0, region_radius, tol, max_iter):
    g = problem.g

    def first(y, lam):
        return problem.f_val(x, y) + g.jacobian(y).T @ lam

    def first_jac(y, lam):
        return problem.f_jac(x, y)[1] + g.weighted_hessian(lam, y), g.jacobian(y).T

    def region(y):
        return np.linalg.norm(y - problem.ybar) <= 2.0 * region_radius

    return semismooth_newton(first, first_jac, g, problem.theta, y0, lam0, tol, max_iter, region)


def empirical_calmness_probe(problem: GEProblem, radii: Sequence[float] = (1e-2, 1e-3, 1e-4),
                             directions: int = 32, seed: int = 0, neighborhood: Optional[float] = None,
                             random_starts: int = 6, tol: float = 1e-10, max_iter: int = 60) -> ProbeResult:
    """Solve the equilibrium at ``xbar + r d`` and tabulate ``sup ||y - ybar|| / r`` per radius.

    Unit directions and random starts are shared by all radii. A second pass
    warm-starts every radius from the solutions found at the other radii,
    rescaled, so a branch found at one radius is looked for at all of them.
    """
    radii = sorted((float(r) for r in radii), reverse=True)
    rng = np.random.default_rng(seed)
    n, m, l = problem.n, problem.m, problem.l
    dirs = rng.standard_normal((directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    V = problem.trust_radius() if neighborhood is None else float(neighborhood)
    try:
        lam_bar = recover_multiplier(problem).lam
    except (NoMultiplier, NormalityViolation):
        lam_bar = np.zeros(l)
    pool = []
    for _ in range(random_starts):
        step = rng.standard_normal(m)
        step *= V * rng.uniform(0.05, 1.0) / np.linalg.norm(step)
        pool.append((problem.ybar + step, lam_bar.copy()))

    sols = {}          # (radius index, direction index) -> list of (y, lam)
    outcome = {}

    def run(ri, di, starts):
        x = problem.xbar + radii[ri] * dirs[di]
        found = sols.setdefault((ri, di), [])
        stalled = False
        for y0, l0 in starts:
            res = _ge_newton(problem, x, y0, l0, V, tol, max_iter)
            if res.converged and problem.in_gamma(res.y, 1e-8):
                if np.linalg.norm(res.y - problem.ybar) <= V:
                    if not any(np.linalg.norm(res.y - y) <= 1e-9 for y, _ in found):
                        found.append((res.y, res.nu))
                else:
                    stalled = True
            elif res.status == "stalled":
                stalled = True
        prev = outcome.get((ri, di))
        outcome[(ri, di)] = "solved" if found else ("empty" if stalled or prev == "empty" else "diverged")

    base = [(problem.ybar.copy(), lam_bar.copy())] + pool
    for ri in range(len(radii)):
        for di in range(directions):
            run(ri, di, base)
    for ri in range(len(radii)):
        for di in range(directions):
            warm = []
            for rj in range(len(radii)):
                if rj == ri:
                    continue
                for y, lam in sols.get((rj, di), []):
                    warm.append((problem.ybar + (y - problem.ybar) * radii[ri] / radii[rj], lam))
            if warm:
                run(ri, di, warm)

    rows = []
    for ri, r in enumerate(radii):
        ratios = [np.linalg.norm(y - problem.ybar) / r for di in range(directions)
                  for y, _ in sols.get((ri, di), [])]
        states = [outcome[(ri, di)] for di in range(directions)]
        rows.append(ProbeRow(r, float(max(ratios)) if ratios else 0.0, states.count("solved"),
                             states.count("empty"), states.count("diverged")))
    maxes = np.array([row.max_ratio for row in rows])
    top = float(maxes.max()) if maxes.size else 0.0
    variation = float((maxes.max() - maxes.min()) / top) if top > 0 else 0.0
    if maxes[0] > 0:
        growth = float(maxes[-1] / maxes[0])
    else:
        growth = np.inf if maxes[-1] > 0 else 1.0
    unbounded = bool(growth > 4.0)
    monotone = bool(all(maxes[i + 1] <= 1.1 * maxes[i] + 1e-12 for i in range(len(maxes) - 1)))
    total = directions * len(radii)
    diverged = sum(row.diverged for row in rows)
    return ProbeResult(rows, top, variation, float(growth), unbounded, monotone,
                       diverged > 0.5 * total, V, directions)
