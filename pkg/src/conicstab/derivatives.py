"""Graphical derivatives of ``P_Gamma``, ``N_Gamma`` and the solution map.

All three reduce to inclusions of the form

    rhs in L v + J' N_K(J v)

with a polyhedral critical cone ``K``. On the relative interior of a face
``F`` of ``K`` the normal cone is the fixed cone ``cone(A_F) + span(B)``, so
the solution set is a finite union of polyhedra, one per face.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import polyhedral as ph
from .config import FACE_CAP, TAU_KKT, TAU_MEM, TAU_NUM
from .cones import PolyCone
from .errors import (AssumptionsUnverified, Infeasible, NoMultiplier, NonPolyhedralCriticalCone,
                     NormalityViolation, NotNormal)
from .faces import FaceDecomposition, enumerate_faces
from .geometry import (GEProblem, _solve_multiplier, check_nondegeneracy,
                       directional_derivative_projection_gamma, project_gamma, recover_multiplier)
from .projcalc import CriticalConeResult, PDCVerdict, critical_cone, pdc_check


# ---------------------------------------------------------------------------
# piecewise polyhedral sets
# ---------------------------------------------------------------------------

@dataclass
class Piece:
    """``{v : exists a >= 0, b with E_v v + E_a a + E_b b = rhs, I_v v <= 0}``."""

    eq_v: np.ndarray
    eq_nonneg: np.ndarray
    eq_free: np.ndarray
    rhs: np.ndarray
    ineq_v: np.ndarray
    face: int = -1
    label: str = ""

    @property
    def dim(self) -> int:
        return self.eq_v.shape[1]

    @property
    def sizes(self):
        return self.dim, self.eq_nonneg.shape[1], self.eq_free.shape[1]

    def residual(self, v) -> float:
        """Distance-like violation of the piece's constraints at ``v``."""
        v = np.asarray(v, dtype=float)
        ineq = float(np.max(self.ineq_v @ v, initial=0.0)) if self.ineq_v.shape[0] else 0.0
        target = self.rhs - self.eq_v @ v
        res, _, _ = ph.cone_residual(target, self.eq_nonneg.T, self.eq_free.T)
        return max(ineq, res)

    def contains(self, v, tol: float = TAU_NUM) -> bool:
        scale = max(1.0, float(np.linalg.norm(v)), float(np.linalg.norm(self.rhs)))
        return self.residual(v) <= tol * scale

    def _lp(self, c_v, box: Optional[float]):
        m, k, p = self.sizes
        c = np.concatenate([c_v, np.zeros(k + p)])
        A_eq = np.hstack([self.eq_v, self.eq_nonneg, self.eq_free])
        A_ub = np.hstack([self.ineq_v, np.zeros((self.ineq_v.shape[0], k + p))]) if self.ineq_v.shape[0] else None
        b_ub = np.zeros(self.ineq_v.shape[0]) if self.ineq_v.shape[0] else None
        vb = (-box, box) if box is not None else (None, None)
        bounds = [vb] * m + [(0, None)] * k + [(None, None)] * p
        if A_eq.shape[0] == 0:
            A_eq, b_eq = None, None
        else:
            b_eq = self.rhs
        return ph.lp_max(c, A_ub, b_ub, A_eq, b_eq, bounds)

    def feasible_point(self):
        """A point ``(v, a, b)`` of the piece, or ``None`` if it is empty."""
        val, x = self._lp(np.zeros(self.dim), None)
        return None if val is None else self.polish(x)

    def nonzero_witness(self, tol: float = 1e-9):
        """A point with ``v != 0`` or ``None`` when the piece lies in ``{0}``."""
        pt = self.feasible_point()
        if pt is None:
            return None
        if np.linalg.norm(pt[:self.dim]) > tol:
            return pt
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = sign
                val, x = self._lp(c, 1.0)
                if val is not None and val > tol:
                    return self.polish(x)
        return None

    def polish(self, x, tight: float = 1e-9):
        """Snap an LP point onto its active constraints by a least-norm correction."""
        m, k, p = self.sizes
        x = np.asarray(x, dtype=float).copy()
        v, a = x[:m], x[m:m + k]
        free_a = a > tight
        ineq_tight = (self.ineq_v @ v >= -tight) if self.ineq_v.shape[0] else np.zeros(0, bool)
        cols = np.concatenate([np.ones(m, bool), free_a, np.ones(p, bool)])
        A_eq = np.hstack([self.eq_v, self.eq_nonneg, self.eq_free])
        rows = [A_eq]
        rhs = [self.rhs]
        if ineq_tight.any():
            rows.append(np.hstack([self.ineq_v[ineq_tight], np.zeros((int(ineq_tight.sum()), k + p))]))
            rhs.append(np.zeros(int(ineq_tight.sum())))
        M = np.vstack(rows)
        r = np.concatenate(rhs)
        x[m:m + k][~free_a] = 0.0
        if M.shape[0] == 0:
            return x
        resid = r - M @ x
        delta = np.linalg.lstsq(M[:, cols], resid, rcond=None)[0]
        y = x.copy()
        y[cols] += delta
        ok_a = np.all(y[m:m + k] >= -1e-12)
        ok_i = not self.ineq_v.shape[0] or np.all(self.ineq_v @ y[:m] <= 1e-12)
        return y if ok_a and ok_i else x

    def split(self, x):
        m, k, p = self.sizes
        return x[:m], x[m:m + k], x[m + k:]

    def to_dict(self) -> dict:
        return {"face": self.face, "label": self.label, "eqV": self.eq_v.tolist(),
                "eqNonneg": self.eq_nonneg.tolist(), "eqFree": self.eq_free.tolist(),
                "rhs": self.rhs.tolist(), "ineqV": self.ineq_v.tolist()}


@dataclass
class PiecewisePolyhedralSet:
    dim: int
    pieces: list

    def contains(self, v, tol: float = TAU_NUM) -> bool:
        return any(p.contains(v, tol) for p in self.pieces)

    def is_empty(self) -> bool:
        return all(p.feasible_point() is None for p in self.pieces)

    def nonzero_witness(self, tol: float = 1e-9):
        """``(piece, point)`` with a nonzero ``v`` component, or ``None``."""
        for p in self.pieces:
            x = p.nonzero_witness(tol)
            if x is not None:
                return p, x
        return None

    def is_trivial(self) -> bool:
        """True iff the union equals ``{0}``."""
        return self.contains(np.zeros(self.dim)) and self.nonzero_witness() is None

    def points(self):
        """One feasible ``v`` per nonempty piece."""
        out = []
        for p in self.pieces:
            x = p.feasible_point()
            if x is not None:
                out.append(x[:self.dim])
        return out

    def to_dict(self) -> dict:
        return {"dim": self.dim, "pieces": [p.to_dict() for p in self.pieces]}


def face_pieces(decomp: FaceDecomposition, L, J, rhs) -> list:
    """Pieces of ``{v : rhs in L v + J' N_K(J v)}``, one per face of ``K``."""
    L = np.asarray(L, dtype=float)
    J = np.asarray(J, dtype=float)
    m = L.shape[1]
    pieces = []
    for F in decomp.faces:
        E = F.cone.B @ J
        R, Bn = F.normal_rays, F.normal_lineality
        zeros_a = np.zeros((E.shape[0], R.shape[0]))
        zeros_b = np.zeros((E.shape[0], Bn.shape[0]))
        pieces.append(Piece(
            eq_v=np.vstack([L, E]),
            eq_nonneg=np.vstack([J.T @ R.T, zeros_a]).reshape(m + E.shape[0], R.shape[0]),
            eq_free=np.vstack([J.T @ Bn.T, zeros_b]).reshape(m + E.shape[0], Bn.shape[0]),
            rhs=np.concatenate([rhs, np.zeros(E.shape[0])]),
            ineq_v=(F.cone.A @ J).reshape(F.cone.A.shape[0], m),
            face=F.index,
            label=f"face{F.index}:dim{F.dim}",
        ))
    return pieces


def _polyhedral(cc: CriticalConeResult) -> PolyCone:
    if not cc.is_polyhedral:
        raise NonPolyhedralCriticalCone("critical cone contains a full Lorentz block; faces cannot be enumerated")
    return cc.cone


def _status(pdc: PDCVerdict, exact: bool) -> str:
    if pdc.status != "certified":
        return "inclusion-only"
    return "equality" if exact else "inclusion-only"


# ---------------------------------------------------------------------------
# derivative of the solution map
# ---------------------------------------------------------------------------

@dataclass
class SolutionMapDerivative:
    set: PiecewisePolyhedralSet
    equality: bool
    status: str
    critical: CriticalConeResult
    faces: FaceDecomposition
    lam: np.ndarray
    lagrangian_hessian: np.ndarray
    pdc: PDCVerdict

    def contains(self, v, tol: float = TAU_NUM) -> bool:
        return self.set.contains(v, tol)

    def is_trivial(self) -> bool:
        return self.set.is_trivial()

    def to_dict(self) -> dict:
        return {"equality": self.equality, "status": self.status, "trivial": self.is_trivial(),
                "faces": [F.to_dict() for F in self.faces.faces], "pieces": self.set.to_dict()["pieces"]}


def graphical_derivative_solution_map(problem: GEProblem, u, multiplier=None, pdc: Optional[PDCVerdict] = None,
                                      face_cap: int = FACE_CAP, seed: int = 0) -> SolutionMapDerivative:
    """Face-enumerated evaluation of ``DS(xbar, ybar)(u)``.

    Each piece is ``{v : grad_x f u + grad_y L v + grad g' mu = 0, grad g v in F, mu in N_F}``.
    The inclusion becomes an equality when ``grad_x f(xbar, ybar)`` has full row rank.
    """
    u = np.asarray(u, dtype=float)
    if not check_nondegeneracy(problem).holds:
        raise AssumptionsUnverified("nondegeneracy fails at the reference point")
    if multiplier is None:
        multiplier = recover_multiplier(problem)
    lam = multiplier.lam
    z = problem.g(problem.ybar)
    if pdc is None:
        pdc = pdc_check(problem.theta, z, seed=seed)
    cc = critical_cone(problem.theta, z, lam)
    K = _polyhedral(cc)
    decomp = enumerate_faces(K, cap=face_cap)
    Fx, _ = problem.f_jac(problem.xbar, problem.ybar)
    L = problem.lagrangian_hessian(lam)
    J = problem.g.jacobian(problem.ybar)
    pieces = face_pieces(decomp, L, J, -Fx @ u)
    surjective = ph.rank(Fx) == problem.m if Fx.size else problem.m == 0
    return SolutionMapDerivative(PiecewisePolyhedralSet(problem.m, pieces), surjective,
                                 _status(pdc, surjective), cc, decomp, lam, L, pdc)


# ---------------------------------------------------------------------------
# derivative of the projection onto Gamma
# ---------------------------------------------------------------------------

@dataclass
class ProjectionGraphDerivative:
    value: np.ndarray
    candidates: list
    status: str
    method: str
    set: Optional[PiecewisePolyhedralSet] = None

    @property
    def unique(self) -> bool:
        return all(np.allclose(c, self.value, atol=1e-8) for c in self.candidates)


def graphical_derivative_projection(problem: GEProblem, ubar, h, ybar=None,
                                    pdc: Optional[PDCVerdict] = None, face_cap: int = FACE_CAP,
                                    seed: int = 0) -> ProjectionGraphDerivative:
    """``DP_Gamma(ubar, ybar)(h)`` from ``h in (I + sum nu_i hess g_i) v1 + grad g' N_K(grad g v1)``."""
    h = np.asarray(h, dtype=float)
    y, nu = project_gamma(problem, ubar)
    if ybar is not None and np.linalg.norm(y - np.asarray(ybar, dtype=float)) > 1e-8:
        raise ValueError("ybar is not the projection of ubar")
    z = problem.g(y)
    if pdc is None:
        pdc = pdc_check(problem.theta, z, seed=seed)
    cc = critical_cone(problem.theta, z, nu)
    if pdc.status != "certified" or not cc.is_polyhedral:
        d = directional_derivative_projection_gamma(problem, ubar, h)
        return ProjectionGraphDerivative(d.value, [d.value], "inclusion-only", d.method)
    decomp = enumerate_faces(cc.cone, cap=face_cap)
    J = problem.g.jacobian(y)
    A = np.eye(problem.m) + problem.g.weighted_hessian(nu, y)
    S = PiecewisePolyhedralSet(problem.m, face_pieces(decomp, A, J, h))
    cands = S.points()
    if not cands:
        raise Infeasible("no face admits a solution; the derivative system is inconsistent")
    return ProjectionGraphDerivative(cands[0], cands, "equality", "faces", S)


# ---------------------------------------------------------------------------
# derivative of the regular normal cone mapping
# ---------------------------------------------------------------------------

@dataclass
class NormalConeDerivative:
    offset: np.ndarray
    cone: Optional[PolyCone]
    nu: np.ndarray
    critical: CriticalConeResult
    status: str

    @property
    def empty(self) -> bool:
        return self.cone is None

    def contains(self, w, tol: float = 1e-8) -> bool:
        if self.cone is None:
            return False
        return self.cone.contains(np.asarray(w, dtype=float) - self.offset, tol)


def graphical_derivative_normal_cone(problem: GEProblem, wbar, v, ybar=None,
                                     pdc: Optional[PDCVerdict] = None, seed: int = 0) -> NormalConeDerivative:
    """``DN_Gamma(ybar, wbar)(v) = (sum nu_i hess g_i) v + grad g' N_K(grad g v)``."""
    y = problem.ybar if ybar is None else np.asarray(ybar, dtype=float)
    wbar = np.asarray(wbar, dtype=float)
    v = np.asarray(v, dtype=float)
    z = problem.g(y)
    J = problem.g.jacobian(y)
    try:
        nu, *_ = _solve_multiplier(J, wbar, problem.theta, z, TAU_KKT, TAU_MEM)
    except (NoMultiplier, NormalityViolation) as exc:
        raise NotNormal(f"wbar is not a regular normal to the constraint set: {exc}") from exc
    if pdc is None:
        pdc = pdc_check(problem.theta, z, seed=seed)
    cc = critical_cone(problem.theta, z, nu)
    K = _polyhedral(cc)
    offset = problem.g.weighted_hessian(nu, y) @ v
    p = J @ v
    status = "equality" if pdc.status == "certified" else "inclusion-only"
    if not K.contains(p, 1e-9):
        return NormalConeDerivative(offset, None, nu, cc, status)
    act = K.active_rows(p, 1e-9)
    rays = K.A[act] @ J
    lin = K.B @ J
    cone = PolyCone.from_generators(rays, lin, problem.m)
    return NormalConeDerivative(offset, cone, nu, cc, status)
