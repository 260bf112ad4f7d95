"""Constraint sets ``Gamma = {y : g(y) in Theta}`` and generalized equations on them.

The generalized equation is ``0 in f(x, y) + N_Gamma(y)`` with polynomial
``f`` and ``g``. Projections onto ``Gamma`` and local equilibria are found by
a damped semismooth Newton method on the KKT residual

    F(y, nu) = [ r(y, nu) ; g(y) - P_Theta(g(y) + nu) ],

where the second block encodes ``nu in N_Theta(g(y))`` and ``r`` is either
``y - u + grad g(y)' nu`` (projection) or ``f(x, y) + grad g(y)' nu``
(equilibrium).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import polyhedral as ph
from .config import FD_STEP, TAU_KKT, TAU_MEM, TAU_RANK
from .cones import Cone, ConeProjectionDerivative, PolyCone
from .errors import (DimensionMismatch, Infeasible, NoConvergence, NoMultiplier,
                     NormalityViolation, OutsideTrustRegion, Unsupported)
from .polynomial import PolynomialMap
from .projcalc import is_normal


@dataclass(eq=False)
class GEProblem:
    """Generalized equation ``0 in f(x, y) + N_Gamma(y)`` with reference pair ``(xbar, ybar)``.

    ``f`` maps ``R^(n+m) -> R^m`` with variables ordered ``(x, y)``; ``g`` maps
    ``R^m -> R^l``; ``theta`` is a cone in ``R^l``.
    """

    f: PolynomialMap
    g: PolynomialMap
    theta: Cone
    xbar: np.ndarray
    ybar: np.ndarray
    name: str = "problem"

    def __post_init__(self):
        self.xbar = np.asarray(self.xbar, dtype=float)
        self.ybar = np.asarray(self.ybar, dtype=float)
        n, m = self.xbar.size, self.ybar.size
        if self.g.in_dim != m:
            raise DimensionMismatch(f"g takes {self.g.in_dim} inputs but ybar has length {m}")
        if self.g.out_dim != self.theta.dim:
            raise DimensionMismatch(f"g has {self.g.out_dim} outputs but the cone has dimension {self.theta.dim}")
        if self.f.in_dim != n + m or self.f.out_dim != m:
            raise DimensionMismatch(f"f must map R^{n + m} -> R^{m}, got R^{self.f.in_dim} -> R^{self.f.out_dim}")

    @property
    def n(self) -> int:
        return self.xbar.size

    @property
    def m(self) -> int:
        return self.ybar.size

    @property
    def l(self) -> int:
        return self.theta.dim

    def f_val(self, x, y) -> np.ndarray:
        return self.f(np.concatenate([x, y]))

    def f_jac(self, x, y):
        """``(grad_x f, grad_y f)``."""
        J = self.f.jacobian(np.concatenate([x, y]))
        return J[:, :self.n], J[:, self.n:]

    def lagrangian_hessian(self, lam, x=None, y=None) -> np.ndarray:
        """``grad_y L = grad_y f + sum_i lam_i hess g_i`` at ``(x, y)`` (reference by default)."""
        x = self.xbar if x is None else x
        y = self.ybar if y is None else y
        return self.f_jac(x, y)[1] + self.g.weighted_hessian(lam, y)

    def trust_radius(self) -> float:
        return 0.5 * (1.0 + float(np.linalg.norm(self.ybar)))

    def in_gamma(self, y, tol: float = TAU_MEM) -> bool:
        return self.theta.contains(self.g(y), tol)


def _require_feasible(problem: GEProblem, tol: float) -> np.ndarray:
    z = problem.g(problem.ybar)
    if not problem.theta.contains(z, tol):
        raise Infeasible(f"g(ybar) = {np.round(z, 12).tolist()} is not in the cone")
    return z


# ---------------------------------------------------------------------------
# nondegeneracy and multipliers
# ---------------------------------------------------------------------------

@dataclass
class NondegeneracyReport:
    holds: bool
    rank: int
    required: int
    singular_values: list

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "rank": self.rank, "required": self.required,
                "singularValues": self.singular_values}


def check_nondegeneracy(problem: GEProblem, tol: float = TAU_MEM, rank_rtol: float = TAU_RANK) -> NondegeneracyReport:
    """``grad g(ybar) R^m + lin T_Theta(g(ybar)) = R^l`` by an SVD rank test."""
    z = _require_feasible(problem, tol)
    J = problem.g.jacobian(problem.ybar)
    L = problem.theta.tangent_cone(z, tol).lineality()
    M = np.hstack([J, L.T])
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    r = int(np.sum(s > rank_rtol * s[0])) if s.size and s[0] > 0 else 0
    return NondegeneracyReport(r == problem.l, r, problem.l, [float(v) for v in s])


@dataclass
class MultiplierResult:
    lam: np.ndarray
    residual: float
    unique: bool
    method: str = "least-squares"

    def to_dict(self) -> dict:
        return {"lambda": self.lam.tolist(), "residual": self.residual, "unique": self.unique,
                "method": self.method}


def _solve_multiplier(J, rhs, cone: Cone, z, tol_kkt, tol_mem):
    """Find ``nu in N(z)`` with ``J' nu = rhs``."""
    nu, *_ = np.linalg.lstsq(J.T, rhs, rcond=None)
    residual = float(np.linalg.norm(J.T @ nu - rhs))
    kernel = ph.null_basis(J.T, J.shape[0])
    unique = kernel.shape[0] == 0
    if residual <= tol_kkt * max(1.0, float(np.linalg.norm(rhs))) and is_normal(cone, z, nu, tol_mem):
        return nu, residual, unique, "least-squares"
    N = None
    try:
        N = cone.normal_cone(z, tol_mem)
    except Unsupported:
        pass
    if unique or not isinstance(N, PolyCone):
        if residual > tol_kkt * max(1.0, float(np.linalg.norm(rhs))):
            raise NoMultiplier(f"no multiplier: least-squares residual {residual:.3e}")
        raise NormalityViolation(f"multiplier {np.round(nu, 12).tolist()} is not normal to the cone")
    # several multipliers: search the normal cone directly
    rays, lin = N.generators()
    res, alpha, beta = ph.cone_residual(rhs, rays @ J, lin @ J)
    if res > tol_kkt * max(1.0, float(np.linalg.norm(rhs))):
        raise NoMultiplier(f"no normal multiplier: residual {res:.3e}")
    nu = rays.T @ alpha + lin.T @ beta
    return nu, float(np.linalg.norm(J.T @ nu - rhs)), False, "nnls-on-normal-cone"


def recover_multiplier(problem: GEProblem, tol_kkt: float = TAU_KKT, tol_mem: float = TAU_MEM) -> MultiplierResult:
    """Solve ``grad g(ybar)' lam = -f(xbar, ybar)`` with ``lam in N_Theta(g(ybar))``."""
    z = _require_feasible(problem, tol_mem)
    J = problem.g.jacobian(problem.ybar)
    rhs = -problem.f_val(problem.xbar, problem.ybar)
    lam, res, unique, method = _solve_multiplier(J, rhs, problem.theta, z, tol_kkt, tol_mem)
    # nondegeneracy forces uniqueness even when grad g(ybar)' has a kernel
    unique = unique or check_nondegeneracy(problem, tol_mem).holds
    return MultiplierResult(lam, res, unique, method)


# ---------------------------------------------------------------------------
# semismooth Newton
# ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    y: np.ndarray
    nu: np.ndarray
    residual: float
    iterations: int
    status: str           # converged / stalled / max-iter / left-region

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def semismooth_newton(first: Callable, first_jac: Callable, g: PolynomialMap, cone: Cone,
                      y0, nu0, tol: float = TAU_KKT, max_iter: int = 100,
                      region: Optional[Callable] = None) -> NewtonResult:
    """Damped semismooth Newton on ``[first(y, nu); g(y) - P(g(y) + nu)] = 0``.

    ``first_jac(y, nu)`` returns the pair of partial Jacobians of ``first``.
    The generalized Jacobian of the projection is a B-subdifferential element
    supplied by the cone. Globalized by Armijo backtracking on ``0.5 ||F||^2``.
    """
    y = np.asarray(y0, dtype=float).copy()
    nu = np.asarray(nu0, dtype=float).copy()
    m = y.size

    def residual(y, nu):
        gy = g(y)
        return np.concatenate([first(y, nu), gy - cone.project(gy + nu)])

    F = residual(y, nu)
    norm = float(np.linalg.norm(F))
    it = 0
    polish = 0
    while it < max_iter:
        if norm <= tol:
            if polish >= 2 or norm == 0.0:
                break
            polish += 1
        Jg = g.jacobian(y)
        V = cone.projection_jacobian(g(y) + nu)
        Ay, Anu = first_jac(y, nu)
        top = np.hstack([Ay, Anu])
        bottom = np.hstack([Jg - V @ Jg, -V])
        Jac = np.vstack([top, bottom])
        try:
            step = np.linalg.solve(Jac, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Jac, -F, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return NewtonResult(y, nu, norm, it, "stalled")
        s = 1.0
        accepted = False
        while s >= 1e-8:
            y_new = y + s * step[:m]
            nu_new = nu + s * step[m:]
            F_new = residual(y_new, nu_new)
            n_new = float(np.linalg.norm(F_new))
            if n_new ** 2 <= (1.0 - 1e-4 * s) * norm ** 2 or (norm <= tol and n_new <= norm):
                accepted = True
                break
            s *= 0.5
        it += 1
        if not accepted:
            status = "converged" if norm <= tol else "stalled"
            return NewtonResult(y, nu, norm, it, status)
        y, nu, F, norm = y_new, nu_new, F_new, n_new
        if region is not None and not region(y):
            return NewtonResult(y, nu, norm, it, "left-region")
    return NewtonResult(y, nu, norm, it, "converged" if norm <= tol else "max-iter")


# ---------------------------------------------------------------------------
# projection onto Gamma
# ---------------------------------------------------------------------------

def _projection_newton(problem: GEProblem, u, y0, nu0, tol, max_iter):
    g = problem.g
    m = problem.m

    def first(y, nu):
        return y - u + g.jacobian(y).T @ nu

    def first_jac(y, nu):
        return np.eye(m) + g.weighted_hessian(nu, y), g.jacobian(y).T

    return semismooth_newton(first, first_jac, g, problem.theta, y0, nu0, tol, max_iter)


def project_gamma(problem: GEProblem, u, r_loc: Optional[float] = None, tol: float = TAU_KKT,
                  max_iter: int = 100):
    """Locally unique ``(y, nu)`` with ``y = P_Gamma(u)`` and ``u = y + grad g(y)' nu``.

    Raises
    ------
    OutsideTrustRegion
        ``u`` is farther than ``r_loc`` from ``ybar``.
    NoConvergence
        No start reached a KKT residual below ``tol``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.m,):
        raise DimensionMismatch(f"u must have length {problem.m}")
    r_loc = problem.trust_radius() if r_loc is None else r_loc
    if np.linalg.norm(u - problem.ybar) > r_loc:
        raise OutsideTrustRegion(f"||u - ybar|| = {np.linalg.norm(u - problem.ybar):.3g} exceeds {r_loc:.3g}")
    if problem.in_gamma(u):
        # u feasible; the zero multiplier certifies y = u
        return u.copy(), np.zeros(problem.l)
    l = problem.l
    starts = [(u, np.zeros(l)), (problem.ybar, np.zeros(l))]
    J0 = problem.g.jacobian(problem.ybar)
    nu_ls = np.linalg.lstsq(J0.T, u - problem.ybar, rcond=None)[0]
    starts.append((problem.ybar, nu_ls))
    starts.append((0.5 * (u + problem.ybar), 0.5 * nu_ls))
    best = None
    for y0, nu0 in starts:
        res = _projection_newton(problem, u, y0, nu0, tol, max_iter)
        if res.converged and problem.in_gamma(res.y):
            d = float(np.linalg.norm(res.y - u))
            if best is None or d < best[0] - 1e-12:
                best = (d, res)
    if best is None:
        raise NoConvergence(f"projection onto the constraint set failed from all starts (u={u.tolist()})")
    return best[1].y, best[1].nu


# ---------------------------------------------------------------------------
# directional derivative of P_Gamma
# ---------------------------------------------------------------------------

class _FDProjectionDerivative:
    """Forward-difference stand-in for ``P'(w; .)`` when no closed form exists."""

    def __init__(self, cone: Cone, w, t: float = FD_STEP):
        self.cone, self.w, self.t = cone, np.asarray(w, dtype=float), t
        self.base = cone.project(self.w)

    def __call__(self, d):
        return (self.cone.project(self.w + self.t * d) - self.base) / self.t

    def jacobian(self, d):
        return self.cone.projection_jacobian(self.w + self.t * np.asarray(d, dtype=float))


@dataclass
class GammaDerivative:
    value: np.ndarray
    v2: np.ndarray
    residual: float
    method: str


def _solve_derivative_system(A, J, D, h, tol=1e-12, max_iter=60):
    """Solve ``h = A v1 + J' v2``, ``0 = J v1 - D(J v1 + v2)`` by piecewise Newton."""
    m, l = A.shape[0], J.shape[0]

    def F(v1, v2):
        return np.concatenate([A @ v1 + J.T @ v2 - h, J @ v1 - D(J @ v1 + v2)])

    best = None
    starts = [(h.copy(), np.zeros(l)), (np.zeros(m), np.zeros(l))]
    try:
        starts.append(tuple(np.split(np.linalg.lstsq(np.hstack([A, J.T]), h, rcond=None)[0], [m])))
    except np.linalg.LinAlgError:
        pass
    for v1, v2 in starts:
        r = F(v1, v2)
        nr = float(np.linalg.norm(r))
        for _ in range(max_iter):
            if nr <= tol * max(1.0, float(np.linalg.norm(h))):
                break
            M = D.jacobian(J @ v1 + v2)
            Jac = np.block([[A, J.T], [J - M @ J, -M]])
            step = np.linalg.lstsq(Jac, -r, rcond=None)[0]
            s = 1.0
            while s > 1e-8:
                c1, c2 = v1 + s * step[:m], v2 + s * step[m:]
                rc = F(c1, c2)
                if np.linalg.norm(rc) < (1 - 1e-4 * s) * nr:
                    break
                s *= 0.5
            if s <= 1e-8:
                break
            v1, v2, r, nr = c1, c2, rc, float(np.linalg.norm(rc))
        if best is None or nr < best[2]:
            best = (v1, v2, nr)
        if nr <= tol * max(1.0, float(np.linalg.norm(h))):
            break
    return best


def directional_derivative_projection_gamma(problem: GEProblem, u, h, tol: float = 1e-10) -> GammaDerivative:
    """``P_Gamma'(u; h)`` as ``v1`` of the linearized KKT system.

    Solves ``h = (I + sum nu_i hess g_i(y)) v1 + grad g(y)' v2`` and
    ``0 = grad g(y) v1 - P_Theta'(g(y) + nu; grad g(y) v1 + v2)``.
    """
    h = np.asarray(h, dtype=float)
    y, nu = project_gamma(problem, u)
    J = problem.g.jacobian(y)
    A = np.eye(problem.m) + problem.g.weighted_hessian(nu, y)
    w = problem.g(y) + nu
    try:
        D = problem.theta.projection_derivative(w)
        method = "newton:closed-form"
    except Unsupported:
        D = _FDProjectionDerivative(problem.theta, w)
        method = "newton:fd-derivative"
    v1, v2, res = _solve_derivative_system(A, J, D, h)
    if res > max(tol, 1e-8) * max(1.0, float(np.linalg.norm(h))):
        raise NoConvergence(f"derivative system residual {res:.3e}")
    return GammaDerivative(v1, v2, res, method)


# ---------------------------------------------------------------------------
# curvature sign probe
# ---------------------------------------------------------------------------

@dataclass
class ConvexityProbe:
    status: str                    # sampled-ok / fails / inconclusive
    samples: int
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"status": self.status, "samples": self.samples, "witness": self.witness,
                "method": "sampled"}


def theta_convexity_probe(problem: GEProblem, samples: int = 200, seed: int = 0) -> ConvexityProbe:
    """Sample ``<hess g(y)(h, h), nu>`` over polar directions ``nu``; report the first negative value."""
    rng = np.random.default_rng(seed)
    try:
        polar = problem.theta.polar()
    except Unsupported:
        return ConvexityProbe("inconclusive", 0)
    nus = polar.sample(rng, samples)
    radius = problem.trust_radius()
    for k in range(samples):
        y = problem.ybar + radius * rng.uniform(-1, 1, problem.m) / np.sqrt(problem.m)
        h = rng.standard_normal(problem.m)
        val = float(h @ problem.g.weighted_hessian(nus[k], y) @ h)
        if val < -1e-12 * max(1.0, float(np.linalg.norm(nus[k]) * (h @ h))):
            return ConvexityProbe("fails", k + 1, {"y": y.tolist(), "h": h.tolist(), "nu": nus[k].tolist(),
                                                   "value": val})
    return ConvexityProbe("sampled-ok", samples)
