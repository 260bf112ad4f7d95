"""Projection calculus on catalogue cones.

Critical cones, second-order tangent sets, the parabolic second-order
derivative, extended polyhedricity and the projection derivation condition
(PDC): ``P'(z + b; h) = P_K(h)`` with ``K = T(z) ∩ b^⊥`` for every normal
``b`` at ``z`` and every direction ``h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import polyhedral as ph
from .config import FD_STEP, PDC_SAMPLES, TAU_MEM, TAU_PDC
from .cones import Cone, Lorentz, PolyCone, PowerSurface, Product
from .errors import NotMember, NotNormal, NotTangent, OutsideChart, Unsupported
from .numdiff import forward_difference


# ---------------------------------------------------------------------------
# critical cones
# ---------------------------------------------------------------------------

@dataclass
class CriticalConeResult:
    """``K(z, b) = T(z) ∩ b^⊥`` together with the data it was built from."""

    cone: Cone
    base_point: np.ndarray
    normal_direction: np.ndarray
    is_polyhedral: bool

    def to_dict(self) -> dict:
        out = {"isPolyhedral": self.is_polyhedral}
        if self.is_polyhedral:
            rays, lin = self.cone.generators()
            polar = self.cone.polar()
            out.update({
                "ineq": self.cone.A.tolist(), "eq": self.cone.B.tolist(),
                "rays": rays.tolist(), "lineality": lin.tolist(),
                "polar": {"ineq": polar.A.tolist(), "eq": polar.B.tolist()},
            })
        else:
            out["cone"] = self.cone.to_dict()
        return out


def is_normal(cone: Cone, z, b, tol: float = TAU_MEM) -> bool:
    """``b ∈ N(z)`` via the projection identity ``P(z + b) = z``."""
    z = np.asarray(z, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(1.0, float(np.linalg.norm(z + b)))
    return float(np.linalg.norm(cone.project(z + b) - z)) <= tol * scale


def critical_cone(cone: Cone, zbar, b, tol: float = TAU_MEM) -> CriticalConeResult:
    zbar = cone._vec(zbar)
    b = cone._vec(b)
    if not cone.contains(zbar, tol):
        raise NotMember(f"base point {zbar.tolist()} is not in the cone")
    if not is_normal(cone, zbar, b, tol):
        raise NotNormal(f"direction {b.tolist()} is not normal to the cone at {zbar.tolist()}")
    K = cone.critical_cone(zbar, b, tol)
    return CriticalConeResult(K, zbar, b, isinstance(K, PolyCone))


# ---------------------------------------------------------------------------
# parabolic second-order derivative
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarC2:
    """A twice differentiable scalar function given by value/gradient/Hessian callables."""

    value: Callable
    grad: Callable
    hess: Callable
    check: Optional[Callable] = None

    def _z(self, z):
        z = np.asarray(z, dtype=float)
        if self.check is not None:
            self.check(z)
        return z


def _power_chart(z):
    if z.shape != (3,):
        raise ValueError("power-surface function takes 3-vectors")
    if z[0] <= 0.0:
        raise OutsideChart(f"z1 = {z[0]:g} <= 0 is outside the chart")


POWER_SURFACE_PHI = ScalarC2(PowerSurface.phi, PowerSurface.grad_phi, PowerSurface.hess_phi, _power_chart)


def parabolic_second_derivative(phi: ScalarC2, z, h, w) -> float:
    """``grad phi(z) w + hess phi(z)(h, h)``."""
    z = phi._z(z)
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(phi.grad(z) @ w + h @ phi.hess(z) @ h)


# ---------------------------------------------------------------------------
# second-order tangent sets
# ---------------------------------------------------------------------------

class SecondOrderTangentSet:
    def contains(self, w, tol: float = TAU_MEM) -> bool:
        raise NotImplementedError

    def contains_zero(self, tol: float = TAU_MEM) -> bool:
        raise NotImplementedError

    def support(self, x, tol: float = 1e-9) -> float:
        """``sup { <x, w> : w in the set }`` (``-inf`` for the empty set)."""
        raise NotImplementedError


@dataclass
class HalfspaceT2(SecondOrderTangentSet):
    """``{w : <a, w> + offset <= 0}``; the whole space when ``a = 0`` and ``offset <= 0``."""

    a: np.ndarray
    offset: float

    def contains(self, w, tol: float = TAU_MEM) -> bool:
        return float(self.a @ np.asarray(w, dtype=float)) + self.offset <= tol

    def contains_zero(self, tol: float = TAU_MEM) -> bool:
        return self.offset <= tol

    def support(self, x, tol: float = 1e-9) -> float:
        x = np.asarray(x, dtype=float)
        na = float(np.linalg.norm(self.a))
        if na == 0.0:
            if self.offset > tol:
                return -np.inf
            return 0.0 if np.linalg.norm(x) <= tol else np.inf
        kappa = float(x @ self.a) / na ** 2
        if kappa < -tol or np.linalg.norm(x - kappa * self.a) > tol * max(1.0, np.linalg.norm(x)):
            return np.inf
        return -max(kappa, 0.0) * self.offset

    def to_dict(self) -> dict:
        return {"type": "halfspace", "normal": self.a.tolist(), "offset": float(self.offset)}


@dataclass
class ConeT2(SecondOrderTangentSet):
    """A second-order tangent set that is itself a cone."""

    cone: Cone

    def contains(self, w, tol: float = TAU_MEM) -> bool:
        return self.cone.contains(w, tol)

    def contains_zero(self, tol: float = TAU_MEM) -> bool:
        return True

    def support(self, x, tol: float = 1e-9) -> float:
        x = np.asarray(x, dtype=float)
        # sup over a cone is 0 on its polar and +inf elsewhere
        if np.linalg.norm(self.cone.project(x)) <= tol * max(1.0, np.linalg.norm(x)):
            return 0.0
        return np.inf

    def to_dict(self) -> dict:
        return {"type": "cone", "cone": self.cone.to_dict()}


@dataclass
class ProductT2(SecondOrderTangentSet):
    parts: list
    slices: list

    def contains(self, w, tol: float = TAU_MEM) -> bool:
        w = np.asarray(w, dtype=float)
        return all(p.contains(w[s], tol) for p, s in zip(self.parts, self.slices))

    def contains_zero(self, tol: float = TAU_MEM) -> bool:
        return all(p.contains_zero(tol) for p in self.parts)

    def support(self, x, tol: float = 1e-9) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(p.support(x[s], tol) for p, s in zip(self.parts, self.slices)))

    def to_dict(self) -> dict:
        return {"type": "product", "parts": [p.to_dict() for p in self.parts]}


def _smooth_t2(grad, hess, h, tol):
    slope = float(grad @ h)
    if slope < -tol:
        return HalfspaceT2(np.zeros_like(grad), 0.0)
    return HalfspaceT2(np.asarray(grad, dtype=float), float(h @ hess @ h))


def second_order_tangent_set(cone: Cone, zbar, h, tol: float = TAU_MEM) -> SecondOrderTangentSet:
    zbar = cone._vec(zbar)
    h = cone._vec(h)
    if isinstance(cone, Product):
        parts = [second_order_tangent_set(f, zbar[s], h[s], tol) for f, s in zip(cone.factors, cone.slices)]
        return ProductT2(parts, list(cone.slices))
    T = cone.tangent_cone(zbar, tol)
    if not T.contains(h, tol):
        raise NotTangent(f"direction {h.tolist()} is not tangent at {zbar.tolist()}")
    if isinstance(cone, PolyCone):
        return ConeT2(T.tangent_cone(h, tol))
    if cone.is_vertex(zbar, tol):
        # second-order tangent set at the vertex of a cone is T(h)
        return ConeT2(cone.tangent_cone(h, tol))
    smooth = cone.smooth_boundary(zbar, tol)
    if smooth is None:
        return ConeT2(PolyCone.full(cone.dim))
    return _smooth_t2(smooth[0], smooth[1], h, tol)


# ---------------------------------------------------------------------------
# extended polyhedricity
# ---------------------------------------------------------------------------

@dataclass
class EPVerdict:
    status: str                       # holds / fails / inconclusive
    method: str
    witness_h: Optional[np.ndarray] = None
    normal_b: Optional[np.ndarray] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status, "method": self.method,
            "witness": None if self.witness_h is None else {
                "h": self.witness_h.tolist(), "b": self.normal_b.tolist()},
            "detail": self.detail,
        }


def extended_polyhedricity(cone: Cone, zbar, tol: float = TAU_MEM) -> EPVerdict:
    """Density of ``{h in K(z,b) : 0 in T2(z,h)}`` in ``K(z,b)`` for every normal ``b``.

    Decided exactly from the local structure: polyhedral cones, vertices and
    interior points always qualify. At a smooth boundary point with outward
    normal ``a`` and curvature ``H`` the only nontrivial normal direction is
    ``b = a``, for which ``K`` is the plane ``a^⊥`` and the second-order set
    is ``{h in a^⊥ : h'Hh <= 0}``; it is dense iff ``H`` is negative
    semidefinite on the plane.
    """
    zbar = cone._vec(zbar)
    if not cone.contains(zbar, tol):
        raise NotMember(f"point {zbar.tolist()} is not in the cone")
    if isinstance(cone, Product):
        for f, s in zip(cone.factors, cone.slices):
            sub = extended_polyhedricity(f, zbar[s], tol)
            if sub.status != "holds":
                out = EPVerdict(sub.status, "product:" + sub.method, detail=sub.detail)
                if sub.witness_h is not None:
                    out.witness_h = np.zeros(cone.dim)
                    out.normal_b = np.zeros(cone.dim)
                    out.witness_h[s] = sub.witness_h
                    out.normal_b[s] = sub.normal_b
                return out
        return EPVerdict("holds", "product:all-factors")
    if cone.is_polyhedral:
        return EPVerdict("holds", "structural:polyhedral")
    if cone.is_vertex(zbar, tol):
        return EPVerdict("holds", "structural:vertex")
    smooth = cone.smooth_boundary(zbar, tol)
    if smooth is None:
        return EPVerdict("holds", "structural:interior")
    a, H = smooth
    Z = ph.null_basis(a[None, :], cone.dim)
    Hp = Z @ H @ Z.T
    evals, evecs = np.linalg.eigh(0.5 * (Hp + Hp.T))
    scale = max(1.0, float(np.abs(evals).max()) if evals.size else 1.0)
    if evals.size == 0 or evals[-1] <= 1e-10 * scale:
        return EPVerdict("holds", "exact:curvature-nsd-on-plane",
                         detail="second-order critical set equals the critical cone")
    h = Z.T @ evecs[:, -1]
    h = h / np.linalg.norm(h)
    if h[np.argmax(np.abs(h))] < 0:
        h = -h
    return EPVerdict("fails", "exact:curvature-positive-on-plane", witness_h=h, normal_b=a.copy(),
                     detail=f"h'Hh = {float(h @ H @ h):.6g} > 0 on an open subset of the critical plane")


# ---------------------------------------------------------------------------
# directional derivative of the projection
# ---------------------------------------------------------------------------

def directional_derivative_projection(cone: Cone, u, h) -> np.ndarray:
    """``P'(u; h)`` in closed form for orthant, polyhedral and Lorentz cones and their products."""
    u = cone._vec(u)
    h = cone._vec(h)
    return cone.projection_derivative(u)(h)


def fd_directional_derivative_projection(cone: Cone, u, h, t: float = FD_STEP) -> np.ndarray:
    """Forward-difference estimate of ``P'(u; h)``; the only option for the power-surface cone."""
    return forward_difference(cone.project, cone._vec(u), cone._vec(h), t)


# ---------------------------------------------------------------------------
# projection derivation condition
# ---------------------------------------------------------------------------

@dataclass
class PDCVerdict:
    status: str                      # certified / refuted / sampled-ok
    method: str
    samples: int = 0
    max_error: float = 0.0
    witness_b: Optional[np.ndarray] = None
    witness_h: Optional[np.ndarray] = None
    witness_error: Optional[float] = None
    curvature: Optional[float] = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status in ("certified", "sampled-ok")

    def to_dict(self) -> dict:
        d = {"status": self.status, "method": self.method, "samples": self.samples,
             "maxError": self.max_error, "detail": self.detail}
        if self.witness_b is not None:
            d["witness"] = {"b": self.witness_b.tolist(), "h": self.witness_h.tolist(),
                            "error": self.witness_error, "curvature": self.curvature}
        return d


def _structural_pdc(cone: Cone, zbar, tol) -> Optional[str]:
    if isinstance(cone, Product):
        methods = [_structural_pdc(f, zbar[s], tol) for f, s in zip(cone.factors, cone.slices)]
        if all(m is not None for m in methods):
            return "structural:product(" + ",".join(methods) + ")"
        return None
    if cone.is_polyhedral:
        return "structural:polyhedral"
    if cone.is_vertex(zbar, tol):
        return "structural:vertex"
    if cone.smooth_boundary(zbar, tol) is None:
        return "structural:interior"
    if cone.cone_reducible and extended_polyhedricity(cone, zbar, tol).status == "holds":
        return "structural:extended-polyhedricity"
    return None


def _normal_samples(cone: Cone, zbar, rng, count, tol):
    N = cone.normal_cone(zbar, tol)
    if isinstance(N, PolyCone):
        rays, lin = N.generators()
        out = []
        for k in range(count):
            b = np.zeros(cone.dim)
            if rays.shape[0]:
                if k % 2 == 0:
                    b = rays[(k // 2) % rays.shape[0]] * rng.uniform(0.1, 2.0)
                else:
                    b = rng.uniform(0.0, 2.0, rays.shape[0]) @ rays
            if lin.shape[0]:
                b = b + rng.standard_normal(lin.shape[0]) @ lin
            out.append(b)
        return out
    return list(N.sample(rng, count))


def _curvature_term(cone: Cone, zbar, b, d, tol) -> Optional[float]:
    """``sigma(b; T2(z, d))`` where it has a closed form."""
    try:
        T2 = second_order_tangent_set(cone, zbar, d, 1e-8)
    except (NotTangent, Unsupported):
        return None
    val = T2.support(b)
    return float(val) if np.isfinite(val) else None


def pdc_check(cone: Cone, zbar, samples: int = PDC_SAMPLES, seed: int = 0,
              tol: float = TAU_PDC, step: float = FD_STEP, mem_tol: float = TAU_MEM) -> PDCVerdict:
    """Certify, refute or sample the projection derivation condition at ``zbar``.

    Structural certificates: polyhedral cones, vertices of cones, interior
    points and cone-reducible points satisfying extended polyhedricity.
    Otherwise ``samples`` pairs ``(b, h)`` are tested, comparing the forward
    difference quotient of the projection at ``zbar + b`` with ``P_K(h)``.
    """
    zbar = cone._vec(zbar)
    if not cone.contains(zbar, mem_tol):
        raise NotMember(f"point {zbar.tolist()} is not in the cone")
    method = _structural_pdc(cone, zbar, mem_tol)
    if method is not None:
        return PDCVerdict("certified", method)
    rng = np.random.default_rng(seed)
    bs = _normal_samples(cone, zbar, rng, samples, mem_tol)
    basis = np.vstack([np.eye(cone.dim), -np.eye(cone.dim)])
    worst = 0.0
    for k in range(samples):
        b = bs[k]
        if k < basis.shape[0]:
            h = basis[k]
        else:
            h = rng.standard_normal(cone.dim)
            h /= np.linalg.norm(h)
        K = cone.critical_cone(zbar, b, mem_tol)
        rhs = K.project(h)
        lhs = forward_difference(cone.project, zbar + b, h, step)
        err = float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(rhs)))
        worst = max(worst, err)
        if err > tol:
            return PDCVerdict("refuted", "sampled:fd", samples=k + 1, max_error=worst,
                              witness_b=b, witness_h=h, witness_error=err,
                              curvature=_curvature_term(cone, zbar, b, rhs, mem_tol),
                              detail="forward difference of the projection differs from "
                                     "the projection onto the critical cone")
    return PDCVerdict("sampled-ok", "sampled:fd", samples=samples, max_error=worst,
                      detail="no violation found; not a certificate")
