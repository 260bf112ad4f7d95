"""Catalogue of closed convex cones with closed-form geometry.

Every cone exposes membership, metric projection, polar/dual, tangent and
normal cones, lineality space, a B-subdifferential element of the projection
and the directional derivative of the projection where a closed form exists.

Sign convention: ``polar()`` is the canonical operation,
``{w : <w, z> <= 0 for all z in K}``; ``dual()`` is its negation. Normal
cones and multipliers always live in the polar.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import minimize

from . import polyhedral as ph
from .config import TAU_MEM, TAU_NUM
from .errors import DimensionMismatch, NoConvergence, NotMember, OutsideChart, Unsupported

_FAULTS: set[str] = set()


def set_fault(name: str, active: bool = True) -> None:
    """Toggle a named fault for negative-control runs of the self test."""
    if active:
        _FAULTS.add(name)
    else:
        _FAULTS.discard(name)


# ---------------------------------------------------------------------------
# directional derivatives of projections
# ---------------------------------------------------------------------------

class LinearDerivative:
    """``h -> M h``; the projection is differentiable at the base point."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)

    def __call__(self, h):
        return self.matrix @ np.asarray(h, dtype=float)

    def jacobian(self, h):
        return self.matrix


class ConeProjectionDerivative:
    """``h -> P_C(h)`` for a closed convex cone ``C`` (critical-cone form)."""

    def __init__(self, cone: "Cone"):
        self.cone = cone

    def __call__(self, h):
        return self.cone.project(h)

    def jacobian(self, h):
        return self.cone.projection_jacobian(h)


class BlockDerivative:
    def __init__(self, parts, slices):
        self.parts = list(parts)
        self.slices = list(slices)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        return np.concatenate([p(h[s]) for p, s in zip(self.parts, self.slices)])

    def jacobian(self, h):
        h = np.asarray(h, dtype=float)
        return block_diag(*[p.jacobian(h[s]) for p, s in zip(self.parts, self.slices)])


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------

class Cone:
    """A nonempty closed convex cone in ``R^dim``."""

    dim: int
    is_polyhedral = False
    # Catalogue metadata: every catalogue cone is C^2-cone-reducible (A1) and
    # hence second-order regular, which makes its projection directionally
    # differentiable (A3).
    cone_reducible = True
    second_order_regular = True

    def _vec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise DimensionMismatch(f"expected vector of length {self.dim}, got shape {z.shape}")
        return z

    def _require_member(self, z, tol):
        if not self.contains(z, tol):
            raise NotMember(f"point {np.round(z, 12).tolist()} is not in {self!r}")

    def contains(self, z, tol: float = TAU_MEM) -> bool:
        raise NotImplementedError

    def project(self, u) -> np.ndarray:
        raise NotImplementedError

    def polar(self) -> "Cone":
        raise NotImplementedError

    def negate(self) -> "Cone":
        raise NotImplementedError

    def dual(self) -> "Cone":
        return self.polar().negate()

    def tangent_cone(self, z, tol: float = TAU_MEM) -> "Cone":
        raise NotImplementedError

    def normal_cone(self, z, tol: float = TAU_MEM) -> "Cone":
        raise NotImplementedError

    def critical_cone(self, z, b, tol: float = TAU_MEM) -> "Cone":
        """``T(z) ∩ {b}^⊥``; the caller guarantees ``b`` is normal at ``z``."""
        raise NotImplementedError

    def lineality(self) -> np.ndarray:
        raise NotImplementedError

    def projection_jacobian(self, u) -> np.ndarray:
        raise NotImplementedError

    def projection_derivative(self, u):
        raise NotImplementedError

    def smooth_boundary(self, z, tol: float = TAU_MEM):
        """``(grad, hess)`` of a local C^2 description ``phi <= 0`` at a smooth
        boundary point, or ``None`` when ``z`` is not such a point."""
        return None

    def is_vertex(self, z, tol: float = TAU_MEM) -> bool:
        return float(np.linalg.norm(self._vec(z))) <= tol

    def region(self, u) -> str:
        return "unknown"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# polyhedral cones
# ---------------------------------------------------------------------------

def _canonicalize(A, B, dim, tol=1e-9):
    B = ph.row_basis(ph.as_rows(B, dim))
    A = ph.as_rows(A, dim)
    while True:
        if B.shape[0]:
            A = A - (A @ B.T) @ B
        norms = np.linalg.norm(A, axis=1)
        A = A[norms > tol] / norms[norms > tol, None] if A.shape[0] else A
        implicit = [i for i in range(A.shape[0]) if ph.in_cone(-A[i], A, B, tol)]
        if not implicit:
            break
        B = ph.row_basis(np.vstack([B, A[implicit]]))
        A = np.delete(A, implicit, axis=0)
    keep = list(range(A.shape[0]))
    for i in range(A.shape[0]):
        others = [j for j in keep if j != i]
        if ph.in_cone(A[i], A[others], B, tol):
            keep.remove(i)
    A = A[keep]
    if A.shape[0] > 1:
        order = np.lexsort(np.round(A, 9).T[::-1])
        A = A[order]
    return A, ph.rref(B) if B.shape[0] else B


class PolyCone(Cone):
    """Polyhedral cone ``{z : A z <= 0, B z = 0}``.

    With ``canonical=True`` the representation is reduced to a deterministic
    irredundant form: equality rows become the RREF of the lineality
    constraints, implicit equalities are moved out of ``A`` and redundant
    inequalities are dropped.
    """

    is_polyhedral = True

    def __init__(self, ineq=None, eq=None, dim: int | None = None, canonical: bool = True):
        if dim is None:
            for M in (ineq, eq):
                if M is not None and np.asarray(M).size:
                    dim = np.atleast_2d(M).shape[1]
                    break
        if dim is None:
            raise ValueError("dim is required when no rows are given")
        self.dim = int(dim)
        A = ph.as_rows(ineq if ineq is not None else np.zeros((0, dim)), self.dim)
        B = ph.as_rows(eq if eq is not None else np.zeros((0, dim)), self.dim)
        if canonical:
            A, B = _canonicalize(A, B, self.dim)
        self.A = A
        self.B = B
        self._generators = None

    # constructors ---------------------------------------------------------
    @classmethod
    def full(cls, dim: int) -> "PolyCone":
        return cls(dim=dim, canonical=False)

    @classmethod
    def zero(cls, dim: int) -> "PolyCone":
        return cls(eq=np.eye(dim), dim=dim, canonical=False)

    @classmethod
    def halfspace(cls, a) -> "PolyCone":
        """``{z : <a, z> <= 0}``."""
        a = np.asarray(a, dtype=float)
        return cls(ineq=a[None, :] / np.linalg.norm(a), dim=a.size, canonical=False)

    @classmethod
    def ray(cls, d) -> "PolyCone":
        """``R_+ d``."""
        d = np.asarray(d, dtype=float)
        return cls.from_generators(d[None, :], None, d.size)

    @classmethod
    def from_generators(cls, rays, lin=None, dim: int | None = None) -> "PolyCone":
        if dim is None:
            dim = np.atleast_2d(rays if np.asarray(rays).size else lin).shape[1]
        rays = ph.as_rows(rays if rays is not None else np.zeros((0, dim)), dim)
        lin = ph.as_rows(lin if lin is not None else np.zeros((0, dim)), dim)
        C, E = ph.facets_of_generated_cone(rays, lin, dim)
        return cls(C, E, dim=dim)

    @classmethod
    def block_diag(cls, parts: Sequence["PolyCone"]) -> "PolyCone":
        dims = [p.dim for p in parts]
        dim = sum(dims)
        As, Bs, off = [], [], 0
        for p in parts:
            for M, bucket in ((p.A, As), (p.B, Bs)):
                if M.shape[0]:
                    pad = np.zeros((M.shape[0], dim))
                    pad[:, off:off + p.dim] = M
                    bucket.append(pad)
            off += p.dim
        A = np.vstack(As) if As else np.zeros((0, dim))
        B = np.vstack(Bs) if Bs else np.zeros((0, dim))
        return cls(A, B, dim=dim, canonical=False)

    # basic geometry -------------------------------------------------------
    def __repr__(self):
        return f"PolyCone(dim={self.dim}, ineq={self.A.shape[0]}, eq={self.B.shape[0]})"

    def is_full(self) -> bool:
        return self.A.shape[0] == 0 and self.B.shape[0] == 0

    def is_zero(self) -> bool:
        return ph.rank(np.vstack([self.B, self.A])) == self.dim and self.generators()[0].shape[0] == 0 \
            and self.generators()[1].shape[0] == 0

    def contains(self, z, tol: float = TAU_MEM) -> bool:
        z = self._vec(z)
        ok_ineq = not self.A.shape[0] or bool(np.all(self.A @ z <= tol))
        ok_eq = not self.B.shape[0] or bool(np.all(np.abs(self.B @ z) <= tol))
        return ok_ineq and ok_eq

    def _polar_coefficients(self, u):
        res, alpha, beta = ph.cone_residual(u, self.A, self.B)
        return alpha, beta

    def project(self, u) -> np.ndarray:
        u = self._vec(u)
        if self.is_full():
            return u.copy()
        alpha, beta = self._polar_coefficients(u)
        return u - self.A.T @ alpha - self.B.T @ beta

    def generators(self):
        """``(rays, lineality)`` with ``self = cone(rays) + span(lineality)``."""
        if self._generators is None:
            C, E = ph.facets_of_generated_cone(self.A, self.B, self.dim)
            self._generators = (C, E)
        return self._generators

    def polar(self) -> "PolyCone":
        return PolyCone.from_generators(self.A, self.B, self.dim)

    def negate(self) -> "PolyCone":
        return PolyCone(-self.A, self.B, dim=self.dim, canonical=False)

    def active_rows(self, z, tol: float = TAU_MEM) -> np.ndarray:
        z = self._vec(z)
        if not self.A.shape[0]:
            return np.zeros(0, dtype=bool)
        return self.A @ z >= -tol

    def tangent_cone(self, z, tol: float = TAU_MEM) -> "PolyCone":
        self._require_member(z, tol)
        act = self.active_rows(z, tol)
        return PolyCone(self.A[act], self.B, dim=self.dim)

    def normal_cone(self, z, tol: float = TAU_MEM) -> "PolyCone":
        self._require_member(z, tol)
        act = self.active_rows(z, tol)
        return PolyCone.from_generators(self.A[act], self.B, self.dim)

    def normal_generators(self, z, tol: float = TAU_MEM):
        """``(rays, lineality)`` generating the normal cone at ``z``."""
        act = self.active_rows(z, tol)
        return self.A[act], self.B

    def critical_cone(self, z, b, tol: float = TAU_MEM) -> "PolyCone":
        T = self.tangent_cone(z, tol)
        b = self._vec(b)
        if np.linalg.norm(b) <= tol:
            return T
        return PolyCone(T.A, np.vstack([T.B, b[None, :]]), dim=self.dim)

    def lineality(self) -> np.ndarray:
        return ph.null_basis(np.vstack([self.A, self.B]), self.dim)

    def projection_jacobian(self, u) -> np.ndarray:
        u = self._vec(u)
        if self.is_full():
            return np.eye(self.dim)
        alpha, _ = self._polar_coefficients(u)
        scale = max(1.0, float(np.linalg.norm(u)))
        rows = np.vstack([self.A[alpha > 1e-12 * scale], self.B])
        basis = ph.row_basis(rows) if rows.shape[0] else np.zeros((0, self.dim))
        return np.eye(self.dim) - basis.T @ basis

    def projection_derivative(self, u):
        u = self._vec(u)
        z = self.project(u)
        return ConeProjectionDerivative(self.critical_cone(z, u - z, tol=1e-9 * max(1.0, np.linalg.norm(u))))

    def region(self, u) -> str:
        u = self._vec(u)
        z = self.project(u)
        act = int(self.active_rows(z).sum()) if self.A.shape[0] else 0
        return f"active={act}"

    def intersect(self, other: "PolyCone") -> "PolyCone":
        return PolyCone(np.vstack([self.A, other.A]), np.vstack([self.B, other.B]), dim=self.dim)

    def subset_of(self, other: "PolyCone", tol: float = 1e-8) -> bool:
        rays, lin = self.generators()
        return all(other.contains(r, tol) for r in rays) and all(
            other.contains(v, tol) and other.contains(-v, tol) for v in lin)

    def same_set(self, other: "PolyCone", tol: float = 1e-8) -> bool:
        return self.dim == other.dim and self.subset_of(other, tol) and other.subset_of(self, tol)

    def sample(self, rng, count: int) -> np.ndarray:
        rays, lin = self.generators()
        out = []
        for k in range(count):
            z = np.zeros(self.dim)
            if rays.shape[0]:
                if k < rays.shape[0]:
                    z = rays[k] * rng.uniform(0.2, 2.0)
                else:
                    mask = rng.random(rays.shape[0]) < 0.6
                    z = (rng.uniform(0.0, 2.0, rays.shape[0]) * mask) @ rays
            if lin.shape[0]:
                z = z + rng.standard_normal(lin.shape[0]) @ lin
            out.append(z)
        return np.array(out).reshape(count, self.dim)

    def to_dict(self) -> dict:
        return {"type": "polyhedral", "dim": self.dim, "ineq": self.A.tolist(), "eq": self.B.tolist()}


class Orthant(PolyCone):
    """``{z : sign * z >= 0}``."""

    def __init__(self, dim: int, sign: int = 1):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = int(sign)
        super().__init__(ineq=-self.sign * np.eye(dim), dim=dim, canonical=False)

    def __repr__(self):
        return f"Orthant(dim={self.dim}, sign={'+' if self.sign > 0 else '-'})"

    def project(self, u) -> np.ndarray:
        u = self._vec(u)
        return self.sign * np.maximum(self.sign * u, 0.0)

    def projection_jacobian(self, u) -> np.ndarray:
        u = self._vec(u)
        return np.diag((self.sign * u > 0).astype(float))

    def polar(self) -> "Orthant":
        return Orthant(self.dim, -self.sign)

    def negate(self) -> "Orthant":
        return Orthant(self.dim, -self.sign)

    def generators(self):
        if self._generators is None:
            self._generators = (self.sign * np.eye(self.dim), np.zeros((0, self.dim)))
        return self._generators

    def to_dict(self) -> dict:
        return {"type": "orthant", "dim": self.dim, "sign": "+" if self.sign > 0 else "-"}


# ---------------------------------------------------------------------------
# second-order cone
# ---------------------------------------------------------------------------

class Lorentz(Cone):
    """``sign * {z : z[axis] >= ||z without axis||}``.

    ``axis`` is a 0-based index. ``sign=-1`` gives the polar cone.
    """

    def __init__(self, dim: int, axis: int = 0, sign: int = 1):
        if dim < 1:
            raise ValueError("dim must be positive")
        if not 0 <= axis < dim:
            raise ValueError(f"axis {axis} outside [0, {dim})")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.dim, self.axis, self.sign = int(dim), int(axis), int(sign)
        self.is_polyhedral = dim <= 2
        self._order = np.array([axis] + [i for i in range(dim) if i != axis])

    def __repr__(self):
        return f"Lorentz(dim={self.dim}, axis={self.axis}, sign={self.sign:+d})"

    def __eq__(self, other):
        return isinstance(other, Lorentz) and (self.dim, self.axis, self.sign) == (
            other.dim, other.axis, other.sign)

    def __hash__(self):
        return hash(("Lorentz", self.dim, self.axis, self.sign))

    def _std(self, z):
        x = self.sign * np.asarray(z, dtype=float)
        return x[self.axis], np.delete(x, self.axis)

    def _orig(self, t, w):
        return self.sign * np.insert(np.asarray(w, dtype=float), self.axis, t)

    def _permute_matrix(self, M_std):
        M = np.zeros((self.dim, self.dim))
        M[np.ix_(self._order, self._order)] = M_std
        return M

    def as_polycone(self) -> "PolyCone":
        """Inequality form; only meaningful for ``dim <= 2``."""
        if self.dim > 2:
            raise Unsupported("a Lorentz cone of dimension > 2 is not polyhedral")
        if self.dim == 1:
            return PolyCone(ineq=[[-float(self.sign)]], dim=1, canonical=False)
        rows = [self._orig(-1.0, [1.0]), self._orig(-1.0, [-1.0])]
        return PolyCone(ineq=np.array(rows) / np.sqrt(2.0), dim=2)

    def _self_or_poly(self) -> Cone:
        return self.as_polycone() if self.dim <= 2 else Lorentz(self.dim, self.axis, self.sign)

    def classify(self, z, tol: float = TAU_MEM) -> str:
        t, w = self._std(self._vec(z))
        nw = float(np.linalg.norm(w))
        if np.hypot(t, nw) <= tol:
            return "vertex"
        if t - nw > tol:
            return "interior"
        if t - nw >= -tol:
            return "boundary"
        return "outside"

    def contains(self, z, tol: float = TAU_MEM) -> bool:
        t, w = self._std(self._vec(z))
        return bool(t >= np.linalg.norm(w) - tol)

    def project(self, u) -> np.ndarray:
        t, w = self._std(self._vec(u))
        nw = float(np.linalg.norm(w))
        if nw <= t:
            out = self._orig(t, w)
        elif nw <= -t:
            out = np.zeros(self.dim)
        else:
            c = 0.5 * (t + nw)
            out = self._orig(c, c * w / nw)
        if "lorentz_projection" in _FAULTS:
            out = out * (1.0 + 1e-3)
        return out

    def polar(self) -> "Lorentz":
        return Lorentz(self.dim, self.axis, -self.sign)

    def negate(self) -> "Lorentz":
        return Lorentz(self.dim, self.axis, -self.sign)

    def dual(self) -> "Lorentz":
        return Lorentz(self.dim, self.axis, self.sign)

    def boundary_normal(self, z) -> np.ndarray:
        """Outward normal ``grad phi`` of ``phi(z) = ||w|| - t`` at a nonzero boundary point."""
        t, w = self._std(self._vec(z))
        return self._orig(-1.0, w / np.linalg.norm(w))

    def smooth_boundary(self, z, tol: float = TAU_MEM):
        if self.classify(z, tol) != "boundary":
            return None
        t, w = self._std(self._vec(z))
        nw = float(np.linalg.norm(w))
        what = w / nw
        H = np.zeros((self.dim, self.dim))
        H[1:, 1:] = (np.eye(self.dim - 1) - np.outer(what, what)) / nw
        return self.boundary_normal(z), self._permute_matrix(H)

    def tangent_cone(self, z, tol: float = TAU_MEM) -> Cone:
        self._require_member(z, tol)
        kind = self.classify(z, tol)
        if kind == "vertex":
            return self._self_or_poly()
        if kind == "interior":
            return PolyCone.full(self.dim)
        return PolyCone.halfspace(self.boundary_normal(z))

    def normal_cone(self, z, tol: float = TAU_MEM) -> Cone:
        self._require_member(z, tol)
        kind = self.classify(z, tol)
        if kind == "vertex":
            return self.polar()._self_or_poly()
        if kind == "interior":
            return PolyCone.zero(self.dim)
        return PolyCone.ray(self.boundary_normal(z))

    def critical_cone(self, z, b, tol: float = TAU_MEM) -> Cone:
        z, b = self._vec(z), self._vec(b)
        kind = self.classify(z, tol)
        if kind == "interior":
            return PolyCone.full(self.dim)
        if kind == "boundary":
            a = self.boundary_normal(z)
            if np.linalg.norm(b) <= tol:
                return PolyCone.halfspace(a)
            return PolyCone(eq=a[None, :], dim=self.dim)
        # vertex: T = K, b in the polar cone
        if np.linalg.norm(b) <= tol:
            return self._self_or_poly()
        tb, wb = self._std(b)
        nwb = float(np.linalg.norm(wb))
        if -tb > nwb + tol:
            return PolyCone.zero(self.dim)
        return PolyCone.ray(self._orig(-tb, wb))

    def lineality(self) -> np.ndarray:
        return np.zeros((0, self.dim))

    def _jacobian_std(self, t, w):
        nw = float(np.linalg.norm(w))
        n = self.dim
        if nw <= t:
            return np.eye(n)
        if nw <= -t:
            return np.zeros((n, n))
        what = w / nw
        J = np.empty((n, n))
        J[0, 0] = 1.0
        J[0, 1:] = what
        J[1:, 0] = what
        J[1:, 1:] = (1.0 + t / nw) * np.eye(n - 1) - (t / nw) * np.outer(what, what)
        return 0.5 * J

    def projection_jacobian(self, u) -> np.ndarray:
        t, w = self._std(self._vec(u))
        return self._permute_matrix(self._jacobian_std(t, w))

    def region(self, u, tol: float | None = None) -> str:
        u = self._vec(u)
        tol = TAU_NUM * max(1.0, float(np.linalg.norm(u))) if tol is None else tol
        t, w = self._std(u)
        nw = float(np.linalg.norm(w))
        if np.hypot(t, nw) <= tol:
            return "vertex"
        if nw < t - tol:
            return "interior"
        if nw < -t - tol:
            return "polar-interior"
        if abs(nw - t) <= tol:
            return "boundary"
        if abs(nw + t) <= tol:
            return "polar-boundary"
        return "smooth"

    def projection_derivative(self, u):
        u = self._vec(u)
        kind = self.region(u)
        t, w = self._std(u)
        if kind == "vertex":
            return ConeProjectionDerivative(self._self_or_poly())
        if kind == "interior":
            return LinearDerivative(np.eye(self.dim))
        if kind == "polar-interior":
            return LinearDerivative(np.zeros((self.dim, self.dim)))
        what = w / np.linalg.norm(w)
        if kind == "boundary":
            return ConeProjectionDerivative(PolyCone.halfspace(self._orig(-1.0, what)))
        if kind == "polar-boundary":
            return ConeProjectionDerivative(PolyCone.ray(self._orig(1.0, what)))
        return LinearDerivative(self._permute_matrix(self._jacobian_std(t, w)))

    def sample(self, rng, count: int) -> np.ndarray:
        out = np.empty((count, self.dim))
        for k in range(count):
            w = rng.standard_normal(self.dim - 1)
            nw = np.linalg.norm(w)
            if nw > 0:
                w /= nw
            t = 1.0 if (k % 2 == 0 or self.dim == 1) else 1.0 + rng.exponential(0.5)
            out[k] = self._orig(t, w) * rng.uniform(0.2, 2.0)
        return out

    def to_dict(self) -> dict:
        d = {"type": "lorentz", "dim": self.dim, "axis": self.axis + 1}
        if self.sign < 0:
            d["sign"] = "-"
        return d


# ---------------------------------------------------------------------------
# the nonpolyhedric three-dimensional cone on the chart z1 > 0
# ---------------------------------------------------------------------------

class PowerSurface(Cone):
    """Cone ``{z : z2^4 / z1^3 - z3 <= 0}`` on the chart ``z1 > 0`` (plus the origin).

    Only the curved part of the boundary is modelled; the cap of the global
    cone is ignored. Queries with ``z1 <= 0`` other than the origin raise
    :class:`OutsideChart`.
    """

    dim = 3
    is_polyhedral = False

    def __repr__(self):
        return "PowerSurface()"

    def __eq__(self, other):
        return isinstance(other, PowerSurface)

    def __hash__(self):
        return hash("PowerSurface")

    @staticmethod
    def phi(z) -> float:
        z1, z2, z3 = z
        return z2 ** 4 / z1 ** 3 - z3

    @staticmethod
    def grad_phi(z) -> np.ndarray:
        z1, z2, _ = z
        return np.array([-3.0 * z2 ** 4 / z1 ** 4, 4.0 * z2 ** 3 / z1 ** 3, -1.0])

    @staticmethod
    def hess_phi(z) -> np.ndarray:
        z1, z2, _ = z
        H = np.zeros((3, 3))
        H[0, 0] = 12.0 * z2 ** 4 / z1 ** 5
        H[0, 1] = H[1, 0] = -12.0 * z2 ** 3 / z1 ** 4
        H[1, 1] = 12.0 * z2 ** 2 / z1 ** 3
        return H

    def _chart(self, z, tol):
        z = self._vec(z)
        if np.linalg.norm(z) <= tol:
            return z, True
        if z[0] <= 0.0:
            raise OutsideChart(f"z1 = {z[0]:g} <= 0 is outside the chart of {self!r}")
        return z, False

    def classify(self, z, tol: float = TAU_MEM) -> str:
        z, at_origin = self._chart(z, tol)
        if at_origin:
            return "vertex"
        v = self.phi(z)
        if v < -tol:
            return "interior"
        if v <= tol:
            return "boundary"
        return "outside"

    def contains(self, z, tol: float = TAU_MEM) -> bool:
        return self.classify(z, tol) != "outside"

    def project(self, u, max_iter: int = 200) -> np.ndarray:
        u = self._vec(u)
        scale = max(1.0, float(np.linalg.norm(u)))
        if np.linalg.norm(u) <= TAU_MEM:
            return np.zeros(3)
        if u[0] > 0 and self.phi(u) <= 0.0:
            return u.copy()

        def objective(p):
            a, c = p
            z3 = c ** 4 / a ** 3
            r = np.array([a - u[0], c - u[1], z3 - u[2]])
            g = np.array([r[0] + r[2] * (-3.0 * c ** 4 / a ** 4), r[1] + r[2] * 4.0 * c ** 3 / a ** 3])
            return 0.5 * float(r @ r), g

        lower = 1e-8 * scale
        a0 = max(u[0], 0.1 * scale)
        res = minimize(objective, np.array([a0, u[1]]), jac=True, method="L-BFGS-B",
                       bounds=[(lower, None), (None, None)],
                       options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-13})
        a, c = res.x
        if a <= 10 * lower:
            raise OutsideChart("projection leaves the chart z1 > 0")
        z = np.array([a, c, c ** 4 / a ** 3])
        g = self.grad_phi(z)
        mu = max(0.0, -float((z - u) @ g) / float(g @ g))
        # Newton polish on the KKT system  z - u + mu grad phi(z) = 0,  phi(z) = 0
        for _ in range(max_iter):
            g = self.grad_phi(z)
            F = np.concatenate([z - u + mu * g, [self.phi(z)]])
            if np.linalg.norm(F) <= 1e-14 * scale:
                break
            K = np.zeros((4, 4))
            K[:3, :3] = np.eye(3) + mu * self.hess_phi(z)
            K[:3, 3] = g
            K[3, :3] = g
            step = np.linalg.solve(K, -F)
            s = 1.0
            while z[0] + s * step[0] <= 0.0:
                s *= 0.5
            z_new, mu_new = z + s * step[:3], mu + s * step[3]
            F_new = np.concatenate([z_new - u + mu_new * self.grad_phi(z_new), [self.phi(z_new)]])
            if np.linalg.norm(F_new) >= np.linalg.norm(F) and s == 1.0 and np.linalg.norm(F) < 1e-12 * scale:
                break
            z, mu = z_new, mu_new
        g = self.grad_phi(z)
        F = np.concatenate([z - u + mu * g, [self.phi(z)]])
        if np.linalg.norm(F) > 1e-10 * scale or mu < -1e-10:
            raise NoConvergence(f"power-surface projection: KKT residual {np.linalg.norm(F):.2e}, mu={mu:.2e}")
        return z

    def tangent_cone(self, z, tol: float = TAU_MEM) -> Cone:
        self._require_member(z, tol)
        kind = self.classify(z, tol)
        if kind == "vertex":
            return PowerSurface()
        if kind == "interior":
            return PolyCone.full(3)
        return PolyCone.halfspace(self.grad_phi(z))

    def normal_cone(self, z, tol: float = TAU_MEM) -> Cone:
        self._require_member(z, tol)
        kind = self.classify(z, tol)
        if kind == "vertex":
            raise Unsupported("normal cone of the power-surface cone at its vertex has no closed form")
        if kind == "interior":
            return PolyCone.zero(3)
        return PolyCone.ray(self.grad_phi(z))

    def critical_cone(self, z, b, tol: float = TAU_MEM) -> Cone:
        kind = self.classify(z, tol)
        if kind == "vertex":
            raise Unsupported("critical cone of the power-surface cone at its vertex")
        if kind == "interior":
            return PolyCone.full(3)
        a = self.grad_phi(z)
        if np.linalg.norm(self._vec(b)) <= tol:
            return PolyCone.halfspace(a)
        return PolyCone(eq=a[None, :], dim=3)

    def smooth_boundary(self, z, tol: float = TAU_MEM):
        if self.classify(z, tol) != "boundary":
            return None
        z = self._vec(z)
        return self.grad_phi(z), self.hess_phi(z)

    def polar(self):
        raise Unsupported("the polar of the power-surface cone has no closed form; sample instead")

    def negate(self):
        raise Unsupported("negation of the power-surface cone is not catalogued")

    def dual(self):
        raise Unsupported("the dual of the power-surface cone has no closed form; sample instead")

    def lineality(self) -> np.ndarray:
        return np.zeros((0, 3))

    def projection_jacobian(self, u) -> np.ndarray:
        u = self._vec(u)
        z = self.project(u)
        if np.allclose(z, u, atol=1e-14):
            return np.eye(3)
        g = self.grad_phi(z)
        mu = float((u - z) @ g) / float(g @ g)
        K = np.zeros((4, 4))
        K[:3, :3] = np.eye(3) + mu * self.hess_phi(z)
        K[:3, 3] = g
        K[3, :3] = g
        rhs = np.zeros((4, 3))
        rhs[:3] = np.eye(3)
        return np.linalg.solve(K, rhs)[:3]

    def projection_derivative(self, u):
        raise Unsupported("directional derivative of the power-surface projection is only "
                          "available as a finite-difference estimate")

    def region(self, u) -> str:
        u = self._vec(u)
        if u[0] > 0 and self.phi(u) < 0:
            return "interior"
        return "boundary-projection"

    def sample(self, rng, count: int) -> np.ndarray:
        out = np.empty((count, 3))
        for k in range(count):
            z1 = rng.uniform(0.5, 2.0)
            z2 = rng.uniform(-1.0, 1.0)
            z3 = z2 ** 4 / z1 ** 3 + (0.0 if k % 2 == 0 else rng.exponential(0.5))
            out[k] = np.array([z1, z2, z3]) * rng.uniform(0.2, 2.0)
        return out

    def to_dict(self) -> dict:
        return {"type": "power_surface", "dim": 3}


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------

def _combine(parts) -> Cone:
    if all(isinstance(p, PolyCone) for p in parts):
        return PolyCone.block_diag(parts)
    return Product(parts)


class Product(Cone):
    def __init__(self, factors: Sequence[Cone]):
        if not factors:
            raise ValueError("a product needs at least one factor")
        self.factors = list(factors)
        self.dim = sum(f.dim for f in self.factors)
        self.slices = []
        off = 0
        for f in self.factors:
            self.slices.append(slice(off, off + f.dim))
            off += f.dim
        self.is_polyhedral = all(f.is_polyhedral for f in self.factors)
        self.cone_reducible = all(f.cone_reducible for f in self.factors)

    def __repr__(self):
        return f"Product({self.factors!r})"

    def split(self, z):
        z = self._vec(z)
        return [z[s] for s in self.slices]

    def contains(self, z, tol: float = TAU_MEM) -> bool:
        return all(f.contains(p, tol) for f, p in zip(self.factors, self.split(z)))

    def project(self, u) -> np.ndarray:
        return np.concatenate([f.project(p) for f, p in zip(self.factors, self.split(u))])

    def polar(self) -> "Product":
        return Product([f.polar() for f in self.factors])

    def negate(self) -> "Product":
        return Product([f.negate() for f in self.factors])

    def dual(self) -> "Product":
        return Product([f.dual() for f in self.factors])

    def tangent_cone(self, z, tol: float = TAU_MEM) -> Cone:
        return _combine([f.tangent_cone(p, tol) for f, p in zip(self.factors, self.split(z))])

    def normal_cone(self, z, tol: float = TAU_MEM) -> Cone:
        return _combine([f.normal_cone(p, tol) for f, p in zip(self.factors, self.split(z))])

    def critical_cone(self, z, b, tol: float = TAU_MEM) -> Cone:
        return _combine([f.critical_cone(p, q, tol)
                         for f, p, q in zip(self.factors, self.split(z), self.split(b))])

    def is_vertex(self, z, tol: float = TAU_MEM) -> bool:
        return float(np.linalg.norm(self._vec(z))) <= tol

    def lineality(self) -> np.ndarray:
        blocks = []
        for f, s in zip(self.factors, self.slices):
            L = f.lineality()
            pad = np.zeros((L.shape[0], self.dim))
            pad[:, s] = L
            blocks.append(pad)
        return np.vstack(blocks)

    def projection_jacobian(self, u) -> np.ndarray:
        return block_diag(*[f.projection_jacobian(p) for f, p in zip(self.factors, self.split(u))])

    def projection_derivative(self, u):
        return BlockDerivative([f.projection_derivative(p) for f, p in zip(self.factors, self.split(u))],
                               self.slices)

    def region(self, u) -> str:
        return ",".join(f.region(p) for f, p in zip(self.factors, self.split(u)))

    def sample(self, rng, count: int) -> np.ndarray:
        cols = []
        for f in self.factors:
            block = f.sample(rng, count)
            block[rng.random(count) < 0.25] = 0.0
            cols.append(block)
        return np.hstack(cols)

    def to_dict(self) -> dict:
        return {"type": "product", "factors": [f.to_dict() for f in self.factors]}


# ---------------------------------------------------------------------------
# functional surface
# ---------------------------------------------------------------------------

def contains(cone: Cone, z, tol: float = TAU_MEM) -> bool:
    return cone.contains(z, tol)


def project(cone: Cone, u) -> np.ndarray:
    return cone.project(u)


def dual(cone: Cone, polar: bool = False) -> Cone:
    """Dual cone ``{w : <w, z> >= 0}``; with ``polar=True`` the polar cone."""
    return cone.polar() if polar else cone.dual()


def tangent_cone(cone: Cone, z, tol: float = TAU_MEM) -> Cone:
    return cone.tangent_cone(z, tol)


def normal_cone(cone: Cone, z, tol: float = TAU_MEM) -> Cone:
    return cone.normal_cone(z, tol)


def lineality(cone: Cone) -> np.ndarray:
    return cone.lineality()


def cone_from_dict(spec: dict) -> Cone:
    """Build a cone from its JSON description (see ``to_dict``)."""
    kind = spec.get("type")
    if kind == "orthant":
        sign = spec.get("sign", "+")
        return Orthant(int(spec["dim"]), 1 if sign in ("+", 1, "plus") else -1)
    if kind == "lorentz":
        dim = int(spec["dim"])
        return Lorentz(dim, int(spec.get("axis", 1)) - 1, -1 if spec.get("sign", "+") in ("-", -1) else 1)
    if kind == "polyhedral":
        dim = int(spec["dim"])
        return PolyCone(spec.get("ineq") or None, spec.get("eq") or None, dim=dim)
    if kind == "free":
        return PolyCone.full(int(spec["dim"]))
    if kind == "zero":
        return PolyCone.zero(int(spec["dim"]))
    if kind == "power_surface":
        return PowerSurface()
    if kind == "product":
        return Product([cone_from_dict(f) for f in spec["factors"]])
    raise ValueError(f"unknown cone type {kind!r}")
