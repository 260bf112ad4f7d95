"""Dense linear algebra for small polyhedral cones.

Cones are kept in two forms: inequality form ``{z : A z <= 0, B z = 0}`` and
generator form ``cone(rays) + span(lineality)``. Conversion between them is
done by brute-force facet enumeration, which is adequate at desk scale
(ambient dimension up to about a dozen).
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls

from .errors import TooLarge

_COMBINATION_CAP = 250_000


def as_rows(M, dim: int) -> np.ndarray:
    if M is None:
        return np.zeros((0, dim))
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, dim))
    return np.atleast_2d(M).reshape(-1, dim)


def row_basis(M, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space of ``M``."""
    M = np.atleast_2d(M)
    if M.shape[0] == 0:
        return np.zeros((0, M.shape[1]))
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, M.shape[1]))
    rank = int(np.sum(s > rtol * max(1.0, s[0])))
    return vt[:rank]


def null_basis(M, dim: int, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as rows) of the null space of ``M``."""
    M = as_rows(M, dim)
    if M.shape[0] == 0:
        return np.eye(dim)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > rtol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:]


def rank(M, rtol: float = 1e-10) -> int:
    return row_basis(M, rtol).shape[0]


def rref(M, tol: float = 1e-10) -> np.ndarray:
    """Reduced row echelon form with zero rows removed.

    The RREF of a matrix depends only on its row space, which makes it a
    canonical representation of a subspace.
    """
    A = np.array(M, dtype=float, copy=True)
    if A.size == 0:
        return A.reshape(0, A.shape[-1] if A.ndim == 2 else 0)
    nrows, ncols = A.shape
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        p = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[p, c]) <= tol:
            A[r:, c] = 0.0
            continue
        A[[r, p]] = A[[p, r]]
        A[r] /= A[r, c]
        for i in range(nrows):
            if i != r:
                A[i] -= A[i, c] * A[r]
        r += 1
    A = A[:r]
    A[np.abs(A) <= tol] = 0.0
    return A


def _kkt_gap(M, x, c) -> float:
    """Violation of the optimality conditions of ``min ||M c - x||, c >= 0``."""
    w = M.T @ (x - M @ c)
    scale = max(1.0, float(np.abs(M).max()) * max(1.0, float(np.linalg.norm(x))))
    return max(float(np.max(w, initial=0.0)), float(np.max(np.abs(w[c > 0]), initial=0.0))) / scale


def nonneg_lstsq(M, x, tol: float = 1e-12):
    """``argmin ||M c - x||`` over ``c >= 0`` with a checked optimality certificate.

    ``scipy.optimize.nnls`` is tried first. Some scipy releases return a
    non-optimal point with a wrong residual on wide systems, so the KKT
    conditions are verified and BVLS plus an active-set polish is used when
    they fail.
    """
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    c, _ = nnls(M, x, maxiter=50 * max(M.shape[1], 10))
    if _kkt_gap(M, x, c) <= tol:
        return c, float(np.linalg.norm(M @ c - x))
    c = lsq_linear(M, x, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x
    c = np.maximum(c, 0.0)
    # polish on the support
    act = c > 1e-14 * max(1.0, float(c.max(initial=0.0)))
    cs = np.zeros_like(c)
    if act.any():
        cs[act] = np.linalg.lstsq(M[:, act], x, rcond=None)[0]
    if np.all(cs >= 0) and _kkt_gap(M, x, cs) <= _kkt_gap(M, x, c):
        c = cs
    return c, float(np.linalg.norm(M @ c - x))


def cone_residual(x, rays, lin=None):
    """Distance from ``x`` to ``cone(rays) + span(lin)`` with the coefficients.

    Returns ``(residual, alpha, beta)`` where ``x ~ rays.T @ alpha + lin.T @ beta``
    and ``alpha >= 0``.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    rays = as_rows(rays, d)
    lin = as_rows(lin if lin is not None else np.zeros((0, d)), d)
    k, p = rays.shape[0], lin.shape[0]
    if k + p == 0:
        return float(np.linalg.norm(x)), np.zeros(0), np.zeros(0)
    M = np.hstack([rays.T, lin.T, -lin.T])
    coef, res = nonneg_lstsq(M, x)
    alpha = coef[:k]
    beta = coef[k:k + p] - coef[k + p:]
    return float(res), alpha, beta


def in_cone(x, rays, lin=None, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    res, _, _ = cone_residual(x, rays, lin)
    return res <= tol * max(1.0, float(np.linalg.norm(x)))


def facets_of_generated_cone(rays, lin, dim: int, tol: float = 1e-9):
    """Inequality form of ``cone(rays) + span(lin)``.

    Returns ``(C, E)`` with ``cone(rays) + span(lin) = {w : C w <= 0, E w = 0}``.
    Rows of ``C`` are unit facet normals lying in the span of the cone; rows of
    ``E`` are an orthonormal basis of the orthogonal complement of that span.
    """
    rays = as_rows(rays, dim)
    lin = as_rows(lin, dim)
    norms = np.linalg.norm(rays, axis=1)
    rays = rays[norms > tol] / norms[norms > tol, None] if rays.size else rays
    lin = row_basis(lin) if lin.size else lin
    span = row_basis(np.vstack([rays, lin]))
    eq = null_basis(span, dim) if span.shape[0] else np.eye(dim)
    s = span.shape[0]
    if s == 0:
        return np.zeros((0, dim)), eq
    gs = rays @ span.T
    ls = row_basis(lin @ span.T) if lin.shape[0] else np.zeros((0, s))
    r = s - 1 - ls.shape[0]
    if r < 0:
        return np.zeros((0, dim)), eq
    k = gs.shape[0]
    if r > k:
        return np.zeros((0, dim)), eq
    if math.comb(k, r) > _COMBINATION_CAP:
        raise TooLarge(f"facet enumeration over C({k},{r}) subsets exceeds cap")
    found = []
    for combo in itertools.combinations(range(k), r):
        M = np.vstack([gs[list(combo)], ls]) if r else ls
        if M.shape[0] and rank(M) != s - 1:
            continue
        if M.shape[0] == 0 and s != 1:
            continue
        normal = null_basis(M, s)
        if normal.shape[0] != 1:
            continue
        c = normal[0]
        vals = gs @ c
        if np.all(vals <= tol):
            pass
        elif np.all(vals >= -tol):
            c = -c
            vals = -vals
        else:
            continue
        if ls.shape[0] and np.max(np.abs(ls @ c)) > tol:
            continue
        full = span.T @ c
        full /= np.linalg.norm(full)
        if not any(np.allclose(full, f, atol=1e-8) for f in found):
            found.append(full)
    C = np.array(found).reshape(len(found), dim)
    return C, eq


def lp_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    """Maximize ``c @ x``; returns ``(value, x)`` or ``(None, None)`` if infeasible."""
    res = linprog(-np.asarray(c, dtype=float), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
                  b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return None, None
    if res.status == 3:
        return math.inf, None
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return -float(res.fun), res.x
