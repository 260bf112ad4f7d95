"""Small builders shared by the test modules."""
from __future__ import annotations

import numpy as np

from conicstab.geometry import GEProblem
from conicstab.polynomial import PolynomialMap


def linear_map(M, c=None) -> PolynomialMap:
    """``z -> M z + c`` as a PolynomialMap."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    comps = []
    for i in range(rows):
        terms = [(M[i, j], [int(k == j) for k in range(cols)]) for j in range(cols) if M[i, j] != 0]
        if c is not None and c[i] != 0:
            terms.append((c[i], [0] * cols))
        comps.append(terms)
    return PolynomialMap(cols, rows, comps)


def linear_problem(theta, G, Fx, Fy, c, xbar, ybar, name="linear") -> GEProblem:
    """``f(x, y) = Fx x + Fy y + c`` and ``g(y) = G y``."""
    f = linear_map(np.hstack([np.atleast_2d(Fx), np.atleast_2d(Fy)]), c)
    return GEProblem(f, linear_map(G), theta, np.asarray(xbar, float), np.asarray(ybar, float), name=name)


def sample_in(K, rng, count=1):
    return np.array([K.project(u) for u in rng.standard_normal((count, K.dim))])
