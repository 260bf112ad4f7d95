"""Sparse multivariate polynomial vector maps with exact derivatives."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch


class PolynomialMap:
    """Vector-valued polynomial ``R^in_dim -> R^out_dim``.

    Each output coordinate is a sum of monomials ``coeff * prod(y**exponents)``.
    Jacobians and Hessians are obtained by differentiating the monomials term
    by term, so they are exact up to floating point rounding.

    Parameters
    ----------
    in_dim, out_dim : int
    components : sequence of sequences of ``(coeff, exponents)`` pairs
        ``components[i]`` lists the monomials of output coordinate ``i``.
    """

    def __init__(self, in_dim: int, out_dim: int, components: Sequence[Iterable]):
        if len(components) != out_dim:
            raise DimensionMismatch(
                f"expected {out_dim} components, got {len(components)}")
        rows, coeffs, exps = [], [], []
        for i, terms in enumerate(components):
            for coeff, expo in terms:
                expo = tuple(int(e) for e in expo)
                if len(expo) != in_dim:
                    raise DimensionMismatch(
                        f"component {i}: exponent vector {expo} has length "
                        f"{len(expo)}, expected {in_dim}")
                if min(expo, default=0) < 0:
                    raise ValueError(f"component {i}: negative exponent in {expo}")
                rows.append(i)
                coeffs.append(float(coeff))
                exps.append(expo)
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._rows = np.asarray(rows, dtype=int)
        self._coeffs = np.asarray(coeffs, dtype=float)
        self._exps = np.asarray(exps, dtype=int).reshape(len(rows), in_dim)
        self._tables = None

    # construction helpers -------------------------------------------------
    @classmethod
    def affine(cls, matrix, offset=None) -> "PolynomialMap":
        """The map ``y -> matrix @ y + offset``."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        out_dim, in_dim = matrix.shape
        offset = np.zeros(out_dim) if offset is None else np.asarray(offset, float)
        comps = []
        for i in range(out_dim):
            terms = []
            if offset[i] != 0.0:
                terms.append((offset[i], [0] * in_dim))
            for j in range(in_dim):
                if matrix[i, j] != 0.0:
                    e = [0] * in_dim
                    e[j] = 1
                    terms.append((matrix[i, j], e))
            comps.append(terms)
        return cls(in_dim, out_dim, comps)

    @classmethod
    def zero(cls, in_dim: int, out_dim: int) -> "PolynomialMap":
        return cls(in_dim, out_dim, [[] for _ in range(out_dim)])

    @property
    def components(self):
        comps = [[] for _ in range(self.out_dim)]
        for r, c, e in zip(self._rows, self._coeffs, self._exps):
            comps[r].append((float(c), [int(x) for x in e]))
        return comps

    def to_dict(self):
        return [[{"coeff": c, "exponents": e} for c, e in terms]
                for terms in self.components]

    # evaluation -----------------------------------------------------------
    def _check(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.in_dim,):
            raise DimensionMismatch(f"expected input of shape ({self.in_dim},), got {y.shape}")
        return y

    def __call__(self, y) -> np.ndarray:
        y = self._check(y)
        out = np.zeros(self.out_dim)
        if self._coeffs.size:
            mono = np.prod(y[None, :] ** self._exps, axis=1)
            np.add.at(out, self._rows, self._coeffs * mono)
        return out

    def _derivative_tables(self):
        """Flattened term tables for first and second derivatives, built once."""
        if getattr(self, "_tables", None) is not None:
            return self._tables
        n = self.in_dim
        j_idx, j_coef, j_exp = [], [], []
        h_idx, h_coef, h_exp = [], [], []
        for t in range(self._coeffs.size):
            r, c, e = self._rows[t], self._coeffs[t], self._exps[t]
            for j in range(n):
                if e[j] == 0:
                    continue
                ej = e.copy()
                ej[j] -= 1
                j_idx.append(r * n + j)
                j_coef.append(c * e[j])
                j_exp.append(ej)
                for k in range(n):
                    if ej[k] == 0:
                        continue
                    ejk = ej.copy()
                    ejk[k] -= 1
                    h_idx.append((r * n + j) * n + k)
                    h_coef.append(c * e[j] * ej[k])
                    h_exp.append(ejk)
        pack = lambda idx, coef, exp: (np.asarray(idx, dtype=int), np.asarray(coef, dtype=float),
                                       np.asarray(exp, dtype=int).reshape(len(idx), n))
        self._tables = (pack(j_idx, j_coef, j_exp), pack(h_idx, h_coef, h_exp))
        return self._tables

    @staticmethod
    def _accumulate(y, table, size):
        idx, coef, exp = table
        out = np.zeros(size)
        if idx.size:
            np.add.at(out, idx, coef * np.prod(y[None, :] ** exp, axis=1))
        return out

    def jacobian(self, y) -> np.ndarray:
        y = self._check(y)
        jt, _ = self._derivative_tables()
        return self._accumulate(y, jt, self.out_dim * self.in_dim).reshape(self.out_dim, self.in_dim)

    def hessians(self, y) -> np.ndarray:
        """Stack of component Hessians, shape ``(out_dim, in_dim, in_dim)``."""
        y = self._check(y)
        _, ht = self._derivative_tables()
        n = self.in_dim
        return self._accumulate(y, ht, self.out_dim * n * n).reshape(self.out_dim, n, n)

    def hessian(self, i: int, y) -> np.ndarray:
        return self.hessians(y)[i]

    def weighted_hessian(self, weights, y) -> np.ndarray:
        """``sum_i weights[i] * hessian_i(y)``."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.out_dim,):
            raise DimensionMismatch("weight vector length must equal out_dim")
        return np.tensordot(weights, self.hessians(y), axes=1)

    def is_affine(self) -> bool:
        return bool(np.all(self._exps.sum(axis=1) <= 1)) if self._exps.size else True

    def __repr__(self):
        return f"PolynomialMap(in_dim={self.in_dim}, out_dim={self.out_dim}, terms={len(self._coeffs)})"
