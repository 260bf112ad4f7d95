"""Face lattice of a polyhedral cone.

Faces are indexed by the set of inequality rows that vanish on them. The set
is closed: it contains every row vanishing on all generators of the face, so
two active sets describing the same face are never listed twice.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import polyhedral as ph
from .config import FACE_CAP, TAU_MEM
from .cones import PolyCone
from .errors import TooLarge


@dataclass
class Face:
    """``F = {z in K : A_J z = 0}`` with the normal cone ``cone(A_J) + span(B)`` on its relative interior."""

    index: int
    active: tuple
    dim: int
    rays: np.ndarray
    lineality: np.ndarray
    cone: PolyCone
    normal_rays: np.ndarray
    normal_lineality: np.ndarray

    def relint_point(self) -> np.ndarray:
        p = self.rays.sum(axis=0) if self.rays.shape[0] else np.zeros(self.cone.dim)
        return p

    def to_dict(self) -> dict:
        return {"index": self.index, "active": list(self.active), "dim": self.dim,
                "rays": self.rays.tolist(), "lineality": self.lineality.tolist()}


@dataclass
class FaceDecomposition:
    base: PolyCone
    faces: list

    def __len__(self):
        return len(self.faces)

    def locate(self, p, tol: float = TAU_MEM) -> Face:
        """The face whose relative interior contains ``p``."""
        if not self.base.contains(p, tol):
            raise ValueError("point is not in the cone")
        act = tuple(int(i) for i in np.flatnonzero(self.base.active_rows(p, tol)))
        for F in self.faces:
            if F.active == act:
                return F
        raise RuntimeError("active set of the point is not a face (tolerance mismatch)")


def enumerate_faces(K: PolyCone, cap: int = FACE_CAP, tol: float = 1e-9) -> FaceDecomposition:
    """All nonempty faces of ``K``, sorted by dimension (largest first).

    Raises
    ------
    TooLarge
        More than ``cap`` faces.
    """
    A = K.A
    rays, lin = K.generators()
    # vanishing pattern of every inequality row on every extreme ray
    zero = np.abs(A @ rays.T) <= tol if A.shape[0] and rays.shape[0] else np.zeros((A.shape[0], rays.shape[0]), bool)
    all_rows = frozenset(range(A.shape[0]))

    def closure(rows):
        live = [j for j in range(rays.shape[0]) if all(zero[i, j] for i in rows)]
        closed = frozenset(i for i in all_rows if all(zero[i, j] for j in live))
        return closed, tuple(live)

    start, start_rays = closure(frozenset())
    seen = {start: start_rays}
    queue = deque([start])
    while queue:
        J = queue.popleft()
        for i in sorted(all_rows - J):
            nxt, live = closure(J | {i})
            if nxt not in seen:
                seen[nxt] = live
                if len(seen) > cap:
                    raise TooLarge(f"face count exceeds cap {cap}")
                queue.append(nxt)
    faces = []
    for J, live in seen.items():
        R = rays[list(live)] if live else np.zeros((0, K.dim))
        gens = np.vstack([R, lin]) if lin.shape[0] else R
        d = ph.rank(gens) if gens.shape[0] else 0
        act = tuple(sorted(J))
        rest = [i for i in range(A.shape[0]) if i not in J]
        cone = PolyCone(A[rest], np.vstack([K.B, A[list(act)]]), dim=K.dim, canonical=False)
        faces.append(Face(-1, act, d, R, lin, cone, A[list(act)], K.B))
    faces.sort(key=lambda F: (-F.dim, len(F.active), F.active))
    for k, F in enumerate(faces):
        F.index = k
    return FaceDecomposition(K, faces)
