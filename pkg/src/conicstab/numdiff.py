"""Finite-difference oracles used to cross-check analytic derivatives."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .config import FD_STEP


def forward_difference(fun: Callable, x, h, t: float = FD_STEP) -> np.ndarray:
    """One-sided quotient ``(fun(x + t h) - fun(x)) / t``.

    One-sided on purpose: directional derivatives of projections are only
    positively homogeneous, so a central quotient would average two branches.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    return (np.asarray(fun(x + t * h)) - np.asarray(fun(x))) / t


def fd_jacobian(fun: Callable, x, t: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of a smooth map."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = t
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2.0 * t))
    return np.array(cols).T


def parabolic_quotient(phi: Callable, grad: Callable, z, h, w, t: float) -> float:
    """Second-order difference quotient of ``phi`` along the parabola ``z + t h + t^2/2 w``."""
    z, h, w = (np.asarray(a, dtype=float) for a in (z, h, w))
    first = float(grad(z) @ h)
    return (phi(z + t * h + 0.5 * t * t * w) - phi(z) - t * first) / (0.5 * t * t)


def directional_error(fun: Callable, derivative: Callable, x, h, t: float = FD_STEP) -> float:
    """``||derivative(h) - forward_difference||`` at step ``t``."""
    return float(np.linalg.norm(np.asarray(derivative(h)) - forward_difference(fun, x, h, t)))
