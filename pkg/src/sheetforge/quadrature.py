"""Gauss-Legendre machinery for integrands with endpoint singularities.

Strategy everywhere: split the domain into dyadic panels accumulating at the
singular endpoints, apply a fixed-order Gauss-Legendre rule per panel. On a
dyadic panel the nearest singularity sits one panel-length away, so the rule
converges geometrically (error ~ 4^(-2*order) per panel); the stub truncation
is controlled by the panel depth, which callers size from the known
singularity exponent.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import QuadratureFailure

__all__ = ["leggauss", "graded_nodes", "dyadic_unit_nodes", "depth_for_power"]

_MAX_DEPTH = 200


@lru_cache(maxsize=None)
def leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=None)
def dyadic_unit_nodes(depth: int, order: int):
    """Nodes/weights on [0, 1] with dyadic panels accumulating at 0.

    Panels are [2^-(k+1), 2^-k] for k = 0..depth-2 plus the stub [0, 2^-(depth-1)],
    which is integrated as an ordinary panel (its own contribution is tiny by
    construction when depth is sized for the singularity)."""
    if depth < 1 or depth > _MAX_DEPTH:
        raise QuadratureFailure(f"dyadic depth {depth} outside [1, {_MAX_DEPTH}]")
    x, w = leggauss(order)
    xs, ws = [], []
    hi = 1.0
    for k in range(depth):
        lo = hi / 2.0 if k < depth - 1 else 0.0
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        xs.append(mid + half * x)
        ws.append(half * w)
        hi /= 2.0
    nodes = np.concatenate(xs)
    wts = np.concatenate(ws)
    nodes.setflags(write=False)
    wts.setflags(write=False)
    return nodes, wts


def graded_nodes(a: float, b: float, depth: int, order: int,
                 grade_left: bool = True, grade_right: bool = True):
    """Nodes/weights on [a, b], dyadically graded toward the flagged ends.

    Grading both ends splits at the midpoint and grades each half toward its
    own endpoint."""
    if b <= a:
        return np.empty(0), np.empty(0)
    if grade_left and grade_right:
        mid = 0.5 * (a + b)
        n1, w1 = graded_nodes(a, mid, depth, order, True, False)
        n2, w2 = graded_nodes(mid, b, depth, order, False, True)
        return np.concatenate([n1, n2]), np.concatenate([w1, w2])
    u, w = (
        dyadic_unit_nodes(depth, order)
        if (grade_left or grade_right)
        else leggauss_unit(order)
    )
    length = b - a
    if grade_right:
        return b - length * u[::-1], length * w[::-1]
    return a + length * u, length * w


@lru_cache(maxsize=None)
def leggauss_unit(order: int):
    """Plain Gauss-Legendre nodes/weights mapped to [0, 1]."""
    x, w = leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def depth_for_power(power: float, tol: float, scale: float = 1.0) -> int:
    """Dyadic depth so that the stub of an integrand bounded by
    scale * x^power (power > -1) contributes at most tol:

        scale * stub^(power+1) / (power+1) <= tol
    """
    p1 = power + 1.0
    if p1 <= 0:
        raise QuadratureFailure(f"integrand power {power} is not integrable")
    if scale <= 0:
        return 8
    target = tol * p1 / scale
    if target >= 1.0:
        depth = 8
    else:
        depth = int(math.ceil(-math.log2(target) / p1)) + 2
    depth = max(8, depth)
    if depth > _MAX_DEPTH:
        raise QuadratureFailure(
            f"required dyadic depth {depth} exceeds {_MAX_DEPTH} "
            f"(power={power}, tol={tol}, scale={scale})"
        )
    return depth
