"""Constructors for the standard test spaces."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import PreconditionError
from .space import MetricMeasureSpace

MAX_POINTS = 1_000_000


def grid(dim: int, n_per_side: int) -> MetricMeasureSpace:
    """Uniform lattice on [0, 1]^dim with nearest-neighbour edges.

    Spacing is ``h = 1/(n_per_side - 1)`` and every point carries mass ``h**dim``.
    """
    if dim < 1 or n_per_side < 2:
        raise PreconditionError("grid size", "need dim >= 1 and n_per_side >= 2")
    n = n_per_side**dim
    if n > MAX_POINTS:
        raise PreconditionError("grid size", f"{n} points exceeds {MAX_POINTS}")
    h = 1.0 / (n_per_side - 1)
    idx = np.arange(n).reshape((n_per_side,) * dim)
    edges = []
    for axis in range(dim):
        lo = np.take(idx, range(n_per_side - 1), axis=axis).ravel()
        hi = np.take(idx, range(1, n_per_side), axis=axis).ravel()
        edges.append(np.stack([lo, hi, np.full(lo.size, h)], axis=1))
    coords = np.array(list(itertools.product(range(n_per_side), repeat=dim)), dtype=float) * h
    return MetricMeasureSpace(np.full(n, h**dim), edges=np.concatenate(edges), coords=coords)


def weighted_space(base: MetricMeasureSpace, alpha: float, origin: int) -> MetricMeasureSpace:
    """Same metric as ``base`` with masses scaled by ``max(d(origin, x), h)**alpha``.

    ``h`` is the smallest positive distance, which keeps the origin's mass finite.
    """
    q_d = base.estimate_constants().Q_d
    if not alpha > -q_d:
        raise PreconditionError("weight exponent", f"alpha={alpha} must exceed -Q_d={-q_d:.4g}")
    r = np.maximum(base.distances_from(origin), base.min_distance)
    w = base.weights * r**alpha
    if base.mode == "matrix":
        return MetricMeasureSpace(w, matrix=base.dist, coords=base.coords, validate=False)
    return MetricMeasureSpace(w, edges=base.edges, coords=base.coords)


def snowflake(base: MetricMeasureSpace, eps: float) -> MetricMeasureSpace:
    """Matrix-mode space with metric ``d**eps`` for ``0 < eps < 1``."""
    if not 0 < eps < 1:
        raise PreconditionError("snowflake exponent", f"eps={eps} must lie in (0, 1)")
    return MetricMeasureSpace(base.weights, matrix=base.dist**eps, coords=base.coords)


def bowtie(n_per_wing: int, wing_dim: int = 1) -> MetricMeasureSpace:
    """Two unit wings glued at a single shared vertex.

    With ``wing_dim=1`` each wing is a path of ``n_per_wing`` points (the shared
    vertex included). With ``wing_dim=2`` each wing is a square lattice glued to
    the other at one corner. Point masses are ``h**wing_dim``.
    """
    if n_per_wing < 2:
        raise PreconditionError("bowtie size", "n_per_wing must be at least 2")
    if wing_dim not in (1, 2):
        raise PreconditionError("bowtie size", "wing_dim must be 1 or 2")
    m = n_per_wing
    h = 1.0 / (m - 1)
    if wing_dim == 1:
        n = 2 * m - 1
        # point 0 is the shared vertex; wing A is 1..m-1 and wing B is m..2m-2
        coords = np.concatenate(([0.0], -h * np.arange(1, m), h * np.arange(1, m)))
        edges = [(0, 1, h), (0, m, h)]
        edges += [(k, k + 1, h) for k in range(1, m - 1)]
        edges += [(k, k + 1, h) for k in range(m, 2 * m - 2)]
        return MetricMeasureSpace(np.full(n, h), edges=edges, coords=coords[:, None])
    cells = [(i, j) for i in range(m) for j in range(m)]
    index = {}
    coords = []
    for sign in (-1.0, 1.0):
        for i, j in cells:
            key = (0, 0) if (i, j) == (0, 0) else (sign, i, j)
            if key not in index:
                index[key] = len(coords)
                coords.append((sign * i * h, sign * j * h))

    def node(sign, i, j):
        return index[(0, 0) if (i, j) == (0, 0) else (sign, i, j)]

    edges = []
    for sign in (-1.0, 1.0):
        for i, j in cells:
            if i + 1 < m:
                edges.append((node(sign, i, j), node(sign, i + 1, j), h))
            if j + 1 < m:
                edges.append((node(sign, i, j), node(sign, i, j + 1), h))
    return MetricMeasureSpace(np.full(len(coords), h * h), edges=edges, coords=np.array(coords))
