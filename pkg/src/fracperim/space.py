"""Finite metric measure spaces and point sets.

A space is either given by an explicit distance matrix ("matrix" mode) or by
a weighted graph whose shortest-path metric is used ("graph" mode). Balls are
open: ``B(x, r) = {y : d(x, y) < r}``.
"""

from __future__ import annotations

import json
import math
import threading
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from . import _engine
from .errors import SpaceError

SCHEMA_VERSION = 1
DENSE_LIMIT = 20_000
TRIANGLE_FULL_LIMIT = 500
TRIANGLE_SAMPLES = 200_000
TRIANGLE_SEED = 20240607


class MetricMeasureSpace:
    """A finite set with a metric ``d`` and positive point masses ``weights``."""

    def __init__(
        self,
        weights,
        *,
        matrix=None,
        edges=None,
        coords=None,
        validate: bool = True,
    ):
        w = np.array(weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise SpaceError("space must contain at least one point")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(w) & (w > 0)))[0])
            raise SpaceError(f"weights[{bad}] = {w[bad]!r} is not a positive finite number")
        self.n = int(w.size)
        w.setflags(write=False)
        self.weights = w
        self.total_mass = math.fsum(w)
        self.coords = None
        if coords is not None:
            c = np.array(coords, dtype=np.float64)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != self.n:
                raise SpaceError(f"coords has {c.shape[0]} rows, expected {self.n}")
            c.setflags(write=False)
            self.coords = c
        self._lock = threading.Lock()
        self._ballm: np.ndarray | None = None
        self._constants = {}
        self._doubling = None

        if (matrix is None) == (edges is None):
            raise SpaceError("exactly one of matrix or edges must be given")
        if matrix is not None:
            self.mode = "matrix"
            self.edges = None
            d = np.array(matrix, dtype=np.float64)
            if validate:
                _validate_matrix(d, self.n)
            d.setflags(write=False)
            self._dist = d
        else:
            self.mode = "graph"
            e = _parse_edges(edges, self.n)
            self.edges = e
            self._graph = coo_matrix(
                (e[:, 2], (e[:, 0].astype(np.int64), e[:, 1].astype(np.int64))), shape=(self.n, self.n)
            ).tocsr()
            ncomp, _ = connected_components(self._graph, directed=False)
            if ncomp != 1:
                raise SpaceError(f"graph is disconnected ({ncomp} components)")
            self._dist = None
            self._row_cache = lru_cache(maxsize=256)(self._dijkstra_row)

    # -- metric -----------------------------------------------------------
    @property
    def geodesic(self) -> bool:
        return self.mode == "graph"

    @property
    def dist(self) -> np.ndarray:
        """Dense distance matrix (computed once in graph mode)."""
        if self._dist is None:
            if self.n > DENSE_LIMIT:
                raise SpaceError(
                    f"dense distances unavailable above {DENSE_LIMIT} points; use distances_from()"
                )
            with self._lock:
                if self._dist is None:
                    d = shortest_path(self._graph, method="D", directed=False)
                    # per-source summation order can differ in the last ulp
                    d = np.minimum(d, d.T)
                    d.setflags(write=False)
                    self._dist = d
        return self._dist

    def _dijkstra_row(self, i: int) -> np.ndarray:
        r = shortest_path(self._graph, method="D", directed=False, indices=[i])[0]
        r.setflags(write=False)
        return r

    def distances_from(self, i: int) -> np.ndarray:
        i = self._check_index(i)
        if self._dist is not None or self.n <= DENSE_LIMIT:
            return self.dist[i]
        return self._row_cache(i)

    def _check_index(self, i) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"point index {i} out of range for {self.n} points")
        return i

    def distance(self, x: int, y: int) -> float:
        return float(self.distances_from(x)[self._check_index(y)])

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @property
    def min_distance(self) -> float:
        """Smallest positive distance (the discreteness floor)."""
        d = self.dist
        return float(d[d > 0].min()) if self.n > 1 else math.inf

    def critical_radii(self) -> np.ndarray:
        """Sorted distinct positive pairwise distances."""
        d = self.dist
        iu = np.triu_indices(self.n, 1)
        return np.unique(d[iu])

    # -- balls ------------------------------------------------------------
    def ball_mask(self, center: int, r: float) -> np.ndarray:
        """Open ball ``{y : d(center, y) < r}`` as a boolean mask."""
        if not r > 0:
            raise ValueError(f"ball radius must be positive, got {r}")
        return self.distances_from(center) < r

    def ball(self, center: int, r: float) -> "PointSet":
        return PointSet(self, self.ball_mask(center, r))

    def ball_measure(self, center: int, r: float) -> float:
        return math.fsum(self.weights[self.ball_mask(center, r)])

    def ball_mass_matrix(self, threads: int | None = None) -> np.ndarray:
        """Cached matrix ``M[x, y] = mu(B(x, d(x, y)))``."""
        if self._ballm is None:
            d = self.dist
            with self._lock:
                if self._ballm is None:
                    m = _engine.ball_mass_matrix(d, self.weights, threads)
                    m.setflags(write=False)
                    self._ballm = m
        return self._ballm

    # -- sets -------------------------------------------------------------
    def point_set(self, indices: Iterable[int]) -> "PointSet":
        return PointSet.from_indices(self, indices)

    def full(self) -> "PointSet":
        return PointSet(self, np.ones(self.n, dtype=bool))

    def empty(self) -> "PointSet":
        return PointSet(self, np.zeros(self.n, dtype=bool))

    def doubling_constant(self) -> float:
        """Exact doubling constant ``C_mu`` (cached)."""
        from .constants import doubling_constant

        if self._doubling is None:
            self._doubling = doubling_constant(self)
        return self._doubling[0]

    def doubling_witness(self) -> tuple[int, float]:
        """Center and radius at which the doubling ratio attains ``C_mu``."""
        self.doubling_constant()
        return self._doubling[1]

    def estimate_constants(self, Q: float | None = None):
        from .constants import estimate_constants

        key = None if Q is None else float(Q)
        if key not in self._constants:
            self._constants[key] = estimate_constants(self, Q)
        return self._constants[key]

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "mode": self.mode, "weights": self.weights.tolist()}
        if self.mode == "matrix":
            out["matrix"] = self._dist.tolist()
        else:
            out["edges"] = [[int(a), int(b), float(c)] for a, b, c in self.edges]
        if self.coords is not None:
            out["coords"] = self.coords.tolist()
        return out

    def to_json(self) -> str:
        """Pretty JSON with one matrix row or edge per line, so parse errors point at a line."""
        d = self.to_dict()
        lines = ["{", f'  "schema_version": {SCHEMA_VERSION},', f'  "mode": "{self.mode}",']
        lines.append('  "weights": [' + ", ".join(repr(float(x)) for x in d["weights"]) + "],")
        key = "matrix" if self.mode == "matrix" else "edges"
        rows = d[key]
        lines.append(f'  "{key}": [')
        for i, row in enumerate(rows):
            sep = "," if i + 1 < len(rows) else ""
            lines.append("    " + json.dumps(row) + sep)
        tail = "  ]"
        if self.coords is not None:
            tail += ","
        lines.append(tail)
        if self.coords is not None:
            lines.append('  "coords": ' + json.dumps(d["coords"]))
        lines.append("}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "MetricMeasureSpace":
        text = Path(path).read_text()
        return cls.from_json(text)

    @classmethod
    def from_json(cls, text: str) -> "MetricMeasureSpace":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpaceError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise SpaceError("line 1: top-level value must be an object")
        mode = data.get("mode")
        if mode not in ("matrix", "graph"):
            raise SpaceError(f"line {_locate(text, 'mode')}: mode must be 'matrix' or 'graph'")
        if "weights" not in data:
            raise SpaceError("line 1: missing 'weights'")
        try:
            if mode == "matrix":
                if "matrix" not in data:
                    raise SpaceError("line 1: missing 'matrix'")
                return cls(data["weights"], matrix=data["matrix"], coords=data.get("coords"))
            if "edges" not in data:
                raise SpaceError("line 1: missing 'edges'")
            return cls(data["weights"], edges=data["edges"], coords=data.get("coords"))
        except _Located as loc:
            raise SpaceError(f"line {_locate(text, loc.key, loc.index)}: {loc.msg}") from None
        except SpaceError as exc:
            msg = str(exc)
            if msg.startswith("weights["):
                idx = int(msg[len("weights[") : msg.index("]")])
                raise SpaceError(f"line {_locate(text, 'weights', idx)}: {msg}") from None
            if msg.startswith("line "):
                raise
            raise SpaceError(f"line 1: {msg}") from None

    def __repr__(self) -> str:
        return f"MetricMeasureSpace(n={self.n}, mode={self.mode!r})"


class _Located(SpaceError):
    def __init__(self, key: str, index: int, msg: str):
        super().__init__(msg)
        self.key, self.index, self.msg = key, index, msg


def _locate(text: str, key: str, index: int | None = None) -> int:
    """1-based line of ``key`` in a JSON document, or of its ``index``-th element."""
    pos = text.find(f'"{key}"')
    if pos < 0:
        return 1
    if index is not None:
        start = text.find("[", pos)
        if start >= 0:
            depth, count, i = 0, -1, start
            while i < len(text):
                ch = text[i]
                if ch == "[":
                    depth += 1
                    if depth == 2:
                        count += 1
                        if count == index:
                            pos = i
                            break
                elif ch == "]":
                    depth -= 1
                    if depth == 0:
                        break
                elif depth == 1 and ch not in " \t\r\n,":
                    # flat array: count scalar tokens
                    if i == start + 1 or text[i - 1] in " \t\r\n,[":
                        count += 1
                        if count == index:
                            pos = i
                            break
                i += 1
    return text.count("\n", 0, pos) + 1


def _validate_matrix(d: np.ndarray, n: int) -> None:
    if d.ndim != 2 or d.shape != (n, n):
        raise SpaceError(f"matrix must be {n}x{n}, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise _Located("matrix", int(i), f"matrix[{i}][{j}] is not finite")
    if np.any(d < 0):
        i, j = np.argwhere(d < 0)[0]
        raise _Located("matrix", int(i), f"matrix[{i}][{j}] = {d[i, j]!r} is negative")
    if np.any(np.diag(d) != 0):
        i = int(np.flatnonzero(np.diag(d) != 0)[0])
        raise _Located("matrix", i, f"matrix[{i}][{i}] must be 0")
    asym = d != d.T
    if np.any(asym):
        i, j = np.argwhere(asym)[0]
        raise _Located("matrix", int(i), f"matrix is not symmetric at ({i}, {j})")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0):
        i, j = np.argwhere((d <= 0) & off)[0]
        raise _Located("matrix", int(i), f"points {i} and {j} are at distance 0")
    _check_triangle(d)


def _check_triangle(d: np.ndarray) -> None:
    n = d.shape[0]
    if n < 3:
        return
    tol = 1e-12 * float(d.max())
    if n <= TRIANGLE_FULL_LIMIT:
        for k in range(n):
            viol = d > d[:, k : k + 1] + d[k : k + 1, :] + tol
            if viol.any():
                i, j = np.argwhere(viol)[0]
                raise _Located("matrix", int(i), f"triangle inequality fails for ({i}, {j}) via {k}")
        return
    rng = np.random.default_rng(TRIANGLE_SEED)
    t = rng.integers(0, n, size=(TRIANGLE_SAMPLES, 3))
    i, j, k = t[:, 0], t[:, 1], t[:, 2]
    viol = d[i, j] > d[i, k] + d[k, j] + tol
    if viol.any():
        a = int(np.flatnonzero(viol)[0])
        raise _Located("matrix", int(i[a]), f"triangle inequality fails for ({i[a]}, {j[a]}) via {k[a]}")


def _parse_edges(edges, n: int) -> np.ndarray:
    rows = []
    for idx, e in enumerate(edges):
        try:
            a, b, length = int(e[0]), int(e[1]), float(e[2])
        except (TypeError, ValueError, IndexError):
            raise _Located("edges", idx, f"edges[{idx}] must be [i, j, length]") from None
        if not (0 <= a < n and 0 <= b < n):
            raise _Located("edges", idx, f"edges[{idx}] has endpoint outside 0..{n - 1}")
        if a == b:
            raise _Located("edges", idx, f"edges[{idx}] is a self-loop")
        if not (math.isfinite(length) and length > 0):
            raise _Located("edges", idx, f"edges[{idx}] length {length!r} must be positive")
        rows.append((a, b, length))
    if not rows and n > 1:
        raise SpaceError("graph has no edges")
    e = np.array(rows, dtype=np.float64).reshape(-1, 3)
    e.setflags(write=False)
    return e


class PointSet:
    """Subset of a space stored as a boolean membership mask with cached mass."""

    __slots__ = ("space", "mask", "mass")

    def __init__(self, space: MetricMeasureSpace, mask):
        m = np.array(mask, dtype=bool).ravel()
        if m.size != space.n:
            raise ValueError(f"mask length {m.size} != {space.n}")
        m.setflags(write=False)
        self.space = space
        self.mask = m
        self.mass = math.fsum(space.weights[m])

    @classmethod
    def from_indices(cls, space: MetricMeasureSpace, indices: Iterable[int]) -> "PointSet":
        m = np.zeros(space.n, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= space.n):
            raise ValueError("point index out of range")
        m[idx] = True
        return cls(space, m)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices.tolist())

    def __contains__(self, i) -> bool:
        return bool(self.mask[int(i)])

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def complement(self) -> "PointSet":
        return PointSet(self.space, ~self.mask)

    def __or__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.space, self.mask | other.mask)

    def __and__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.space, self.mask & other.mask)

    def __sub__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.space, self.mask & ~other.mask)

    def issubset(self, other: "PointSet") -> bool:
        return not bool(np.any(self.mask & ~other.mask))

    def __eq__(self, other) -> bool:
        return isinstance(other, PointSet) and other.space is self.space and np.array_equal(self.mask, other.mask)

    def __hash__(self) -> int:
        return hash(np.packbits(self.mask).tobytes())

    def check_mass(self) -> bool:
        """Recompute the mass from scratch and compare with the cached value."""
        return math.fsum(self.space.weights[self.mask]) == self.mass

    def __repr__(self) -> str:
        return f"PointSet(size={len(self)}, mass={self.mass:.6g})"
