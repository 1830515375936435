"""Fractional perimeters, nonlocal energies and related local quantities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from . import _engine
from .errors import PreconditionError
from .space import MetricMeasureSpace, PointSet

SetLike = PointSet | np.ndarray | Iterable[int]


@dataclass(frozen=True)
class EnergyValue:
    value: float
    theta: float
    domain_size: int
    pair_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def as_set(space: MetricMeasureSpace, s: SetLike | None, *, default_full: bool = False) -> PointSet:
    """Coerce a point set, boolean mask or index iterable into a ``PointSet``."""
    if s is None:
        if default_full:
            return space.full()
        raise ValueError("a point set is required")
    if isinstance(s, PointSet):
        if s.space is not space:
            raise ValueError("point set belongs to a different space")
        return s
    arr = np.asarray(s)
    if arr.dtype == bool:
        return PointSet(space, arr)
    return PointSet.from_indices(space, arr.ravel().tolist())


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise PreconditionError("theta range", f"theta={theta} must lie in (0, 1)")
    return theta


def _as_function(space: MetricMeasureSpace, u) -> np.ndarray:
    arr = np.asarray(u, dtype=np.float64).ravel()
    if arr.size != space.n:
        raise ValueError(f"function has {arr.size} values, expected {space.n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("function values must be finite")
    return arr


def fractional_perimeter(
    space: MetricMeasureSpace,
    E: SetLike,
    Omega: SetLike | None = None,
    theta: float = 0.5,
    *,
    threads: int | None = None,
) -> EnergyValue:
    """Fractional perimeter of ``E`` relative to ``Omega`` (whole space by default).

    Sums ``2 w_x w_y / (d^theta (mu(B(x,d)) + mu(B(y,d))))`` over ``x`` in
    ``E`` and ``y`` outside ``E``, both inside ``Omega``.
    """
    theta = check_theta(theta)
    E = as_set(space, E)
    Om = as_set(space, Omega, default_full=True)
    rows = np.flatnonzero(E.mask & Om.mask)
    cols = np.flatnonzero(Om.mask & ~E.mask)
    value = 0.0
    if rows.size and cols.size:
        m = space.ball_mass_matrix(threads)
        value = 2.0 * _engine.pair_sum(space.dist, m, space.weights, rows, cols, theta, symmetric=True, threads=threads)
    return EnergyValue(value, theta, len(Om), int(rows.size) * int(cols.size))


def fractional_energy(
    space: MetricMeasureSpace,
    u,
    Omega: SetLike | None = None,
    theta: float = 0.5,
    kernel: str = "asymmetric",
    *,
    threads: int | None = None,
) -> EnergyValue:
    """Nonlocal energy of ``u`` on ``Omega`` with the chosen kernel.

    ``asymmetric`` divides by ``mu(B(x, d))``; ``symmetric`` by the sum of both
    ball masses, which makes the energy of an indicator equal its perimeter.
    """
    theta = check_theta(theta)
    if kernel not in ("asymmetric", "symmetric"):
        raise ValueError(f"unknown kernel {kernel!r}")
    f = _as_function(space, u)
    Om = as_set(space, Omega, default_full=True)
    idx = np.flatnonzero(Om.mask)
    _, counts = np.unique(f[idx], return_counts=True)
    pairs = int(idx.size) ** 2 - int(np.sum(counts.astype(np.int64) ** 2))
    value = 0.0
    if pairs:
        m = space.ball_mass_matrix(threads)
        sym = kernel == "symmetric"
        value = _engine.pair_sum(space.dist, m, space.weights, idx, idx, theta, symmetric=sym, u=f, threads=threads)
    return EnergyValue(value, theta, int(idx.size), pairs)


def coarea_rhs(
    space: MetricMeasureSpace,
    u,
    Omega: SetLike | None = None,
    theta: float = 0.5,
    *,
    threads: int | None = None,
) -> EnergyValue:
    """Level-set sum of perimeters of the superlevel sets ``{u > v}``."""
    theta = check_theta(theta)
    f = _as_function(space, u)
    Om = as_set(space, Omega, default_full=True)
    levels = np.unique(f[Om.mask])
    terms, pairs = [], 0
    for lo, hi in zip(levels[:-1], levels[1:]):
        p = fractional_perimeter(space, PointSet(space, f > lo), Om, theta, threads=threads)
        terms.append((hi - lo) * p.value)
        pairs += p.pair_count
    return EnergyValue(math.fsum(terms), theta, len(Om), pairs)


def graph_perimeter(space: MetricMeasureSpace, E: SetLike, Omega: SetLike | None = None) -> float:
    """Sum of ``min(w_x, w_y) / length`` over graph edges inside ``Omega`` cut by ``E``."""
    if space.edges is None:
        raise PreconditionError("graph structure", "graph_perimeter needs a graph-mode space")
    E = as_set(space, E)
    Om = as_set(space, Omega, default_full=True)
    e = space.edges
    a = e[:, 0].astype(np.int64)
    b = e[:, 1].astype(np.int64)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    # parallel edges: the shortest one defines the metric
    order = np.lexsort((e[:, 2], hi, lo))
    lo, hi, length = lo[order], hi[order], e[order, 2]
    first = np.ones(lo.size, dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    lo, hi, length = lo[first], hi[first], length[first]
    cut = Om.mask[lo] & Om.mask[hi] & (E.mask[lo] != E.mask[hi])
    w = space.weights
    return math.fsum(np.minimum(w[lo[cut]], w[hi[cut]]) / length[cut])


def mean_and_deviation(space: MetricMeasureSpace, u, center: int, r: float, q: float = 1.0) -> tuple[float, float]:
    """Ball mean of ``u`` and the normalized ``L^q`` deviation from it."""
    if q < 1:
        raise PreconditionError("exponent range", f"q={q} must be at least 1")
    f = _as_function(space, u)
    mask = space.ball_mask(center, r)
    w = space.weights[mask]
    m = math.fsum(w)
    mean = math.fsum(f[mask] * w) / m
    dev = (math.fsum(np.abs(f[mask] - mean) ** q * w) / m) ** (1.0 / q)
    return mean, dev


def lip_r(space: MetricMeasureSpace, u, x: int, r: float, Omega: SetLike | None = None) -> float:
    """Largest difference quotient of ``u`` at ``x`` over points within distance ``r``."""
    f = _as_function(space, u)
    d = space.distances_from(x)
    mask = (d < r) & (d > 0)
    if Omega is not None:
        mask &= as_set(space, Omega).mask
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(f[mask] - f[x]) / d[mask]))


def lip(space: MetricMeasureSpace, u, x: int, Omega: SetLike | None = None) -> float:
    """Discrete pointwise slope: the difference quotient over the nearest neighbours of ``x``."""
    f = _as_function(space, u)
    d = space.distances_from(x)
    mask = d > 0
    if Omega is not None:
        mask &= as_set(space, Omega).mask
    if not mask.any():
        return 0.0
    nearest = mask & (d == d[mask].min())
    return float(np.max(np.abs(f[nearest] - f[x]) / d[nearest]))


def rho_kernel(space: MetricMeasureSpace, theta: float, x: int, y: int) -> float:
    """``(1 - theta) d^(1-theta) / mu(B(x, d))`` for distinct points."""
    theta = check_theta(theta)
    if x == y:
        raise ValueError("kernel is only defined for distinct points")
    d = space.distance(x, y)
    return (1.0 - theta) * d ** (1.0 - theta) / space.ball_measure(x, d)


@dataclass(frozen=True)
class SandwichReport:
    theta: float
    C_mu: float
    pairs_checked: int
    violations: int
    worst_lower_ratio: float
    worst_upper_ratio: float
    lower_coeff_sum: float
    upper_coeff_sum: float
    witness: tuple[int, int] | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = None if self.witness is None else list(self.witness)
        return d


def rho_sandwich_check(space: MetricMeasureSpace, theta: float, rtol: float = 1e-12) -> SandwichReport:
    """Check the dyadic-annulus sandwich of the admissible kernel on every pair.

    For ``x != y`` with ``d = d(x, y) < 1`` pick ``j >= 1`` with
    ``2^-j <= d < 2^(1-j)`` and compare ``rho_kernel(x, y)`` against
    ``c_j / mu(B(x, 2^(1-j)))`` for the lower coefficient
    ``c_j = (1-theta) 2^(-j(1-theta))`` and the upper coefficient
    ``C_mu (1-theta) 2^((1-j)(1-theta))``. The annuli are centred at the
    kernel's ball centre. Distance exactly 1 lies in no annulus with ``j >= 1``
    and is skipped.
    """
    theta = check_theta(theta)
    c_mu = space.doubling_constant()
    s = 1.0 - theta
    D = space.dist
    M = space.ball_mass_matrix()
    w = space.weights
    violations, checked = 0, 0
    worst_lo, worst_hi = 0.0, 0.0
    witness = None
    for x in range(space.n):
        d = D[x]
        sel = (d > 0) & (d < 1.0)
        if not sel.any():
            continue
        ys = np.flatnonzero(sel)
        dy = d[ys]
        _, e = np.frexp(dy)  # dy in [2^(e-1), 2^e)
        j = 1 - e
        outer = np.ldexp(1.0, e)
        order = np.argsort(d, kind="stable")
        pre = np.concatenate(([0.0], np.cumsum(w[order])))
        m_out = pre[np.searchsorted(d[order], outer, side="left")]
        rho = s * dy**s / M[x, ys]
        lower = s * np.exp2(-j * s) / m_out
        upper = c_mu * s * np.exp2((1 - j) * s) / m_out
        lo_ratio = lower / rho
        hi_ratio = rho / upper
        bad = (lo_ratio > 1.0 + rtol) | (hi_ratio > 1.0 + rtol)
        checked += int(ys.size)
        if bad.any():
            if witness is None:
                witness = (x, int(ys[np.flatnonzero(bad)[0]]))
            violations += int(bad.sum())
        worst_lo = max(worst_lo, float(lo_ratio.max()))
        worst_hi = max(worst_hi, float(hi_ratio.max()))
    q = 2.0**-s
    return SandwichReport(
        theta=theta,
        C_mu=c_mu,
        pairs_checked=checked,
        violations=violations,
        worst_lower_ratio=worst_lo,
        worst_upper_ratio=worst_hi,
        lower_coeff_sum=s * q / (1.0 - q),
        upper_coeff_sum=c_mu * s / (1.0 - q),
        witness=witness,
    )


def rho_tail(space: MetricMeasureSpace, theta: float, delta: float) -> float:
    """Both directional suprema of ``sum rho(x,y)/d(x,y) dmu`` over pairs at distance >= delta."""
    theta = check_theta(theta)
    D = space.dist
    M = space.ball_mass_matrix()
    w = space.weights
    far = D >= delta
    np.fill_diagonal(far, False)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(far, (1.0 - theta) * D ** (-theta) / M, 0.0)
    by_y = (w[:, None] * R).sum(axis=0)
    by_x = (R * w[None, :]).sum(axis=1)
    return float(by_y.max() + by_x.max())
