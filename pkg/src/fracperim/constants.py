"""Estimators for the structural constants of a finite metric measure space.

Ball masses are step functions of the radius. Open balls are left-continuous
in ``r``, so every supremum or infimum over a continuum of radii is attained
at, or approached from above, a finite set of breakpoints. The estimators
evaluate exactly those breakpoints. The power-law fits (lower mass bound,
reverse doubling, annular decay) use a capped set of global probe radii and,
above ``FULL_CENTER_LIMIT`` points, a seeded sample of centers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .space import MetricMeasureSpace

FULL_CENTER_LIMIT = 500
MAX_PROBES = 64
SAMPLE_SEED = 7
CAP_FACTOR = 10.0


@dataclass(frozen=True)
class StructuralConstants:
    C_mu: float
    doubling_witness: tuple[int, float]
    Q_d: float
    C_lower: float
    s: float
    C_s: float
    c0: float
    Q_ahlfors: float
    C_A: float | None
    beta: float | None
    min_distance: float
    diameter: float
    iterated_Q: float
    iterated_C: float
    fit_cap: float
    sampled: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["doubling_witness"] = list(self.doubling_witness)
        return d


def _sorted_rows(space: MetricMeasureSpace):
    d = space.dist
    w = space.weights
    for x in range(space.n):
        order = np.argsort(d[x], kind="stable")
        s = d[x][order]
        pre = np.concatenate(([0.0], np.cumsum(w[order])))
        yield x, s, pre


def doubling_constant(space: MetricMeasureSpace) -> tuple[float, tuple[int, float]]:
    """Exact ``max mu(B(x,2r)) / mu(B(x,r))`` over centers and 0 < r <= diameter.

    Both masses change only when ``r`` or ``2r`` crosses a distance from ``x``,
    so the candidate radii are the row distances and their halves.
    """
    if space.n == 1:
        return 1.0, (0, 0.0)
    diam = space.diameter
    best, witness = 1.0, (0, 0.0)
    for x, s, pre in _sorted_rows(space):
        pos = s[1:]
        r = np.concatenate((pos, pos / 2.0))
        r = r[r <= diam]
        num = pre[np.searchsorted(s, 2.0 * r, side="left")]
        den = pre[np.searchsorted(s, r, side="left")]
        ratio = num / den
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, witness = float(ratio[k]), (x, float(r[k]))
    return best, witness


def _probe_radii(space: MetricMeasureSpace) -> np.ndarray:
    crit = space.critical_radii()
    if crit.size > MAX_PROBES:
        idx = np.unique(np.round(np.linspace(0, crit.size - 1, MAX_PROBES)).astype(int))
        crit = crit[idx]
    return crit


def _mass_tables(space: MetricMeasureSpace, radii: np.ndarray):
    """Open and closed ball masses for every center at every probe radius."""
    n, k = space.n, radii.size
    mo = np.empty((n, k))
    mc = np.empty((n, k))
    for x, s, pre in _sorted_rows(space):
        mo[x] = pre[np.searchsorted(s, radii, side="left")]
        mc[x] = pre[np.searchsorted(s, radii, side="right")]
    return mo, mc


def _centers(space: MetricMeasureSpace) -> tuple[np.ndarray, bool]:
    if space.n <= FULL_CENTER_LIMIT:
        return np.arange(space.n), False
    rng = np.random.default_rng(SAMPLE_SEED)
    return np.sort(rng.choice(space.n, FULL_CENTER_LIMIT, replace=False)), True


def lower_ahlfors(space: MetricMeasureSpace, Q: float) -> float:
    """Exact ``min mu(B(x,r)) / r^Q`` over centers and 0 < r < 2 * diameter."""
    if space.n == 1:
        return math.inf
    diam = space.diameter
    best = space.total_mass / (2.0 * diam) ** Q
    for _, s, pre in _sorted_rows(space):
        r = np.unique(s[1:])
        m = pre[np.searchsorted(s, r, side="left")]
        best = min(best, float(np.min(m / r**Q)))
    return best


def estimate_constants(space: MetricMeasureSpace, Q: float | None = None) -> StructuralConstants:
    if space.n < 2:
        raise ValueError("structural constants need at least two points")
    c_mu = space.doubling_constant()
    witness = space.doubling_witness()
    cap = CAP_FACTOR * c_mu**2
    L = math.log(cap)
    diam = space.diameter
    hmin = space.min_distance
    rho = _probe_radii(space)
    mo, mc = _mass_tables(space, rho)
    ys, sampled = _centers(space)
    d = space.dist[ys]
    K = rho.size
    logr = np.log(rho)

    # lower mass bound: r open at rho_j, R closed at rho_k, y within R of x
    big = np.empty((ys.size, K))
    for k in range(K):
        big[:, k] = np.where(d <= rho[k], mc[:, k][None, :], 0.0).max(axis=1)
    a = np.log(big)[:, None, :] - np.log(mo[ys])[:, :, None]  # [y, j, k]
    t = logr[None, :] - logr[:, None]  # [j, k]
    upper = t > 0
    q_fit = float(np.max(((a - L) / np.where(upper, t, 1.0))[:, upper])) if upper.any() else 0.0
    # any larger exponent also satisfies the bound; keep Q_d >= 1
    q_d = max(q_fit, 1.0)
    valid = t >= 0
    c_lower = float(np.exp(np.max((a - q_d * t)[:, valid])))

    # reverse doubling: r closed at rho_j >= hmin, R open at rho'_k > rho_j
    rho_big = np.concatenate((rho, [2.0 * diam]))
    mo_big = np.concatenate((mo, np.full((space.n, 1), space.total_mass)), axis=1)
    low = np.empty((ys.size, rho_big.size))
    for k in range(rho_big.size):
        low[:, k] = np.where(d < rho_big[k], mo_big[:, k][None, :], np.inf).min(axis=1)
    b = np.log(mc[ys])[:, :, None] - np.log(low)[:, None, :]
    tr = np.log(rho_big)[None, :] - logr[:, None]
    ok = (tr > 0) & (rho[:, None] >= hmin)
    s_exp = float(np.min(((L - b) / np.where(ok, tr, 1.0))[:, ok]))
    c_s = float(np.exp(np.max((b + s_exp * tr)[:, ok])))

    q_ahl = q_d if Q is None else float(Q)
    c0 = lower_ahlfors(space, q_ahl)

    c_a = beta = None
    if space.geodesic:
        # annulus {rho_j < d < rho_k}, eps = 1 - rho_j / rho_k; inner radius 0 gives eps = 1
        m_open = mo[ys]
        inner = np.concatenate((space.weights[ys][:, None], mc[ys]), axis=1)
        ratio_in = np.concatenate(([0.0], rho))
        ann = m_open[:, None, :] - inner[:, :, None]  # [y, j, k]
        frac = ann / m_open[:, None, :]
        eps = 1.0 - ratio_in[:, None] / rho[None, :]
        ok = (eps > 0) & (eps <= 1)
        pos = (frac > 0) & ok[None, :, :]
        strict = pos & (eps < 1)[None, :, :]
        inside = ok & (eps < 1)
        cand = (L - np.log(np.where(pos, frac, 1.0))) / (-np.log(np.where(inside, eps, 0.5)))[None]
        beta = float(min(1.0, np.min(cand[strict]))) if strict.any() else 1.0
        c_a = float(np.max(np.where(pos, frac, 0.0) / np.where(ok, eps, 1.0)[None] ** beta))

    return StructuralConstants(
        C_mu=c_mu,
        doubling_witness=witness,
        Q_d=q_d,
        C_lower=c_lower,
        s=s_exp,
        C_s=c_s,
        c0=c0,
        Q_ahlfors=q_ahl,
        C_A=c_a,
        beta=beta,
        min_distance=hmin,
        diameter=diam,
        iterated_Q=math.log2(c_mu),
        iterated_C=c_mu**2,
        fit_cap=cap,
        sampled=sampled,
    )
