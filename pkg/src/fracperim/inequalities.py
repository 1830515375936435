"""Inequality reports, theta sweeps and equivalence gauges.

A report compares a left-hand side against a scaled right-hand side and
records ``ratio = lhs / (scale * rhs_raw)``. The largest ratio over a test
family is an empirical lower bound for the best constant of the inequality.
With ``rescale=False`` the ``(1 - theta)`` or ``theta (1 - theta)`` factor is
dropped from ``scale``.
"""

from __future__ import annotations

import csv
import io
import math
import weakref
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _engine
from .covers import boxing_cover, growth_radius
from .errors import PreconditionError
from .functionals import (
    SetLike,
    as_set,
    check_theta,
    fractional_energy,
    fractional_perimeter,
)
from .space import MetricMeasureSpace, PointSet

BALL_KINDS = ("bbm_poincare", "bbm_rel_iso", "improved_poincare", "improved_rel_iso")
GLOBAL_KINDS = ("bbm_sobolev", "bbm_global_iso", "boxing")
LEMMA_KINDS = ("frac_iso_lemma", "annuli_lemma", "theta_iso_lemma")
KINDS = BALL_KINDS + GLOBAL_KINDS + LEMMA_KINDS
SET_KINDS = ("bbm_rel_iso", "improved_rel_iso", "bbm_global_iso", "boxing")


@dataclass
class InequalityReport:
    kind: str
    theta: float | None
    q: float | None
    tau: float
    lhs: float
    rhs_raw: float
    scale: float
    ratio: float
    witness: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(lhs: float, scale: float, rhs_raw: float) -> float:
    if lhs == 0:
        return 0.0
    if rhs_raw == 0:
        return math.inf
    return lhs / (scale * rhs_raw)


def default_q(space: MetricMeasureSpace, theta: float) -> float:
    """The Sobolev exponent ``Q_d / (Q_d - theta)``."""
    q_d = space.estimate_constants().Q_d
    return q_d / (q_d - theta)


def _check_q(q: float) -> float:
    q = float(q)
    if not q >= 1:
        raise PreconditionError("exponent range", f"q={q} must be at least 1")
    return q


def _scale(kind: str, theta: float, r: float | None, rescale: bool) -> float:
    if kind in ("bbm_poincare", "bbm_rel_iso"):
        return ((1.0 - theta) if rescale else 1.0) * r**theta
    if kind in ("improved_poincare", "improved_rel_iso"):
        return (1.0 - theta) if rescale else 1.0
    return theta * (1.0 - theta) if rescale else 1.0


def report(
    space: MetricMeasureSpace,
    kind: str,
    theta: float,
    *,
    q: float | None = None,
    tau: float = 1.0,
    u=None,
    E: SetLike | None = None,
    ball: tuple[int, float] | None = None,
    rescale: bool = True,
    threads: int | None = None,
) -> InequalityReport:
    """Evaluate one instance of the inequality ``kind``.

    Ball kinds need ``ball=(center, r)`` plus ``u`` (Poincare) or ``E``
    (isoperimetric); the right-hand side lives on the ball of radius ``tau*r``.
    """
    theta = check_theta(theta)
    if kind not in BALL_KINDS + GLOBAL_KINDS:
        raise ValueError(f"unknown kind {kind!r}; lemma kinds have their own report functions")
    if tau < 1:
        raise PreconditionError("inflation factor", f"tau={tau} must be at least 1")
    q = default_q(space, theta) if q is None else _check_q(q)
    wants_set = kind in SET_KINDS
    if wants_set and (E is None or u is not None):
        raise ValueError(f"{kind} takes a set witness E")
    if not wants_set and (u is None or E is not None):
        raise ValueError(f"{kind} takes a function witness u")
    w = space.weights
    witness: dict = {}
    extra: dict = {}
    r = None
    if kind in BALL_KINDS:
        if ball is None:
            raise ValueError(f"{kind} needs a ball")
        c, r = int(ball[0]), float(ball[1])
        witness["ball"] = [c, r]
        bm = space.ball_mask(c, r)
        if not bm.any():
            raise ValueError(f"ball ({c}, {r}) is empty")
        big = PointSet(space, space.ball_mask(c, tau * r))
        mu_b = math.fsum(w[bm])
        normalized = kind.startswith("bbm")
        if kind.endswith("poincare"):
            f = np.asarray(u, dtype=np.float64)
            mean = math.fsum(f[bm] * w[bm]) / mu_b
            dev = math.fsum(np.abs(f[bm] - mean) ** q * w[bm])
            lhs = ((dev / mu_b) if normalized else dev) ** (1.0 / q)
            rhs = fractional_energy(space, f, big, theta, "asymmetric", threads=threads).value
        else:
            Es = as_set(space, E)
            m = min(math.fsum(w[bm & Es.mask]), math.fsum(w[bm & ~Es.mask]))
            lhs = ((m / mu_b) if normalized else m) ** (1.0 / q)
            rhs = fractional_perimeter(space, Es, big, theta, threads=threads).value
        if normalized:
            rhs /= big.mass
    elif kind == "bbm_sobolev":
        f = np.asarray(u, dtype=np.float64)
        if not np.any(f == 0):
            raise PreconditionError(
                "function vanishes somewhere", "on a finite space u must vanish at a point, as u in L1 does at infinity"
            )
        lhs = math.fsum(np.abs(f) ** q * w) ** (1.0 / q)
        rhs = fractional_energy(space, f, None, theta, "asymmetric", threads=threads).value
    elif kind == "bbm_global_iso":
        Es = as_set(space, E)
        if not Es.mass < space.total_mass or np.all(Es.mask):
            raise PreconditionError("set of finite co-measure", "E must miss at least one point")
        lhs = Es.mass ** (1.0 / q)
        rhs = fractional_perimeter(space, Es, None, theta, threads=threads).value
    else:  # boxing
        Es = as_set(space, E)
        cover = boxing_cover(space, Es, theta, tau)
        lhs = math.fsum(space.ball_measure(cc, rr) / rr**theta for cc, rr in cover.balls)
        rhs = fractional_perimeter(space, Es, None, theta, threads=threads).value
        witness["balls"] = [[int(cc), float(rr)] for cc, rr in cover.balls]
        extra["certificate_ok"] = cover.certificate.ok
    scale = _scale(kind, theta, r, rescale)
    return InequalityReport(kind, theta, q, tau, lhs, rhs, scale, _ratio(lhs, scale, rhs), witness, extra)


# -- lemma reports ----------------------------------------------------------


def _dens(space, mask, target) -> float:
    w = space.weights
    return math.fsum(w[mask & target]) / math.fsum(w[mask])


def frac_iso_report(
    space: MetricMeasureSpace, ball: tuple[int, float], E: SetLike, k: int, Q: float | None = None
) -> InequalityReport:
    """Density of ``E`` in a ball against its dyadic-annulus oscillation at scale ``2^-k r``."""
    if not space.geodesic:
        raise PreconditionError("geodesic space", "needs a graph-mode space")
    Es = as_set(space, E)
    c, r = int(ball[0]), float(ball[1])
    Q = space.estimate_constants().Q_d if Q is None else float(Q)
    bm = space.ball_mask(c, r)
    dens = _dens(space, bm, Es.mask)
    if dens == 0:
        raise PreconditionError("E meets the ball", "E has zero density in the ball")
    if dens > 0.5:
        raise PreconditionError("density at most one half", f"density {dens:.6g} > 1/2")
    k_min = max(0, math.ceil(math.log2(1.0 / dens) / Q - 1e-12))
    if not 2.0 ** (-k * Q) <= dens:
        raise PreconditionError("density lower bound", f"need k >= {k_min} for density {dens:.6g} (got k={k})")
    D = space.dist
    w = space.weights
    outer, inner = 2.0**-k * r, 2.0 ** (-k - 1) * r
    chi = Es.mask.astype(np.float64)
    terms = []
    empty = 0
    for x in np.flatnonzero(bm):
        ann = bm & (D[x] >= inner) & (D[x] < outer)
        m = math.fsum(w[ann])
        if m == 0:
            empty += 1
            continue
        terms.append(w[x] * math.fsum(np.abs(chi[x] - chi[ann]) * w[ann]) / m)
    rhs = 2.0**k * math.fsum(terms) / math.fsum(w[bm])
    lhs = dens ** ((Q - 1.0) / Q)
    extra = {"density": dens, "Q": Q, "k": k, "k_min": k_min, "empty_annuli": empty}
    return InequalityReport("frac_iso_lemma", None, None, 1.0, lhs, rhs, 1.0, _ratio(lhs, 1.0, rhs),
                            {"ball": [c, r]}, extra)


def frac_iso_scan(
    space: MetricMeasureSpace, ball: tuple[int, float], E: SetLike, k_max: int | None = None, Q: float | None = None
) -> tuple[InequalityReport, list[InequalityReport]]:
    """Reports for every admissible scale index up to ``k_max`` and the one with the smallest ratio.

    ``k_max`` defaults to the last index whose inner annulus radius is above
    the discreteness floor.
    """
    r = float(ball[1])
    if k_max is None:
        k_max = max(0, math.floor(math.log2(r / space.min_distance)) - 1)
    reports = []
    for k in range(k_max + 1):
        try:
            reports.append(frac_iso_report(space, ball, E, k, Q))
        except PreconditionError as exc:
            if exc.hypothesis != "density lower bound":
                raise
    if not reports:
        raise PreconditionError("density lower bound", f"no admissible k up to {k_max}")
    return min(reports, key=lambda rep: rep.ratio), reports


def annuli_radius_bound(space: MetricMeasureSpace, a: float) -> float:
    c = space.estimate_constants()
    return a / (2.0 * (32.0 * c.C_mu**4 * c.C_A) ** (1.0 / c.beta))


def annuli_report(
    space: MetricMeasureSpace,
    B0: tuple[int, float],
    B1: tuple[int, float],
    E: SetLike,
    a: float,
    eps: float,
) -> InequalityReport:
    """Mass of a small ball ``B1`` against the mismatch between ``E`` and its annular averages."""
    if not space.geodesic:
        raise PreconditionError("geodesic space", "needs a graph-mode space")
    Es = as_set(space, E)
    x0, r0 = int(B0[0]), float(B0[1])
    x1, r1 = int(B1[0]), float(B1[1])
    if not 0 < a <= r0 / 2.0:
        raise PreconditionError("annulus radius at most half of r0", f"a={a}, r0={r0}")
    if not 0 < eps <= 0.5:
        raise PreconditionError("density margin", f"eps={eps} must lie in (0, 1/2]")
    b0 = space.ball_mask(x0, r0)
    b1 = space.ball_mask(x1, r1)
    if np.any(b1 & ~b0):
        raise PreconditionError("small ball inside B0", "B1 is not contained in B0")
    bound = annuli_radius_bound(space, a)
    floor = 2.0 * space.min_distance
    radius_floor = False
    if r1 > bound:
        if bound < floor and r1 <= floor:
            radius_floor = True
        else:
            raise PreconditionError("small-ball radius bound", f"r1={r1} exceeds {bound:.6g}")
    dens = _dens(space, b1, Es.mask)
    if not eps <= dens <= 1.0 - eps:
        raise PreconditionError("density window", f"density {dens:.6g} of E in B1 outside [{eps}, {1 - eps}]")
    D = space.dist
    w = space.weights
    chi = Es.mask.astype(np.float64)
    terms = []
    empty = 0
    for x in np.flatnonzero(b1):
        ann = b0 & (D[x] >= a / 2.0) & (D[x] < a)
        m = math.fsum(w[ann])
        if m == 0:
            empty += 1
            terms.append(w[x])
            continue
        avg = math.fsum(w[ann & Es.mask]) / m
        terms.append(abs(chi[x] - avg) * w[x])
    rhs = 4.0 / eps * math.fsum(terms)
    lhs = math.fsum(w[b1])
    extra = {"pass": lhs <= rhs, "slack": rhs - lhs, "radius_bound": bound, "radius_floor": radius_floor,
             "empty_annuli": empty, "density": dens}
    return InequalityReport("annuli_lemma", None, None, 1.0, lhs, rhs, 1.0, _ratio(lhs, 1.0, rhs),
                            {"B0": [x0, r0], "B1": [x1, r1]}, extra)


def theta_iso_report(
    space: MetricMeasureSpace, E: SetLike, x0: int, R: float, gamma: float, theta: float
) -> InequalityReport:
    """Ball mass over ``R^theta`` against the nonlocal interaction of ``E`` inside the ball with its complement."""
    theta = check_theta(theta)
    Es = as_set(space, E)
    d = space.distances_from(x0)
    w = space.weights
    half = _dens(space, d < R / 2.0, Es.mask)
    if not half >= gamma:
        raise PreconditionError("growth hypothesis", f"density {half:.6g} at R/2 is below gamma={gamma}")
    probes = np.concatenate(([R], np.unique(d[d > R]), [np.inf]))
    for r in probes:
        dr = _dens(space, d < r, Es.mask)
        if dr >= gamma:
            raise PreconditionError("growth hypothesis", f"density {dr:.6g} >= gamma at r={r:.6g} >= R")
    bm = d < R
    rows = np.flatnonzero(bm & Es.mask)
    cols = np.flatnonzero(~Es.mask)
    inter = _engine.pair_sum(space.dist, space.ball_mass_matrix(), w, rows, cols, theta, symmetric=False)
    rhs = theta * inter
    lhs = math.fsum(w[bm]) / R**theta
    return InequalityReport("theta_iso_lemma", theta, None, 1.0, lhs, rhs, 1.0, _ratio(lhs, 1.0, rhs),
                            {"x0": int(x0), "R": float(R)}, {"gamma": gamma})


def growth_scale(space: MetricMeasureSpace, E: SetLike, x0: int, gamma: float = 0.5) -> float:
    """Radius ``R`` satisfying the growth hypothesis of ``theta_iso_report`` at ``x0``."""
    return growth_radius(space, E, x0, gamma)[1]


def indicator_chain(space: MetricMeasureSpace, E: SetLike, ball: tuple[int, float], q: float) -> tuple[float, float, float]:
    """The three terms of the indicator comparison on one ball.

    ``(min(p, 1-p))^(1/q) <= (2 p (1-p))^(1/q) <= (2^(q+1) avg|chi - p|^q)^(1/q)``
    where ``p`` is the density of ``E`` in the ball.
    """
    q = _check_q(q)
    Es = as_set(space, E)
    bm = space.ball_mask(int(ball[0]), float(ball[1]))
    w = space.weights
    mu = math.fsum(w[bm])
    inside = math.fsum(w[bm & Es.mask])
    p = inside / mu
    co = math.fsum(w[bm & ~Es.mask]) / mu
    first = min(p, co) ** (1.0 / q)
    second = (2.0 * p * co) ** (1.0 / q)
    dev = math.fsum(np.abs(Es.mask[bm].astype(float) - p) ** q * w[bm]) / mu
    third = (2.0 ** (q + 1) * dev) ** (1.0 / q)
    return first, second, third


# -- test families ------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """Which test functions and sets a sweep uses, and the seed that fixes them.

    Members: ``halfspaces`` (coordinate halfspaces, or metric bisectors without
    coordinates), ``balls`` (metric balls as sets), ``distance`` (distance
    functions and their sublevel sets), ``lipschitz`` (seeded McShane
    interpolants and their sublevel sets), ``low_frequency`` (cosine profiles),
    ``constants``. Halfspace indicators also enter the function family.
    """

    members: tuple[str, ...] = ("halfspaces", "balls", "distance", "lipschitz", "low_frequency")
    count: int = 2
    seed: int = 0

    def to_dict(self) -> dict:
        return {"members": list(self.members), "count": self.count, "seed": self.seed}


def _nontrivial(mask: np.ndarray) -> bool:
    return bool(mask.any() and not mask.all())


def build_family(space: MetricMeasureSpace, spec: FamilySpec) -> tuple[list, list]:
    """Return ``(functions, sets)`` as lists of ``(name, values)`` and ``(name, mask)``."""
    rng = np.random.default_rng(spec.seed)
    D = space.dist
    diam = space.diameter
    coords = space.coords
    funcs: list[tuple[str, np.ndarray]] = []
    sets: list[tuple[str, np.ndarray]] = []

    def with_sublevel(name, f):
        funcs.append((name, f))
        m = f <= np.median(f)
        if _nontrivial(m):
            sets.append((f"sub_{name}", m))

    for member in spec.members:
        if member == "halfspaces":
            found = []
            if coords is not None:
                for a in range(coords.shape[1]):
                    lo, hi = coords[:, a].min(), coords[:, a].max()
                    for t in (0.5, 0.25, 0.75)[: spec.count]:
                        found.append((f"half{a}@{t}", coords[:, a] <= lo + t * (hi - lo)))
            else:
                for _ in range(spec.count):
                    p, s = rng.choice(space.n, 2, replace=False)
                    found.append((f"bisect{p}-{s}", D[p] <= D[s]))
            for name, m in found:
                if _nontrivial(m):
                    sets.append((name, m))
                    funcs.append((f"chi_{name}", m.astype(np.float64)))
        elif member == "balls":
            for _ in range(spec.count):
                c = int(rng.integers(space.n))
                for frac in (0.25, 0.125):
                    m = D[c] < frac * diam
                    if _nontrivial(m):
                        sets.append((f"ball{c}@{frac}", m))
        elif member == "distance":
            for _ in range(spec.count):
                c = int(rng.integers(space.n))
                with_sublevel(f"dist{c}", D[c].copy())
        elif member == "lipschitz":
            for i in range(spec.count):
                anchors = rng.choice(space.n, min(5, space.n), replace=False)
                vals = rng.random(anchors.size) * diam
                with_sublevel(f"lip{i}", np.min(vals[:, None] + D[anchors], axis=0))
        elif member == "low_frequency":
            if coords is not None:
                lo, hi = coords.min(axis=0), coords.max(axis=0)
                x = (coords - lo) / np.where(hi > lo, hi - lo, 1.0)
                for a in range(coords.shape[1]):
                    for kf in range(1, spec.count + 1):
                        with_sublevel(f"cos{a}k{kf}", np.cos(np.pi * kf * x[:, a]))
            else:
                for _ in range(spec.count):
                    c = int(rng.integers(space.n))
                    with_sublevel(f"cosdist{c}", np.cos(np.pi * D[c] / diam))
        elif member == "constants":
            funcs.append(("const", np.ones(space.n)))
        else:
            raise ValueError(f"unknown family member {member!r}")
    return funcs, sets


def ball_family(space: MetricMeasureSpace) -> list[tuple[int, float]]:
    """Every point as a center, radii ``diam * 2^-m`` down to the discreteness floor."""
    hmin = space.min_distance
    radii = []
    r = space.diameter
    while r > hmin:
        radii.append(r)
        r /= 2.0
    return [(c, rr) for rr in radii for c in range(space.n)]


# -- vectorized sweeps --------------------------------------------------------

_terms_cache: "weakref.WeakKeyDictionary[MetricMeasureSpace, dict]" = weakref.WeakKeyDictionary()


def _distinct_balls(space, balls, tau):
    """Indicator rows of the distinct (ball, inflated ball) pairs and the map back to ``balls``."""
    D = space.dist
    centers = np.array([c for c, _ in balls])
    radii = np.array([r for _, r in balls])
    X = D[centers] < radii[:, None]
    XT = X if tau == 1.0 else D[centers] < tau * radii[:, None]
    key = np.packbits(np.concatenate((X, XT), axis=1), axis=1)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return X[first].astype(np.float64), XT[first].astype(np.float64), inverse.ravel()


def _ball_terms(space, kind, theta, q, tau, members, balls):
    """Raw ``(lhs, rhs_raw)`` arrays of shape (members, balls) for a ball kind."""
    D = space.dist
    M = space.ball_mass_matrix()
    w = space.weights
    X, XT, inverse = _distinct_balls(space, balls, tau)
    mu_b = X @ w
    mu_t = XT @ w
    off = D > 0
    safe_d = np.where(off, D, 1.0)
    poincare = kind.endswith("poincare")
    den = M if poincare else 0.5 * (M + M.T)
    base = np.where(off, w[:, None] * w[None, :] / (safe_d**theta * np.where(off, den, 1.0)), 0.0)
    normalized = kind.startswith("bbm")
    lhs_all = np.empty((len(members), len(balls)))
    rhs_all = np.empty((len(members), len(balls)))
    for i, f in enumerate(members):
        if poincare:
            K = np.abs(f[:, None] - f[None, :]) * base
            mean = (X @ (f * w)) / mu_b
            dev = np.einsum("bi,bi->b", X, np.abs(f[None, :] - mean[:, None]) ** q * w[None, :])
            lhs = ((dev / mu_b) if normalized else dev) ** (1.0 / q)
        else:
            e = f.astype(bool)
            K = np.where(e[:, None] & ~e[None, :], base, 0.0)
            m = np.minimum(X @ np.where(e, w, 0.0), X @ np.where(e, 0.0, w))
            lhs = ((m / mu_b) if normalized else m) ** (1.0 / q)
        rhs = np.einsum("bi,bi->b", XT @ K, XT)
        if normalized:
            rhs = rhs / mu_t
        lhs_all[i] = lhs[inverse]
        rhs_all[i] = rhs[inverse]
    return lhs_all, rhs_all


def _cached_terms(space, kind, theta, q, tau, names, members, balls):
    key = (kind, theta, q, tau, tuple(names), tuple(balls))
    cache = _terms_cache.setdefault(space, {})
    if key not in cache:
        if len(cache) > 64:
            cache.clear()
        cache[key] = _ball_terms(space, kind, theta, q, tau, members, balls)
    return cache[key]


def _ratio_array(lhs, scale, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lhs == 0, 0.0, np.where(rhs == 0, np.inf, lhs / (scale * rhs)))


def ball_ratios(
    space: MetricMeasureSpace,
    kind: str,
    theta: float,
    members: list[tuple[str, np.ndarray]],
    *,
    q: float | None = None,
    tau: float = 1.0,
    rescale: bool = True,
    balls: list[tuple[int, float]] | None = None,
) -> np.ndarray:
    """Ratios of a ball kind for every (member, ball) pair, shape (members, balls).

    Members are functions for Poincare kinds and boolean masks for
    isoperimetric kinds. Each entry equals ``report(...).ratio`` for that
    instance up to summation order.
    """
    if kind not in BALL_KINDS:
        raise ValueError(f"{kind!r} is not a ball kind")
    theta = check_theta(theta)
    q = default_q(space, theta) if q is None else _check_q(q)
    balls = balls or ball_family(space)
    names = [n for n, _ in members]
    vals = [np.asarray(f, dtype=np.float64) for _, f in members]
    lhs, rhs = _cached_terms(space, kind, theta, q, float(tau), names, vals, balls)
    radii = np.array([r for _, r in balls])
    scale = ((1.0 - theta) if rescale else 1.0) * (radii**theta if kind.startswith("bbm") else np.ones_like(radii))
    return _ratio_array(lhs, scale[None, :], rhs)


@dataclass
class ThetaSweep:
    """Empirical constants per theta: maxima over a finite family, so lower bounds only."""

    kind: str
    thetas: list[float]
    max_ratio: list[float]
    median_ratio: list[float]
    witness: list[str]
    q: list[float]
    rescale: bool
    family: dict
    n_instances: int

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [
            {"theta": t, "kind": self.kind, "max_ratio": m, "median_ratio": md, "witness_id": wi}
            for t, m, md, wi in zip(self.thetas, self.max_ratio, self.median_ratio, self.witness)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["theta", "kind", "max_ratio", "median_ratio", "witness_id"], lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()


def check_grid(thetas) -> list[float]:
    grid = [check_theta(t) for t in thetas]
    if not grid:
        raise PreconditionError("theta grid", "the grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError("theta grid", "the grid must be strictly increasing")
    return grid


def sweep(
    space: MetricMeasureSpace,
    kind: str,
    thetas,
    family: FamilySpec | None = None,
    *,
    q: float | None = None,
    tau: float = 1.0,
    rescale: bool = True,
    balls: list[tuple[int, float]] | None = None,
) -> ThetaSweep:
    """Largest and median ratio of ``kind`` over a family, for each theta."""
    if kind not in BALL_KINDS + GLOBAL_KINDS:
        raise ValueError(f"kind {kind!r} cannot be swept")
    family = family or FamilySpec()
    grid = check_grid(thetas)
    funcs, sets = build_family(space, family)
    use_sets = kind in SET_KINDS
    named = sets if use_sets else funcs
    if not named:
        raise PreconditionError("nonempty family", "the test family produced no members")
    if kind in BALL_KINDS:
        balls = balls or ball_family(space)
    out_max, out_med, out_wit, out_q = [], [], [], []
    n_inst = 0
    for theta in grid:
        qq = default_q(space, theta) if q is None else _check_q(q)
        out_q.append(qq)
        if kind in BALL_KINDS:
            flat = ball_ratios(space, kind, theta, named, q=qq, tau=tau, rescale=rescale, balls=balls).ravel()
            k = int(np.argmax(flat))
            i, b = divmod(k, len(balls))
            wit = f"{named[i][0]}@{balls[b][0]}:{balls[b][1]!r}"
        else:
            vals, names = [], []
            for name, f in named:
                arg = {"E": f} if use_sets else {"u": f}
                try:
                    rep = report(space, kind, theta, q=qq, tau=tau, rescale=rescale, **arg)
                except PreconditionError:
                    continue
                vals.append(rep.ratio)
                names.append(name)
            if not vals:
                raise PreconditionError("nonempty family", f"no family member satisfies the {kind} hypotheses")
            flat = np.array(vals)
            k = int(np.argmax(flat))
            wit = names[k]
        out_max.append(float(flat[k]))
        out_med.append(float(np.median(flat)))
        out_wit.append(wit)
        n_inst = int(flat.size)
    return ThetaSweep(kind, grid, out_max, out_med, out_wit, out_q, rescale, family.to_dict(), n_inst)


@dataclass
class GaugeResult:
    """Empirical Poincare and relative isoperimetric constants; ``quotient`` is None when undefined."""

    theta: float
    q: float
    C_poincare: float
    C_iso: float
    quotient: float | None
    poincare_witness: str | None
    iso_witness: str | None
    chain_violations: int
    chain_checked: int

    def to_dict(self) -> dict:
        return asdict(self)


def equivalence_gauge(
    space: MetricMeasureSpace,
    theta: float,
    q: float | None = None,
    family: FamilySpec | None = None,
    *,
    tau: float = 1.0,
    indicators_only: bool = False,
    balls: list[tuple[int, float]] | None = None,
) -> GaugeResult:
    """Empirical Poincare and relative isoperimetric constants at ``(theta, q)`` and their quotient.

    With ``indicators_only`` the Poincare family is the indicators of the
    isoperimetric sets. The indicator comparison chain is checked on every
    (set, ball) instance.
    """
    theta = check_theta(theta)
    family = family or FamilySpec()
    q = default_q(space, theta) if q is None else _check_q(q)
    funcs, sets = build_family(space, family)
    balls = balls or ball_family(space)
    if indicators_only:
        funcs = [(f"chi_{n}", m.astype(np.float64)) for n, m in sets]

    def best(kind, members):
        if not members:
            return 0.0, None
        R = ball_ratios(space, kind, theta, members, q=q, tau=tau, balls=balls)
        i, b = divmod(int(np.argmax(R)), len(balls))
        if R.flat[i * len(balls) + b] == 0:
            return 0.0, None
        return float(R.max()), f"{members[i][0]}@{balls[b][0]}:{balls[b][1]!r}"

    cp, pw = best("bbm_poincare", funcs)
    ci, iw = best("bbm_rel_iso", sets)
    violations, checked = _chain_check(space, [m for _, m in sets], balls, q)
    quotient = cp / ci if ci > 0 and math.isfinite(ci) else None
    return GaugeResult(theta, q, cp, ci, quotient, pw, iw, violations, checked)


def _chain_check(space, masks, balls, q, rtol: float = 1e-12) -> tuple[int, int]:
    D = space.dist
    w = space.weights
    centers = np.array([c for c, _ in balls])
    radii = np.array([r for _, r in balls])
    X = (D[centers] < radii[:, None]).astype(np.float64)
    mu = X @ w
    bad = 0
    for m in masks:
        p = (X @ np.where(m, w, 0.0)) / mu
        co = (X @ np.where(m, 0.0, w)) / mu
        first = np.minimum(p, co) ** (1.0 / q)
        second = (2.0 * p * co) ** (1.0 / q)
        chi = m.astype(np.float64)
        dev = np.einsum("bi,bi->b", X, np.abs(chi[None, :] - p[:, None]) ** q * w[None, :]) / mu
        third = (2.0 ** (q + 1) * dev) ** (1.0 / q)
        bad += int(np.sum((first > second * (1 + rtol)) | (second > third * (1 + rtol))))
    return bad, len(masks) * len(balls)
