"""Ball covers: Vitali selection, Calderon-Zygmund stopping, boundary balls, boxing.

Every cover carries a certificate. ``check_cover`` recomputes that certificate
from raw distances and masses only, so a cover can be audited without trusting
the code that built it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionError
from .functionals import SetLike, as_set, check_theta, fractional_perimeter
from .space import MetricMeasureSpace, PointSet

ALGORITHMS = ("five_r", "cz", "boundary", "boxing", "local_boxing")
SHRINK_BOUNDARY = 60.0
RTOL = 1e-12


@dataclass
class Certificate:
    algorithm: str
    ok: bool
    disjoint: bool
    covers_target: bool
    density_ok: bool
    density_bounds: tuple[float, float] | None
    density_range: tuple[float, float] | None
    radii_ok: bool
    containment_ok: bool
    floor_flags: list[int] = field(default_factory=list)
    ratio_sum: float | None = None
    quotient: float | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("density_bounds", "density_range"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


@dataclass
class BallCover:
    algorithm: str
    balls: list[tuple[int, float]]
    inflation: float
    params: dict
    certificate: Certificate

    @property
    def centers(self) -> list[int]:
        return [c for c, _ in self.balls]

    @property
    def radii(self) -> list[float]:
        return [r for _, r in self.balls]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "balls": [[int(c), float(r)] for c, r in self.balls],
            "inflation": self.inflation,
            "params": self.params,
            "certificate": self.certificate.to_dict(),
        }


# -- shared helpers ---------------------------------------------------------


def _mass(space: MetricMeasureSpace, mask: np.ndarray) -> float:
    return math.fsum(space.weights[mask])


def _density(space: MetricMeasureSpace, ball: np.ndarray, target: np.ndarray) -> float:
    return _mass(space, ball & target) / _mass(space, ball)


def _require_geodesic(space: MetricMeasureSpace) -> None:
    if not space.geodesic:
        raise PreconditionError("geodesic space", "this construction needs a graph-mode space")


def _greedy_disjoint(space: MetricMeasureSpace, candidates: list[tuple[int, float]]) -> list[int]:
    """Indices of the Vitali selection: largest radius first, ties by center."""
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][1], candidates[i][0]))
    taken = np.zeros(space.n, dtype=bool)
    chosen = []
    for i in order:
        c, r = candidates[i]
        m = space.ball_mask(c, r)
        if not np.any(m & taken):
            chosen.append(i)
            taken |= m
    return chosen


# -- five_r -------------------------------------------------------------------


def five_r_cover(space: MetricMeasureSpace, candidates) -> BallCover:
    """Disjoint subfamily whose 5-fold enlargements cover every candidate ball."""
    cands = [(int(c), float(r)) for c, r in candidates]
    for c, r in cands:
        if not (0 <= c < space.n) or not r > 0:
            raise PreconditionError("candidate balls", f"invalid ball ({c}, {r})")
    chosen = _greedy_disjoint(space, cands)
    balls = [cands[i] for i in chosen]
    cover = BallCover("five_r", balls, 5.0, {"candidates": [list(b) for b in cands]}, None)
    cover.certificate = check_cover(space, cover)
    return cover


# -- Calderon-Zygmund stopping --------------------------------------------


def _dyadic_good_balls(space, x0, r0, target, thr):
    """Stopping-time descent; returns good balls, the floor radius and stats."""
    D = space.dist
    w = space.weights
    hmin = space.min_distance
    parents = (D[x0] < r0)[None, :]
    good: list[tuple[int, float]] = []
    k = 1
    levels = 0
    while True:
        rho = r0 * 2.0**-k
        if rho < hmin or parents.shape[0] == 0:
            break
        levels += 1
        Bk = D < rho
        outside = (~parents).astype(np.float32)
        inside = ((Bk.astype(np.float32) @ outside.T) == 0).any(axis=1)
        mass = Bk @ w
        hit = Bk @ np.where(target, w, 0.0)
        dens = hit / mass
        is_good = inside & (dens >= thr)
        is_bad = inside & (dens < thr) & (hit > 0)
        good.extend((int(y), rho) for y in np.flatnonzero(is_good))
        parents = Bk[is_bad]
        k += 1
    floor_r = r0 * 2.0**-k
    while floor_r >= hmin:
        k += 1
        floor_r = r0 * 2.0**-k
    return good, floor_r, levels


def cz_decomposition(space: MetricMeasureSpace, B0: tuple[int, float], E: SetLike, lam: float) -> BallCover:
    """Dyadic sub-balls of ``B0`` on which ``E`` has density between ``lam/C_mu^2`` and ``lam``."""
    _require_geodesic(space)
    E = as_set(space, E)
    x0, r0 = int(B0[0]), float(B0[1])
    if not 0.0 < lam < 1.0:
        raise PreconditionError("density level", f"lambda={lam} must lie in (0, 1)")
    ball0 = space.ball_mask(x0, r0)
    dens0 = _density(space, ball0, E.mask)
    if dens0 > lam:
        raise PreconditionError("density at most lambda", f"density {dens0:.6g} of E in B0 exceeds lambda={lam}")
    c_mu = space.doubling_constant()
    thr = lam / c_mu**2
    params = {"B0": [x0, r0], "E": E.indices.tolist(), "lambda": lam, "C_mu": c_mu}
    if not np.any(ball0 & E.mask):
        cover = BallCover("cz", [], 5.0, params, None)
    elif dens0 >= thr:
        cover = BallCover("cz", [(x0, r0)], 5.0, params, None)
    else:
        good, floor_r, levels = _dyadic_good_balls(space, x0, r0, E.mask, thr)
        captured = np.zeros(space.n, dtype=bool)
        for c, r in good:
            captured |= space.ball_mask(c, r)
        stray = np.flatnonzero(ball0 & E.mask & ~captured)
        floor = [(int(y), floor_r) for y in stray]
        cands = good + floor
        chosen = _greedy_disjoint(space, cands)
        balls = [cands[i] for i in chosen]
        params["levels"] = levels
        cover = BallCover("cz", balls, 5.0, params, None)
    cover.certificate = check_cover(space, cover)
    return cover


# -- boundary balls ---------------------------------------------------------


def boundary_depth(space: MetricMeasureSpace, lam: float) -> int:
    """Smallest admissible scale index from the annular-decay constants."""
    c = space.estimate_constants()
    return int(math.ceil(math.log2(32.0 * (4.0 * c.C_A / lam) ** (1.0 / c.beta))))


def boundary_balls(
    space: MetricMeasureSpace, B0: tuple[int, float], E: SetLike, lam: float, k: int | None = None
) -> BallCover:
    """Balls of scale about ``2^-k r0`` inside ``B0`` where both ``E`` and its complement have
    non-negligible density, with total mass comparable to ``lam 2^-k mu(B0)``."""
    _require_geodesic(space)
    E = as_set(space, E)
    x0, r0 = int(B0[0]), float(B0[1])
    if not 0.0 < lam <= 0.5:
        raise PreconditionError("density level", f"lambda={lam} must lie in (0, 1/2]")
    ball0 = space.ball_mask(x0, r0)
    dens0 = _density(space, ball0, E.mask)
    if not lam <= dens0 <= 1.0 - lam:
        raise PreconditionError("density window", f"density {dens0:.6g} outside [{lam}, {1 - lam}]")
    k_min = boundary_depth(space, lam)
    if k is None:
        k = k_min
    if k < k_min:
        raise PreconditionError("scale depth", f"k={k} is below the admissible minimum {k_min}")
    hmin = space.min_distance
    k_used = int(k)
    floor_flag = False
    if not r0 * 2.0**-k_used > hmin:
        # deepest scale whose balls still reach the nearest neighbours
        k_used = int(math.ceil(math.log2(r0 / hmin))) - 1
        floor_flag = True
    s = r0 * 2.0**-k_used
    D = space.dist
    w = space.weights

    # maximal 2s/5-separated net: the s/5 balls are disjoint, the s balls cover X
    centers: list[int] = []
    near = np.zeros(space.n, dtype=bool)
    for x in range(space.n):
        if not near[x]:
            centers.append(x)
            near |= D[x] < 0.4 * s
    radii = []
    for x in centers:
        cand = np.unique(D[x][(D[x] > s) & (D[x] < 2.0 * s)])
        best_r, best_q = s, -1.0
        for r in np.concatenate(([s], cand)):
            m = D[x] < r
            cut = _ball_cut(space, m)
            q = math.inf if cut == 0 else _mass(space, m) / cut
            if q > best_q:
                best_r, best_q = float(r), q
        radii.append(best_r)

    inside = [i for i, x in enumerate(centers) if not np.any((D[x] < radii[i]) & ~ball0)]
    masks = {i: D[centers[i]] < radii[i] for i in inside}
    dens_e = {i: _density(space, masks[i], E.mask) for i in inside}
    c_mu = space.doubling_constant()
    c0 = 16.0 * c_mu**16
    t = lam / c0
    positive = [v for i in inside for v in (dens_e[i], 1.0 - dens_e[i]) if v > 0]
    clamped = bool(positive) and t < min(positive)
    if clamped:
        t = min(positive)
    d1 = {i for i in inside if dens_e[i] >= t}
    d2 = {i for i in inside if 1.0 - dens_e[i] >= t}
    both = sorted(d1 & d2)
    mu0 = _mass(space, ball0)
    union_both = np.zeros(space.n, dtype=bool)
    for i in both:
        union_both |= masks[i]
    notes = {"k_requested": int(k), "k_min": k_min, "k_used": k_used, "floor_flag": floor_flag,
             "threshold": t, "threshold_clamped": clamped}
    if _mass(space, union_both) >= lam / 8.0 * mu0:
        balls = [(centers[i], radii[i]) for i in both]
        notes["case"] = "mixed"
    else:
        notes["case"] = "interface"
        areas = []
        for fam in (d1, d2):
            a = np.zeros(space.n, dtype=bool)
            for i in fam:
                a |= masks[i]
            areas.append(_mass(space, a))
        bound = (0.5 + lam / 4.0) * mu0
        pick = 0 if areas[0] <= bound else 1 if areas[1] <= bound else int(np.argmin(areas))
        notes["claim_failed"] = min(areas) > bound
        fam = (d1, d2)[pick]
        rest = np.zeros(space.n, dtype=bool)
        for i in inside:
            if i not in fam:
                rest |= masks[i]
        balls = []
        for i in sorted(fam):
            x, r = centers[i], radii[i]
            if np.any((D[x] < 6.0 * r) & ~ball0):
                continue
            if np.any((D[x] < 2.0 * r) & rest):
                balls.append((x, 6.0 * r))
    params = {"B0": [x0, r0], "E": E.indices.tolist(), "lambda": lam, "k": k_used, "C_mu": c_mu}
    cover = BallCover("boundary", balls, 1.0, params, None)
    cover.certificate = check_cover(space, cover)
    cover.certificate.notes.update(notes)
    return cover


def _ball_cut(space: MetricMeasureSpace, mask: np.ndarray) -> float:
    e = space.edges
    a = e[:, 0].astype(np.int64)
    b = e[:, 1].astype(np.int64)
    cut = mask[a] != mask[b]
    w = space.weights
    return math.fsum(np.minimum(w[a[cut]], w[b[cut]]) / e[cut, 2])


# -- boxing -------------------------------------------------------------------


def growth_radius(space: MetricMeasureSpace, U: SetLike, x: int, gamma: float = 0.5) -> tuple[float, float]:
    """Return ``(alpha, R)`` for the density profile of ``U`` around ``x``.

    ``alpha`` is the largest radius at which the ball density of ``U`` is at
    least ``gamma``. ``R > alpha`` is chosen with ``R/2 <= alpha`` and the density
    of ``B(x, R/2)`` at least ``gamma``.
    """
    U = as_set(space, U)
    d = space.distances_from(x)
    order = np.argsort(d, kind="stable")
    sd = d[order]
    w = space.weights[order]
    pw = np.concatenate(([0.0], np.cumsum(w)))
    pu = np.concatenate(([0.0], np.cumsum(np.where(U.mask[order], w, 0.0))))
    crit = np.unique(sd[sd > 0])
    if crit.size == 0:
        raise PreconditionError("growth profile", "space has a single point")

    def dens(r):
        k = np.searchsorted(sd, r, side="left")
        return pu[k] / pw[k]

    ok = np.array([dens(c) >= gamma for c in crit])
    if not ok.any():
        raise PreconditionError("growth profile", f"no ball around {x} reaches density {gamma}")
    k = int(np.flatnonzero(ok)[-1])
    alpha = float(crit[k])
    if k + 1 < crit.size:
        nxt = float(crit[k + 1])
        if nxt <= 2.0 * alpha and dens(nxt / 2.0) >= gamma:
            return alpha, nxt
    return alpha, 2.0 * alpha


def boxing_cover(
    space: MetricMeasureSpace, U: SetLike, theta: float | None = None, tau: float = 1.0
) -> BallCover:
    """Disjoint balls of half-density for ``U`` whose ``5 tau`` enlargements cover ``U``."""
    U = as_set(space, U)
    if not U.mass < space.total_mass / 2.0:
        raise PreconditionError("measure of U below half", f"mu(U)={U.mass:.6g} >= mu(X)/2")
    if not tau >= 1.0:
        raise PreconditionError("inflation factor", f"tau={tau} must be at least 1")
    if theta is not None:
        check_theta(theta)
    radius = {x: growth_radius(space, U, x)[1] for x in U}
    cands = [(x, tau * radius[x]) for x in U]
    chosen = _greedy_disjoint(space, cands)
    balls = [(cands[i][0], radius[cands[i][0]]) for i in chosen]
    params = {"U": U.indices.tolist(), "tau": tau, "theta": theta, "C_mu": space.doubling_constant()}
    cover = BallCover("boxing", balls, 5.0 * tau, params, None)
    cover.certificate = check_cover(space, cover)
    return cover


def boxing_quotient(space: MetricMeasureSpace, cover: BallCover, theta: float) -> tuple[float, float | None]:
    """``(ratio_sum, ratio_sum / (theta (1-theta) P_theta(U)))`` for a boxing cover.

    The quotient is None when ``U`` is empty.
    """
    theta = check_theta(theta)
    U = PointSet.from_indices(space, cover.params["U"])
    ratio_sum = math.fsum(space.ball_measure(c, r) / r**theta for c, r in cover.balls)
    per = fractional_perimeter(space, U, None, theta).value
    return ratio_sum, ratio_sum / (theta * (1.0 - theta) * per) if per > 0 else None


def local_boxing_cover(
    space: MetricMeasureSpace, B0: tuple[int, float], U: SetLike, kappa: float, theta: float, tau: float = 1.0
) -> BallCover:
    """Stopping-time cover of ``U`` inside ``B0`` at density level ``kappa``."""
    theta = check_theta(theta)
    base = cz_decomposition(space, B0, U, kappa)
    params = dict(base.params)
    params.update({"kappa": kappa, "theta": theta, "tau": tau})
    cover = BallCover("local_boxing", base.balls, 5.0, params, None)
    cover.certificate = check_cover(space, cover)
    return cover


# -- independent checker ----------------------------------------------------


def _masks(space, balls, factor=1.0):
    D = space.dist
    return [D[c] < factor * r for c, r in balls]


def _pairwise_disjoint(masks) -> bool:
    seen = None
    for m in masks:
        if seen is None:
            seen = m.copy()
            continue
        if np.any(seen & m):
            return False
        seen |= m
    return True


def _union(space, masks) -> np.ndarray:
    u = np.zeros(space.n, dtype=bool)
    for m in masks:
        u |= m
    return u


def _is_dyadic(r: float, r0: float) -> bool:
    if r > r0 * (1 + RTOL):
        return False
    k = round(math.log2(r0 / r))
    return math.isclose(r, r0 * 2.0**-k, rel_tol=1e-12)


def check_cover(space: MetricMeasureSpace, cover: BallCover) -> Certificate:
    """Recompute the certificate of ``cover`` from raw distances and masses."""
    alg = cover.algorithm
    p = cover.params
    D = space.dist
    w = space.weights
    balls = [(int(c), float(r)) for c, r in cover.balls]
    base = _masks(space, balls)
    notes: dict = {"n_balls": len(balls)}
    flags: list[int] = []
    bounds = None
    drange = None
    density_ok = radii_ok = containment_ok = True
    ratio_sum = quotient = None

    def dens(mask, target):
        return math.fsum(w[mask & target]) / math.fsum(w[mask])

    if alg == "five_r":
        disjoint = _pairwise_disjoint(base)
        big = _masks(space, balls, 5.0)
        covers = True
        for c, r in p["candidates"]:
            cm = D[int(c)] < float(r)
            if not any(not np.any(cm & ~bm) for bm in big):
                covers = False
                break
    elif alg in ("cz", "local_boxing"):
        x0, r0 = int(p["B0"][0]), float(p["B0"][1])
        ball0 = D[x0] < r0
        target = np.zeros(space.n, dtype=bool)
        target[np.asarray(p["E"], dtype=np.int64)] = True
        lam = float(p["kappa"] if alg == "local_boxing" else p["lambda"])
        c_mu = float(p["C_mu"])
        bounds = (lam / c_mu**2, lam)
        disjoint = _pairwise_disjoint(base)
        covers = not np.any(ball0 & target & ~_union(space, _masks(space, balls, 5.0)))
        vals = []
        for i, (m, (c, r)) in enumerate(zip(base, balls)):
            dv = dens(m, target)
            if not (bounds[0] * (1 - RTOL) <= dv <= bounds[1] * (1 + RTOL)):
                flags.append(i)
                if r >= space.min_distance:
                    density_ok = False
            else:
                vals.append(dv)
            if not _is_dyadic(r, r0):
                radii_ok = False
            if np.any(m & ~ball0):
                containment_ok = False
        drange = (min(vals), max(vals)) if vals else None
        if alg == "local_boxing":
            theta = float(p["theta"])
            tau = float(p["tau"])
            tball = D[x0] < tau * r0
            if np.any(_union(space, base) & ~tball):
                containment_ok = False
            ratio_sum = math.fsum(math.fsum(w[m]) / r**theta for m, (_, r) in zip(base, balls))
            inner = PointSet(space, target & ball0)
            per = fractional_perimeter(space, inner, PointSet(space, tball), theta).value
            quotient = ratio_sum / ((1.0 - theta) * per) if per > 0 else math.inf
    elif alg == "boundary":
        x0, r0 = int(p["B0"][0]), float(p["B0"][1])
        ball0 = D[x0] < r0
        target = np.zeros(space.n, dtype=bool)
        target[np.asarray(p["E"], dtype=np.int64)] = True
        lam = float(p["lambda"])
        k = int(p["k"])
        c = 16.0 * float(p["C_mu"]) ** 19
        bounds = (lam / c, 1.0 - lam / c)
        disjoint = _pairwise_disjoint(_masks(space, balls, 1.0 / SHRINK_BOUNDARY))
        vals = [dens(m, target) for m in base]
        density_ok = all(bounds[0] * (1 - RTOL) <= v <= bounds[1] * (1 + RTOL) for v in vals)
        drange = (min(vals), max(vals)) if vals else None
        radii_ok = all(r <= r0 * 2.0 ** (4 - k) * (1 + RTOL) for _, r in balls)
        containment_ok = all(not np.any(m & ~ball0) for m in base)
        covers = len(balls) > 0
        total = math.fsum(math.fsum(w[m]) for m in base)
        mu0 = math.fsum(w[ball0])
        notes["mass_constant"] = lam * 2.0**-k * mu0 / total if total > 0 else math.inf
    elif alg == "boxing":
        target = np.zeros(space.n, dtype=bool)
        target[np.asarray(p["U"], dtype=np.int64)] = True
        tau = float(p["tau"])
        c_mu = float(p["C_mu"])
        bounds = (1.0 / (2.0 * c_mu), 0.5)
        disjoint = _pairwise_disjoint(_masks(space, balls, tau))
        covers = not np.any(target & ~_union(space, _masks(space, balls, 5.0 * tau)))
        vals = [dens(m, target) for m in base]
        density_ok = all(bounds[0] * (1 - RTOL) <= v < bounds[1] for v in vals)
        drange = (min(vals), max(vals)) if vals else None
        if p.get("theta") is not None:
            theta = float(p["theta"])
            ratio_sum = math.fsum(math.fsum(w[m]) / r**theta for m, (_, r) in zip(base, balls))
            per = fractional_perimeter(space, PointSet(space, target), None, theta).value
            quotient = ratio_sum / (theta * (1.0 - theta) * per) if per > 0 else None
    else:
        raise ValueError(f"unknown algorithm {alg!r}")

    ok = disjoint and covers and density_ok and radii_ok and containment_ok
    return Certificate(
        algorithm=alg,
        ok=bool(ok),
        disjoint=bool(disjoint),
        covers_target=bool(covers),
        density_ok=bool(density_ok),
        density_bounds=bounds,
        density_range=drange,
        radii_ok=bool(radii_ok),
        containment_ok=bool(containment_ok),
        floor_flags=flags,
        ratio_sum=ratio_sum,
        quotient=quotient,
        notes=notes,
    )
