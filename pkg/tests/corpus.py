"""Deterministic fixture corpus: three spaces and five set families."""

import functools

import numpy as np

from fracperim.generators import grid, weighted_space

SPACE_NAMES = ("grid1_129", "grid2_33", "weighted1_129")
SET_NAMES = ("halfspace", "ball", "two_balls", "sublevel", "scatter")


@functools.lru_cache(maxsize=None)
def space(name):
    if name == "grid1_129":
        return grid(1, 129)
    if name == "grid2_33":
        return grid(2, 33)
    if name == "weighted1_129":
        return weighted_space(grid(1, 129), 1.0, 0)
    raise KeyError(name)


def _center(sp):
    return int(np.argmin(((sp.coords - 0.5) ** 2).sum(axis=1)))


def set_mask(sp, name, seed=11):
    """Sets of mass below half of the total, so every cover builder accepts them."""
    D = sp.dist
    n = sp.n
    c = _center(sp)
    rng = np.random.default_rng(seed)
    if name == "halfspace":
        m = sp.coords[:, 0] <= 0.3
    elif name == "ball":
        m = D[c] < 0.15
    elif name == "two_balls":
        m = (D[c] < 0.08) | (D[n - 1] < 0.12)
    elif name == "sublevel":
        anchors = rng.choice(n, 4, replace=False)
        f = np.min(rng.random(4)[:, None] * 0.3 + D[anchors], axis=0)
        m = f <= np.quantile(f, 0.3)
    elif name == "scatter":
        m = rng.random(n) < 0.1
    else:
        raise KeyError(name)
    while sp.weights[m].sum() >= sp.total_mass / 2:
        m &= ~(np.arange(n) == np.flatnonzero(m)[-1])
    return m


def sparse_core(sp, mask, fraction=0.02):
    """Part of ``mask`` near its first point holding at most ``fraction`` of the total mass."""
    first = int(np.flatnonzero(mask)[0])
    d = sp.dist[first]
    best = np.arange(sp.n) == first
    for r in np.unique(d[mask]):
        core = mask & (d <= r)
        if sp.weights[core].sum() > fraction * sp.total_mass:
            break
        best = core
    return best


def cover_params(sp, mask):
    """Ambient ball (the whole space) and density levels suited to ``mask``."""
    x0 = _center(sp)
    r0 = float(sp.dist[x0].max()) * 1.0000001
    dens = sp.weights[mask].sum() / sp.total_mass
    return {
        "B0": (x0, r0),
        "lam_cz": 0.9,
        "lam_boundary": 0.5 * min(dens, 1.0 - dens),
        "kappa": 0.9,
        "core": sparse_core(sp, mask),
    }
