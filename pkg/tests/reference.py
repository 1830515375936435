"""Brute-force reference implementations used as test oracles.

Plain Python loops over the distance matrix, no shared code with the package.
"""

import math


def ball_mass(D, w, x, r):
    return math.fsum(w[z] for z in range(len(w)) if D[x][z] < r)


def ball_masses(D, w):
    """Table of ``mu(B(x, d(x, y)))`` by a triple loop."""
    n = len(w)
    return [[ball_mass(D, w, x, D[x][y]) for y in range(n)] for x in range(n)]


def perimeter(D, w, E, Omega, theta, M=None):
    M = M or ball_masses(D, w)
    E, Omega = set(E), set(Omega)
    terms = []
    for x in Omega:
        if x not in E:
            continue
        for y in Omega:
            if y in E:
                continue
            d = D[x][y]
            terms.append(2.0 * w[x] * w[y] / (d**theta * (M[x][y] + M[y][x])))
    return math.fsum(terms)


def energy(D, w, u, Omega, theta, symmetric=False, M=None):
    M = M or ball_masses(D, w)
    terms = []
    for x in Omega:
        for y in Omega:
            if x == y:
                continue
            d = D[x][y]
            den = M[x][y] + M[y][x] if symmetric else M[x][y]
            terms.append(abs(u[x] - u[y]) * w[x] * w[y] / (d**theta * den))
    return math.fsum(terms)


def coarea(D, w, u, Omega, theta, M=None):
    M = M or ball_masses(D, w)
    vals = sorted({u[x] for x in Omega})
    total = []
    for lo, hi in zip(vals, vals[1:]):
        E = [x for x in range(len(w)) if u[x] > lo]
        total.append((hi - lo) * perimeter(D, w, E, Omega, theta, M))
    return math.fsum(total)


def graph_perimeter(edges, w, E, Omega):
    E, Omega = set(E), set(Omega)
    shortest = {}
    for a, b, length in edges:
        key = (min(int(a), int(b)), max(int(a), int(b)))
        shortest[key] = min(length, shortest.get(key, math.inf))
    terms = []
    for (a, b), length in sorted(shortest.items()):
        if a in Omega and b in Omega and (a in E) != (b in E):
            terms.append(min(w[a], w[b]) / length)
    return math.fsum(terms)


def mean_and_deviation(D, w, u, x, r, q):
    B = [z for z in range(len(w)) if D[x][z] < r]
    m = math.fsum(w[z] for z in B)
    mean = math.fsum(u[z] * w[z] for z in B) / m
    dev = (math.fsum(abs(u[z] - mean) ** q * w[z] for z in B) / m) ** (1.0 / q)
    return mean, dev


def lip_r(D, u, x, r):
    best = 0.0
    for y in range(len(u)):
        if y != x and D[x][y] < r:
            best = max(best, abs(u[y] - u[x]) / D[x][y])
    return best


def random_metric(rng, n, geodesic=False):
    """Random space as (D, w, edges): Euclidean points or a random connected graph."""
    import numpy as np
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import shortest_path

    w = (rng.random(n) * 2.0 + 0.1).tolist()
    if not geodesic:
        P = rng.random((n, int(rng.integers(1, 4))))
        D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
        return D, w, None
    edges = [(i, int(rng.integers(0, i)), float(rng.random() + 0.05)) for i in range(1, n)]
    for _ in range(n):
        a, b = (int(v) for v in rng.integers(0, n, 2))
        if a != b:
            edges.append((a, b, float(rng.random() + 0.05)))
    e = np.array(edges)
    G = coo_matrix((e[:, 2], (e[:, 0].astype(int), e[:, 1].astype(int))), shape=(n, n)).tocsr()
    D = shortest_path(G, method="D", directed=False)
    return D, w, edges


def perimeter_dense(D, w, M, E, Omega, theta):
    """Same sum as ``perimeter`` with ``M`` from ``ball_mass_dense``, one numpy row per point of E."""
    import numpy as np

    D = np.asarray(D, dtype=float)
    w = np.asarray(w, dtype=float)
    inE = np.asarray(E, dtype=bool)
    inO = np.asarray(Omega, dtype=bool)
    cols = np.flatnonzero(inO & ~inE)
    terms = []
    for x in np.flatnonzero(inE & inO):
        d = D[x, cols]
        terms.extend((2.0 * w[x] * w[cols] / (d**theta * (M[x, cols] + M[cols, x]))).tolist())
    return math.fsum(terms)


def ball_mass_dense(D, w):
    """``M[x, y] = mu(B(x, d(x, y)))`` by direct comparison, one row at a time."""
    import numpy as np

    D = np.asarray(D, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.array([(D[x][None, :] < D[x][:, None]) @ w for x in range(len(w))])


def ball_ratio(D, w, M, kind, witness, c, r, theta, q, tau=1.0, rescale=True):
    """Ratio of one ball inequality instance, straight from the definitions.

    ``witness`` is a function (Poincare kinds) or a boolean mask (isoperimetric
    kinds); ``M`` comes from ``ball_mass_dense``.
    """
    import numpy as np

    D = np.asarray(D, dtype=float)
    w = np.asarray(w, dtype=float)
    f = np.asarray(witness, dtype=float)
    B = np.flatnonzero(D[c] < r)
    T = np.flatnonzero(D[c] < tau * r)
    muB = math.fsum(w[B])
    muT = math.fsum(w[T])
    normalized = kind.startswith("bbm")
    terms = []
    if kind.endswith("poincare"):
        mean = math.fsum(f[B] * w[B]) / muB
        dev = math.fsum(np.abs(f[B] - mean) ** q * w[B])
        lhs = (dev / muB if normalized else dev) ** (1.0 / q)
        for x in T:
            others = T[T != x]
            d = D[x, others]
            terms.extend((np.abs(f[x] - f[others]) * w[x] * w[others] / (d**theta * M[x, others])).tolist())
    else:
        inside = math.fsum(w[B][f[B] > 0])
        outside = math.fsum(w[B][f[B] == 0])
        lhs = ((min(inside, outside) / muB) if normalized else min(inside, outside)) ** (1.0 / q)
        ins, outs = T[f[T] > 0], T[f[T] == 0]
        for x in ins:
            d = D[x, outs]
            terms.extend((2.0 * w[x] * w[outs] / (d**theta * (M[x, outs] + M[outs, x]))).tolist())
    rhs = math.fsum(terms)
    if normalized:
        rhs /= muT
    scale = (1.0 - theta) if rescale else 1.0
    if normalized:
        scale *= r**theta
    if lhs == 0:
        return 0.0
    return math.inf if rhs == 0 else lhs / (scale * rhs)


def frac_iso(D, w, E, c, r, k, Q):
    """``(lhs, rhs)`` of the dyadic-annulus comparison, by direct loops."""
    n = len(w)
    B = [x for x in range(n) if D[c][x] < r]
    muB = math.fsum(w[x] for x in B)
    dens = math.fsum(w[x] for x in B if x in E) / muB
    outer, inner = r / 2**k, r / 2 ** (k + 1)
    acc = []
    for x in B:
        ann = [y for y in B if inner <= D[x][y] < outer]
        m = math.fsum(w[y] for y in ann)
        if m == 0:
            continue
        diff = math.fsum(w[y] for y in ann if (x in E) != (y in E))
        acc.append(w[x] * diff / m)
    return dens ** ((Q - 1) / Q), 2**k * math.fsum(acc) / muB


def annuli(D, w, E, x0, r0, x1, r1, a, eps):
    """``(lhs, rhs)`` of the small-ball annulus estimate; empty annuli count ``w[x]``."""
    n = len(w)
    B0 = [y for y in range(n) if D[x0][y] < r0]
    B1 = [x for x in range(n) if D[x1][x] < r1]
    acc = []
    for x in B1:
        ann = [y for y in B0 if a / 2 <= D[x][y] < a]
        m = math.fsum(w[y] for y in ann)
        if m == 0:
            acc.append(w[x])
            continue
        avg = math.fsum(w[y] for y in ann if y in E) / m
        acc.append(abs((1.0 if x in E else 0.0) - avg) * w[x])
    return math.fsum(w[x] for x in B1), 4 / eps * math.fsum(acc)
