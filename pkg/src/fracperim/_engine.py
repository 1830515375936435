"""Compiled kernels for the O(n^2) pair sums and the ball-mass matrix.

Work is split into fixed row blocks. Each block is computed by a nogil
kernel, so a thread pool gives real parallelism. Every row total is produced
by the same sequential compensated loop whatever the thread count, and the
row totals are combined with ``math.fsum`` in index order. Results are
therefore bit-identical for any number of threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

ROW_BLOCK = 64

_THREADS_ENV = "FRACPERIM_THREADS"
_default_threads: int | None = None


def default_threads() -> int:
    if _default_threads is not None:
        return _default_threads
    env = os.environ.get(_THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    """Set the process-wide worker count (``None`` restores the default)."""
    global _default_threads
    _default_threads = None if n is None else max(1, int(n))


def _run_blocks(fn, n_blocks: int, threads: int | None) -> None:
    t = default_threads() if threads is None else max(1, int(threads))
    if t == 1 or n_blocks <= 1:
        for b in range(n_blocks):
            fn(b)
        return
    with ThreadPoolExecutor(max_workers=t) as pool:
        list(pool.map(fn, range(n_blocks)))


@njit(nogil=True, cache=True)
def _fill_ball_mass(sorted_d, order, w, out):
    # out[i, j] = mu(B(i, d(i, j))) = total weight strictly closer to i than j
    rows, n = sorted_d.shape
    for i in range(rows):
        s = 0.0
        c = 0.0
        group_val = 0.0
        for k in range(n):
            j = order[i, k]
            if k == 0 or sorted_d[i, k] != sorted_d[i, k - 1]:
                group_val = s + c
            out[i, j] = group_val
            x = w[j]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t


def ball_mass_matrix(dist: np.ndarray, weights: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Return M with M[x, y] = mu(B(x, d(x, y))) for open balls."""
    n = dist.shape[0]
    # the kernel writes without bounds checks
    if dist.shape != (n, n) or np.shape(weights) != (n,):
        raise ValueError(f"need a square distance matrix and matching weights, got {dist.shape}")
    out = np.empty((n, n), dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    blk = 256
    n_blocks = (n + blk - 1) // blk

    def work(b):
        lo, hi = b * blk, min(n, (b + 1) * blk)
        rows = dist[lo:hi]
        order = np.argsort(rows, axis=1)
        sd = np.take_along_axis(rows, order, axis=1)
        _fill_ball_mass(sd, order, w, out[lo:hi])

    _run_blocks(work, n_blocks, threads)
    return out


@njit(nogil=True, cache=True)
def _pair_rows(dist, ballm, w, u, rows, cols, theta, symmetric, use_u, out):
    # out[a] = sum_{j in cols, j != rows[a]} c * w_i w_j / (d^theta * den)
    nr = rows.shape[0]
    nc = cols.shape[0]
    acc = np.zeros(nr)
    comp = np.zeros(nr)
    # column tiles keep ballm[j, i] reads cache-resident
    for t0 in range(0, nc, 512):
        t1 = min(nc, t0 + 512)
        for a in range(nr):
            i = rows[a]
            wi = w[i]
            ui = u[i]
            s = acc[a]
            c = comp[a]
            for b in range(t0, t1):
                j = cols[b]
                if j == i:
                    continue
                if use_u:
                    du = abs(ui - u[j])
                    if du == 0.0:
                        continue
                else:
                    du = 1.0
                d = dist[i, j]
                if symmetric:
                    den = ballm[i, j] + ballm[j, i]
                else:
                    den = ballm[i, j]
                x = du * wi * w[j] / (d**theta * den)
                tt = s + x
                if abs(s) >= abs(x):
                    c += (s - tt) + x
                else:
                    c += (x - tt) + s
                s = tt
            acc[a] = s
            comp[a] = c
    for a in range(nr):
        out[a] = acc[a] + comp[a]


def pair_sum(
    dist: np.ndarray,
    ballm: np.ndarray,
    weights: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    theta: float,
    *,
    symmetric: bool,
    u: np.ndarray | None = None,
    threads: int | None = None,
) -> float:
    """Compensated, order-fixed sum of the fractional kernel over rows x cols."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    nr = rows.shape[0]
    if nr == 0 or cols.shape[0] == 0:
        return 0.0
    use_u = u is not None
    uu = np.ascontiguousarray(u, dtype=np.float64) if use_u else np.zeros(dist.shape[0])
    w = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty(nr, dtype=np.float64)
    n_blocks = (nr + ROW_BLOCK - 1) // ROW_BLOCK

    def work(b):
        lo, hi = b * ROW_BLOCK, min(nr, (b + 1) * ROW_BLOCK)
        _pair_rows(dist, ballm, w, uu, rows[lo:hi], cols, float(theta), symmetric, use_u, out[lo:hi])

    _run_blocks(work, n_blocks, threads)
    return math.fsum(out)
