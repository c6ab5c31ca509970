"""Compiled per-triple kernels used by FLSEngine."""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# The system TBB is too old for numba; try OpenMP first instead of warning on every import.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_BLOCK = 256


@njit(cache=True)
def _initial_switch(n, left):
    v = n / 2.4 if left else n / 1.7
    k = int(np.floor(v + 0.5))
    return min(max(k, 1), n - 1)


@njit(cache=True)
def _sums(xs, lo, up, k, left):
    a = 0.0
    b = 0.0
    for i in range(xs.size):
        w = (up[i] if i < k else lo[i]) if left else (lo[i] if i < k else up[i])
        a += xs[i] * w
        b += w
    return a, b


@njit(cache=True)
def _ekm_side(xs, lo, up, left):
    # a, b are re-summed at each switch point; running updates cancel badly
    # when the lower set is empty and drift past the b <= 0 stop.
    n = xs.size
    k = _initial_switch(n, left)
    a, b = _sums(xs, lo, up, k, left)
    if b <= 0.0:
        k = n if left else 0
        a, b = _sums(xs, lo, up, k, left)
    c = a / b
    for _ in range(n + 1):
        kp = 0
        while kp < n and xs[kp] <= c:
            kp += 1
        kp = min(max(kp, 1), n - 1)
        if kp == k:
            break
        a2, b2 = _sums(xs, lo, up, kp, left)
        if b2 <= 0.0:
            break
        c2 = a2 / b2
        # exact KM steps never move c the wrong way; rounding near-zero weights can
        if (c2 > c) if left else (c2 < c):
            break
        k = kp
        c = c2
    return c, k


@njit(cache=True)
def ekm_pair(xs, lo, up):
    """(c_l, L, c_r, R) for one discretized IT2 set."""
    cl, kl = _ekm_side(xs, lo, up, True)
    cr, kr = _ekm_side(xs, lo, up, False)
    return cl, kl, cr, kr


@njit(cache=True)
def _one(dr, dg, db, in_lo, in_up, ante, cons, n_cons, out_lo, out_up, xs, type2, f_lo, f_up, mu_lo, mu_up):
    n = xs.size
    for c in range(n_cons):
        f_lo[c] = 0.0
        f_up[c] = 0.0
    for r in range(ante.shape[0]):
        u = in_up[ante[r, 0], dr] * in_up[ante[r, 1], dg] * in_up[ante[r, 2], db]
        lo = in_lo[ante[r, 0], dr] * in_lo[ante[r, 1], dg] * in_lo[ante[r, 2], db]
        c = cons[r]
        if u > f_up[c]:
            f_up[c] = u
        if lo > f_lo[c]:
            f_lo[c] = lo
    fired = False
    for c in range(n_cons):
        if f_up[c] > 0.0:
            fired = True
    if not fired:
        return np.nan
    for i in range(n):
        hu = 0.0
        hl = 0.0
        for c in range(n_cons):
            v = f_up[c] * out_up[c, i]
            if v > hu:
                hu = v
            v = f_lo[c] * out_lo[c, i]
            if v > hl:
                hl = v
        mu_up[i] = hu
        mu_lo[i] = hl
    if type2:
        cl, _ = _ekm_side(xs, mu_lo, mu_up, True)
        cr, _ = _ekm_side(xs, mu_lo, mu_up, False)
        y = 0.5 * (cl + cr)
    else:
        num = 0.0
        den = 0.0
        for i in range(n):
            num += xs[i] * mu_up[i]
            den += mu_up[i]
        if den <= 0.0:
            return np.nan
        y = num / den
    return min(max(y, 0.0), 1.0)


@njit(cache=True, parallel=True)
def fls_batch(d, in_lo, in_up, ante, cons, out_lo, out_up, xs, type2, out):
    n_items = d.shape[0]
    n_cons = out_up.shape[0]
    n_blocks = (n_items + _BLOCK - 1) // _BLOCK
    for blk in prange(n_blocks):
        f_lo = np.empty(n_cons)
        f_up = np.empty(n_cons)
        mu_lo = np.empty(xs.size)
        mu_up = np.empty(xs.size)
        stop = min((blk + 1) * _BLOCK, n_items)
        for j in range(blk * _BLOCK, stop):
            out[j] = _one(d[j, 0], d[j, 1], d[j, 2], in_lo, in_up, ante, cons, n_cons,
                          out_lo, out_up, xs, type2, f_lo, f_up, mu_lo, mu_up)


def set_workers(workers: int | None) -> int:
    """Set the kernel thread count (clamped to what numba was started with); returns it."""
    cap = numba.config.NUMBA_NUM_THREADS
    w = cap if not workers or workers < 1 else min(workers, cap)
    numba.set_num_threads(w)
    return w
