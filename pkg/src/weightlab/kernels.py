"""Compiled summation kernels.

Every kernel parallelizes over evaluation points (or scan rows) only; each
point accumulates sequentially in ascending atom order, with error-free-
transform compensation wherever the value lands in a report.  Results are
therefore independent of the active thread count.

``WEIGHTLAB_THREADS`` caps the number of worker threads.
"""

import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
from numba import config as _numba_config
from numba import njit, prange, set_num_threads


def configure_threads() -> int:
    """Apply the WEIGHTLAB_THREADS cap; returns the active thread count."""
    limit = _numba_config.NUMBA_NUM_THREADS
    env = os.environ.get("WEIGHTLAB_THREADS")
    if env:
        try:
            limit = max(1, min(int(env), limit))
        except ValueError:
            pass
    set_num_threads(limit)
    return limit


configure_threads()


@njit(cache=True, fastmath=False)
def _two_sum_update(s, c, t):
    new = s + t
    if abs(s) >= abs(t):
        c += (s - new) + t
    else:
        c += (t - new) + s
    return new, c


@njit(parallel=True, cache=True, fastmath=False)
def cauchy_many(pos, mass, xs, min_sep):
    """S_i = sum_a mass[a] / (pos[a] - xs[i]), compensated.

    coll[i] holds the index of a colliding atom (|pos - x| < min_sep), -1
    otherwise; the sum is unreliable for collided points.
    """
    n = xs.shape[0]
    out = np.empty(n)
    coll = np.full(n, -1, dtype=np.int64)
    for i in prange(n):
        x = xs[i]
        s = 0.0
        c = 0.0
        hit = -1
        for a in range(pos.shape[0]):
            d = pos[a] - x
            if abs(d) < min_sep:
                hit = a
                break
            s, c = _two_sum_update(s, c, mass[a] / d)
        out[i] = s + c
        coll[i] = hit
    return out, coll


@njit(parallel=True, cache=True, fastmath=False)
def cauchy_many_uniform(pos, m0, xs, min_sep):
    """Uniform-mass variant of cauchy_many (saves one stream of reads)."""
    n = xs.shape[0]
    out = np.empty(n)
    coll = np.full(n, -1, dtype=np.int64)
    for i in prange(n):
        x = xs[i]
        s = 0.0
        c = 0.0
        hit = -1
        for a in range(pos.shape[0]):
            d = pos[a] - x
            if abs(d) < min_sep:
                hit = a
                break
            s, c = _two_sum_update(s, c, 1.0 / d)
        out[i] = m0 * (s + c)
        coll[i] = hit
    return out, coll


@njit(parallel=True, cache=True, fastmath=False)
def cauchy_sign_uniform(pos, xs):
    """Plain (uncompensated) sum of 1/(pos-x); used only for sign queries
    inside the root bracketing loop, where the last bit never decides."""
    n = xs.shape[0]
    out = np.empty(n)
    for i in prange(n):
        x = xs[i]
        s = 0.0
        for a in range(pos.shape[0]):
            s += 1.0 / (pos[a] - x)
        out[i] = s
    return out


@njit(parallel=True, cache=True, fastmath=False)
def cauchy_lipschitz(pos, mass, xs, min_sep):
    """Fused field and slope sums: S_i as in cauchy_many (compensated) and
    L_i = sum_a mass[a] / (pos[a]-xs[i])^2 (plain; only feeds error bounds)."""
    n = xs.shape[0]
    out = np.empty(n)
    lip = np.empty(n)
    coll = np.full(n, -1, dtype=np.int64)
    for i in prange(n):
        x = xs[i]
        s = 0.0
        c = 0.0
        l2 = 0.0
        hit = -1
        for a in range(pos.shape[0]):
            d = pos[a] - x
            if abs(d) < min_sep:
                hit = a
                break
            inv = 1.0 / d
            t = mass[a] * inv
            l2 += t * inv  # mass / d^2, nonnegative
            s, c = _two_sum_update(s, c, t)
        out[i] = s + c
        lip[i] = l2
        coll[i] = hit
    return out, lip, coll


@njit(parallel=True, cache=True, fastmath=False)
def hilbert_bound_uniform(pos, m0, xs, half):
    """Cantor-quadrature field with a rigorous displacement bound.

    For nodes at cylinder midpoints, moving each cylinder's mass to its
    midpoint perturbs the kernel by at most mass * half / dist^2 per
    cylinder, dist measured to the cylinder (clearance below midpoint
    distance by ``half``).  Returns (value, raw bound, min clearance); a
    non-positive clearance means the point touches a cylinder.
    """
    n = xs.shape[0]
    out = np.empty(n)
    bound = np.empty(n)
    clearance = np.empty(n)
    c1 = m0 * half
    for i in prange(n):
        x = xs[i]
        s = 0.0
        c = 0.0
        b = 0.0
        dmin = np.inf
        for a in range(pos.shape[0]):
            d = pos[a] - x
            ad = abs(d)
            db = ad - half
            if db < dmin:
                dmin = db
            if db > 0.0:
                b += c1 / (db * db)
            s, c = _two_sum_update(s, c, 1.0 / d)
        out[i] = m0 * (s + c)
        bound[i] = b
        clearance[i] = dmin
    return out, bound, clearance


@njit(parallel=True, cache=True, fastmath=False)
def tail_rows(pos, mass, q, los, his, disp):
    """Batched tailed-kernel rows: for row r with I = [los[r], his[r]],
    value[r] = sum_a mass[a] * t^(q-1) / (t + dist(x_a, I))^q,  t = |I|,
    lip[r]   = sum_a mass[a] * q * t^(q-1) / (t + max(dist-disp, 0))^(q+1),
    the displacement-sensitivity sum used for quadrature error bounds."""
    rows = los.shape[0]
    vals = np.empty(rows)
    lips = np.empty(rows)
    for r in prange(rows):
        lo = los[r]
        hi = his[r]
        t = hi - lo
        tq = t ** (q - 1.0)
        s = 0.0
        c = 0.0
        l2 = 0.0
        for a in range(pos.shape[0]):
            x = pos[a]
            d = lo - x
            if x > hi:
                d = x - hi
            if d < 0.0:
                d = 0.0
            term = mass[a] * tq / (t + d) ** q
            ds = d - disp
            if ds < 0.0:
                ds = 0.0
            l2 += mass[a] * q * tq / (t + ds) ** (q + 1.0)
            s, c = _two_sum_update(s, c, term)
        vals[r] = s + c
        lips[r] = l2
    return vals, lips


@njit(parallel=True, cache=True, fastmath=False)
def abs_cauchy_rows(pos, mass, centers, lo_idx, hi_idx, skip_lo, skip_hi):
    """Batched absolute-kernel sums: for row r,
    out[r] = sum over atoms a in [lo_idx[r], hi_idx[r]) of
             mass[a] / |pos[a] - centers[r]|,
    skipping atoms whose positions fall in [skip_lo[r], skip_hi[r]]."""
    rows = centers.shape[0]
    out = np.empty(rows)
    for r in prange(rows):
        cen = centers[r]
        s = 0.0
        c = 0.0
        for a in range(lo_idx[r], hi_idx[r]):
            x = pos[a]
            if skip_lo[r] <= x <= skip_hi[r]:
                continue
            s, c = _two_sum_update(s, c, mass[a] / abs(x - cen))
        out[r] = s + c
    return out
