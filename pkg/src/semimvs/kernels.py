"""Hot inner loops, each with a numba kernel and a numpy twin.

The public functions at the bottom dispatch on :func:`semimvs._accel.use_numba`
at call time. Both paths evaluate the same floating-point expressions in the
same order so results agree to the last few ulps (and bit-for-bit for the
nearest-neighbour search, whose distances are plain min/sqrt).
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit, prange

# Sample positions within this distance of an integer are snapped to it so
# integer-aligned warps reproduce the source exactly.
SNAP_TOL = 1e-9
# Slack on the image bounds before a sample position counts as outside.
BOUND_TOL = 1e-6


# ---------------------------------------------------------------------------
# bilinear sampling
# ---------------------------------------------------------------------------


@njit(parallel=True)
def _bilinear_numba(image, u, v):
    H, W, C = image.shape
    n = u.shape[0]
    out = np.zeros((n, C))
    valid = np.zeros(n, dtype=np.bool_)
    for i in prange(n):
        x = u[i]
        y = v[i]
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        rx = math.floor(x + 0.5)
        if abs(x - rx) < SNAP_TOL:
            x = rx
        ry = math.floor(y + 0.5)
        if abs(y - ry) < SNAP_TOL:
            y = ry
        if x < -BOUND_TOL or x > W - 1 + BOUND_TOL:
            continue
        if y < -BOUND_TOL or y > H - 1 + BOUND_TOL:
            continue
        x = min(max(x, 0.0), W - 1.0)
        y = min(max(y, 0.0), H - 1.0)
        x0 = min(int(math.floor(x)), W - 2)
        y0 = min(int(math.floor(y)), H - 2)
        fx = x - x0
        fy = y - y0
        for c in range(C):
            top = (1.0 - fx) * image[y0, x0, c] + fx * image[y0, x0 + 1, c]
            bot = (1.0 - fx) * image[y0 + 1, x0, c] + fx * image[y0 + 1, x0 + 1, c]
            out[i, c] = (1.0 - fy) * top + fy * bot
        valid[i] = True
    return out, valid


def _bilinear_numpy(image, u, v):
    H, W, C = image.shape
    u = u.astype(np.float64, copy=True)
    v = v.astype(np.float64, copy=True)
    finite = np.isfinite(u) & np.isfinite(v)
    u[~finite] = -1e9
    v[~finite] = -1e9
    ru = np.floor(u + 0.5)
    rv = np.floor(v + 0.5)
    u = np.where(np.abs(u - ru) < SNAP_TOL, ru, u)
    v = np.where(np.abs(v - rv) < SNAP_TOL, rv, v)
    valid = (
        finite
        & (u >= -BOUND_TOL)
        & (u <= W - 1 + BOUND_TOL)
        & (v >= -BOUND_TOL)
        & (v <= H - 1 + BOUND_TOL)
    )
    x = np.clip(u, 0.0, W - 1.0)
    y = np.clip(v, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), W - 2)
    y0 = np.minimum(np.floor(y).astype(np.int64), H - 2)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = (1.0 - fx) * image[y0, x0] + fx * image[y0, x0 + 1]
    bot = (1.0 - fx) * image[y0 + 1, x0] + fx * image[y0 + 1, x0 + 1]
    out = (1.0 - fy) * top + fy * bot
    out[~valid] = 0.0
    return out, valid


def bilinear_sample(image: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Sample an ``H×W×C`` image at column ``u`` / row ``v`` positions.

    Returns ``(values N×C, valid N)``. A position is valid when it lies in the
    interpolatable interior ``[0, W-1] × [0, H-1]``; invalid rows are zero.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64).ravel()
    v = np.ascontiguousarray(v, dtype=np.float64).ravel()
    if image.ndim != 3 or image.shape[0] < 2 or image.shape[1] < 2:
        raise ValueError(f"expected an H×W×C image with H, W >= 2, got {image.shape}")
    if _accel.use_numba():
        return _bilinear_numba(image, u, v)
    return _bilinear_numpy(image, u, v)


# ---------------------------------------------------------------------------
# windowed sums
# ---------------------------------------------------------------------------


@njit
def _box_sum_numba(a, r):
    H, W = a.shape
    # separable: rows then columns, zero outside the image
    tmp = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            s = 0.0
            for dj in range(-r, r + 1):
                jj = j + dj
                if 0 <= jj < W:
                    s += a[i, jj]
            tmp[i, j] = s
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            s = 0.0
            for di in range(-r, r + 1):
                ii = i + di
                if 0 <= ii < H:
                    s += tmp[ii, j]
            out[i, j] = s
    return out


def _box_sum_numpy(a, r):
    H, W = a.shape
    tmp = np.zeros((H, W))
    for dj in range(-r, r + 1):
        lo, hi = max(0, -dj), min(W, W - dj)
        tmp[:, lo:hi] += a[:, lo + dj : hi + dj]
    out = np.zeros((H, W))
    for di in range(-r, r + 1):
        lo, hi = max(0, -di), min(H, H - di)
        out[lo:hi] += tmp[lo + di : hi + di]
    return out


def box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the ``(2r+1)²`` window around each pixel, zero outside."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if radius == 0:
        return a.copy()
    if _accel.use_numba():
        return _box_sum_numba(a, int(radius))
    return _box_sum_numpy(a, int(radius))


# ---------------------------------------------------------------------------
# spatial propagation (one direction, left to right)
# ---------------------------------------------------------------------------


@njit
def _propagate_lr_numba(x, w):
    H, W, C = x.shape
    h = np.empty_like(x)
    for i in range(H):
        for c in range(C):
            h[i, 0, c] = x[i, 0, c]
    for j in range(1, W):
        for i in range(H):
            w0 = w[i, j, 0]
            w1 = w[i, j, 1]
            w2 = w[i, j, 2]
            keep = 1.0 - (w0 + w1 + w2)
            for c in range(C):
                up = h[i - 1, j - 1, c] if i > 0 else 0.0
                dn = h[i + 1, j - 1, c] if i < H - 1 else 0.0
                h[i, j, c] = keep * x[i, j, c] + w0 * up + w1 * h[i, j - 1, c] + w2 * dn
    return h


def _propagate_lr_numpy(x, w):
    H, W, C = x.shape
    h = np.empty_like(x)
    h[:, 0] = x[:, 0]
    zero = np.zeros((1, C))
    for j in range(1, W):
        prev = h[:, j - 1]
        up = np.concatenate([zero, prev[:-1]], axis=0)
        dn = np.concatenate([prev[1:], zero], axis=0)
        w0 = w[:, j, 0:1]
        w1 = w[:, j, 1:2]
        w2 = w[:, j, 2:3]
        keep = 1.0 - (w0 + w1 + w2)
        h[:, j] = keep * x[:, j] + w0 * up + w1 * prev + w2 * dn
    return h


def propagate_lr(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Left-to-right linear propagation over columns.

    ``w[i, j]`` holds the weights to ``(i-1, j-1)``, ``(i, j-1)``, ``(i+1, j-1)``.
    The first column passes through unchanged.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if _accel.use_numba():
        return _propagate_lr_numba(x, w)
    return _propagate_lr_numpy(x, w)


# ---------------------------------------------------------------------------
# uniform-grid nearest neighbour
# ---------------------------------------------------------------------------

GAP_SLACK = 1e-7


@njit
def _ring_bound(q, lo, cell, dims, ci, r):
    # Lower bound on the distance from q to any cell outside the searched cube
    # of Chebyshev radius r around the (clamped) cell ci; inf when none remain.
    best = np.inf
    for a in range(3):
        if ci[a] - r > 0:
            gap = q[a] - (lo[a] + (ci[a] - r) * cell)
            if gap < best:
                best = gap
        if ci[a] + r < dims[a] - 1:
            gap = lo[a] + (ci[a] + r + 1) * cell - q[a]
            if gap < best:
                best = gap
    return best


@njit(parallel=True)
def _grid_query_numba(queries, pts, cell_start, lo, cell, dims):
    nq = queries.shape[0]
    out = np.empty(nq)
    dx, dy, dz = dims[0], dims[1], dims[2]
    for n in prange(nq):
        q = queries[n]
        ci = np.empty(3, dtype=np.int64)
        for a in range(3):
            k = int(math.floor((q[a] - lo[a]) / cell))
            ci[a] = min(max(k, 0), dims[a] - 1)
        best = np.inf
        r = 0
        while True:
            for a in range(max(0, ci[0] - r), min(dx - 1, ci[0] + r) + 1):
                for b in range(max(0, ci[1] - r), min(dy - 1, ci[1] + r) + 1):
                    for c in range(max(0, ci[2] - r), min(dz - 1, ci[2] + r) + 1):
                        cheb = max(abs(a - ci[0]), max(abs(b - ci[1]), abs(c - ci[2])))
                        if cheb != r:
                            continue
                        cid = (a * dy + b) * dz + c
                        for p in range(cell_start[cid], cell_start[cid + 1]):
                            ex = pts[p, 0] - q[0]
                            ey = pts[p, 1] - q[1]
                            ez = pts[p, 2] - q[2]
                            d2 = ex * ex + ey * ey + ez * ez
                            if d2 < best:
                                best = d2
            bound = _ring_bound(q, lo, cell, dims, ci, r)
            if bound == np.inf:
                break
            bound = bound - GAP_SLACK * cell
            if bound > 0 and best <= bound * bound:
                break
            r += 1
        out[n] = math.sqrt(best)
    return out


def _ring_offsets(r: int) -> np.ndarray:
    rng = np.arange(-r, r + 1)
    off = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    return off[np.abs(off).max(axis=1) == r]


# Rings beyond this radius are not worth a Python loop over their cells; the
# numpy path finishes the remaining queries by chunked brute force instead.
NUMPY_MAX_RING = 3


def _sq_dist(P, q):
    # same expression and order as the numba kernel, so minima are bit-identical
    ex = P[..., 0] - q[..., 0]
    ey = P[..., 1] - q[..., 1]
    ez = P[..., 2] - q[..., 2]
    return ex * ex + ey * ey + ez * ez


def _grid_query_numpy(queries, pts, cell_start, lo, cell, dims):
    nq = queries.shape[0]
    best = np.full(nq, np.inf)
    ci = np.clip(np.floor((queries - lo) / cell).astype(np.int64), 0, dims - 1)
    active = np.arange(nq)
    r = 0
    while len(active) and r <= NUMPY_MAX_RING:
        q, c0, b = queries[active], ci[active], best[active]
        for off in _ring_offsets(r):
            cells = c0 + off
            sel = np.flatnonzero(np.all((cells >= 0) & (cells < dims), axis=1))
            if not len(sel):
                continue
            cc = cells[sel]
            cid = (cc[:, 0] * dims[1] + cc[:, 1]) * dims[2] + cc[:, 2]
            start = cell_start[cid]
            cnt = cell_start[cid + 1] - start
            nz = cnt > 0
            if not nz.any():
                continue
            sel, start, cnt = sel[nz], start[nz], cnt[nz]
            # flatten (query, candidate point) pairs, then reduce per query
            heads = np.concatenate([[0], np.cumsum(cnt)[:-1]])
            qi = np.repeat(sel, cnt)
            pi = np.repeat(start - heads, cnt) + np.arange(int(cnt.sum()))
            d2 = _sq_dist(pts[pi], q[qi])
            b[sel] = np.minimum(b[sel], np.minimum.reduceat(d2, heads))
        best[active] = b
        # per-axis gaps to the cells not yet searched, inf where none remain
        gaps = np.full((len(active), 6), np.inf)
        for a in range(3):
            low = c0[:, a] - r > 0
            gaps[low, 2 * a] = q[low, a] - (lo[a] + (c0[low, a] - r) * cell)
            high = c0[:, a] + r < dims[a] - 1
            gaps[high, 2 * a + 1] = lo[a] + (c0[high, a] + r + 1) * cell - q[high, a]
        bound = gaps.min(axis=1)
        done = np.isinf(bound)
        bound = bound - GAP_SLACK * cell
        done |= (bound > 0) & (b <= bound * bound)
        active = active[~done]
        r += 1
    if len(active):
        best[active] = _exhaustive_sq(queries[active], pts)
    return np.sqrt(best)


def _exhaustive_sq(q, pts):
    # chunked all-pairs minimum, blocks of about 2^18 doubles, same rounding as _sq_dist
    px, py, pz = (np.ascontiguousarray(pts[:, a]) for a in range(3))
    chunk = max(1, (1 << 18) // len(pts))
    out = np.empty(len(q))
    for i in range(0, len(q), chunk):
        qq = q[i : i + chunk]
        d2 = px[None, :] - qq[:, None, 0]
        d2 *= d2
        e = py[None, :] - qq[:, None, 1]
        e *= e
        d2 += e
        np.subtract(pz[None, :], qq[:, None, 2], out=e)
        e *= e
        d2 += e
        out[i : i + chunk] = d2.min(axis=1)
    return out


def grid_query(queries, pts, cell_start, lo, cell, dims) -> np.ndarray:
    """Exact nearest-neighbour distances from ``queries`` to grid-sorted ``pts``."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    cell_start = np.ascontiguousarray(cell_start, dtype=np.int64)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    dims = np.ascontiguousarray(dims, dtype=np.int64)
    if len(queries) == 0:
        return np.empty(0)
    if _accel.use_numba():
        return _grid_query_numba(queries, pts, cell_start, lo, float(cell), dims)
    return _grid_query_numpy(queries, pts, cell_start, lo, float(cell), dims)
