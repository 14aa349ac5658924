"""Point-cloud benchmark: precision / recall / F-score and DTU-style distances.

Nearest-neighbour distances go through a uniform-grid index that returns the
exact minimum; :func:`brute_force_distances` is the O(N·M) reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fusion import PointCloud
from .kernels import grid_query

DEFAULT_OUTLIER_CAP = 20.0
MAX_CELLS = 1 << 21


def _positions(c) -> np.ndarray:
    P = c.positions if isinstance(c, PointCloud) else np.asarray(c, dtype=np.float64)
    return np.ascontiguousarray(P, dtype=np.float64).reshape(-1, 3)


class SpatialIndex:
    """Uniform grid over a fixed point set, immutable after construction."""

    def __init__(self, points, cell_size: float | None = None):
        P = _positions(points)
        if len(P) == 0:
            raise ValueError("cannot index an empty point set")
        self.lo = P.min(axis=0)
        extent = P.max(axis=0) - self.lo
        if cell_size is None:
            cell_size = self._auto_cell(extent, len(P))
        if not cell_size > 0:
            raise ValueError("cell size must be positive")
        dims = np.floor(extent / cell_size).astype(np.int64) + 1
        while np.prod(dims) > MAX_CELLS:
            cell_size *= 1.5
            dims = np.floor(extent / cell_size).astype(np.int64) + 1
        self.cell = float(cell_size)
        self.dims = dims
        ijk = np.clip(np.floor((P - self.lo) / self.cell).astype(np.int64), 0, dims - 1)
        cid = (ijk[:, 0] * dims[1] + ijk[:, 1]) * dims[2] + ijk[:, 2]
        order = np.argsort(cid, kind="stable")
        self.points = P[order]
        counts = np.bincount(cid, minlength=int(np.prod(dims)))
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        for a in (self.points, self.cell_start, self.lo, self.dims):
            a.setflags(write=False)

    @staticmethod
    def _auto_cell(extent: np.ndarray, n: int) -> float:
        # about two points per cell on the occupied (possibly planar) extent
        live = extent[extent > 1e-12]
        if len(live) == 0:
            return 1.0
        return float((np.prod(live) * 2.0 / n) ** (1.0 / len(live)))

    def __len__(self) -> int:
        return len(self.points)

    def query(self, queries) -> np.ndarray:
        """Distance from each query to its nearest indexed point."""
        return grid_query(_positions(queries), self.points, self.cell_start, self.lo, self.cell, self.dims)


def brute_force_distances(query, target, chunk: int | None = None) -> np.ndarray:
    """Exhaustive nearest-neighbour distances (the reference for the index)."""
    Q, T = _positions(query), _positions(target)
    if len(T) == 0:
        raise ValueError("target point cloud is empty")
    if chunk is None:
        # keep each chunk × target block around 2^18 doubles so it stays in cache
        chunk = max(1, (1 << 18) // len(T))
    tx, ty, tz = (np.ascontiguousarray(T[:, a]) for a in range(3))
    out = np.empty(len(Q))
    for s in range(0, len(Q), chunk):
        q = Q[s : s + chunk]
        # (ex*ex + ey*ey) + ez*ez, evaluated in place
        d2 = tx[None, :] - q[:, None, 0]
        d2 *= d2
        e = ty[None, :] - q[:, None, 1]
        e *= e
        d2 += e
        np.subtract(tz[None, :], q[:, None, 2], out=e)
        e *= e
        d2 += e
        out[s : s + chunk] = np.sqrt(d2.min(axis=1))
    return out


def nn_distances(query, target) -> np.ndarray:
    """``e_i = min_t ||q_i - t||`` for every query point, exact."""
    T = _positions(target)
    if len(T) == 0:
        raise ValueError("target point cloud is empty")
    return SpatialIndex(T).query(query)


def _score(dist: np.ndarray, d: float) -> float:
    return 100.0 * np.count_nonzero(dist < d) / len(dist)


def precision(recon, gt, d: float) -> float:
    """Percentage of reconstructed points strictly closer than ``d`` to the ground truth."""
    if not d > 0:
        raise ValueError(f"threshold must be positive, got {d}")
    R = _positions(recon)
    if len(R) == 0:
        raise ValueError("reconstruction is empty")
    return _score(nn_distances(R, gt), d)


def recall(recon, gt, d: float) -> float:
    """Percentage of ground-truth points strictly closer than ``d`` to the reconstruction."""
    if not d > 0:
        raise ValueError(f"threshold must be positive, got {d}")
    G = _positions(gt)
    if len(G) == 0:
        raise ValueError("ground truth is empty")
    if len(_positions(recon)) == 0:
        raise ValueError("reconstruction is empty; recall is undefined")
    return _score(nn_distances(G, recon), d)


def fscore(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if not (0.0 <= p <= 100.0 and 0.0 <= r <= 100.0):
        raise ValueError(f"precision and recall must lie in [0, 100], got {p}, {r}")
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class EvalReport:
    precision: float
    recall: float
    fscore: float
    threshold: float
    recon_to_gt: np.ndarray = field(repr=False)
    gt_to_recon: np.ndarray = field(repr=False)

    def csv_rows(self) -> list[str]:
        d = repr(float(self.threshold))
        return [f"{name},{d},{float(getattr(self, name))!r}" for name in ("precision", "recall", "fscore")]


def evaluate(recon, gt, d: float) -> EvalReport:
    """Precision, recall and F-score at threshold ``d``, keeping the distances."""
    if not d > 0:
        raise ValueError(f"threshold must be positive, got {d}")
    R, G = _positions(recon), _positions(gt)
    if len(R) == 0 or len(G) == 0:
        raise ValueError("both point clouds must be non-empty")
    e_rg = nn_distances(R, G)
    e_gr = nn_distances(G, R)
    p, r = _score(e_rg, d), _score(e_gr, d)
    return EvalReport(p, r, fscore(p, r), float(d), e_rg, e_gr)


def dtu_metrics(recon, gt, outlier_cap: float = DEFAULT_OUTLIER_CAP) -> tuple[float, float, float]:
    """Mean accuracy and completeness distances (beyond-cap distances dropped) and their mean."""
    if not outlier_cap > 0:
        raise ValueError("outlier cap must be positive")
    R, G = _positions(recon), _positions(gt)
    if len(R) == 0 or len(G) == 0:
        raise ValueError("both point clouds must be non-empty")
    acc_d = nn_distances(R, G)
    comp_d = nn_distances(G, R)
    acc_d = acc_d[acc_d <= outlier_cap]
    comp_d = comp_d[comp_d <= outlier_cap]
    if len(acc_d) == 0 or len(comp_d) == 0:
        raise ValueError(f"every distance exceeds the outlier cap {outlier_cap}")
    acc = float(np.mean(acc_d))
    comp = float(np.mean(comp_d))
    return acc, comp, (acc + comp) / 2.0


def sample_mesh(vertices, triangles, n: int, seed: int = 0) -> PointCloud:
    """Area-weighted uniform samples on a triangle mesh."""
    V = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    T = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(T) == 0 or T.min() < 0 or T.max() >= len(V):
        raise ValueError("triangle indices out of range")
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = area.sum()
    if not total > 0:
        raise ValueError("mesh has zero total area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(T), size=n, p=area / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    P = w0[:, None] * a[tri] + w1[:, None] * b[tri] + w2[:, None] * c[tri]
    return PointCloud(P)


def distance_histogram(report: EvalReport, bins: int = 50, max_distance: float | None = None):
    """Histogram rows ``(lo, hi, count recon→gt, count gt→recon)``."""
    top = max_distance or max(4.0 * report.threshold, 1e-12)
    edges = np.linspace(0.0, top, bins + 1)
    h1, _ = np.histogram(np.minimum(report.recon_to_gt, top), edges)
    h2, _ = np.histogram(np.minimum(report.gt_to_recon, top), edges)
    return [(edges[i], edges[i + 1], int(h1[i]), int(h2[i])) for i in range(bins)]
