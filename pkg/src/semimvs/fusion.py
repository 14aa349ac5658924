"""Depth-map fusion with cross-view geometric consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DepthMap, View, pixel_grid, project, unproject
from .kernels import bilinear_sample


@dataclass(frozen=True, eq=False)
class PointCloud:
    positions: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        P = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(P)):
            raise ValueError("point positions must be finite")
        object.__setattr__(self, "positions", P)
        if self.colors is not None:
            c = np.array(self.colors, dtype=np.float64)
            if c.ndim == 1:
                c = c[:, None]
            if len(c) != len(P):
                raise ValueError(f"{len(c)} colors for {len(P)} points")
            object.__setattr__(self, "colors", c)

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))


@dataclass(frozen=True)
class FusionConfig:
    """Consistency thresholds.

    ``min_consistent_views`` counts the reference view itself, so 2 means "at
    least one other view agrees". ``voxel_size=None`` picks half the median
    spacing between adjacent fused pixels.
    """

    min_consistent_views: int = 2
    max_relative_depth_error: float = 0.01
    max_reprojection_px: float = 1.0
    voxel_size: float | None = None

    def __post_init__(self):
        if self.min_consistent_views < 1:
            raise ValueError("min_consistent_views must be >= 1")
        if self.max_relative_depth_error <= 0 or self.max_reprojection_px <= 0:
            raise ValueError("thresholds must be positive")
        if self.voxel_size is not None and self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")


def _check_pass(ref: View, ref_depth: DepthMap, others, cfg: FusionConfig):
    H, W = ref.shape
    u, v = pixel_grid(H, W)
    d = ref_depth.values.ravel()
    sel = np.flatnonzero(d > 0)
    u, v, d = u.ravel()[sel], v.ravel()[sel], d[sel]
    X = unproject(ref.intrinsics, ref.extrinsics, u, v, d)
    n_ok = np.ones(len(sel), dtype=np.int64)
    acc = X.copy()
    for view, depth in others:
        us, vs, zs = project(view.intrinsics, view.extrinsics, X)
        front = np.isfinite(us) & np.isfinite(vs) & (zs > 0)
        us = np.where(front, us, np.nan)
        vs = np.where(front, vs, np.nan)
        # interpolate inverse depth: it is affine in pixel coordinates on planes
        valid_map = depth.values > 0
        inv = np.where(valid_map, 1.0 / np.where(valid_map, depth.values, 1.0), 0.0)
        inv_s, inside = bilinear_sample(inv[:, :, None], us, vs)
        inv_s = inv_s[:, 0]
        # every bilinear tap must be a valid depth
        vfrac, _ = bilinear_sample(valid_map.astype(np.float64)[:, :, None], us, vs)
        ok = inside & front & (vfrac[:, 0] > 1.0 - 1e-12) & (inv_s > 0)
        dsrc = np.where(ok, 1.0 / np.where(ok, inv_s, 1.0), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(zs - dsrc) / dsrc
        Xs = unproject(view.intrinsics, view.extrinsics, us, vs, np.where(ok, dsrc, 1.0))
        ub, vb, zb = project(ref.intrinsics, ref.extrinsics, Xs)
        reproj = np.hypot(ub - u, vb - v)
        agree = ok & (rel <= cfg.max_relative_depth_error) & (reproj <= cfg.max_reprojection_px) & (zb > 0)
        n_ok += agree
        acc[agree] += Xs[agree]
    keep = n_ok >= cfg.min_consistent_views
    pts = acc[keep] / n_ok[keep, None]
    colors = ref.image.reshape(-1, ref.channels)[sel[keep]]
    return pts, colors, _row_spacing(sel[keep], X[keep], W)


def _row_spacing(flat_idx: np.ndarray, X: np.ndarray, width: int) -> np.ndarray:
    # 3D distance between horizontally adjacent surviving pixels
    nxt = np.searchsorted(flat_idx, flat_idx + 1)
    nxt = np.minimum(nxt, len(flat_idx) - 1)
    adj = (flat_idx[nxt] == flat_idx + 1) & ((flat_idx % width) != width - 1)
    return np.linalg.norm(X[nxt[adj]] - X[adj], axis=1)


def voxel_merge(points: np.ndarray, colors: np.ndarray, cell: float):
    """Average all points (and colours) falling in the same voxel.

    Points are put in a canonical lexicographic order first, so the result
    does not depend on the input order.
    """
    if len(points) == 0:
        return points, colors
    order = np.lexsort(np.column_stack([points, colors])[:, ::-1].T)
    points, colors = points[order], colors[order]
    keys = np.floor(points / cell).astype(np.int64)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    counts = np.bincount(inv, minlength=len(uniq)).astype(np.float64)
    P = np.zeros((len(uniq), 3))
    C = np.zeros((len(uniq), colors.shape[1]))
    np.add.at(P, inv, points)
    np.add.at(C, inv, colors)
    return P / counts[:, None], C / counts[:, None]


def fuse(views, depths, cfg: FusionConfig | None = None) -> PointCloud:
    """Fuse per-view depth maps into one coloured point cloud.

    Every view serves once as reference. A reference pixel survives when the
    number of agreeing views (itself included) reaches
    ``cfg.min_consistent_views``; a view agrees when the reprojected depth is
    within ``max_relative_depth_error`` and the round trip back to the
    reference lands within ``max_reprojection_px``. Survivors are averaged
    with their agreeing observations, then merged on a voxel grid whose
    default cell is half the median spacing between adjacent fused pixels.
    """
    cfg = cfg or FusionConfig()
    views = list(views)
    depths = list(depths)
    if len(views) != len(depths):
        raise ValueError(f"{len(views)} views but {len(depths)} depth maps")
    for v, d in zip(views, depths):
        if d.shape != v.shape:
            raise ValueError(f"depth map {d.shape} does not match view {v.id} image {v.shape}")
    if cfg.min_consistent_views > len(views):
        return PointCloud.empty()
    # deterministic merge order: by view id
    order = sorted(range(len(views)), key=lambda k: views[k].id)
    all_pts, all_col, spacings = [], [], []
    for r in order:
        others = [(views[k], depths[k]) for k in order if k != r]
        p, c, s = _check_pass(views[r], depths[r], others, cfg)
        all_pts.append(p)
        all_col.append(c)
        if len(s):
            spacings.append(np.median(s))
    pts = np.concatenate(all_pts)
    cols = np.concatenate(all_col) if all_col else np.zeros((0, 1))
    if len(pts) == 0:
        return PointCloud(pts, cols)
    cell = cfg.voxel_size
    if cell is None:
        spacing = float(np.median(spacings)) if spacings else 0.0
        if spacing <= 0:
            return PointCloud(pts, cols)
        cell = 0.5 * spacing
    pts, cols = voxel_merge(pts, cols, cell)
    return PointCloud(pts, np.clip(cols, 0.0, 1.0))
