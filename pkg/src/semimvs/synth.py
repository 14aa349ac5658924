"""Deterministic synthetic multi-view scenes with exact ground truth.

Surfaces are analytic (plane, sphere, two boxes in front of a backdrop),
depths come from exact ray intersection and colours from a solid texture
evaluated at the 3D hit point, so every view agrees photometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fusion import PointCloud
from .geometry import DepthMap, Extrinsics, Intrinsics, View, pixel_grid, project, unproject
from .gpm import SparseCorrespondences

SURFACES = ("plane", "sphere", "two-box")
TEXTURES = ("noise", "checker", "gradient")


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------


class Plane:
    def __init__(self, point, normal):
        self.point = np.asarray(point, dtype=np.float64)
        n = np.asarray(normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)

    def intersect(self, o, d):
        """Smallest ray parameter ``t > 0`` of ``o + t·d``; inf on a miss."""
        denom = d @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((self.point - o) @ self.normal) / denom
        return np.where(np.isfinite(t) & (t > 1e-12), t, np.inf)

    def residual(self, X):
        return np.abs((X - self.point) @ self.normal)

    def contains(self, c) -> bool:
        # the side opposite the normal counts as inside
        return float((c - self.point) @ self.normal) <= 0.0


class Sphere:
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def intersect(self, o, d):
        oc = o - self.center
        a = (d * d).sum(axis=-1)
        b = 2.0 * (oc * d).sum(axis=-1)
        c = (oc * oc).sum(axis=-1) - self.radius**2
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - sq) / (2 * a)
        t1 = (-b + sq) / (2 * a)
        t = np.where(t0 > 1e-12, t0, np.where(t1 > 1e-12, t1, np.inf))
        return np.where(disc >= 0, t, np.inf)

    def residual(self, X):
        return np.abs(np.linalg.norm(X - self.center, axis=-1) - self.radius)

    def contains(self, c) -> bool:
        return float(np.linalg.norm(c - self.center)) <= self.radius


class Box:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)

    def intersect(self, o, d):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (self.lo - o) * inv
            t2 = (self.hi - o) * inv
        tmin = np.nanmax(np.minimum(t1, t2), axis=-1)
        tmax = np.nanmin(np.maximum(t1, t2), axis=-1)
        hit = (tmax >= tmin) & (tmax > 1e-12)
        t = np.where(tmin > 1e-12, tmin, tmax)
        return np.where(hit, t, np.inf)

    def residual(self, X):
        # distance to the box surface
        q = np.abs(X - 0.5 * (self.lo + self.hi)) - 0.5 * (self.hi - self.lo)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return np.abs(outside + inside)

    def contains(self, c) -> bool:
        return bool(np.all(c >= self.lo) and np.all(c <= self.hi))


class Union:
    def __init__(self, parts):
        self.parts = list(parts)

    def intersect(self, o, d):
        return np.min(np.stack([p.intersect(o, d) for p in self.parts]), axis=0)

    def residual(self, X):
        return np.min(np.stack([p.residual(X) for p in self.parts]), axis=0)

    def contains(self, c) -> bool:
        return any(p.contains(c) for p in self.parts)


def make_surface(kind: str):
    if kind == "plane":
        return Plane([0.0, 0.0, 0.0], [0.0, 0.0, -1.0])
    if kind == "sphere":
        return Sphere([0.0, 0.0, 0.0], 1.2)
    if kind == "two-box":
        return Union(
            [
                Plane([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]),
                Box([-1.1, -0.6, -0.2], [-0.2, 0.4, 0.6]),
                Box([0.3, -0.3, -0.6], [1.0, 0.5, 0.3]),
            ]
        )
    raise ValueError(f"unknown surface {kind!r}; choose from {SURFACES}")


# ---------------------------------------------------------------------------
# textures
# ---------------------------------------------------------------------------


@dataclass
class SolidTexture:
    """Colour as a function of world position."""

    kind: str = "noise"
    channels: int = 3
    seed: int = 0
    scale: float = 0.5  # characteristic wavelength in world units
    _params: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in TEXTURES:
            raise ValueError(f"unknown texture {self.kind!r}; choose from {TEXTURES}")
        rng = np.random.default_rng(self.seed)
        if self.kind == "noise":
            n_waves = 6
            for _ in range(self.channels):
                dirs = rng.normal(size=(n_waves, 3))
                dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
                wl = rng.uniform(0.7 * self.scale, 1.6 * self.scale, size=n_waves)
                freq = dirs * (2 * np.pi / wl)[:, None]
                phase = rng.uniform(0, 2 * np.pi, size=n_waves)
                amp = rng.uniform(0.5, 1.0, size=n_waves)
                amp *= 0.42 / amp.sum()
                self._params.append((freq, phase, amp))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
        out = np.empty((len(X), self.channels))
        if self.kind == "noise":
            for c, (freq, phase, amp) in enumerate(self._params):
                out[:, c] = 0.5 + (amp * np.sin(X @ freq.T + phase)).sum(axis=1)
        elif self.kind == "checker":
            k = np.floor(X / self.scale).astype(np.int64).sum(axis=1) % 2
            for c in range(self.channels):
                out[:, c] = np.where(k == 0, 0.2 + 0.1 * c, 0.8 - 0.1 * c)
        else:
            ramp = 0.5 + 0.15 * (X[:, 0] + 0.5 * X[:, 1]) / self.scale
            for c in range(self.channels):
                out[:, c] = ramp
        return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# cameras
# ---------------------------------------------------------------------------


def look_at(center, target) -> Extrinsics:
    c = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - c
    z /= np.linalg.norm(z)
    # image rows follow world +y
    hint = np.array([0.0, 1.0, 0.0])
    x = np.cross(hint, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Extrinsics(R, -R @ c)


def arc_cameras(n_views: int, radius: float, arc_degrees: float, elevation_degrees: float = 0.0):
    """Camera centres on a horizontal arc around the origin, looking at it."""
    if n_views < 2:
        raise ValueError("need at least two views")
    angles = np.deg2rad(np.linspace(-arc_degrees / 2, arc_degrees / 2, n_views))
    el = math.radians(elevation_degrees)
    out = []
    for a in angles:
        c = radius * np.array([math.sin(a) * math.cos(el), -math.sin(el), -math.cos(a) * math.cos(el)])
        out.append(look_at(c, np.zeros(3)))
    return out


def pinhole(width: int, height: int, fov_degrees: float) -> Intrinsics:
    f = 0.5 * width / math.tan(math.radians(fov_degrees) / 2)
    return Intrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0)


# ---------------------------------------------------------------------------
# scene
# ---------------------------------------------------------------------------


def cast_depth(surface, intr: Intrinsics, ext: Extrinsics, u, v) -> np.ndarray:
    """Exact camera-frame depth of the first surface hit at pixels ``(u, v)``; 0 on a miss."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    d_cam = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=1)
    d_world = d_cam @ ext.rotation  # R^T d for each row
    o = np.broadcast_to(ext.center, d_world.shape)
    # camera z of d_cam is 1, so the ray parameter is the depth
    t = surface.intersect(o, d_world)
    return np.where(np.isfinite(t), t, 0.0)


def point_visible(surface, ext: Extrinsics, X: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Whether the segment from the camera centre to each point is unobstructed."""
    c = ext.center
    d = X - c
    t = surface.intersect(np.broadcast_to(c, d.shape), d)
    return t >= 1.0 - tol


@dataclass
class SyntheticScene:
    views: list
    gt_depths: list
    gt_cloud: PointCloud
    sparse: SparseCorrespondences
    surface: object
    surface_kind: str
    # visibility[a][..., b]: pixel of view a is visible in view b
    visibility: list
    depth_range: tuple

    @property
    def pairs(self) -> dict:
        """Source views for each reference, nearest camera centre first."""
        centers = np.array([v.extrinsics.center for v in self.views])
        out = {}
        for i, v in enumerate(self.views):
            dist = np.linalg.norm(centers - centers[i], axis=1)
            order = [j for j in np.argsort(dist, kind="stable") if j != i]
            out[v.id] = [(self.views[j].id, float(1.0 / (1.0 + dist[j]))) for j in order]
        return out


def generate(
    surface: str = "plane",
    n_views: int = 5,
    texture: str = "noise",
    resolution: tuple[int, int] = (128, 128),
    radius: float = 4.0,
    arc_degrees: float = 30.0,
    elevation_degrees: float = 0.0,
    fov_degrees: float = 50.0,
    channels: int = 3,
    seed: int = 0,
    texture_scale: float | None = None,
    n_sparse: int = 200,
    cloud_stride: int = 2,
) -> SyntheticScene:
    """Render a synthetic scene.

    ``resolution`` is ``(height, width)``. Cameras sit on an arc of the
    given radius around the origin, all looking at it.
    """
    if n_views < 2:
        raise ValueError("n_views must be >= 2")
    H, W = resolution
    surf = make_surface(surface)
    exts = arc_cameras(n_views, radius, arc_degrees, elevation_degrees)
    for e in exts:
        if surf.contains(e.center):
            raise ValueError(f"camera at {e.center} lies inside the {surface} surface")
    intr = pinhole(W, H, fov_degrees)
    tex = SolidTexture(texture, channels, seed, texture_scale or 0.12 * radius)

    u, v = pixel_grid(H, W)
    views, depths, points = [], [], []
    for k, ext in enumerate(exts):
        z = cast_depth(surf, intr, ext, u, v)
        X = unproject(intr, ext, u, v, z)
        img = np.where((z > 0)[:, None], tex(X), 0.0).reshape(H, W, channels)
        views.append(View(img, intr, ext, k))
        depths.append(DepthMap(z.reshape(H, W)))
        points.append(X)

    visibility = []
    for a in range(n_views):
        za = depths[a].values.ravel()
        vis = np.zeros((H * W, n_views), dtype=bool)
        for b in range(n_views):
            if a == b:
                vis[:, b] = za > 0
                continue
            ub, vb, zb = project(intr, exts[b], points[a])
            inside = (zb > 0) & (ub >= 0) & (ub <= W - 1) & (vb >= 0) & (vb <= H - 1)
            vis[:, b] = (za > 0) & inside & point_visible(surf, exts[b], points[a])
        visibility.append(vis.reshape(H, W, n_views))

    # ground-truth cloud: strided pixels seen by at least one other view
    cloud_pts, cloud_cols = [], []
    mask = np.zeros((H, W), dtype=bool)
    mask[::cloud_stride, ::cloud_stride] = True
    for a in range(n_views):
        covis = visibility[a].sum(axis=2) >= 2
        sel = (mask & covis).ravel()
        cloud_pts.append(points[a][sel])
        cloud_cols.append(views[a].image.reshape(-1, channels)[sel])
    gt_cloud = PointCloud(np.concatenate(cloud_pts), np.concatenate(cloud_cols))

    # sparse correspondences from integer pixels of the first view
    rng = np.random.default_rng(seed + 7919)
    cand = np.flatnonzero(visibility[0].sum(axis=2).ravel() >= 2)
    pick = np.sort(rng.choice(cand, size=min(n_sparse, len(cand)), replace=False))
    sp_points, sp_obs = points[0][pick], []
    for idx, X in zip(pick, sp_points):
        obs = []
        for b in range(n_views):
            if visibility[0].reshape(-1, n_views)[idx, b]:
                ub, vb, _ = project(intr, exts[b], X)
                obs.append((b, float(ub[0]), float(vb[0])))
        sp_obs.append(obs)
    sparse = SparseCorrespondences(sp_points, sp_obs)

    valid = np.concatenate([d.values[d.values > 0] for d in depths])
    depth_range = (float(valid.min()), float(valid.max()))
    return SyntheticScene(views, depths, gt_cloud, sparse, surf, surface, visibility, depth_range)
