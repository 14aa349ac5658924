"""Pinhole cameras, cross-view warping and the photometric consistency loss.

Pixel coordinates are ``(column, row)`` with the origin at the centre of the
top-left pixel. Extrinsics map world to camera coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError
from .kernels import bilinear_sample

ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_matrix(cls, K) -> "Intrinsics":
        K = np.asarray(K, dtype=np.float64)
        return cls(float(K[0, 0]), float(K[1, 1]), float(K[0, 2]), float(K[1, 2]))


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """World-to-camera rigid transform ``x_cam = R @ x_world + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("extrinsics must be finite")
        if np.abs(R @ R.T - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation must be orthonormal with determinant +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Extrinsics":
        T = np.asarray(T, dtype=np.float64)
        if T.shape != (4, 4):
            raise ValueError(f"expected a 4×4 matrix, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Extrinsics":
        Rt = self.rotation.T
        return Extrinsics(Rt, -Rt @ self.translation)

    def compose(self, other: "Extrinsics") -> "Extrinsics":
        """``self ∘ other``: apply ``other`` first."""
        return Extrinsics(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation

    def __eq__(self, other):
        if not isinstance(other, Extrinsics):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class View:
    """A calibrated image. ``image`` is stored ``H×W×C`` float64 in [0, 1]."""

    image: np.ndarray
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    id: int = 0

    def __post_init__(self):
        img = np.array(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None]
        if img.ndim != 3 or img.shape[2] not in (1, 3):
            raise ValueError(f"image must be H×W×C with C in {{1, 3}}, got {img.shape}")
        if img.shape[0] < 2 or img.shape[1] < 2:
            raise ValueError(f"image must be at least 2×2, got {img.shape[:2]}")
        if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
            raise ValueError("pixel values must be finite and within [0, 1]")
        img.setflags(write=False)
        object.__setattr__(self, "image", img)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def channels(self) -> int:
        return self.image.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]

    def with_image(self, image) -> "View":
        return View(image, self.intrinsics, self.extrinsics, self.id)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """``H×W`` depth in world units; 0 marks an invalid pixel."""

    values: np.ndarray

    def __post_init__(self):
        d = np.array(self.values, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise ValueError("depth values must be finite and >= 0")
        d.setflags(write=False)
        object.__setattr__(self, "values", d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0

    @classmethod
    def constant(cls, shape, depth: float) -> "DepthMap":
        return cls(np.full(shape, float(depth)))


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Column and row coordinates of every pixel, each ``H×W``."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return u, v


def unproject(intr: Intrinsics, ext: Extrinsics, u, v, depth) -> np.ndarray:
    """Lift pixels at the given camera-frame depth to world points ``N×3``."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    z = np.asarray(depth, dtype=np.float64).ravel()
    cam = np.stack([(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z], axis=1)
    return (cam - ext.translation) @ ext.rotation


def project(intr: Intrinsics, ext: Extrinsics, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project world points; returns ``(u, v, z)`` with ``z`` the camera depth."""
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = P @ ext.rotation.T + ext.translation
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * (cam[:, 0] / z) + intr.cx
        v = intr.fy * (cam[:, 1] / z) + intr.cy
    return u, v, z


def reproject(u, v, depth, src: View, dst: View):
    """Vectorised warp of ``src`` pixels at ``depth`` into ``dst``.

    No bounds or sign checks; returns ``(u_dst, v_dst, z_dst)``.
    """
    X = unproject(src.intrinsics, src.extrinsics, u, v, depth)
    return project(dst.intrinsics, dst.extrinsics, X)


def project_pixel(p, depth: float, src: View, dst: View) -> tuple[tuple[float, float], float]:
    """Map pixel ``p = (col, row)`` of ``src`` at ``depth`` into ``dst``.

    Returns the pixel in ``dst`` and the point's depth in ``dst``'s frame.

    Raises:
        ValueError: ``depth <= 0`` or ``p`` outside the source image.
        BehindCameraError: the lifted point is not in front of ``dst``.
    """
    col, row = float(p[0]), float(p[1])
    if not (depth > 0 and math.isfinite(depth)):
        raise ValueError(f"depth must be positive and finite, got {depth}")
    if not (0.0 <= col <= src.width - 1 and 0.0 <= row <= src.height - 1):
        raise ValueError(f"pixel {p} is outside the {src.width}×{src.height} source image")
    u, v, z = reproject([col], [row], [depth], src, dst)
    u, v, z = float(u[0]), float(v[0]), float(z[0])
    if not (math.isfinite(u) and math.isfinite(v) and math.isfinite(z)) or z <= 0:
        raise BehindCameraError(f"pixel {p} at depth {depth} lands behind the destination camera")
    return (u, v), z


def warp_image(src: View, ref: View, depth: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct ``ref`` from ``src`` using ``ref``'s depth map.

    Returns ``(image H×W×C, mask H×W)``. Pixels with invalid depth, a target
    behind ``src`` or outside its interpolatable interior are masked and zero.
    """
    if depth.shape != ref.shape:
        raise ValueError(f"depth shape {depth.shape} does not match reference image {ref.shape}")
    H, W = ref.shape
    u, v = pixel_grid(H, W)
    d = depth.values.ravel()
    us, vs, zs = reproject(u, v, d, ref, src)
    ok = (d > 0) & np.isfinite(zs) & (zs > 0)
    us = np.where(ok, us, np.nan)
    vs = np.where(ok, vs, np.nan)
    vals, valid = bilinear_sample(src.image, us, vs)
    valid &= ok
    vals[~valid] = 0.0
    return vals.reshape(H, W, src.channels), valid.reshape(H, W)


@dataclass
class PhotometricLoss:
    """Photometric loss with its per-source breakdown.

    ``per_view[k]`` is the mean squared colour error of source ``k`` over its
    valid pixels (0 when it has none); ``total`` is their sum.
    """

    total: float
    per_view: np.ndarray
    valid_pixels: np.ndarray = field(repr=False)

    def __float__(self) -> float:
        return self.total

    @property
    def empty_views(self) -> list[int]:
        return [k for k, n in enumerate(self.valid_pixels) if n == 0]


def photometric_loss(ref: View, sources, depth: DepthMap) -> PhotometricLoss:
    """Sum over sources of the masked mean squared reconstruction error."""
    sources = list(sources)
    if not sources:
        raise ValueError("photometric_loss needs at least one source view")
    per_view = np.zeros(len(sources))
    counts = np.zeros(len(sources), dtype=np.int64)
    for k, src in enumerate(sources):
        if src.channels != ref.channels:
            raise ValueError("source and reference channel counts differ")
        recon, mask = warp_image(src, ref, depth)
        n = int(mask.sum())
        counts[k] = n
        if n:
            err = ((recon - ref.image) ** 2).sum(axis=2)
            per_view[k] = err[mask].sum() / n
    # fsum is exactly rounded, so the total does not depend on source order
    return PhotometricLoss(math.fsum(per_view), per_view, counts)
