"""Geometry-preserving filtering by edge-aware spatial propagation.

A distorted image is swept in four directions with a three-way linear
recurrence whose affinities come from a clean guide image, then the four
results are averaged. Weights to a neighbour across a strong guide edge are
close to zero, so propagation stops at edges and smooths elsewhere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import View, project, project_pixel
from .errors import BehindCameraError
from .kernels import bilinear_sample, propagate_lr

log = logging.getLogger(__name__)

DIRECTIONS = ("left_to_right", "right_to_left", "top_to_bottom", "bottom_to_top")
DEFAULT_KAPPA = 0.9
# large enough that self-guided filtering is near-identity on smooth texture
DEFAULT_STRENGTH = 1000.0


# Each sweep direction is reduced to left-to-right on a transformed array.
def _to_lr(a: np.ndarray, d: int) -> np.ndarray:
    if d == 0:
        return a
    if d == 1:
        return a[:, ::-1]
    if d == 2:
        return np.swapaxes(a, 0, 1)
    return np.swapaxes(a, 0, 1)[:, ::-1]


def _from_lr(a: np.ndarray, d: int) -> np.ndarray:
    if d == 0:
        return a
    if d == 1:
        return a[:, ::-1]
    if d == 2:
        return np.swapaxes(a, 0, 1)
    return np.swapaxes(a[:, ::-1], 0, 1)


@dataclass(frozen=True, eq=False)
class AffinityField:
    """Propagation weights, ``H×W×4×3``.

    ``weights[i, j, d, k]`` is the weight from pixel ``(i, j)`` to its k-th
    neighbour on the previous line of sweep ``d`` (see :data:`DIRECTIONS`).
    Neighbour order is "previous line, perpendicular offset -1, 0, +1" in the
    frame where the sweep runs left to right.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 4 or w.shape[2:] != (4, 3):
            raise ValueError(f"affinity must be H×W×4×3, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("affinity weights must be finite")
        if np.abs(w).sum(axis=3).max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("affinity violates the stability condition sum|w| <= 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape[:2]

    def stability_sums(self) -> np.ndarray:
        return np.abs(self.weights).sum(axis=3)

    @classmethod
    def zeros(cls, height: int, width: int) -> "AffinityField":
        return cls(np.zeros((height, width, 4, 3)))


def _lr_weights(g: np.ndarray, strength: float, kappa: float) -> np.ndarray:
    H, W, _ = g.shape
    w = np.zeros((H, W, 3))
    prev = g[:, :-1]
    cur = g[:, 1:]
    for k, off in enumerate((-1, 0, 1)):
        nb = np.full_like(prev, np.nan)
        if off == -1:
            nb[1:] = prev[:-1]
        elif off == 0:
            nb = prev
        else:
            nb[:-1] = prev[1:]
        dist2 = ((cur - nb) ** 2).sum(axis=2)
        wk = (kappa / 3.0) * np.exp(-strength * dist2)
        w[:, 1:, k] = np.where(np.isnan(dist2), 0.0, wk)
    return w


def guidance_affinity(guide, strength: float, kappa: float = DEFAULT_KAPPA) -> AffinityField:
    """Edge-aware affinities from a guide image.

    The weight to a previous-line neighbour ``q`` of ``p`` is
    ``kappa/3 · exp(-strength · ||g(p) - g(q)||²)``. The stability sum is
    therefore exactly ``kappa`` on flat guide regions and smaller across
    edges. ``strength = 0`` gives uniform weights (plain smoothing).
    """
    g = guide.image if isinstance(guide, View) else np.asarray(guide, dtype=np.float64)
    if g.ndim == 2:
        g = g[:, :, None]
    if not (strength >= 0 and math.isfinite(strength)):
        raise ValueError(f"strength must be finite and >= 0, got {strength}")
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    H, W = g.shape[:2]
    out = np.zeros((H, W, 4, 3))
    for d in range(4):
        out[:, :, d, :] = _from_lr(_lr_weights(_to_lr(g, d), strength, kappa), d)
    return AffinityField(out)


def propagate(distorted, affinity: AffinityField) -> np.ndarray:
    """Run the four directional recurrences and average them.

    Each direction computes ``h(p) = (1 - Σw)·x(p) + Σ w_q·h(q)``.
    """
    x = np.asarray(distorted, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, :, None]
    if x.shape[:2] != affinity.shape:
        raise ValueError(f"image {x.shape[:2]} and affinity {affinity.shape} differ in size")
    acc = np.zeros_like(x)
    for d in range(4):
        h = propagate_lr(_to_lr(x, d), _to_lr(affinity.weights[:, :, d, :], d))
        acc += _from_lr(h, d)
    out = acc / 4.0
    # convex combination: clip only the last-ulp excursions
    lo = x.min(axis=(0, 1))
    hi = x.max(axis=(0, 1))
    out = np.clip(out, lo, hi)
    return out[:, :, 0] if squeeze else out


def gpm_filter(transferred, content_guide, strength: float = DEFAULT_STRENGTH, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Filter a style-transferred image with affinities from its content image."""
    return propagate(transferred, guidance_affinity(content_guide, strength, kappa))


# ---------------------------------------------------------------------------
# sparse correspondences and the propagation training loss
# ---------------------------------------------------------------------------


@dataclass
class SparseCorrespondences:
    """3D points with the pixels at which each view observes them.

    ``observations[j]`` is a list of ``(view_id, col, row)``.
    """

    points: np.ndarray
    observations: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if len(self.observations) != len(self.points):
            raise ValueError("one observation list per point is required")
        self.observations = [[(int(v), float(u), float(w)) for v, u, w in obs] for obs in self.observations]

    def __len__(self) -> int:
        return len(self.points)

    def max_reprojection_error(self, views) -> float:
        by_id = {v.id: v for v in views}
        worst = 0.0
        for X, obs in zip(self.points, self.observations):
            for vid, u, w in obs:
                view = by_id[vid]
                pu, pv, _ = project(view.intrinsics, view.extrinsics, X)
                worst = max(worst, math.hypot(pu[0] - u, pv[0] - w))
        return worst


@dataclass
class SpnLoss:
    total: float
    image_term: float
    sparse_term: float
    per_view: np.ndarray = field(repr=False)

    def __float__(self) -> float:
        return self.total


def spn_loss(originals, filtered, sparse: SparseCorrespondences | None, ref_index: int = 0) -> SpnLoss:
    """Propagation training loss: dense image term plus sparse multi-view term.

    For each view ``v``: mean over pixels of the squared colour error between
    the original and filtered image, plus the mean over sparse points of the
    squared error between the original reference image at the point's pixel
    and the filtered view ``v`` warped back to that pixel. Averaged over views.
    """
    originals = list(originals)
    filtered = [np.asarray(f, dtype=np.float64) for f in filtered]
    if len(originals) != len(filtered) or not originals:
        raise ValueError("need one filtered image per original view")
    filtered = [f[:, :, None] if f.ndim == 2 else f for f in filtered]
    for o, f in zip(originals, filtered):
        if o.image.shape != f.shape:
            raise ValueError(f"filtered image {f.shape} does not match view {o.image.shape}")
    ref = originals[ref_index]
    use_sparse = sparse is not None and len(sparse) > 0
    if not use_sparse:
        log.warning("no sparse correspondences; the sparse term is omitted")

    # reference pixel and depth of each sparse point
    if use_sparse:
        pu, pv, pz = project(ref.intrinsics, ref.extrinsics, sparse.points)
        ref_vals, ref_ok = bilinear_sample(ref.image, pu, pv)
        ref_ok &= pz > 0

    N = len(originals)
    img_terms = np.zeros(N)
    sp_terms = np.zeros(N)
    for k, (view, img) in enumerate(zip(originals, filtered)):
        img_terms[k] = ((view.image - img) ** 2).sum(axis=2).mean()
        if not use_sparse:
            continue
        errs = []
        for j, obs in enumerate(sparse.observations):
            if not ref_ok[j] or not any(vid == view.id for vid, _, _ in obs):
                continue
            try:
                (u, w), _ = project_pixel((pu[j], pv[j]), pz[j], ref, view)
            except (ValueError, BehindCameraError):
                continue
            val, ok = bilinear_sample(img, [u], [w])
            if ok[0]:
                errs.append(((ref_vals[j] - val[0]) ** 2).sum())
        if errs:
            sp_terms[k] = math.fsum(errs) / len(errs)
    image_term = math.fsum(img_terms) / N
    sparse_term = math.fsum(sp_terms) / N
    return SpnLoss(image_term + sparse_term, image_term, sparse_term, img_terms + sp_terms)
