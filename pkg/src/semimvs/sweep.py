"""Classical plane-sweep stereo: cost volume, probability volume, soft-argmin."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import DepthMap, View, pixel_grid, reproject
from .kernels import bilinear_sample, box_sum

NCC_VARIANCE_FLOOR = 1e-6


class CostKind(str, enum.Enum):
    SSD = "ssd"
    NCC = "ncc"


@dataclass(frozen=True, eq=False)
class DepthHypotheses:
    values: np.ndarray

    def __post_init__(self):
        h = np.array(self.values, dtype=np.float64).ravel()
        if len(h) < 2:
            raise ValueError("need at least two depth hypotheses")
        if not np.all(np.isfinite(h)) or h[0] <= 0 or np.any(np.diff(h) <= 0):
            raise ValueError("hypotheses must be finite, positive and strictly increasing")
        h.setflags(write=False)
        object.__setattr__(self, "values", h)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def linspace(cls, dmin: float, dmax: float, k: int) -> "DepthHypotheses":
        return cls(np.linspace(dmin, dmax, k))

    @property
    def spacing(self) -> float:
        """Mean gap between consecutive hypotheses."""
        return float((self.values[-1] - self.values[0]) / (len(self.values) - 1))


@dataclass(frozen=True, eq=False)
class CostVolume:
    costs: np.ndarray  # H×W×K

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=np.float64)
        if c.ndim != 3:
            raise ValueError("cost volume must be H×W×K")
        if not np.all(np.isfinite(c)):
            raise ValueError("costs must be finite")
        object.__setattr__(self, "costs", c)


@dataclass(frozen=True, eq=False)
class ProbabilityVolume:
    probs: np.ndarray  # H×W×K

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 3:
            raise ValueError("probability volume must be H×W×K")
        if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if np.abs(p.sum(axis=2) - 1.0).max() > 1e-5:
            raise ValueError("probabilities must sum to 1 per pixel")
        object.__setattr__(self, "probs", p)

    @property
    def shape(self):
        return self.probs.shape

    def confidence(self) -> np.ndarray:
        """Per-pixel maximum probability."""
        return self.probs.max(axis=2)


def invalid_cost(cost_kind: CostKind | str, window: int, channels: int) -> float:
    """Largest value the metric can take, used for invalid warps."""
    kind = CostKind(cost_kind)
    if kind is CostKind.SSD:
        return float(window * window * channels)
    return 2.0


def _slice_cost(ref_img, warped, valid, kind, r):
    # ref_img, warped: H×W×C; valid: H×W
    H, W, C = ref_img.shape
    n = (2 * r + 1) ** 2
    # window fully inside the image and fully validly warped
    bad = box_sum((~valid).astype(np.float64), r) + (n - box_sum(np.ones((H, W)), r))
    ok = bad < 0.5
    if kind is CostKind.SSD:
        sq = ((ref_img - warped) ** 2).sum(axis=2) * valid
        cost = box_sum(sq, r)
    else:
        a = ref_img * valid[:, :, None]
        b = warped * valid[:, :, None]
        m = float(n * C)
        sa = sum(box_sum(a[:, :, c], r) for c in range(C))
        sb = sum(box_sum(b[:, :, c], r) for c in range(C))
        saa = sum(box_sum(a[:, :, c] ** 2, r) for c in range(C))
        sbb = sum(box_sum(b[:, :, c] ** 2, r) for c in range(C))
        sab = sum(box_sum(a[:, :, c] * b[:, :, c], r) for c in range(C))
        va = saa / m - (sa / m) ** 2
        vb = sbb / m - (sb / m) ** 2
        cov = sab / m - (sa / m) * (sb / m)
        ok &= (va > NCC_VARIANCE_FLOOR) & (vb > NCC_VARIANCE_FLOOR)
        with np.errstate(invalid="ignore", divide="ignore"):
            ncc = np.clip(cov / np.sqrt(va * vb), -1.0, 1.0)
        cost = 1.0 - ncc
    return np.where(ok, cost, invalid_cost(kind, 2 * r + 1, C))


def build_cost_volume(
    ref: View,
    sources,
    hyps: DepthHypotheses,
    cost_kind: CostKind | str = CostKind.SSD,
    window: int = 5,
) -> CostVolume:
    """Plane-sweep matching costs, averaged over source views.

    For each hypothesis the sources are warped onto the reference as if every
    pixel had that depth; the cost is the windowed SSD (or ``1 - NCC``) between
    reference and warped patches. Windows touching an invalid warp or the
    image border get :func:`invalid_cost`.
    """
    sources = list(sources)
    if not sources:
        raise ValueError("need at least one source view")
    if len(hyps) == 0:
        raise ValueError("empty hypothesis set")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    kind = CostKind(cost_kind)
    r = window // 2
    H, W = ref.shape
    u, v = pixel_grid(H, W)
    costs = np.zeros((H, W, len(hyps)))
    for src in sources:
        if src.channels != ref.channels:
            raise ValueError("source and reference channel counts differ")
        for k, d in enumerate(hyps.values):
            us, vs, zs = reproject(u, v, np.full(H * W, d), ref, src)
            front = np.isfinite(zs) & (zs > 0)
            vals, valid = bilinear_sample(
                src.image, np.where(front, us, np.nan), np.where(front, vs, np.nan)
            )
            warped = vals.reshape(H, W, src.channels)
            costs[:, :, k] += _slice_cost(ref.image, warped, valid.reshape(H, W), kind, r)
    return CostVolume(costs / len(sources))


def cost_to_probability(cv: CostVolume, temperature: float = 1.0) -> ProbabilityVolume:
    """Per-pixel softmax of ``-cost / temperature``."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    logits = -cv.costs / temperature
    logits = logits - logits.max(axis=2, keepdims=True)
    e = np.exp(logits)
    return ProbabilityVolume(e / e.sum(axis=2, keepdims=True))


def soft_argmin(pv: ProbabilityVolume, hyps: DepthHypotheses) -> DepthMap:
    """Expected depth under the probability volume."""
    if pv.shape[2] != len(hyps):
        raise ValueError(f"volume has {pv.shape[2]} slices but {len(hyps)} hypotheses")
    d = pv.probs @ hyps.values
    # a convex combination; clip the rounding residue at the ends
    return DepthMap(np.clip(d, hyps.values[0], hyps.values[-1]))


def plane_sweep_depth(
    ref: View,
    sources,
    hyps: DepthHypotheses,
    cost_kind: CostKind | str = CostKind.SSD,
    window: int = 5,
    temperature: float = 1.0,
) -> tuple[DepthMap, ProbabilityVolume]:
    cv = build_cost_volume(ref, sources, hyps, cost_kind, window)
    pv = cost_to_probability(cv, temperature)
    return soft_argmin(pv, hyps), pv
