"""Training-loss terms of the semi-supervised framework and their combination."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import NoSupervisionError
from .geometry import DepthMap, View
from .sweep import ProbabilityVolume

KL_FLOOR = 1e-8
LAMBDA1 = 0.1
LAMBDA2 = 1.0


def supervised_loss(pred: DepthMap, gt: DepthMap) -> float:
    """Mean squared depth error over pixels with ``gt > 0``."""
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    mask = gt.values > 0
    n = int(mask.sum())
    if n == 0:
        raise NoSupervisionError("ground-truth depth has no valid pixels")
    diff = pred.values[mask] - gt.values[mask]
    return float(np.sum(diff * diff) / n)


def style_consistency_loss(pred_on_generated: DepthMap, gt_of_labeled: DepthMap) -> float:
    """Depth error of the prediction on style-transferred images against the
    labeled ground truth (same masked L2 form as :func:`supervised_loss`)."""
    return supervised_loss(pred_on_generated, gt_of_labeled)


def _kl_per_pixel(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # 0·log(0/q) = 0; q floored so empty slices of q stay finite
    q = np.maximum(q, KL_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    # true per-pixel KL is >= 0; drop negative rounding residue
    return np.maximum(terms.sum(axis=-1), 0.0)


def kl_consistency_loss(pv: ProbabilityVolume, pv_aug: ProbabilityVolume, symmetric: bool = False) -> float:
    """Mean per-pixel ``KL(pv || pv_aug)`` in nats.

    ``symmetric=True`` averages both directions instead.
    """
    p = pv.probs if isinstance(pv, ProbabilityVolume) else np.asarray(pv, dtype=np.float64)
    q = pv_aug.probs if isinstance(pv_aug, ProbabilityVolume) else np.asarray(pv_aug, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"volume shapes differ: {p.shape} vs {q.shape}")
    kl = _kl_per_pixel(p, q)
    if symmetric:
        kl = 0.5 * (kl + _kl_per_pixel(q, p))
    # pairwise summation keeps the reduction order-insensitive
    return float(np.sum(kl.ravel()) / kl.size)


@dataclass(frozen=True)
class AugmentationSpec:
    """Ranges of the photometric perturbation; each draw is uniform in its range.

    Brightness is an additive offset, contrast a scale about 0.5, gamma an
    exponent and blur a Gaussian sigma in pixels.
    """

    brightness: tuple[float, float] = (-0.1, 0.1)
    contrast: tuple[float, float] = (0.8, 1.2)
    gamma: tuple[float, float] = (0.8, 1.25)
    blur_sigma: tuple[float, float] = (0.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("brightness", "contrast", "gamma", "blur_sigma"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} range is empty: ({lo}, {hi})")
        if self.gamma[0] <= 0 or self.contrast[0] < 0 or self.blur_sigma[0] < 0:
            raise ValueError("gamma must be positive; contrast and blur non-negative")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentationSpec":
        return cls((0.0, 0.0), (1.0, 1.0), (1.0, 1.0), (0.0, 0.0), seed)


def augment(view: View, spec: AugmentationSpec) -> View:
    """Photometric-only perturbation; cameras and image size are untouched."""
    rng = np.random.default_rng(spec.seed)
    gamma = rng.uniform(*spec.gamma)
    contrast = rng.uniform(*spec.contrast)
    brightness = rng.uniform(*spec.brightness)
    sigma = rng.uniform(*spec.blur_sigma)
    img = view.image.copy()
    if gamma != 1.0:
        img = img**gamma
    if contrast != 1.0:
        img = (img - 0.5) * contrast + 0.5
    if brightness != 0.0:
        img = img + brightness
    if sigma > 0:
        img = gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest")
    return view.with_image(np.clip(img, 0.0, 1.0))


@dataclass(frozen=True)
class LossReport:
    sup: float
    photo: float
    consis: float
    style: float
    overall: float
    lambda1: float = LAMBDA1
    lambda2: float = LAMBDA2

    FIELDS = ("sup", "photo", "consis", "style", "overall", "lambda1", "lambda2")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def csv_header(self) -> str:
        return ",".join(self.FIELDS)

    def csv_row(self) -> str:
        return ",".join(repr(float(getattr(self, k))) for k in self.FIELDS)

    def key_values(self) -> str:
        return "\n".join(f"{k}={float(getattr(self, k))!r}" for k in self.FIELDS)


def overall_loss(sup, photo, consis, style, lambda1: float = LAMBDA1, lambda2: float = LAMBDA2) -> LossReport:
    """``sup + photo + lambda1·consis + lambda2·style``."""
    parts = {"sup": float(sup), "photo": float(photo), "consis": float(consis), "style": float(style)}
    for name, val in parts.items():
        if not (val >= 0 and math.isfinite(val)):
            raise ValueError(f"loss component {name} must be finite and >= 0, got {val}")
    total = parts["sup"] + parts["photo"] + lambda1 * parts["consis"] + lambda2 * parts["style"]
    return LossReport(overall=total, lambda1=lambda1, lambda2=lambda2, **parts)
