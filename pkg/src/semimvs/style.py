"""Feature statistics and the whitening-colouring transform.

Feature maps are ``C×M`` (channels by flattened positions). Covariances are
normalised by ``M``; the transforms are invariant to that choice as long as
it is applied consistently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import View

EIGEN_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class FeatureMap:
    data: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        F = np.array(self.data, dtype=np.float64)
        if F.ndim == 1:
            F = F[None, :]
        if F.ndim != 2 or F.shape[0] < 1:
            raise ValueError(f"feature data must be C×M, got {F.shape}")
        if F.shape[1] != self.height * self.width:
            raise ValueError(f"M={F.shape[1]} does not equal {self.height}×{self.width}")
        if not np.all(np.isfinite(F)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "data", F)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_image(cls, image: np.ndarray) -> "FeatureMap":
        img = np.asarray(image, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None]
        H, W, C = img.shape
        return cls(img.reshape(H * W, C).T, H, W)

    def to_image(self, channels: int | None = None) -> np.ndarray:
        """First ``channels`` channels back as an ``H×W×C`` array."""
        C = self.channels if channels is None else channels
        return self.data[:C].T.reshape(self.height, self.width, C)

    def with_data(self, data) -> "FeatureMap":
        return FeatureMap(data, self.height, self.width)


@dataclass(frozen=True, eq=False)
class StyleStats:
    mean: np.ndarray  # C
    eigvals: np.ndarray  # C, descending, floored
    eigvecs: np.ndarray  # C×C, columns are eigenvectors

    def covariance(self) -> np.ndarray:
        E = self.eigvecs
        return (E * self.eigvals) @ E.T

    def _power(self, p: float) -> np.ndarray:
        E = self.eigvecs
        return (E * self.eigvals**p) @ E.T


def gram(f: FeatureMap) -> np.ndarray:
    """``G_ij = Σ_k F_ik F_jk``."""
    F = f.data
    G = F @ F.T
    return 0.5 * (G + G.T)


def covariance(f: FeatureMap) -> np.ndarray:
    X = f.data - f.data.mean(axis=1, keepdims=True)
    C = X @ X.T / X.shape[1]
    return 0.5 * (C + C.T)


def compute_style_stats(f: FeatureMap, floor: float = EIGEN_FLOOR) -> StyleStats:
    mean = f.data.mean(axis=1)
    w, E = np.linalg.eigh(covariance(f))
    order = np.argsort(w)[::-1]
    return StyleStats(mean, np.maximum(w[order], floor), E[:, order])


def whiten(content: FeatureMap, stats_c: StyleStats) -> FeatureMap:
    """``E_c D_c^{-1/2} E_cᵀ (F_c - mean_c)``."""
    X = content.data - stats_c.mean[:, None]
    return content.with_data(stats_c._power(-0.5) @ X)


def color(white: FeatureMap, stats_s: StyleStats) -> FeatureMap:
    """``E_s D_s^{1/2} E_sᵀ W + mean_s``."""
    return white.with_data(stats_s._power(0.5) @ white.data + stats_s.mean[:, None])


def wct(content: FeatureMap, style: FeatureMap, blend: float = 1.0) -> FeatureMap:
    """Impose the style features' mean and covariance on the content features.

    ``blend`` mixes the result with the untouched content (1 = full transfer).
    """
    if content.channels != style.channels:
        raise ValueError(f"channel mismatch: content {content.channels}, style {style.channels}")
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must lie in [0, 1], got {blend}")
    if blend == 0.0:
        return content.with_data(content.data.copy())
    out = color(whiten(content, compute_style_stats(content)), compute_style_stats(style))
    if blend == 1.0:
        return out
    return content.with_data(blend * out.data + (1.0 - blend) * content.data)


def content_loss(a: FeatureMap, b: FeatureMap) -> float:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    return float(((a.data - b.data) ** 2).sum())


def style_loss(a: FeatureMap, b: FeatureMap) -> float:
    if a.channels != b.channels:
        raise ValueError(f"channel mismatch {a.channels} vs {b.channels}")
    return float(((gram(a) - gram(b)) ** 2).sum())


def extract_features(view, levels: int = 2) -> FeatureMap:
    """Deterministic stand-in for a learned encoder.

    Level 0 is the raw image. Each further level ``l`` appends the image
    blurred with sigma ``2**(l-1)`` and the gradient magnitude of that blur,
    so ``C·(2·levels - 1)`` channels in total. Blurs use periodic boundaries
    and therefore keep every channel's mean.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    img = view.image if isinstance(view, View) else np.asarray(view, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    H, W, C = img.shape
    chans = [img[:, :, c] for c in range(C)]
    for lvl in range(1, levels):
        sigma = 2.0 ** (lvl - 1)
        blurred = [gaussian_filter(img[:, :, c], sigma, mode="wrap") for c in range(C)]
        grads = []
        for b in blurred:
            gy, gx = np.gradient(b)
            grads.append(np.hypot(gx, gy))
        chans += blurred + grads
    return FeatureMap(np.stack([c.ravel() for c in chans]), H, W)


def decode_features(f: FeatureMap, channels: int) -> np.ndarray:
    """Inverse of :func:`extract_features`: the level-0 channels as an image in [0, 1]."""
    return np.clip(f.to_image(channels), 0.0, 1.0)


def style_transfer_image(content, style, blend: float = 1.0, levels: int = 2) -> np.ndarray:
    """Encode both images, apply :func:`wct`, decode back to pixels."""
    fc = extract_features(content, levels)
    fs = extract_features(style, levels)
    C = (content.image if isinstance(content, View) else np.atleast_3d(content)).shape[2]
    return decode_features(wct(fc, fs, blend), C)
