"""Maximum mean discrepancy between scenes and the scene confusion matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import View


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """One embedding per view of a scene, ``n×d``."""

    vectors: np.ndarray
    scene_id: str = ""

    def __post_init__(self):
        X = np.array(self.vectors, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError(f"need an n×d array with n >= 2, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("embeddings must be finite")
        object.__setattr__(self, "vectors", X)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _vecs(x) -> np.ndarray:
    return x.vectors if isinstance(x, EmbeddingSet) else np.asarray(x, dtype=np.float64)


def median_bandwidth(*sets) -> float:
    """Median pairwise Euclidean distance over the pooled samples (1.0 if all coincide)."""
    Z = np.concatenate([_vecs(s) for s in sets])
    d = cdist(Z, Z)[np.triu_indices(len(Z), k=1)]
    med = float(np.median(d)) if len(d) else 0.0
    return med if med > 0 else 1.0


def gaussian_kernel(a, b, sigma: float) -> np.ndarray:
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * sigma * sigma))


def mmd_squared(x, y, bandwidth: float | str = "median") -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel.

    ``bandwidth="median"`` uses the median pairwise distance of the pooled
    samples.
    """
    X, Y = _vecs(x), _vecs(y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"embedding dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if isinstance(bandwidth, str):
        if bandwidth != "median":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        sigma = median_bandwidth(X, Y)
    else:
        sigma = float(bandwidth)
        if not sigma > 0:
            raise ValueError("bandwidth must be positive")
    # correctly rounded means, so swapping x and y gives the identical value
    kxx = math.fsum(gaussian_kernel(X, X, sigma).ravel()) / (len(X) * len(X))
    kyy = math.fsum(gaussian_kernel(Y, Y, sigma).ravel()) / (len(Y) * len(Y))
    kxy = math.fsum(gaussian_kernel(X, Y, sigma).ravel()) / (len(X) * len(Y))
    return max(math.fsum((kxx, kyy, -2.0 * kxy)), 0.0)


def confusion_matrix(sets, bandwidth: float | str = "median") -> np.ndarray:
    """Pairwise squared MMD between scenes with one shared bandwidth."""
    sets = list(sets)
    if len(sets) < 2:
        raise ValueError("need at least two embedding sets")
    dims = {_vecs(s).shape[1] for s in sets}
    if len(dims) != 1:
        raise ValueError(f"embedding dimensions differ across sets: {sorted(dims)}")
    sigma = median_bandwidth(*sets) if bandwidth == "median" else float(bandwidth)
    S = len(sets)
    M = np.zeros((S, S))
    for i in range(S):
        for j in range(i + 1, S):
            M[i, j] = M[j, i] = mmd_squared(sets[i], sets[j], sigma)
    return M


def permutation_test(x, y, n_permutations: int = 200, bandwidth: float | str = "median", seed: int = 0):
    """Observed MMD², the permutation null samples and the p-value.

    The bandwidth is fixed from the pooled data before permuting.
    """
    X, Y = _vecs(x), _vecs(y)
    sigma = median_bandwidth(X, Y) if bandwidth == "median" else float(bandwidth)
    Z = np.concatenate([X, Y])
    K = gaussian_kernel(Z, Z, sigma)
    n = len(X)

    def stat(idx):
        a, b = idx[:n], idx[n:]
        return K[np.ix_(a, a)].mean() + K[np.ix_(b, b)].mean() - 2.0 * K[np.ix_(a, b)].mean()

    observed = stat(np.arange(len(Z)))
    rng = np.random.default_rng(seed)
    null = np.array([stat(rng.permutation(len(Z))) for _ in range(n_permutations)])
    p = (1 + np.count_nonzero(null >= observed)) / (n_permutations + 1)
    return float(observed), null, float(p)


def embed_view(view, grid: int = 8, orientation_bins: int = 8) -> np.ndarray:
    """Hand-crafted unit-norm descriptor of an image.

    Concatenates per-channel mean and variance, a ``grid×grid`` block-averaged
    grey image and a magnitude-weighted gradient orientation histogram.
    """
    img = view.image if isinstance(view, View) else np.asarray(view, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    H, W, C = img.shape
    stats = np.concatenate([img.mean(axis=(0, 1)), img.var(axis=(0, 1))])
    gray = img.mean(axis=2)
    rows = np.array_split(np.arange(H), grid)
    cols = np.array_split(np.arange(W), grid)
    thumb = np.array([[gray[np.ix_(r, c)].mean() if len(r) and len(c) else 0.0 for c in cols] for r in rows]).ravel()
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    hist, _ = np.histogram(ang, bins=orientation_bins, range=(0.0, np.pi), weights=mag)
    hist = hist / (hist.sum() + 1e-12)
    v = np.concatenate([stats, thumb, hist])
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v
