import numpy as np
import pytest

from semimvs import _accel, kernels, using_backend
from semimvs.evaluation import SpatialIndex, brute_force_distances

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(fn, *args):
    with using_backend("numba"):
        a = fn(*args)
    with using_backend("numpy"):
        b = fn(*args)
    return a, b


def test_bilinear_sample(rng):
    img = rng.random((17, 23, 3))
    u = rng.uniform(-2, 25, 5000)
    v = rng.uniform(-2, 19, 5000)
    u[:100] = np.round(u[:100]) + 1e-11
    (va, ma), (vb, mb) = both(kernels.bilinear_sample, img, u, v)
    assert np.array_equal(ma, mb)
    np.testing.assert_allclose(va, vb, rtol=0, atol=1e-14)


def test_box_sum(rng):
    a = rng.random((31, 29))
    for r in (1, 2, 4):
        x, y = both(kernels.box_sum, a, r)
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)


def test_propagate_lr(rng):
    x = rng.random((20, 30, 2))
    w = rng.random((20, 30, 3)) * 0.3
    a, b = both(kernels.propagate_lr, x, w)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_grid_query_bit_exact(rng):
    pts = rng.normal(size=(3000, 3))
    q = rng.normal(size=(2000, 3)) * 1.5
    idx = SpatialIndex(pts)
    a, b = both(idx.query, q)
    assert np.array_equal(a, b)
    assert np.array_equal(a, brute_force_distances(q, pts))


def test_backend_switch():
    assert _accel.backend() in ("numba", "numpy")
    with using_backend("numpy"):
        assert _accel.backend() == "numpy" and not _accel.use_numba()
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_grid_query_far_queries_bit_exact(rng):
    # queries far outside the grid exhaust the ring search and take the fallback path
    pts = rng.normal(size=(800, 3))
    q = np.vstack([rng.normal(size=(50, 3)) * 30 + 100, rng.normal(size=(50, 3))])
    idx = SpatialIndex(pts)
    a, b = both(idx.query, q)
    assert np.array_equal(a, b)
    assert np.array_equal(b, brute_force_distances(q, pts))
