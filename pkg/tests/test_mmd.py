import numpy as np
import pytest

from semimvs import mmd
from semimvs.mmd import EmbeddingSet

from conftest import random_view


def cluster(rng, center, n=30, spread=0.05):
    return EmbeddingSet(np.asarray(center) + spread * rng.normal(size=(n, len(center))))


class TestMMD:
    def test_self_distance(self, rng):
        x = EmbeddingSet(rng.normal(size=(20, 5)))
        assert mmd.mmd_squared(x, x) < 1e-12

    def test_far_clusters(self, rng):
        x = cluster(rng, [0.0, 0.0])
        y = cluster(rng, [100.0, 0.0])
        assert mmd.mmd_squared(x, y, bandwidth=1.0) > 1.9

    def test_same_distribution_mostly_accepted(self, rng):
        accepted = 0
        for t in range(20):
            x = EmbeddingSet(rng.normal(size=(15, 3)))
            y = EmbeddingSet(rng.normal(size=(15, 3)))
            obs, null, _ = mmd.permutation_test(x, y, n_permutations=100, seed=t)
            accepted += obs <= np.percentile(null, 95)
        assert accepted >= 18

    def test_permutation_test_detects_shift(self, rng):
        x = EmbeddingSet(rng.normal(size=(20, 3)))
        y = EmbeddingSet(rng.normal(size=(20, 3)) + 2.0)
        assert mmd.permutation_test(x, y, 200)[2] < 0.05

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            mmd.mmd_squared(EmbeddingSet(rng.random((3, 2))), EmbeddingSet(rng.random((3, 3))))

    def test_bandwidth_validation(self, rng):
        x = EmbeddingSet(rng.random((3, 2)))
        with pytest.raises(ValueError):
            mmd.mmd_squared(x, x, bandwidth=0.0)
        with pytest.raises(ValueError):
            mmd.mmd_squared(x, x, bandwidth="mean")

    def test_embedding_set_validation(self):
        with pytest.raises(ValueError):
            EmbeddingSet(np.zeros((1, 4)))
        with pytest.raises(ValueError):
            EmbeddingSet(np.array([[0.0, np.inf], [1.0, 1.0]]))

    def test_kernel_range(self, rng):
        K = mmd.gaussian_kernel(rng.random((10, 3)), rng.random((8, 3)), 0.5)
        assert np.all(K > 0) and np.all(K <= 1)

    def test_median_bandwidth_degenerate(self):
        assert mmd.median_bandwidth(np.zeros((3, 2)), np.zeros((2, 2))) == 1.0


class TestConfusion:
    def test_identical_sets_zero(self, rng):
        x = EmbeddingSet(rng.random((10, 4)))
        assert np.all(mmd.confusion_matrix([x, x, x]) < 1e-12)

    def test_symmetric_zero_diagonal(self, rng):
        sets = [EmbeddingSet(rng.normal(size=(12, 4)) + i) for i in range(4)]
        M = mmd.confusion_matrix(sets)
        assert np.abs(M - M.T).max() < 1e-9
        assert np.abs(np.diag(M)).max() < 1e-9

    def test_three_cluster_ordering(self, rng):
        # centres on a line at 0, 1, 3: pairwise distances 1, 2, 3
        a, b, c = (cluster(rng, [x, 0.0, 0.0], spread=0.1) for x in (0.0, 1.0, 3.0))
        M = mmd.confusion_matrix([a, b, c])
        assert M[0, 1] < M[1, 2] < M[0, 2]

    def test_invariant_to_view_order(self, rng):
        sets = [EmbeddingSet(rng.normal(size=(10, 3)) + i) for i in range(3)]
        shuffled = [EmbeddingSet(s.vectors[rng.permutation(10)]) for s in sets]
        np.testing.assert_allclose(mmd.confusion_matrix(sets), mmd.confusion_matrix(shuffled), atol=1e-12)

    def test_needs_two(self, rng):
        with pytest.raises(ValueError):
            mmd.confusion_matrix([EmbeddingSet(rng.random((3, 2)))])


class TestEmbed:
    def test_deterministic_unit_norm(self, rng):
        v = random_view(rng)
        a, b = mmd.embed_view(v), mmd.embed_view(v)
        assert np.array_equal(a, b)
        assert abs(np.linalg.norm(a) - 1.0) < 1e-9

    def test_brightness_shift_closer_than_other_scene(self, plane_scene, small_scene):
        v = plane_scene.views[0]
        shifted = np.clip(v.image + 0.05, 0, 1)
        other = small_scene.views[0].image[:, ::-1] ** 3
        e = mmd.embed_view(v)
        assert np.linalg.norm(mmd.embed_view(shifted) - e) < np.linalg.norm(mmd.embed_view(other) - e)
