import logging

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from semimvs import synth
from semimvs.geometry import photometric_loss
from semimvs.gpm import (
    DEFAULT_KAPPA,
    AffinityField,
    SparseCorrespondences,
    gpm_filter,
    guidance_affinity,
    propagate,
    spn_loss,
)
from semimvs.style import style_transfer_image


def smooth_image(rng, H=40, W=48, C=3, sigma=4.0):
    img = gaussian_filter(rng.random((H, W, C)), (sigma, sigma, 0))
    img -= img.min()
    return img / img.max() * 0.8 + 0.1


class TestAffinity:
    def test_constant_guide_equal_weights(self):
        a = guidance_affinity(np.full((6, 7, 3), 0.4), 50.0)
        inner = a.weights[1:-1, 1:-1]
        np.testing.assert_allclose(inner, DEFAULT_KAPPA / 3, atol=1e-15)

    def test_stability_sum_on_flat_regions(self):
        a = guidance_affinity(np.full((8, 9, 1), 0.7), 10.0)
        sums = a.stability_sums()
        # every pixel with a full set of predecessors carries the full budget
        assert np.abs(sums[1:-1, 1:-1] - DEFAULT_KAPPA).max() < 1e-6
        assert sums.max() <= 1.0

    def test_hard_edge(self):
        g = np.zeros((10, 10, 1))
        g[:, 5:] = 1.0
        a = guidance_affinity(g, 20.0)
        lr = 0  # left-to-right: predecessors in the previous column
        across = a.weights[4, 5, lr].sum()
        along = a.weights[4, 3, lr].sum()
        assert across < along
        tb = 2  # top-to-bottom: predecessors in the previous row, same side of the edge
        assert a.weights[4, 7, tb, 1] > a.weights[4, 5, tb, 0]

    def test_stability_enforced(self):
        with pytest.raises(ValueError):
            AffinityField(np.full((3, 3, 4, 3), 0.4))

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            guidance_affinity(np.zeros((3, 3)), -1.0)
        with pytest.raises(ValueError):
            guidance_affinity(np.zeros((3, 3)), 1.0, kappa=1.0)


class TestPropagate:
    def test_zero_weights_identity(self, rng):
        x = rng.random((7, 9, 3))
        assert np.array_equal(propagate(x, AffinityField.zeros(7, 9)), x)

    def test_constant_fixed_point(self, rng):
        x = np.full((7, 9, 2), 0.37)
        out = propagate(x, guidance_affinity(rng.random((7, 9, 3)), 5.0))
        np.testing.assert_allclose(out, 0.37, atol=1e-15)

    def test_range_bounded(self, rng):
        x = rng.random((12, 11, 3))
        out = propagate(x, guidance_affinity(rng.random((12, 11, 3)), 0.0))
        for c in range(3):
            assert out[:, :, c].min() >= x[:, :, c].min() and out[:, :, c].max() <= x[:, :, c].max()

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            propagate(rng.random((5, 5, 1)), AffinityField.zeros(5, 6))

    def test_salt_and_pepper_noise_reduced(self, rng):
        clean = smooth_image(rng)
        noisy = clean.copy()
        hit = rng.random(clean.shape[:2]) < 0.05
        salt = rng.random(clean.shape[:2]) < 0.5
        noisy[hit & salt] = 1.0
        noisy[hit & ~salt] = 0.0
        out = gpm_filter(noisy, clean)
        assert np.abs(out - clean).mean() < np.abs(noisy - clean).mean()
        assert ((out - clean) ** 2).mean() < ((noisy - clean) ** 2).mean()


class TestFilter:
    def test_self_guided_near_identity(self, plane_scene):
        for v in plane_scene.views:
            assert np.abs(gpm_filter(v.image, v) - v.image).mean() < 1e-3

    def test_idempotent_on_smooth(self, plane_scene):
        for v in plane_scene.views:
            once = gpm_filter(v.image, v)
            twice = gpm_filter(once, v)
            assert np.abs(twice - once).mean() < 1e-3

    def test_linear_ramp_interior_fixed_point(self):
        # opposite sweeps lag by equal and opposite amounts on a ramp
        ramp = np.tile(np.linspace(0.2, 0.4, 64), (64, 1))[:, :, None]
        out = gpm_filter(ramp, ramp, 0.0)
        assert np.abs(out - ramp)[24:40, 24:40].max() < 1e-3

    def test_zero_strength_blurs_edges(self, rng):
        img = np.zeros((24, 24, 1))
        img[:, 12:] = 1.0

        def grad_energy(x):
            return (np.diff(x, axis=1) ** 2).sum()

        guided = gpm_filter(img, img, 200.0)
        plain = gpm_filter(img, img, 0.0)
        assert grad_energy(plain) < grad_energy(guided)
        assert grad_energy(guided) > 0.9 * grad_energy(img)

    def test_improves_photometric_consistency(self, small_scene):
        sc = small_scene
        style = synth.generate("plane", n_views=2, texture="checker", resolution=(32, 32)).views[0].image
        raw = [v.with_image(style_transfer_image(v, style, levels=3)) for v in sc.views]
        filt = [v.with_image(gpm_filter(r.image, v)) for v, r in zip(sc.views, raw)]
        for k in range(len(sc.views)):
            others = [i for i in range(len(sc.views)) if i != k]
            a = photometric_loss(raw[k], [raw[i] for i in others], sc.gt_depths[k]).total
            b = photometric_loss(filt[k], [filt[i] for i in others], sc.gt_depths[k]).total
            assert b < a


class TestSpnLoss:
    def test_zero_on_perfect(self, small_scene):
        flat = [v.with_image(np.full((48, 48, 3), 0.5)) for v in small_scene.views]
        r = spn_loss(flat, [v.image for v in flat], small_scene.sparse)
        assert r.total == 0.0

    def test_textured_perfect_limited_by_interpolation(self, plane_scene):
        sc = plane_scene
        r = spn_loss(sc.views, [v.image for v in sc.views], sc.sparse)
        assert r.image_term == 0.0
        assert r.sparse_term < 1e-3

    def test_constant_offset(self, small_scene):
        sc = small_scene
        flat = [v.with_image(np.full((48, 48, 1), 0.5)) for v in sc.views]
        r = spn_loss(flat, [v.image + 0.1 for v in flat], sc.sparse)
        assert r.image_term == pytest.approx(0.01, abs=1e-12)
        assert r.sparse_term == pytest.approx(0.01, abs=1e-12)
        assert r.total == pytest.approx(0.02, abs=1e-12)

    def test_empty_sparse_warns(self, small_scene, caplog):
        sc = small_scene
        flat = [v.with_image(np.full((48, 48, 1), 0.5)) for v in sc.views]
        with caplog.at_level(logging.WARNING):
            r = spn_loss(flat, [v.image + 0.1 for v in flat], None)
        assert "sparse" in caplog.text
        assert r.total == pytest.approx(0.01, abs=1e-12) and r.sparse_term == 0.0

    def test_correspondence_corruption_weighs_more(self, small_scene, rng):
        sc = small_scene
        imgs = [v.image.copy() for v in sc.views]
        at_corr = [im.copy() for im in imgs]
        at_rand = [im.copy() for im in imgs]
        by_id = {v.id: k for k, v in enumerate(sc.views)}
        counts = np.zeros(len(imgs), int)
        for obs in sc.sparse.observations:
            for vid, u, w in obs:
                k = by_id[vid]
                r, c = int(round(w)), int(round(u))
                at_corr[k][r : r + 2, c : c + 2] = 1.0 - imgs[k][r : r + 2, c : c + 2]
                counts[k] += 1
        for k, n in enumerate(counts):
            H, W = imgs[k].shape[:2]
            for _ in range(n):
                r, c = rng.integers(0, H - 1), rng.integers(0, W - 1)
                at_rand[k][r : r + 2, c : c + 2] = 1.0 - imgs[k][r : r + 2, c : c + 2]
        a = spn_loss(sc.views, at_corr, sc.sparse)
        b = spn_loss(sc.views, at_rand, sc.sparse)
        assert a.total > b.total

    def test_mismatch(self, small_scene):
        with pytest.raises(ValueError):
            spn_loss(small_scene.views, [small_scene.views[0].image], small_scene.sparse)


class TestSparse:
    def test_requires_one_observation_list_per_point(self):
        with pytest.raises(ValueError):
            SparseCorrespondences(np.zeros((2, 3)), [[(0, 1.0, 1.0)]])

    def test_synthetic_reprojection(self, small_scene):
        assert small_scene.sparse.max_reprojection_error(small_scene.views) < 1e-6
