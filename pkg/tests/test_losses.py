import math

import numpy as np
import pytest

from semimvs.errors import NoSupervisionError
from semimvs.geometry import DepthMap
from semimvs.losses import (
    KL_FLOOR,
    LAMBDA1,
    LAMBDA2,
    AugmentationSpec,
    LossReport,
    augment,
    kl_consistency_loss,
    overall_loss,
    style_consistency_loss,
    supervised_loss,
)
from semimvs.sweep import ProbabilityVolume

from conftest import random_view


def random_volume(rng, shape=(4, 5, 6), sparsity=0.0):
    p = rng.random(shape)
    p[rng.random(shape) < sparsity] = 0.0
    p[..., 0] += 1e-3
    return ProbabilityVolume(p / p.sum(axis=-1, keepdims=True))


@pytest.mark.parametrize("fn", [supervised_loss, style_consistency_loss])
class TestDepthLosses:
    def test_zero_when_equal(self, fn, rng):
        gt = DepthMap(rng.uniform(1, 3, (5, 6)))
        assert fn(gt, gt) == 0.0

    def test_unit_offset(self, fn, rng):
        gt = DepthMap(rng.uniform(1, 3, (5, 6)))
        assert fn(DepthMap(gt.values + 1.0), gt) == pytest.approx(1.0, abs=1e-12)

    def test_masking(self, fn, rng):
        g = rng.uniform(1, 3, (6, 6))
        g[:3] = 0.0
        pred = g + 2.0
        pred[:3] = rng.uniform(0, 100, (3, 6))
        assert fn(DepthMap(pred), DepthMap(g)) == pytest.approx(4.0, abs=1e-12)

    def test_no_supervision(self, fn):
        z = DepthMap(np.zeros((3, 3)))
        with pytest.raises(NoSupervisionError):
            fn(z, z)

    def test_shape_mismatch(self, fn):
        with pytest.raises(ValueError):
            fn(DepthMap(np.ones((2, 2))), DepthMap(np.ones((2, 3))))


class TestKL:
    def test_identical_zero(self, rng):
        pv = random_volume(rng)
        assert kl_consistency_loss(pv, pv) == 0.0

    def test_ln2(self):
        p = ProbabilityVolume(np.array([[[1.0, 0.0]]]))
        q = ProbabilityVolume(np.array([[[0.5, 0.5]]]))
        assert abs(kl_consistency_loss(p, q) - math.log(2)) < 1e-9

    def test_disjoint_floor(self):
        p = ProbabilityVolume(np.array([[[1.0, 0.0]]]))
        q = ProbabilityVolume(np.array([[[0.0, 1.0]]]))
        assert kl_consistency_loss(p, q) == pytest.approx(-math.log(KL_FLOOR), rel=1e-12)
        assert kl_consistency_loss(p, q) == pytest.approx(18.420680743952367)

    def test_symmetric_variant(self, rng):
        p, q = random_volume(rng), random_volume(rng)
        s = kl_consistency_loss(p, q, symmetric=True)
        assert s == pytest.approx(0.5 * (kl_consistency_loss(p, q) + kl_consistency_loss(q, p)), rel=1e-12)
        assert s == pytest.approx(kl_consistency_loss(q, p, symmetric=True), rel=1e-12)

    def test_non_negative(self, rng):
        for _ in range(200):
            assert kl_consistency_loss(random_volume(rng, sparsity=0.3), random_volume(rng, sparsity=0.3)) >= 0.0

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            kl_consistency_loss(random_volume(rng, (2, 2, 3)), random_volume(rng, (2, 2, 4)))


class TestAugment:
    def test_identity(self, rng):
        v = random_view(rng)
        out = augment(v, AugmentationSpec.identity())
        assert np.array_equal(out.image, v.image)

    def test_deterministic_and_geometry_preserved(self, rng):
        v = random_view(rng)
        a = augment(v, AugmentationSpec(seed=4))
        b = augment(v, AugmentationSpec(seed=4))
        assert np.array_equal(a.image, b.image)
        assert a.intrinsics == v.intrinsics and a.extrinsics == v.extrinsics
        assert a.image.shape == v.image.shape
        assert a.image.min() >= 0 and a.image.max() <= 1
        assert not np.array_equal(a.image, v.image)

    def test_gamma(self, rng):
        v = random_view(rng, channels=1)
        v = v.with_image(np.full(v.image.shape, 0.25))
        spec = AugmentationSpec((0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 0.0))
        np.testing.assert_allclose(augment(v, spec).image, 0.0625, atol=1e-15)

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError):
            AugmentationSpec(brightness=(0.1, -0.1))


class TestOverall:
    def test_defaults(self):
        assert (LAMBDA1, LAMBDA2) == (0.1, 1.0)
        r = overall_loss(1, 2, 3, 4)
        assert r.overall == pytest.approx(7.3, abs=1e-12)

    def test_zeros_and_consis_only(self):
        assert overall_loss(0, 0, 0, 0).overall == 0.0
        assert overall_loss(0, 0, 10, 0, lambda1=0.1).overall == pytest.approx(1.0, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            overall_loss(1, -1e-9, 0, 0)

    def test_report_formats(self):
        r = overall_loss(0.5, 0.25, 1.0, 2.0)
        assert r.csv_header() == ",".join(LossReport.FIELDS)
        vals = dict(zip(LossReport.FIELDS, map(float, r.csv_row().split(","))))
        assert vals["overall"] == r.overall
        kv = dict(line.split("=") for line in r.key_values().splitlines())
        assert float(kv["sup"]) == 0.5
        assert r.overall == r.sup + r.photo + r.lambda1 * r.consis + r.lambda2 * r.style
