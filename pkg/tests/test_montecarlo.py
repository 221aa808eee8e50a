import math

import numpy as np
import pytest

from blab import geometry as g
from blab import operators as op
from blab.harness import checks
from blab.montecarlo import (
    Sampler,
    integral_mc,
    measure_mc,
    sample_ball,
    superlevel_measure,
)


class TestSampler:
    def test_determinism(self):
        a = sample_ball(Sampler(42, 2), 1000)
        b = sample_ball(Sampler(42, 2), 1000)
        assert np.array_equal(a, b)

    def test_substreams_differ(self):
        s = Sampler(42, 1)
        a = sample_ball(s.substream(1), 100)
        b = sample_ball(s.substream(2), 100)
        assert not np.array_equal(a, b)

    def test_nested_substreams_do_not_collide(self):
        s = Sampler(42, 1)
        assert s.substream(1).substream(2) != s.substream(2).substream(1)


class TestSampleBall:
    def test_coordinate_symmetry(self):
        pts = sample_ball(Sampler(7, 2), 100_000)
        mean = np.mean(pts, axis=0)
        sigma = 1.0 / math.sqrt(len(pts))
        assert float(np.max(np.abs(mean))) < 3 * sigma

    def test_radius_distribution(self):
        for n in (1, 2):
            pts = sample_ball(Sampler(3, n), 100_000)
            p = float(np.mean(g.norm(pts) < 0.5))
            expect = 2.0 ** (-2 * n)
            err = math.sqrt(expect * (1 - expect) / len(pts))
            assert abs(p - expect) < 3 * err

    def test_indicator_volume(self):
        pts = sample_ball(Sampler(5, 1), 200_000)
        p = float(np.mean(g.norm(pts) < 0.7))
        err = math.sqrt(p * (1 - p) / len(pts))
        assert abs(math.pi * p - math.pi * 0.49) < 3 * math.pi * err


class TestSuperlevel:
    def test_constant_function_full_mass(self):
        est = superlevel_measure(
            lambda z: np.ones(len(z)), 0.5, Sampler(1, 1), 10_000, g.unit_ball(1)
        )
        assert est.value == pytest.approx(math.pi)
        assert est.stderr == 0.0

    def test_constant_function_empty(self):
        est = superlevel_measure(
            lambda z: np.ones(len(z)), 2.0, Sampler(1, 1), 10_000, g.unit_ball(1)
        )
        assert est.value == 0.0

    def test_annulus_calibrated_commutator(self):
        # the slab U_m sits inside the superlevel set at its calibrated level
        k, m = 8, 4
        s = 1.0 - 2.0**-k
        ann = g.Annulus(k, m, 1)
        smp = Sampler(21, 1)
        pts = ann.bounding_region().sample(smp.rng(), 20_000)
        keep = ann.contains(pts)
        lam = 0.99 * float(np.min(np.abs(op.commutator_log_indicator(s, pts[keep]))))
        um = measure_mc(ann, smp.substream(1), 100_000)
        est = superlevel_measure(
            lambda z: op.commutator_log_indicator(s, z),
            lam,
            smp.substream(2),
            100_000,
            g.BoundaryCap(np.array([1.0 + 0j]), 0.5),
        )
        assert est.value + 3 * est.stderr >= um.value - 3 * um.stderr
        law = 2.0 ** (2 * (m - k))
        assert 0.25 <= um.value / law <= 4.0

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            superlevel_measure(lambda z: z, 1.0, Sampler(1, 1), 0, g.unit_ball(1))


class TestIntegral:
    def test_constant_exact(self):
        region = g.EuclideanBall(np.zeros(1, dtype=complex), 0.5)
        est = integral_mc(lambda w: np.full(len(w), 2.0), region, Sampler(1, 1), 100)
        assert est.value == pytest.approx(2.0 * region.volume)
        assert est.stderr == 0.0

    def test_odd_symmetry(self):
        est = integral_mc(
            lambda w: np.real(w[:, 0]), g.unit_ball(2), Sampler(3, 2), 100_000
        )
        assert abs(est.value) < 3 * est.stderr

    def test_polar_oracle(self):
        # int_{B_1} (1 - |z|^2) dV = 2 pi (1/2 - 1/4) = pi/2
        est = integral_mc(
            lambda w: 1.0 - g.norm(w) ** 2, g.unit_ball(1), Sampler(5, 1), 200_000
        )
        assert abs(est.value - math.pi / 2) < 3 * est.stderr


class TestSuiteChecks:
    def test_determinism_check(self):
        assert checks.check_mc_determinism()["passed"]

    def test_unbiased_regions(self):
        assert checks.check_mc_unbiased()["passed"]

    def test_stratified_agreement(self):
        assert checks.check_mc_stratified_agreement()["passed"]
