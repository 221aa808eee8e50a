import math

import numpy as np
import pytest

from blab import geometry as g
from blab.montecarlo import Sampler, measure_mc, sample_ball


def axis(n, a):
    z = np.zeros(n, dtype=complex)
    z[0] = a
    return z


class TestBallPoint:
    def test_accepts_interior(self):
        z = g.ball_point([0.3 + 0.4j, 0.1])
        assert z.flags.writeable is False

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            g.ball_point([1.0])
        with pytest.raises(ValueError):
            g.ball_point([1.0 - 1e-13])

    def test_rejects_scalars(self):
        with pytest.raises(ValueError):
            g.ball_point(0.5)


class TestHermInner:
    def test_unit_vector(self):
        assert g.herm_inner(axis(2, 1.0), axis(2, 1.0)) == 1.0

    def test_orthogonal(self):
        z = np.array([0.5, 0.0], dtype=complex)
        w = np.array([0.0, 0.5], dtype=complex)
        assert g.herm_inner(z, w) == 0.0

    def test_complex_arithmetic(self):
        got = g.herm_inner(np.array([0.3 + 0.4j]), np.array([0.5 + 0j]))
        assert got == pytest.approx(0.15 + 0.2j)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            g.herm_inner(np.zeros(2, dtype=complex), np.zeros(3, dtype=complex))


class TestMobius:
    def test_defining_properties(self):
        a = np.array([0.5 + 0j, 0.1j])
        assert np.allclose(g.mobius_involution(a, np.zeros(2, dtype=complex)), a)
        assert np.allclose(g.mobius_involution(a, a), 0.0)

    def test_involution(self):
        rng = Sampler(5, 2, stream=1).rng()
        a = 0.9 * g.sample_unit_ball_points(rng, 1, 2)[0]
        w = 0.99 * g.sample_unit_ball_points(rng, 500, 2)
        ww = g.mobius_involution(a, g.mobius_involution(a, w))
        assert float(np.max(g.norm(ww - w))) < 1e-10

    def test_origin_center(self):
        w = np.array([0.2 + 0.1j])
        assert np.allclose(g.mobius_involution(np.zeros(1, dtype=complex), w), -w)


class TestBergmanDistance:
    def test_zero_at_diagonal(self):
        z = np.array([0.3 + 0.2j, 0.1])
        assert g.bergman_distance(z, z) == 0.0

    def test_closed_form_on_axis(self):
        # |phi_0(w)| = |w|, so d(0, 1/2) = (1/2) ln 3
        got = g.bergman_distance(np.zeros(1, dtype=complex), axis(1, 0.5))
        assert got == pytest.approx(0.5 * math.log(3.0), rel=1e-12)

    def test_mobius_invariance(self):
        rng = Sampler(9, 2, stream=1).rng()
        for _ in range(20):
            a, z, w = (0.99 * g.sample_unit_ball_points(rng, 3, 2))
            d0 = g.bergman_distance(z, w)
            d1 = g.bergman_distance(g.mobius_involution(a, z), g.mobius_involution(a, w))
            assert abs(float(d1 - d0)) < 1e-9

    def test_overflow_sentinel(self):
        # raw boundary arrays (bypassing ball_point) hit the finite sentinel
        d = g.bergman_distance(axis(1, 1.0), axis(1, 0.5))
        assert 1e3 < d <= g.DISTANCE_SENTINEL


class TestKoranyi:
    def test_origin_branch(self):
        w = np.array([0.3 + 0.4j])
        assert g.koranyi_distance(np.zeros(1, dtype=complex), w) == pytest.approx(0.5)

    def test_diagonal(self):
        z = np.array([0.5 + 0.2j])
        assert g.koranyi_distance(z, z) == pytest.approx(0.0, abs=1e-14)

    def test_collinear_positive(self):
        got = g.koranyi_distance(axis(1, 0.5), axis(1, 0.25))
        assert got == pytest.approx(0.25, abs=1e-14)


class TestRadialSplit:
    def test_parallel(self):
        z = np.array([0.3 + 0.1j, 0.2])
        p, q = g.radial_split(z, z)
        assert np.allclose(p, z) and np.allclose(q, 0.0)

    def test_orthogonal(self):
        z = axis(2, 0.5)
        w = np.array([0.0, 0.3 + 0.1j])
        p, q = g.radial_split(z, w)
        assert np.allclose(p, 0.0) and np.allclose(q, w)

    def test_reconstruction_and_orthogonality(self):
        rng = Sampler(3, 3, stream=1).rng()
        z = g.sample_unit_ball_points(rng, 1, 3)[0]
        w = g.sample_unit_ball_points(rng, 100, 3)
        p, q = g.radial_split(z, w)
        assert np.allclose(p + q, w)
        assert float(np.max(np.abs(g.herm_inner(p, q)))) < 1e-12

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            g.radial_split(np.zeros(2, dtype=complex), np.zeros(2, dtype=complex))


class TestEllipsoid:
    def test_reference_values(self):
        p = g.ellipsoid_params(axis(2, 0.5), math.atanh(0.5))
        assert p.R == pytest.approx(0.5)
        assert p.sigma == pytest.approx(0.8)
        assert np.allclose(p.center, axis(2, 0.4))
        assert p.rhat == pytest.approx(0.8)

    def test_small_center_limit(self):
        z = axis(1, 1e-8)
        p = g.ellipsoid_params(z, math.atanh(0.5))
        assert p.sigma == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(p.center, (1 - p.R**2) * z)

    def test_rhat_definition(self):
        p = g.ellipsoid_params(axis(1, 0.3), 0.7)
        assert p.rhat == pytest.approx(2 * p.R * p.sigma)


class TestRegions:
    def test_tent_at_origin_is_ball(self):
        tent = g.carleson_tent(np.zeros(2, dtype=complex))
        pts = sample_ball(Sampler(1, 2), 2000)
        assert bool(np.all(g.region_contains(tent, pts)))

    def test_bergman_ball_matches_metric(self):
        rng = Sampler(2, 1, stream=4).rng()
        z = axis(1, 0.6)
        ball = g.BergmanBall(z, 0.8)
        w = g.sample_unit_ball_points(rng, 10_000, 1)
        d = g.bergman_distance(z, w)
        safe = np.abs(d - 0.8) > 1e-9
        assert np.array_equal(ball.contains(w)[safe], (d < 0.8)[safe])

    def test_polydisk_center(self):
        disk = g.Polydisk(axis(2, 0.5), 0.8)
        assert bool(disk.contains(axis(2, 0.5)[None, :])[0])

    def test_annulus_closed_bounds(self):
        ann = g.Annulus(8, 4, 1)
        inner = axis(1, 1.0 - ann.r_lo)  # |1 - z_1| = r_lo exactly
        outer = axis(1, 1.0 - ann.r_hi)
        assert bool(ann.contains(inner[None, :])[0])
        assert bool(ann.contains(outer[None, :])[0])

    def test_annulus_bound_is_superset(self):
        ann = g.Annulus(10, 5, 2)
        bound = ann.bounding_region()
        pts = bound.sample(Sampler(3, 2).rng(), 5000)
        inside = ann.contains(pts)
        assert bool(np.all(bound.contains(pts)))
        assert 0 < int(inside.sum()) < 5000

    def test_sampler_membership(self):
        # every exact sampler produces points of its own region
        regions = [
            g.EuclideanBall(axis(2, 0.3), 0.2),
            g.Polydisk(axis(2, 0.5), 0.2),
            g.BergmanBall(axis(2, 0.4), 0.9),
            g.BoundaryCap(axis(2, 1.0), 0.3),
        ]
        rng = Sampler(11, 2, stream=9).rng()
        for region in regions:
            pts = region.sample(rng, 4000)
            assert bool(np.all(region.contains(pts))), region.cache_key()[0]

    def test_volumes_against_ball_sampling(self):
        for n in (1, 2):
            pts = sample_ball(Sampler(123, n), 200_000)
            vb = g.ball_volume(n)
            regions = [
                g.BoundaryCap(axis(n, 1.0), 0.35),
                g.BergmanBall(axis(n, 0.4), 0.9),
                g.Polydisk(axis(n, 0.3), 0.2),
                g.EuclideanBall(axis(n, 0.2), 0.4),
            ]
            for region in regions:
                p = float(np.mean(region.contains(pts)))
                err = vb * math.sqrt(p * (1 - p) / len(pts))
                assert abs(vb * p - region.volume) < 4 * err + 1e-12, region.cache_key()[0]


class TestFrames:
    def test_deterministic(self):
        z = np.array([0.3 + 0.1j, -0.2j, 0.05], dtype=complex)
        f1 = g.radial_frame(z)
        f2 = g.radial_frame(z.copy())
        assert np.all(f1 == f2)

    def test_orthonormal(self):
        rng = Sampler(17, 3, stream=2).rng()
        for z in g.sample_unit_ball_points(rng, 50, 3):
            f = g.radial_frame(z)
            assert float(np.max(np.abs(f @ np.conj(f).T - np.eye(3)))) < 1e-12

    def test_first_row_radial(self):
        z = np.array([0.3, 0.4j], dtype=complex)
        f = g.radial_frame(z)
        assert np.allclose(f[0], z / np.linalg.norm(z))

    def test_roundtrip(self):
        z = np.array([0.2, 0.3 - 0.1j], dtype=complex)
        f = g.radial_frame(z)
        w = np.array([[0.1 + 0.2j, -0.05j]], dtype=complex)
        assert np.allclose(g.frame_point(f, g.frame_coords(f, w)), w)
