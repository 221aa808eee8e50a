import math

import numpy as np
import pytest

from blab import geometry as g
from blab import operators as op
from blab import orlicz as orz
from blab.dyadic import (
    DyadicGrid,
    GridConfig,
    TentCache,
    TentRegion,
    build_grid,
    cover_tent,
    layer_decomposition,
    locate,
)
from blab.harness import checks
from blab.montecarlo import Sampler, sample_ball


class TestConfig:
    def test_standing_assumption(self):
        with pytest.raises(ValueError):
            GridConfig(dim=1, theta0=0.4, depth=3)

    def test_defaults(self):
        cfg = GridConfig(dim=2, theta0=0.6, depth=3)
        assert cfg.systems == 4
        assert cfg.delta == pytest.approx(math.exp(-1.2))
        assert cfg.child_cap == math.ceil(math.exp(2.4))

    def test_resource_cap(self):
        with pytest.raises(ValueError):
            build_grid(GridConfig(dim=2, theta0=0.6, depth=12, seed=1, max_kubes=10**5))


class TestStructure:
    def test_deterministic_builds(self, grid_n1):
        again = build_grid(grid_n1.config)
        assert again.content_hash() == grid_n1.content_hash()

    def test_root_kube_collects_small_ball(self, grid_n1):
        # points with d(., 0) < theta0 locate to the single level-0 kube
        rng = Sampler(7, 1, stream=3).rng()
        pts = math.tanh(1.0) * 0.999 * g.sample_unit_ball_points(rng, 2000, 1)
        levels, idx = grid_n1.kube_of(0, pts)
        assert np.all(levels == 0) and np.all(idx == 0)
        assert grid_n1.level_count(0, 0) == 1

    def test_level_counts_follow_growth_law(self, grid_n1):
        # counts ~ const * e^{2 n theta0 k} within a factor of 8
        counts = [grid_n1.level_count(0, k) for k in range(1, grid_n1.depth + 1)]
        const = counts[-1] / math.exp(2.0 * grid_n1.depth)
        for k, c in enumerate(counts, start=1):
            assert c / (const * math.exp(2.0 * k)) < 8.0
            assert c / (const * math.exp(2.0 * k)) > 1.0 / 8.0

    def test_child_cap(self, grid_n1):
        assert checks.check_child_cap(grid_n1)["passed"]

    def test_partition(self, grid_n1):
        assert checks.check_partition(grid_n1, samples=30_000)["passed"]

    def test_nesting(self, grid_n1, cache_n1):
        assert checks.check_nesting(grid_n1, cache_n1, pairs=40)["passed"]

    def test_parent_contains_projected_center(self, grid_n1):
        # the tree relation: each kube's projected center lands in its parent
        for level in range(1, grid_n1.depth + 1):
            parents = grid_n1.parent_index(0, level)
            for j in range(0, grid_n1.level_count(0, level), 37):
                center = grid_n1.kube_center(0, level, j)
                assert bool(
                    grid_n1.tent_contains(0, level - 1, int(parents[j]), center[None, :])[0]
                )


class TestLocate:
    def test_origin(self, grid_n1):
        assert int(locate(grid_n1, 0, np.zeros(1, dtype=complex), 0)[0]) == 0

    def test_located_kube_accepts_point(self, grid_n1):
        pts = sample_ball(Sampler(13, 1), 500)
        pts = pts[grid_n1.level_of(pts) <= grid_n1.depth]
        levels, idx = grid_n1.kube_of(0, pts)
        for i in range(0, len(pts), 29):
            assert bool(
                grid_n1.kube_contains(0, int(levels[i]), int(idx[i]), pts[i][None, :])[0]
            )

    def test_ancestor_chain(self, grid_n1):
        pts = sample_ball(Sampler(17, 1), 200)
        pts = pts[grid_n1.level_of(pts) <= grid_n1.depth]
        _, anc = grid_n1.ancestor_path(0, pts)
        for k in range(1, grid_n1.depth + 1):
            parents = grid_n1.parent_index(0, k)
            assert np.array_equal(parents[anc[:, k]], anc[:, k - 1])

    def test_horizon_error(self, grid_n1):
        beyond = np.array([math.tanh((grid_n1.depth + 1.5) * 1.0) + 0j])
        with pytest.raises(ValueError):
            locate(grid_n1, 0, beyond, 2)


class TestTentVolumes:
    def test_root_tent_is_truncated_ball(self, cache_n1):
        est = cache_n1.tent_volume((0, 0, 0))
        horizon = cache_n1.grid.horizon_radius()
        assert est.value == pytest.approx(math.pi * horizon**2, rel=1e-12)
        assert est.stderr == 0.0

    def test_volume_law(self, grid_n1, cache_n1):
        assert checks.check_volume_law(grid_n1, cache_n1)["passed"]

    def test_stderr_target(self, cache_n1):
        for key in ((0, 2, 3), (1, 4, 100)):
            est = cache_n1.tent_volume(key)
            assert est.stderr / est.value <= 0.02

    def test_tent_sampler_membership(self, grid_n1, cache_n1):
        key = (0, 2, 7)
        pts = cache_n1.tent_sample(key, 2000)
        assert bool(np.all(grid_n1.tent_contains(*key, pts)))

    def test_tent_region_adapter(self, grid_n1, cache_n1):
        region = TentRegion(cache_n1, (0, 1, 2))
        pts = region.sample(Sampler(5, 1, stream=8).rng(), 1500)
        assert bool(np.all(region.contains(pts)))
        assert region.volume == cache_n1.tent_volume((0, 1, 2)).value


class TestCoverTent:
    def test_origin_returns_root(self, grid_n1):
        assert cover_tent(grid_n1, np.zeros(1, dtype=complex)) == (0, 0, 0)

    def test_containment(self, grid_n1):
        z = np.array([0.9 + 0j])
        system, level, j = cover_tent(grid_n1, z)
        tent = g.carleson_tent(z)
        pts = tent.sample(Sampler(9, 1, stream=3).rng(), 10_000)
        pts = pts[grid_n1.level_of(pts) <= grid_n1.depth]
        assert bool(np.all(grid_n1.tent_contains(system, level, j, pts)))

    def test_volume_ratio_reported(self, grid_n1, cache_n1):
        ratios = []
        for az in (0.5, 0.9, 0.99):
            z = np.array([az + 0j])
            key = cover_tent(grid_n1, z)
            ratios.append(cache_n1.tent_volume(key).value / g.carleson_tent(z).volume)
        assert all(np.isfinite(r) and r >= 1.0 for r in ratios)
        assert max(ratios) < 1e3


class TestSerialization:
    def test_roundtrip(self, grid_n1, tmp_path):
        path = tmp_path / "grid.npz"
        grid_n1.save(path)
        loaded = DyadicGrid.load(path)
        assert loaded.content_hash() == grid_n1.content_hash()
        pts = sample_ball(Sampler(23, 1), 500)
        pts = pts[grid_n1.level_of(pts) <= grid_n1.depth]
        a = grid_n1.kube_of(1, pts)
        b = loaded.kube_of(1, pts)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_version_guard(self, grid_n1, tmp_path):
        path = tmp_path / "grid.npz"
        grid_n1.save(path)
        data = dict(np.load(path, allow_pickle=False))
        data["format_version"] = np.array([99])
        np.savez(tmp_path / "bad.npz", **data)
        with pytest.raises(ValueError):
            DyadicGrid.load(tmp_path / "bad.npz")


class TestLayerDecomposition:
    def test_zero_function_empty(self, cache_n1):
        psi = orz.psi_eps(1.0)
        f = op.TestFunction(terms=((complex(0.0), g.unit_ball(1)),))
        assert not layer_decomposition(cache_n1, f, 1, psi).generations

    def test_constant_one_empty_for_large_k(self, cache_n1):
        psi = orz.psi_eps(1.0)
        f = op.indicator(g.unit_ball(1))
        assert not layer_decomposition(cache_n1, f, 40, psi).generations

    def test_overlap_disjointness_decay(self, cache_n1):
        res = checks.check_layer_decomposition(cache_n1)
        assert res["passed"], res["detail"]
        assert res["generations"] >= 2  # the battery produced nested members


class TestTentExpansion:
    def test_comparability(self, cache_n1):
        res = checks.check_tent_expansion(cache_n1)
        assert res["passed"], res["detail"]


class TestDimensionTwo:
    def test_structure_smoke(self, grid_n2, cache_n2):
        assert checks.check_child_cap(grid_n2)["passed"]
        assert checks.check_partition(grid_n2, samples=5000)["passed"]
        key = (0, 1, 0)
        pts = cache_n2.tent_sample(key, 500)
        assert bool(np.all(grid_n2.tent_contains(*key, pts)))
        est = cache_n2.tent_volume(key)
        assert est.value > 0 and est.stderr / est.value <= 0.05
