"""Boundary dyadic systems lifted to kubes and dyadic Carleson tents.

Each system is a greedy maximal net hierarchy on the unit sphere for the
boundary quasi-metric rho(x, y) = |1 - <x, y>|, one independently rotated
copy per system.  Cube membership at every level is derived from a single
nearest-net-point assignment at the deepest level followed by the stored
parent chain, so the partition and nesting properties hold exactly by
construction and every query is a pure function of the built grid.

A kube at level k is the radial lift of its boundary cube to the
hyperbolic shell k*theta0 <= d(., 0) < (k+1)*theta0; its tent is the
union of the lifts of all tree descendants, truncated at the depth
horizon.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import herm_inner, norm
from .montecarlo import MCEstimate, Sampler

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GridConfig:
    """Construction parameters for one family of dyadic systems."""

    dim: int
    theta0: float
    depth: int
    systems: int = 0  # 0 -> max(2, 2*dim)
    seed: int = 0
    pool_factor: float = 4.0
    max_kubes: int = 10**7

    def __post_init__(self):
        if (self.dim + 1) * self.theta0 <= 1.0:
            raise ValueError("(n+1)*theta0 > 1 is required")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.systems == 0:
            object.__setattr__(self, "systems", max(2, 2 * self.dim))

    @property
    def delta(self) -> float:
        return math.exp(-2.0 * self.theta0)

    @property
    def child_cap(self) -> int:
        return math.ceil(math.exp(2.0 * self.dim * self.theta0))

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "theta0": self.theta0,
                "depth": self.depth,
                "systems": self.systems,
                "seed": self.seed,
                "pool_factor": self.pool_factor,
                "max_kubes": self.max_kubes,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "GridConfig":
        return GridConfig(**json.loads(text))


# ---------------------------------------------------------------------------
# voxel hashing on the sphere (embedded in R^{2n})
# ---------------------------------------------------------------------------


def _as_real(pts):
    pts = np.ascontiguousarray(pts)
    return pts.view(float).reshape(pts.shape[0], -1)


def _euclid_reach(rho: float, n: int) -> float:
    # Euclidean diameter of a rho-ball on the sphere: |x-y| = rho(x,y) exactly
    # on the circle, while |x-y|^2 <= 2*rho in general
    return rho if n == 1 else math.sqrt(2.0 * rho)


class _NearestIndex:
    """k-nearest Euclidean prefilter (cKDTree) re-ranked by the rho metric.

    The rho-nearest net point lies within Euclidean distance sqrt(2*rho) of
    the query, so a generous Euclidean candidate list contains it; the list
    is re-ranked by rho exactly.
    """

    def __init__(self, points, n):
        from scipy.spatial import cKDTree

        self.points = points
        self.tree = cKDTree(_as_real(points))
        self.k = int(min(len(points), 8 if n == 1 else 64))

    def nearest(self, queries):
        queries = np.atleast_2d(queries)
        _, nb = self.tree.query(_as_real(queries), k=self.k)
        nb = nb.reshape(len(queries), self.k)
        d = np.abs(1.0 - herm_inner(queries[:, None, :], self.points[nb]))
        pick = np.argmin(d, axis=1)
        return nb[np.arange(len(queries)), pick]


def _greedy_net(pool, spacing, keep_first=0, chunk=4096):
    """Greedy maximal spacing-separated subset of ``pool`` in scan order.

    The first ``keep_first`` pool entries are accepted unconditionally
    (used to nest the previous level's net points).  Chunked processing:
    each chunk is first filtered in one vectorized pass against everything
    accepted so far, then the survivors are resolved sequentially against
    the chunk's own acceptances; the accept/reject decisions match the
    plain one-point-at-a-time scan exactly.
    """
    real = _as_real(pool)
    width = real.shape[1]
    cell = _euclid_reach(spacing, width // 2)
    base = int(4.0 / cell) + 3
    idx = np.floor((real + 2.0) / cell).astype(np.int64)
    packed = np.zeros(len(pool), dtype=np.int64)
    for a in range(width):
        packed = packed * base + idx[:, a]
    offs = np.stack(
        np.meshgrid(*([np.array([-1, 0, 1])] * width), indexing="ij"), axis=-1
    ).reshape(-1, width)
    off_keys = np.zeros(offs.shape[0], dtype=np.int64)
    for a in range(width):
        off_keys = off_keys * base + offs[:, a]

    chosen: list[int] = list(range(keep_first))

    for start in range(keep_first, len(pool), chunk):
        block = np.arange(start, min(start + chunk, len(pool)))
        # vectorized filter against everything accepted before this chunk
        if chosen:
            acc = np.asarray(chosen, dtype=np.int64)
            acc_keys = packed[acc]
            order = np.argsort(acc_keys, kind="stable")
            sorted_keys = acc_keys[order]
            probe = packed[block][:, None] + off_keys[None, :]
            lo = np.searchsorted(sorted_keys, probe.ravel(), side="left")
            hi = np.searchsorted(sorted_keys, probe.ravel(), side="right")
            counts = hi - lo
            conflict = np.zeros(block.size, dtype=bool)
            total = int(counts.sum())
            if total:
                reps = np.repeat(np.arange(probe.size, dtype=np.int64), counts)
                starts = np.repeat(lo, counts)
                local = np.arange(total, dtype=np.int64) - np.repeat(
                    np.concatenate([[0], np.cumsum(counts)[:-1]]), counts
                )
                cand = acc[order[starts + local]]
                q = reps // off_keys.size
                d = np.abs(1.0 - herm_inner(pool[block[q]], pool[cand]))
                np.logical_or.at(conflict, q, d < spacing)
            survivors = block[~conflict]
        else:
            survivors = block
        # sequential resolution against this chunk's own acceptances
        fresh: dict[int, list[int]] = {}
        for i in survivors:
            key = int(packed[i])
            cand: list[int] = []
            for ok in off_keys:
                cand.extend(fresh.get(key + int(ok), ()))
            if cand:
                d = np.abs(1.0 - herm_inner(pool[i], pool[np.asarray(cand)]))
                if np.any(d < spacing):
                    continue
            fresh.setdefault(key, []).append(int(i))
            chosen.append(int(i))
    return pool[np.asarray(sorted(chosen), dtype=np.int64)]


# ---------------------------------------------------------------------------
# grid construction
# ---------------------------------------------------------------------------


def _haar_unitary(rng, n):
    if n == 1:
        phase = math.tau * rng.random()
        return np.array([[np.exp(1j * phase)]], dtype=complex)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass
class _System:
    rotation: np.ndarray
    nets: list  # nets[k]: (m_k, n) boundary net points
    parents: list  # parents[k]: (m_k,) index into level k-1 (k >= 1)

    def counts(self):
        return [len(net) for net in self.nets]


class DyadicGrid:
    """Immutable family of dyadic systems with chain-based queries."""

    def __init__(self, config: GridConfig, spacing_scale: float, systems: list):
        self.config = config
        self.spacing_scale = spacing_scale
        self._systems = systems
        k = np.arange(config.depth + 2)
        self.radii = np.tanh(k * config.theta0)
        # shell edges nudged down one ulp-scale so radial projections of unit
        # vectors (|x| = 1 +/- 1e-16) land in their intended level
        self._level_edges = np.maximum(self.radii - 1e-13, 0.0)
        self.shell_volumes = np.diff(
            [geometry.ball_volume(config.dim, r) for r in self.radii]
        )
        self._ancestors = [None] * config.systems
        self._deep_index = [None] * config.systems
        self._cover_radius = [None] * config.systems

    # -- basic structure --------------------------------------------------

    @property
    def dim(self):
        return self.config.dim

    @property
    def depth(self):
        return self.config.depth

    @property
    def n_systems(self):
        return self.config.systems

    def spacing(self, level: int) -> float:
        return self.spacing_scale * self.config.delta**level

    def level_count(self, system: int, level: int) -> int:
        return len(self._systems[system].nets[level])

    def net(self, system: int, level: int) -> np.ndarray:
        return self._systems[system].nets[level]

    def parent_index(self, system: int, level: int) -> np.ndarray:
        return self._systems[system].parents[level]

    def child_counts(self, system: int, level: int) -> np.ndarray:
        if level >= self.depth:
            return np.zeros(self.level_count(system, level), dtype=np.int64)
        return np.bincount(
            self._systems[system].parents[level + 1],
            minlength=self.level_count(system, level),
        )

    def kube_keys(self, system: int | None = None):
        systems = range(self.n_systems) if system is None else (system,)
        for ell in systems:
            for k in range(self.depth + 1):
                for j in range(self.level_count(ell, k)):
                    yield (ell, k, j)

    def total_kubes(self) -> int:
        return sum(len(net) for s in self._systems for net in s.nets)

    def kube_center(self, system: int, level: int, j: int) -> np.ndarray:
        return self.radii[level] * self._systems[system].nets[level][j]

    def shell_tail(self, level: int) -> float:
        # volume of levels `level`..depth
        return float(np.sum(self.shell_volumes[level:]))

    # -- chain queries -----------------------------------------------------

    def level_of(self, z) -> np.ndarray:
        az = np.atleast_1d(norm(z))
        return np.searchsorted(self._level_edges, az, side="right") - 1

    def horizon_radius(self) -> float:
        return float(self.radii[-1])

    def _deep(self, system: int):
        if self._deep_index[system] is None:
            net = self._systems[system].nets[self.depth]
            self._deep_index[system] = _NearestIndex(net, self.dim)
        return self._deep_index[system]

    def _anc(self, system: int):
        if self._ancestors[system] is None:
            sysd = self._systems[system]
            m = len(sysd.nets[self.depth])
            table = np.empty((m, self.depth + 1), dtype=np.int64)
            table[:, self.depth] = np.arange(m)
            for k in range(self.depth - 1, -1, -1):
                table[:, k] = sysd.parents[k + 1][table[:, k + 1]]
            self._ancestors[system] = table
        return self._ancestors[system]

    def deep_index(self, system: int, zeta) -> np.ndarray:
        zeta = np.atleast_2d(np.asarray(zeta, dtype=complex))
        return self._deep(system).nearest(zeta)

    def chain_at(self, system: int, zeta, level: int) -> np.ndarray:
        return self._anc(system)[self.deep_index(system, zeta), level]

    def _boundary_of(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        az = norm(z)
        safe = np.where(az > 0.0, az, 1.0)[:, None]
        zeta = z / safe
        if np.any(az == 0.0):
            e1 = np.zeros(self.dim, dtype=complex)
            e1[0] = 1.0
            zeta = np.where((az == 0.0)[:, None], e1, zeta)
        return zeta

    def locate(self, system: int, z, level: int) -> np.ndarray:
        """Boundary-chain cube index of z at the requested level."""
        if level > self.depth:
            raise ValueError("level beyond grid depth")
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if np.any(self.level_of(z) > self.depth):
            raise ValueError("point beyond the depth horizon")
        return self._anc(system)[self.deep_index(system, self._boundary_of(z)), level]

    def kube_of(self, system: int, z):
        """(level, index) of the unique kube containing each point."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        levels = self.level_of(z)
        if np.any(levels > self.depth):
            raise ValueError("point beyond the depth horizon")
        deep = self.deep_index(system, self._boundary_of(z))
        anc = self._anc(system)
        idx = anc[deep, levels]
        return levels, idx

    def kube_contains(self, system: int, level: int, j: int, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        levels = self.level_of(z)
        ok = levels == level
        out = np.zeros(z.shape[0], dtype=bool)
        if np.any(ok):
            deep = self.deep_index(system, self._boundary_of(z[ok]))
            out[ok] = self._anc(system)[deep, level] == j
        return out

    def tent_contains(self, system: int, level: int, j: int, z) -> np.ndarray:
        """Membership in the tent of kube (system, level, j), horizon-truncated."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        levels = self.level_of(z)
        ok = (levels >= level) & (levels <= self.depth)
        out = np.zeros(z.shape[0], dtype=bool)
        if np.any(ok):
            deep = self.deep_index(system, self._boundary_of(z[ok]))
            out[ok] = self._anc(system)[deep, level] == j
        return out

    def ancestor_path(self, system: int, z):
        """Cube indices at levels 0..level(z) for a batch of points."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        levels = self.level_of(z)
        deep = self.deep_index(system, self._boundary_of(z))
        return levels, self._anc(system)[deep]

    # -- tent approximation of Carleson tents ------------------------------

    def covering_radius(self, system: int) -> float:
        """Measured rho covering radius of the deepest net (with 30% slack)."""
        if self._cover_radius[system] is None:
            rng = Sampler(self.config.seed, self.dim, stream=905 + system).rng()
            pts = geometry.sample_unit_sphere(rng, 32768, self.dim)
            idx = self.deep_index(system, pts)
            net = self._systems[system].nets[self.depth]
            d = np.abs(1.0 - herm_inner(pts, net[idx]))
            self._cover_radius[system] = 1.3 * float(np.max(d))
        return self._cover_radius[system]

    def _cap_inside_cube(self, system: int, level: int, j: int, zeta, rho_radius):
        """Exact-by-construction check that the level-``level`` chain cube
        contains the boundary cap of rho-radius ``rho_radius`` about zeta.

        Chain cubes are unions of deepest-level nearest-point cells, and
        d = sqrt(rho) is a metric on the sphere, so the cap can only meet a
        foreign cell if some deepest net point with a foreign ancestor lies
        within (sqrt(r) + sqrt(cover))^2 of zeta.
        """
        if level == 0:
            return True
        if rho_radius >= 2.0:
            return False
        reach = (math.sqrt(rho_radius) + math.sqrt(self.covering_radius(system))) ** 2
        net = self._systems[system].nets[self.depth]
        d = np.abs(1.0 - herm_inner(zeta, net))
        near = np.flatnonzero(d <= reach)
        if near.size == 0:  # pragma: no cover - covering makes this impossible
            return False
        return bool(np.all(self._anc(system)[near, level] == j))

    def cover_tent(self, z):
        """A kube whose tent contains the Carleson tent T_z, deepest found."""
        z = np.asarray(z, dtype=complex)
        az = float(norm(z))
        if az == 0.0:
            return (0, 0, 0)
        lev = int(self.level_of(z[None, :])[0])
        if lev > self.depth:
            raise ValueError("point beyond the depth horizon")
        t = 1.0 - az
        zeta = z / az
        # boundary shadow of T_z: |1 - <w/|w|, zeta>| <= ((1-|w|) + t)/|w| < 2t/(1-t)
        shadow_r = 2.0 * t / max(1.0 - t, 1e-12)
        k_top = int(self.level_of(np.atleast_2d((1.0 - t) * zeta))[0])
        best = (0, 0, 0)
        best_level = -1
        for system in range(self.n_systems):
            for k in range(min(k_top, self.depth), 0, -1):
                if k <= best_level:
                    break
                j = int(self.chain_at(system, zeta[None, :], k)[0])
                if self._cap_inside_cube(system, k, j, zeta, shadow_r):
                    best = (system, k, j)
                    best_level = k
                    break
        return best

    # -- serialization ------------------------------------------------------

    def save(self, path):
        arrays = {
            "format_version": np.array([FORMAT_VERSION]),
            "config_json": np.frombuffer(self.config.to_json().encode(), dtype=np.uint8),
            "spacing_scale": np.array([self.spacing_scale]),
        }
        for i, s in enumerate(self._systems):
            arrays[f"sys{i}_rot"] = s.rotation
            for k, net in enumerate(s.nets):
                arrays[f"sys{i}_net{k}"] = net
            for k in range(1, len(s.parents)):
                arrays[f"sys{i}_par{k}"] = s.parents[k]
        np.savez_compressed(path, **arrays)

    @staticmethod
    def load(path) -> "DyadicGrid":
        data = np.load(path, allow_pickle=False)
        version = int(data["format_version"][0])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported grid file version {version}")
        config = GridConfig.from_json(bytes(data["config_json"]).decode())
        systems = []
        for i in range(config.systems):
            nets = [data[f"sys{i}_net{k}"] for k in range(config.depth + 1)]
            parents = [np.array([-1], dtype=np.int64)]
            parents += [
                data[f"sys{i}_par{k}"].astype(np.int64) for k in range(1, config.depth + 1)
            ]
            systems.append(_System(rotation=data[f"sys{i}_rot"], nets=nets, parents=parents))
        return DyadicGrid(config, float(data["spacing_scale"][0]), systems)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.config.to_json().encode())
        h.update(np.array([self.spacing_scale]).tobytes())
        for s in self._systems:
            h.update(np.ascontiguousarray(s.rotation).tobytes())
            for net in s.nets:
                h.update(np.ascontiguousarray(net).tobytes())
            for par in s.parents[1:]:
                h.update(np.ascontiguousarray(par).tobytes())
        return h.hexdigest()


def _build_system(config: GridConfig, spacing_scale: float, rng, depth: int):
    n = config.dim
    rotation = _haar_unitary(rng, n)
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    nets = [np.atleast_2d(rotation @ e1)]
    parents = [np.array([-1], dtype=np.int64)]
    for k in range(1, depth + 1):
        spacing = spacing_scale * config.delta**k
        expect = int(len(nets[-1]) * config.delta**-n) + 8
        fresh = geometry.sample_unit_sphere(rng, int(config.pool_factor * expect), n)
        pool = np.concatenate([nets[-1], fresh], axis=0)
        net = _greedy_net(pool, spacing, keep_first=len(nets[-1]))
        prev = nets[-1]
        cap_total = config.child_cap * len(prev)
        if len(net) > cap_total:
            # greedy fluctuation above the mean refinement ratio: drop the
            # newest accepts (the nested prefix is always kept) so the child
            # cap is globally satisfiable
            net = net[:cap_total]
        par = _NearestIndex(prev, n).nearest(net)
        par = _enforce_child_cap(net, prev, par, config.child_cap)
        nets.append(net)
        parents.append(par)
    return _System(rotation=rotation, nets=nets, parents=parents)


def _enforce_child_cap(net, prev, parent, cap):
    parent = parent.copy()
    counts = np.bincount(parent, minlength=len(prev))
    over = np.flatnonzero(counts > cap)
    for p in over:
        kids = np.flatnonzero(parent == p)
        d = np.abs(1.0 - herm_inner(net[kids], prev[p]))
        move = kids[np.argsort(d, kind="stable")[cap:]]
        for child in move:
            d_all = np.abs(1.0 - herm_inner(net[child], prev))
            for alt in np.argsort(d_all, kind="stable"):
                if counts[alt] < cap:
                    parent[child] = alt
                    counts[alt] += 1
                    counts[p] -= 1
                    break
            else:  # pragma: no cover - capacity argument prevents this
                raise RuntimeError("child cap cannot be satisfied")
    return parent


def build_grid(config: GridConfig) -> DyadicGrid:
    """Construct the seeded dyadic systems described by ``config``."""
    n = config.dim

    # calibrate the net spacing so every root keeps at most child_cap children
    spacing_scale = 2.0
    for _ in range(64):
        probe = geometry.sample_unit_sphere(
            Sampler(config.seed, n, stream=12).rng(),
            int(config.pool_factor * 8 * config.delta**-n) + 64,
            n,
        )
        net1 = _greedy_net(probe, spacing_scale * config.delta)
        if len(net1) <= config.child_cap:
            break
        spacing_scale *= 1.25
    else:  # pragma: no cover
        raise RuntimeError("spacing calibration failed")

    projected = config.systems * sum(
        (len(net1) + 2) * config.delta ** (-n * (k - 1)) for k in range(1, config.depth + 1)
    )
    if projected > config.max_kubes:
        raise ValueError(f"projected kube count {projected:.2e} exceeds cap {config.max_kubes:.0e}")

    for _ in range(20):
        probes = []
        for i in range(config.systems):
            rng = Sampler(config.seed, n, stream=20 + i).rng()
            probes.append(_build_system(config, spacing_scale, rng, 1))
        if all(len(s.nets[1]) <= config.child_cap for s in probes):
            break
        spacing_scale *= 1.25  # a system's level-1 net overflowed the root
    else:  # pragma: no cover
        raise RuntimeError("spacing calibration failed across systems")
    systems = []
    for i in range(config.systems):
        rng = Sampler(config.seed, n, stream=20 + i).rng()
        systems.append(_build_system(config, spacing_scale, rng, config.depth))
    grid = DyadicGrid(config, spacing_scale, systems)
    if grid.total_kubes() > config.max_kubes:
        raise ValueError("kube count exceeds resource cap")
    return grid


def locate(grid: DyadicGrid, system: int, z, level: int):
    return grid.locate(system, z, level)


def cover_tent(grid: DyadicGrid, z):
    return grid.cover_tent(z)


# ---------------------------------------------------------------------------
# cached tent statistics
# ---------------------------------------------------------------------------


def _sphere_cap_sample(rng, center, r, count, n):
    """Surface-uniform directions in {zeta : |1 - <zeta, center>| < r}."""
    if r >= 2.0:
        return geometry.sample_unit_sphere(rng, count, n)
    if n == 1:
        half = 2.0 * math.asin(min(1.0, r / 2.0))
        theta = (rng.random(count) * 2.0 - 1.0) * half
        phase = center[0] / abs(center[0])
        return (phase * np.exp(1j * theta))[:, None]
    frame = geometry.radial_frame(center)
    out = np.empty((count, n), dtype=complex)
    have = 0
    while have < count:
        m = max(2 * (count - have), 64)
        u = 1.0 - r * geometry._unit_disk(rng, m)
        au2 = np.abs(u) ** 2
        keep = au2 < 1.0
        if n > 2:
            # density (1-|u|^2)^(n-2): thin by rejection against the envelope 1
            keep &= rng.random(m) < (1.0 - np.clip(au2, 0.0, 1.0)) ** (n - 2)
        u = u[keep]
        eta = geometry.sample_unit_sphere(rng, u.size, n - 1)
        xi = np.concatenate(
            [u[:, None], np.sqrt(np.maximum(1.0 - np.abs(u) ** 2, 0.0))[:, None] * eta], axis=1
        )
        w = geometry.frame_point(frame, xi)
        take = min(count - have, w.shape[0])
        out[have : have + take] = w[:take]
        have += take
    return out


def _lux_from_levels(pairs, psi, rel_tol=1e-4):
    """Luxembourg constant for a simple function given (value, weight) levels.

    Solves sum_i w_i * psi(a_i / c) = 1 for c by bisection; weights are the
    fractions of the averaging region covered by each value.
    """
    pairs = [(float(a), float(w)) for a, w in pairs if a > 0.0 and w > 0.0]
    if not pairs:
        return 0.0

    def mass(c):
        return sum(w * float(psi(a / c)) for a, w in pairs)

    hi = max(a for a, _ in pairs)
    for _ in range(200):
        if mass(hi) <= 1.0:
            break
        hi *= 2.0
    lo = hi
    bracketed = False
    for _ in range(200):
        half = lo / 2.0
        if mass(half) > 1.0:
            lo = half
            bracketed = True
            break
        lo = half
        hi = half
    if not bracketed:
        return hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mass(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def _covers_ball(region, horizon_radius):
    return (
        isinstance(region, geometry.EuclideanBall)
        and float(norm(region.center)) == 0.0
        and region.radius >= horizon_radius
    )


class TentCache:
    """Cached Monte Carlo statistics of a built grid.

    Shadow fractions, tent volumes, and per-symbol tent averages are each
    computed once per kube from a substream derived from the kube key, so
    the cached values do not depend on the order in which they are first
    requested.
    """

    def __init__(self, grid: DyadicGrid, tent_budget=8192, calib_budget=2048, region_budget=65536):
        self.grid = grid
        self.tent_budget = tent_budget
        self.calib_budget = calib_budget * (4 if grid.dim >= 2 else 1)
        self.region_budget = region_budget
        self._shadow = {}
        self._stats = {}
        self._hist = {}
        n = grid.dim
        delta = grid.config.delta
        self._drift = 1.5 / (1.0 - math.sqrt(delta)) ** 2 + 1.0
        self._base = Sampler(grid.config.seed ^ 0x5EED, n, stream=1)

    # -- deterministic substreams -----------------------------------------

    def _kube_sampler(self, key, salt=0):
        system, level, j = key
        token = ((system * 64 + level) * 2**24 + j) * 16 + salt
        return self._base.substream(token)

    # -- shadow fraction and volumes ----------------------------------------

    def shadow(self, key):
        """(sigma, stderr, cap_radius): boundary-measure fraction of the cube."""
        if key in self._shadow:
            return self._shadow[key]
        system, level, j = key
        grid = self.grid
        n = grid.dim
        if level == 0:
            out = (1.0, 0.0, 2.0)
            self._shadow[key] = out
            return out
        center = grid.net(system, level)[j]
        cap_r = min(2.0, self._drift * grid.spacing(level))
        dmax = None
        for attempt in range(3):
            rng = self._kube_sampler(key, salt=1 + attempt).rng()
            pts = _sphere_cap_sample(rng, center, cap_r, self.calib_budget, n)
            hit = grid.chain_at(system, pts, level) == j
            if np.any(hit):
                dmax = float(np.max(np.abs(1.0 - herm_inner(pts[hit], center))))
                if dmax < 0.9 * cap_r or cap_r >= 2.0:
                    break
            cap_r = min(2.0, cap_r * 2.0)
        r_eff = cap_r if dmax is None else min(2.0, max(1.15 * dmax, 0.25 * cap_r))
        rng = self._kube_sampler(key, salt=5).rng()
        m = self.tent_budget
        pts = _sphere_cap_sample(rng, center, r_eff, m, n)
        hits = int(np.count_nonzero(grid.chain_at(system, pts, level) == j))
        frac = geometry.sphere_cap_fraction(n, r_eff)
        p = max(hits, 0.5) / m
        sigma = frac * p
        stderr = frac * math.sqrt(max(p * (1.0 - p), 0.0) / m)
        out = (sigma, stderr, r_eff)
        self._shadow[key] = out
        return out

    def tent_volume(self, key) -> MCEstimate:
        sigma, err, _ = self.shadow(key)
        tail = self.grid.shell_tail(key[1])
        return MCEstimate(
            value=sigma * tail, stderr=err * tail, samples=self.tent_budget, seed=self._base.seed
        )

    def kube_volume(self, key) -> MCEstimate:
        sigma, err, _ = self.shadow(key)
        shell = float(self.grid.shell_volumes[key[1]])
        return MCEstimate(
            value=sigma * shell, stderr=err * shell, samples=self.tent_budget, seed=self._base.seed
        )

    # -- tent sampling -------------------------------------------------------

    def tent_sample(self, key, count, salt=0):
        """Uniform points of the (horizon-truncated) tent of ``key``."""
        system, level, j = key
        grid = self.grid
        n = grid.dim
        _, _, cap_r = self.shadow(key)
        center = grid.net(system, level)[j] if level > 0 else None
        shells = grid.shell_volumes[level:]
        weights = shells / shells.sum()
        alloc = np.floor(weights * count).astype(int)
        for i in np.argsort(-(weights * count - alloc), kind="stable")[: count - alloc.sum()]:
            alloc[i] += 1
        rng = self._kube_sampler(key, salt=8 + salt).rng()
        out = []
        for offset, m in enumerate(alloc):
            if m == 0:
                continue
            lev = level + offset
            dirs = np.empty((m, n), dtype=complex)
            have = 0
            guard = 0
            while have < m:
                batch = max(2 * (m - have), 64)
                cand = (
                    _sphere_cap_sample(rng, center, cap_r, batch, n)
                    if level > 0
                    else geometry.sample_unit_sphere(rng, batch, n)
                )
                keep = grid.chain_at(system, cand, level) == j
                sel = cand[keep]
                take = min(m - have, sel.shape[0])
                dirs[have : have + take] = sel[:take]
                have += take
                guard += 1
                if guard > 200:  # pragma: no cover - degenerate cube
                    raise RuntimeError(f"tent sampler stalled on kube {key}")
            lo, hi = grid.radii[lev], grid.radii[lev + 1]
            u = rng.random(m)
            r = (lo ** (2 * n) + u * (hi ** (2 * n) - lo ** (2 * n))) ** (1.0 / (2 * n))
            out.append(dirs * r[:, None])
        return np.concatenate(out, axis=0)

    # -- symbol statistics over tents ----------------------------------------

    def _stat(self, name, key, token, fn):
        cache_key = (name, key, token)
        if cache_key not in self._stats:
            self._stats[cache_key] = fn()
        return self._stats[cache_key]

    def symbol_tent_mean(self, key, b) -> complex:
        def compute():
            pts = self.tent_sample(key, self.tent_budget, salt=0)
            return complex(np.mean(b.value(pts)))

        return self._stat("mean", key, b.key, compute)

    def symbol_tent_osc(self, key, b) -> float:
        def compute():
            mean = self.symbol_tent_mean(key, b)
            pts = self.tent_sample(key, self.tent_budget, salt=0)
            return float(np.mean(np.abs(b.value(pts) - mean)))

        return self._stat("osc", key, b.key, compute)

    def symbol_tail_fractions(self, key, b, lambdas, budget=None):
        budget = budget or self.tent_budget

        def compute():
            mean = self.symbol_tent_mean(key, b)
            pts = self.tent_sample(key, budget, salt=1)
            dev = np.abs(b.value(pts) - mean)
            return np.array([np.mean(dev > lam) for lam in lambdas])

        return self._stat("tail", key, (b.key, tuple(float(x) for x in lambdas), budget), compute)

    def symbol_deviation_samples(self, key, b, budget=None):
        budget = budget or self.tent_budget
        mean = self.symbol_tent_mean(key, b)
        pts = self.tent_sample(key, budget, salt=2)
        return np.abs(b.value(pts) - mean)

    # -- test-function statistics ---------------------------------------------

    def region_hist(self, region):
        """Fraction of each tent's overlap with ``region``: |R cap tent|/|R|."""
        token = region.cache_key()
        if token in self._hist:
            return self._hist[token]
        grid = self.grid
        horizon = grid.horizon_radius()
        if _covers_ball(region, horizon):
            out = {"covers_ball": True}
            self._hist[token] = out
            return out
        digest = hashlib.sha256(repr(token).encode()).digest()
        sampler = self._base.substream(int.from_bytes(digest[:6], "big"))
        pts = region.sample(sampler.rng(), self.region_budget)
        inside = norm(pts) < horizon
        table = {"covers_ball": False}
        for system in range(grid.n_systems):
            lev, anc = grid.ancestor_path(system, pts)
            lev = np.minimum(lev, grid.depth)
            for k in range(grid.depth + 1):
                mask = inside & (lev >= k)
                if not np.any(mask):
                    continue
                counts = np.bincount(anc[mask, k], minlength=grid.level_count(system, k))
                for j in np.flatnonzero(counts):
                    table[(system, k, int(j))] = counts[j] / self.region_budget
        self._hist[token] = table
        return table

    def region_tent_fraction(self, key, region) -> float:
        table = self.region_hist(region)
        if table.get("covers_ball"):
            return 1.0  # interpreted against the tent's own volume
        return table.get(key, 0.0)

    def abs_avg(self, key, f) -> float:
        """Tent average of |f| for a structured test function."""

        def compute():
            vol = self.tent_volume(key).value
            total = 0.0
            for coeff, region in f.terms:
                table = self.region_hist(region)
                if table.get("covers_ball"):
                    total += abs(coeff) * vol
                else:
                    total += abs(coeff) * table.get(key, 0.0) * region.volume
            return total / vol

        return self._stat("fabs", key, f.key, compute)

    def tent_lux(self, key, f, psi) -> float:
        """Luxembourg average of |f| over the tent of ``key``."""

        def compute():
            vol = self.tent_volume(key).value
            pairs = []
            for coeff, region in f.terms:
                table = self.region_hist(region)
                if table.get("covers_ball"):
                    w = 1.0
                else:
                    w = table.get(key, 0.0) * region.volume / vol
                pairs.append((abs(coeff), min(w, 1.0)))
            return _lux_from_levels(pairs, psi)

        return self._stat("flux", key, (f.key, psi.key), compute)

    def weighted_osc_avg(self, key, b, f) -> float:
        """Tent average of |b - <b>_tent| |f| via region-side sampling."""

        def compute():
            mean = self.symbol_tent_mean(key, b)
            vol = self.tent_volume(key).value
            system, level, j = key
            total = 0.0
            for t, (coeff, region) in enumerate(f.terms):
                sampler = self._kube_sampler(key, salt=9).substream(t)
                pts = region.sample(sampler.rng(), 4096)
                hit = self.grid.tent_contains(system, level, j, pts)
                if np.any(hit):
                    dev = np.abs(b.value(pts[hit]) - mean)
                    total += abs(coeff) * region.volume * float(np.sum(dev)) / 4096
            return total / vol

        return self._stat("wosc", key, (b.key, f.key), compute)

    # -- sampled family of tents -------------------------------------------

    def sample_tents(self, per_level=64, system=None, min_level=0):
        """Deterministic subsample of kube keys, up to per_level per level."""
        keys = []
        systems = range(self.grid.n_systems) if system is None else (system,)
        for ell in systems:
            for k in range(min_level, self.grid.depth + 1):
                m = self.grid.level_count(ell, k)
                if m <= per_level:
                    idx = range(m)
                else:
                    rng = self._base.substream(7000 + 64 * ell + k).rng()
                    idx = np.sort(rng.choice(m, size=per_level, replace=False))
                keys.extend((ell, k, int(j)) for j in idx)
        return keys


class TentRegion:
    """Region adapter for a dyadic tent, usable inside test functions."""

    def __init__(self, cache: TentCache, key):
        self.cache = cache
        self.key = key

    @property
    def dim(self):
        return self.cache.grid.dim

    @property
    def volume(self):
        return self.cache.tent_volume(self.key).value

    def contains(self, w):
        system, level, j = self.key
        return self.cache.grid.tent_contains(system, level, j, w)

    def sample(self, rng, count):
        # self-contained rejection from the shadow cap; independent of the
        # cache's own substreams so the caller's rng drives reproducibility
        system, level, j = self.key
        grid = self.cache.grid
        n = grid.dim
        _, _, cap_r = self.cache.shadow(self.key)
        center = grid.net(system, level)[j] if level > 0 else None
        lo_r = grid.radii[level]
        hi_r = grid.radii[-1]
        out = np.empty((count, n), dtype=complex)
        have = 0
        guard = 0
        while have < count:
            m = max(2 * (count - have), 128)
            dirs = (
                _sphere_cap_sample(rng, center, cap_r, m, n)
                if level > 0
                else geometry.sample_unit_sphere(rng, m, n)
            )
            u = rng.random(m)
            r = (lo_r ** (2 * n) + u * (hi_r ** (2 * n) - lo_r ** (2 * n))) ** (1.0 / (2 * n))
            pts = dirs * r[:, None]
            keep = grid.tent_contains(system, level, j, pts)
            sel = pts[keep]
            take = min(count - have, sel.shape[0])
            out[have : have + take] = sel[:take]
            have += take
            guard += 1
            if guard > 400:  # pragma: no cover
                raise RuntimeError("tent region sampler stalled")
        return out

    def cache_key(self):
        return ("tent", self.key, self.cache.grid.content_hash()[:16])


# ---------------------------------------------------------------------------
# tent expansions (small hyperbolic neighborhoods of a tent)
# ---------------------------------------------------------------------------


class TentExpansion:
    """Hyperbolic eta-neighborhood {z : d(z, tent) < eta} of a dyadic tent."""

    def __init__(self, cache: TentCache, key, eta: float, probes: int = 64):
        self.cache = cache
        self.key = key
        self.eta = eta
        self.probes = probes
        grid = cache.grid
        system, level, j = key
        _, _, cap_r = cache.shadow(key)
        drop = math.ceil(eta / grid.config.theta0)
        self.level_lo = max(level - drop, 0)
        self.cap_r = min(
            2.0, cap_r + 8.0 * math.tanh(eta) * grid.config.delta ** max(level - 1, 0)
        )
        self.center = grid.net(system, level)[j] if level > 0 else None

    def contains(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        system, level, j = self.key
        grid = self.cache.grid
        out = grid.tent_contains(system, level, j, z).copy()
        todo = np.flatnonzero(~out)
        rng = self.cache._kube_sampler(self.key, salt=12).rng()
        for i in todo:
            ball = geometry.BergmanBall(z[i], self.eta)
            probes = ball.sample(rng, self.probes)
            probes = probes[norm(probes) < 1.0]
            if probes.size and np.any(grid.tent_contains(system, level, j, probes)):
                out[i] = True
        return out

    def bounding_volume(self):
        grid = self.cache.grid
        frac = geometry.sphere_cap_fraction(grid.dim, self.cap_r)
        return frac * grid.shell_tail(self.level_lo)

    def sample_bounding(self, rng, count):
        grid = self.cache.grid
        n = grid.dim
        shells = grid.shell_volumes[self.level_lo :]
        weights = shells / shells.sum()
        alloc = np.floor(weights * count).astype(int)
        for i in np.argsort(-(weights * count - alloc), kind="stable")[: count - alloc.sum()]:
            alloc[i] += 1
        out = []
        for offset, m in enumerate(alloc):
            if m == 0:
                continue
            lev = self.level_lo + offset
            dirs = (
                _sphere_cap_sample(rng, self.center, self.cap_r, m, n)
                if self.center is not None
                else geometry.sample_unit_sphere(rng, m, n)
            )
            lo, hi = grid.radii[lev], grid.radii[lev + 1]
            u = rng.random(m)
            r = (lo ** (2 * n) + u * (hi ** (2 * n) - lo ** (2 * n))) ** (1.0 / (2 * n))
            out.append(dirs * r[:, None])
        return np.concatenate(out, axis=0)

    def expansion_stats(self, b=None, budget=4096):
        """(|tent_E| estimate, and if b given, average of |b - <b>_tent| on it)."""
        rng = self.cache._kube_sampler(self.key, salt=13).rng()
        pts = self.sample_bounding(rng, budget)
        hit = self.contains(pts)
        vol = self.bounding_volume() * float(np.mean(hit))
        if b is None:
            return vol, None
        mean = self.cache.symbol_tent_mean(self.key, b)
        if not np.any(hit):
            return vol, 0.0
        avg = float(np.mean(np.abs(b.value(pts[hit]) - mean)))
        return vol, avg


# ---------------------------------------------------------------------------
# layer decomposition of comparable-average tents
# ---------------------------------------------------------------------------

TILDE_GAP = 4  # generation gap defining the almost-disjoint inflations


@dataclass
class LayerDecomposition:
    """Tents of one system whose Luxembourg average falls in (4^-k-1, 4^-k].

    ``generations`` maps (level, index) to the length of its longest chain
    of strictly containing members, i.e. the maximality recursion: the
    maximal members form generation 0, members maximal among the rest form
    generation 1, and so on.  The disjointified sets E_K drop members of
    the next generation, the inflations drop generation + TILDE_GAP, and
    the deep unions S collect descendants exactly 2^k generations down.
    """

    cache: TentCache
    system: int
    bin_index: int
    generations: dict

    def members(self):
        return sorted(self.generations)

    def _gen_masks(self):
        grid = self.cache.grid
        masks = []
        for k in range(grid.depth + 1):
            arr = np.full(grid.level_count(self.system, k), -1, dtype=np.int64)
            masks.append(arr)
        for (level, j), gen in self.generations.items():
            masks[level][j] = gen
        return masks

    def path_max_generation(self, z):
        """Largest member generation on each point's ancestor path (-1 if none)."""
        grid = self.cache.grid
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        levels, anc = grid.ancestor_path(self.system, z)
        levels = np.minimum(levels, grid.depth)
        masks = self._gen_masks()
        best = np.full(z.shape[0], -1, dtype=np.int64)
        for k in range(grid.depth + 1):
            live = levels >= k
            if not np.any(live):
                break
            g = masks[k][anc[live, k]]
            best[live] = np.maximum(best[live], g)
        return best

    def tilde_overlap(self, z):
        """Number of inflated sets containing each point (at most TILDE_GAP)."""
        best = self.path_max_generation(z)
        return np.where(best < 0, 0, np.minimum(TILDE_GAP, best + 1))

    def _on_path(self, member, z):
        system = self.system
        level, j = member
        return self.cache.grid.tent_contains(system, level, j, z)

    def in_disjoint_part(self, member, z):
        gen = self.generations[member]
        return self._on_path(member, z) & (self.path_max_generation(z) == gen)

    def in_inflated_part(self, member, z):
        gen = self.generations[member]
        return self._on_path(member, z) & (self.path_max_generation(z) < gen + TILDE_GAP)

    def in_deep_part(self, member, z):
        gen = self.generations[member]
        gap = 2**self.bin_index
        return self._on_path(member, z) & (self.path_max_generation(z) >= gen + gap)

    def deep_fraction(self, member, budget=8192):
        """Sampled |S(member)| / |tent(member)|, with binomial stderr."""
        key = (self.system, member[0], member[1])
        pts = self.cache.tent_sample(key, budget, salt=3)
        frac = float(np.mean(self.in_deep_part(member, pts)))
        err = math.sqrt(max(frac * (1.0 - frac), 0.0) / budget)
        return frac, err


def layer_decomposition(cache: TentCache, f, k: int, psi, system: int = 0, max_tents=4000):
    """Collect the tents of one system whose Luxembourg average of |f| lies in
    (4^-(k+1), 4^-k], and assign maximality generations."""
    grid = cache.grid
    lo, hi = 4.0 ** (-k - 1), 4.0**-k

    candidates = set()
    covers = False
    for _, region in f.terms:
        table = cache.region_hist(region)
        if table.get("covers_ball"):
            covers = True
        candidates.update(key for key in table if isinstance(key, tuple) and key[0] == system)
    if covers:
        candidates.update(key for key in grid.kube_keys(system))
    candidates.add((system, 0, 0))
    if len(candidates) > max_tents:
        # keep the shallowest tents; deeper ones cannot dominate the battery
        candidates = set(sorted(candidates, key=lambda key: (key[1], key[2]))[:max_tents])

    members = {}
    for key in sorted(candidates):
        avg = cache.tent_lux(key, f, psi)
        if lo < avg <= hi:
            members[(key[1], key[2])] = -1

    # generation = length of the longest chain of strictly containing members
    anc_cache = {}
    for level, j in sorted(members):
        gen = 0
        idx = j
        for lev in range(level, 0, -1):
            idx = grid.parent_index(system, lev)[idx]
            if (lev - 1, idx) in members:
                gen = max(gen, members[(lev - 1, idx)] + 1)
        members[(level, j)] = gen
        anc_cache[(level, j)] = gen

    return LayerDecomposition(cache=cache, system=system, bin_index=k, generations=members)
