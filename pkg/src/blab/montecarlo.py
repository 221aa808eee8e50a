"""Seeded Monte Carlo primitives with reproducible parallel-safe substreams.

The generator is counter-based (Philox keyed by (seed, stream)), so any
task can be replayed from the (seed, stream, budget) triple recorded in an
experiment's output header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Sampler:
    """Handle for one reproducible random stream in dimension ``dim``."""

    seed: int
    dim: int
    stream: int = 0

    def rng(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, i: int) -> "Sampler":
        # mix rather than add so nested derivations cannot collide
        child = (int(self.stream) * 1000003 + int(i) + 1) & _MASK64
        return Sampler(self.seed, self.dim, child)


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo value with its standard error and provenance."""

    value: complex
    stderr: float
    samples: int
    seed: int

    def within(self, target, sigmas: float = 3.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr + 1e-15


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    hits: int
    samples: int
    region: str = ""

    def lower(self, sigmas: float = 3.0) -> float:
        return self.value - sigmas * self.stderr

    def upper(self, sigmas: float = 3.0) -> float:
        return self.value + sigmas * self.stderr


def sample_ball(sampler: Sampler, count: int) -> np.ndarray:
    """Uniform points of the unit ball with respect to Lebesgue volume."""
    return geometry.sample_unit_ball_points(sampler.rng(), count, sampler.dim)


def _value_stats(vals):
    vals = np.asarray(vals)
    if np.iscomplexobj(vals):
        mean = np.mean(vals)
        var = np.var(vals.real) + np.var(vals.imag)
    else:
        mean = float(np.mean(vals))
        var = float(np.var(vals))
    return mean, math.sqrt(max(var, 0.0) / vals.size)


def integral_mc(h, region, sampler: Sampler, budget: int) -> MCEstimate:
    """vol(region) * mean of h over uniform samples of the region."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    vol = region.volume
    if vol is None:
        raise ValueError("integral_mc needs a region with known volume")
    pts = region.sample(sampler.rng(), budget)
    mean, err = _value_stats(h(pts))
    return MCEstimate(value=vol * mean, stderr=vol * err, samples=budget, seed=sampler.seed)


def measure_mc(region, sampler: Sampler, budget: int) -> MeasureEstimate:
    """Volume of a region estimated from an exactly sampleable superset."""
    bound = region if region.volume is not None else region.bounding_region()
    pts = bound.sample(sampler.rng(), budget)
    hits = int(np.count_nonzero(region.contains(pts)))
    p = hits / budget
    vol = bound.volume
    return MeasureEstimate(
        value=vol * p,
        stderr=vol * math.sqrt(max(p * (1.0 - p), 0.0) / budget),
        hits=hits,
        samples=budget,
        region=str(region.cache_key()[0]),
    )


def _shell_edges(radius: float, shells: int):
    # dyadic shells in 1-|z|: [0, 1/2], [1/2, 3/4], ... capped at `radius`
    edges = [0.0]
    for s in range(1, shells):
        edges.append(min(radius, 1.0 - 2.0**-s))
    edges.append(radius)
    return [e for i, e in enumerate(edges) if i == 0 or e > edges[i - 1]]


def superlevel_measure(
    g,
    lam: float,
    sampler: Sampler,
    budget: int,
    superset,
    shells: int = 0,
) -> MeasureEstimate:
    """Lebesgue measure of {z in B^n : |g(z)| > lam} inside ``superset``.

    With ``shells > 0`` (only for a ball superset centered at the origin)
    the estimate is stratified over dyadic shells of 1-|z|, each shell
    getting an equal share of the budget.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    n = sampler.dim

    def hit_fraction(pts, m):
        inside = geometry.norm(pts) < 1.0
        vals = np.zeros(pts.shape[0])
        if np.any(inside):
            vals[inside] = np.abs(np.asarray(g(pts[inside])))
        hits = int(np.count_nonzero(inside & (vals > lam)))
        return hits, hits / m

    if shells <= 0:
        pts = superset.sample(sampler.rng(), budget)
        hits, p = hit_fraction(pts, budget)
        vol = superset.volume
        return MeasureEstimate(
            value=vol * p,
            stderr=vol * math.sqrt(max(p * (1.0 - p), 0.0) / budget),
            hits=hits,
            samples=budget,
            region=str(superset.cache_key()[0]),
        )

    if not isinstance(superset, geometry.EuclideanBall) or geometry.norm(superset.center) > 0:
        raise ValueError("stratified estimation expects an origin-centered ball superset")
    edges = _shell_edges(superset.radius, shells)
    rng = sampler.rng()
    total = 0.0
    var = 0.0
    hits_total = 0
    used = 0
    per = max(budget // (len(edges) - 1), 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        vol = geometry.ball_volume(n, hi) - geometry.ball_volume(n, lo)
        d = geometry.sample_unit_sphere(rng, per, n)
        u = rng.random(per)
        r = (lo ** (2 * n) + u * (hi ** (2 * n) - lo ** (2 * n))) ** (1.0 / (2 * n))
        pts = d * r[:, None]
        hits, p = hit_fraction(pts, per)
        total += vol * p
        var += vol**2 * p * (1.0 - p) / per
        hits_total += hits
        used += per
    return MeasureEstimate(
        value=total,
        stderr=math.sqrt(var),
        hits=hits_total,
        samples=used,
        region="stratified-ball",
    )
