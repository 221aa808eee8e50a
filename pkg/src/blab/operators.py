"""Bergman kernel, projections of structured indicators, and commutators.

Closed forms follow from the mean-value property of anti-holomorphic
functions over Euclidean balls and polydisks: projecting the normalized
indicator of a ball centered at z0 gives c_n/(1 - <z, z0>)^(n+1), and the
commutator with an anti-holomorphic symbol conj(b) picks up the factor
conj(b(z)) - conj(b(z0)).  Everything else is stratified Monte Carlo
quadrature over the indicator regions of the test function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import herm_inner, norm
from .montecarlo import MCEstimate, Sampler

KERNEL_GUARD = 1e-14


def normalizing_constant(n: int) -> float:
    """c_n = n!/pi^n."""
    return math.factorial(n) / math.pi**n


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Symbol:
    """A symbol b with pointwise evaluation and (optional) holomorphic gradient.

    ``tail_bound(t)`` bounds sup |b(w)| over {w in B^n : |1 - w_1| >= t} and
    exists for the z_1-dependent family used by the experiments; it feeds the
    analytic exteriors of the superlevel-set estimators.
    """

    key: str
    value: callable
    gradient: callable | None
    holomorphic: bool
    harmonic: bool
    bounded: bool
    sup_bound: float | None = None
    tail_bound: callable | None = None

    def __call__(self, z):
        return self.value(z)


def _log_tail(t):
    # |log x| for |x| in [t, 2], Re x > 0
    m = max(abs(math.log(min(t, 2.0))), math.log(2.0))
    return math.hypot(m, math.pi / 2.0)


def log_symbol() -> Symbol:
    """b(z) = Log(1 - z_1), principal branch (Re(1 - z_1) > 0 on the ball)."""

    def value(z):
        return np.log(1.0 - np.asarray(z)[..., 0])

    def gradient(z):
        z = np.asarray(z)
        g = np.zeros_like(z)
        g[..., 0] = -1.0 / (1.0 - z[..., 0])
        return g

    return Symbol(
        key="log1mz1",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=False,
        tail_bound=_log_tail,
    )


def coordinate_symbol() -> Symbol:
    """b(z) = z_1."""

    def value(z):
        return np.asarray(z)[..., 0]

    def gradient(z):
        z = np.asarray(z)
        g = np.zeros_like(z)
        g[..., 0] = 1.0
        return g

    return Symbol(
        key="z1",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=True,
        sup_bound=1.0,
        tail_bound=lambda t: 1.0,
    )


def monomial_symbol(alpha) -> Symbol:
    """b(z) = z^alpha for a multi-index alpha."""
    alpha = tuple(int(a) for a in alpha)

    def value(z):
        z = np.asarray(z)
        out = np.ones(z.shape[:-1], dtype=complex)
        for j, a in enumerate(alpha):
            if a:
                out = out * z[..., j] ** a
        return out

    def gradient(z):
        z = np.asarray(z)
        g = np.zeros_like(z)
        for j, a in enumerate(alpha):
            if a == 0:
                continue
            part = a * np.ones(z.shape[:-1], dtype=complex)
            for i, ai in enumerate(alpha):
                p = ai - 1 if i == j else ai
                if p:
                    part = part * z[..., i] ** p
            g[..., j] = part
        return g

    return Symbol(
        key=f"mono{alpha}",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=True,
        sup_bound=1.0,
    )


def constant_symbol(c=1.0) -> Symbol:
    c = complex(c)

    def value(z):
        return np.full(np.asarray(z).shape[:-1], c, dtype=complex)

    def gradient(z):
        return np.zeros_like(np.asarray(z, dtype=complex))

    return Symbol(
        key=f"const{c}",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=True,
        sup_bound=abs(c),
        tail_bound=lambda t: abs(c),
    )


def exp_symbol() -> Symbol:
    """b(z) = exp(z_1); bounded and in every exponential oscillation class."""

    def value(z):
        return np.exp(np.asarray(z)[..., 0])

    def gradient(z):
        z = np.asarray(z)
        g = np.zeros_like(z)
        g[..., 0] = np.exp(z[..., 0])
        return g

    return Symbol(
        key="expz1",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=True,
        sup_bound=math.e,
        tail_bound=lambda t: math.e,
    )


def inverse_symbol() -> Symbol:
    """b(z) = 1/(1 - z_1): holomorphic, unbounded, far outside the Bloch class."""

    def value(z):
        return 1.0 / (1.0 - np.asarray(z)[..., 0])

    def gradient(z):
        z = np.asarray(z)
        g = np.zeros_like(z)
        g[..., 0] = 1.0 / (1.0 - z[..., 0]) ** 2
        return g

    return Symbol(
        key="inv1mz1",
        value=value,
        gradient=gradient,
        holomorphic=True,
        harmonic=True,
        bounded=False,
        tail_bound=lambda t: 1.0 / t,
    )


def harmonic_re_symbol(base: str = "coordinate") -> Symbol:
    """Re g(z) for a named holomorphic g: harmonic, equal to the Poisson
    extension of its own boundary values, but not holomorphic."""
    g = {"coordinate": coordinate_symbol, "exp": exp_symbol}[base]()

    def value(z):
        return np.real(g.value(z)) + 0j

    return Symbol(
        key=f"re_{g.key}",
        value=value,
        gradient=None,
        holomorphic=False,
        harmonic=True,
        bounded=True,
        sup_bound=g.sup_bound,
        tail_bound=g.tail_bound,
    )


# ---------------------------------------------------------------------------
# structured test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Finite combination sum_i coeff_i * 1_{region_i} of indicator terms."""

    terms: tuple
    disjoint: bool = True

    @property
    def dim(self):
        return self.terms[0][1].dim

    @property
    def key(self):
        return tuple((complex(c), r.cache_key()) for c, r in self.terms)

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1], dtype=complex)
        for coeff, region in self.terms:
            out = out + coeff * region.contains(z)
        return out

    def abs_value(self, z):
        return np.abs(self.value(z))

    @property
    def mass_abs(self):
        """Integral of |f|; exact for disjoint terms with exact volumes."""
        if not self.disjoint:
            raise ValueError("exact mass requires disjoint regions")
        return sum(abs(c) * r.volume for c, r in self.terms)

    def supports(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1], dtype=bool)
        for _, region in self.terms:
            out = out | region.contains(z)
        return out


def indicator(region, normalize=False) -> TestFunction:
    coeff = 1.0 / region.volume if normalize else 1.0
    return TestFunction(terms=((complex(coeff), region),))


# ---------------------------------------------------------------------------
# kernel and closed forms
# ---------------------------------------------------------------------------


def bergman_kernel(z, w):
    """K(z, w) = c_n / (1 - <z, w>)^(n+1)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    n = z.shape[-1]
    den = 1.0 - herm_inner(z, w)
    if np.any(np.abs(den) < KERNEL_GUARD):
        raise ValueError("kernel evaluated too close to the boundary diagonal")
    return normalizing_constant(n) / den ** (n + 1)


def project_indicator_ball(s: float, z, n: int | None = None):
    """Projection of the normalized indicator of B((s,0,...,0), 1-s) at z."""
    z = np.asarray(z, dtype=complex)
    n = n or z.shape[-1]
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    return normalizing_constant(n) / (1.0 - z[..., 0] * s) ** (n + 1)


def polydisk_volume(n: int, rhat: float) -> float:
    return math.pi**n * rhat ** (n + 1)


def project_indicator_polydisk(z0, rhat: float, w):
    """Projection of the (unnormalized) polydisk indicator 1_{E(z0, rhat)}."""
    z0 = np.asarray(z0, dtype=complex)
    w = np.asarray(w, dtype=complex)
    n = z0.shape[-1]
    disk = geometry.Polydisk(z0, rhat)
    if not disk.fits_in_ball():
        raise ValueError("polydisk escapes the unit ball")
    return disk.volume * normalizing_constant(n) / (1.0 - herm_inner(w, z0)) ** (n + 1)


def commutator_log_indicator(s: float, z):
    """[conj(b), P] f at z for b = Log(1 - z_1) and f the normalized
    indicator of B((s,0,...,0), 1-s):

        c_n * conj(Log((1 - z_1)/(1 - s))) / (1 - z_1 s)^(n+1).
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    ratio = (1.0 - z[..., 0]) / (1.0 - s)
    return normalizing_constant(n) * np.conj(np.log(ratio)) / (1.0 - z[..., 0] * s) ** (n + 1)


def commutator_indicator_closed(b: Symbol, center, mass: float, z):
    """[conj(b), P] applied to mass * (normalized indicator centered at
    ``center``), valid whenever b is holomorphic on the region and the
    region has the anti-holomorphic mean-value property about its center."""
    if not b.holomorphic:
        raise ValueError("closed form requires a holomorphic symbol")
    center = np.asarray(center, dtype=complex)
    z = np.asarray(z, dtype=complex)
    n = center.shape[-1]
    num = np.conj(b.value(z)) - complex(np.conj(b.value(center[None, :])[0]))
    return mass * normalizing_constant(n) * num / (1.0 - herm_inner(z, center)) ** (n + 1)


def commutator_shrinking_family(b: Symbol, z_k, z):
    """[conj(b), P] f_k at z for f_k the normalized indicator of
    B(z_k, (1-|z_k|)/2)."""
    return commutator_indicator_closed(b, z_k, 1.0, z)


def commutator_polydisk_closed(b: Symbol, z0, rhat: float, z):
    """[conj(b), P] 1_{E(z0, rhat)} in closed form (unnormalized indicator)."""
    disk = geometry.Polydisk(np.asarray(z0, dtype=complex), rhat)
    if not disk.fits_in_ball():
        raise ValueError("polydisk escapes the unit ball")
    return commutator_indicator_closed(b, z0, disk.volume, z)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def _combine(parts):
    value = sum(p.value for p in parts)
    err = math.sqrt(sum(p.stderr**2 for p in parts))
    samples = sum(p.samples for p in parts)
    return value, err, samples


def commutator_quadrature(b: Symbol, f: TestFunction, z, sampler: Sampler, budget: int) -> MCEstimate:
    """Direct integral c_n int (conj b(z) - conj b(w)) f(w) / (1-<z,w>)^(n+1) dV(w),
    stratified over the indicator regions of f."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    bz = complex(np.conj(b.value(z[None, :])[0]))
    if bool(np.any(f.supports(z[None, :]))):
        budget *= 2  # kernel variance inflates near the diagonal
    parts = []
    for t, (coeff, region) in enumerate(f.terms):
        def h(w, _c=coeff):
            return _c * (bz - np.conj(b.value(w))) * bergman_kernel(z, w)

        parts.append(integral_mc_region(h, region, sampler.substream(t), budget))
    if not parts:
        return MCEstimate(0.0, 0.0, 0, sampler.seed)
    value, err, samples = _combine(parts)
    return MCEstimate(value, err, samples, sampler.seed)


def integral_mc_region(h, region, sampler, budget):
    from .montecarlo import integral_mc

    return integral_mc(h, region, sampler, budget)


def positive_projection_quadrature(f: TestFunction, z, sampler: Sampler, budget: int) -> MCEstimate:
    """P+ f(z) = c_n int f(w) / |1 - <z, w>|^(n+1) dV(w)."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    cn = normalizing_constant(n)
    parts = []
    for t, (coeff, region) in enumerate(f.terms):
        def h(w, _c=coeff):
            den = np.abs(1.0 - herm_inner(z, w)) ** (n + 1)
            return _c * cn / den

        parts.append(integral_mc_region(h, region, sampler.substream(t), budget))
    value, err, samples = _combine(parts)
    return MCEstimate(value, err, samples, sampler.seed)


# ---------------------------------------------------------------------------
# dyadic model operators
# ---------------------------------------------------------------------------


def _tents_containing(cache, z):
    grid = cache.grid
    z = np.asarray(z, dtype=complex)
    lev = int(grid.level_of(z[None, :])[0])
    if lev > grid.depth:
        raise ValueError("point beyond the depth horizon")
    keys = []
    for system in range(grid.n_systems):
        _, anc = grid.ancestor_path(system, z[None, :])
        for k in range(lev + 1):
            keys.append((system, k, int(anc[0, k])))
    return keys


def dyadic_majorant(cache, f: TestFunction, z) -> float:
    """sum over tents containing z of the tent average of |f|."""
    return float(sum(cache.abs_avg(key, f) for key in _tents_containing(cache, z)))


def model_T_b(cache, b: Symbol, f: TestFunction, z) -> float:
    """sum_K |b(z) - <b>_tent| <|f|>_tent over tents containing z."""
    z = np.asarray(z, dtype=complex)
    bz = complex(b.value(z[None, :])[0])
    total = 0.0
    for key in _tents_containing(cache, z):
        total += abs(bz - cache.symbol_tent_mean(key, b)) * cache.abs_avg(key, f)
    return float(total)


def model_T_b_star(cache, b: Symbol, f: TestFunction, z) -> float:
    """sum_K <|b - <b>_tent| |f|>_tent over tents containing z."""
    return float(
        sum(cache.weighted_osc_avg(key, b, f) for key in _tents_containing(cache, z))
    )
