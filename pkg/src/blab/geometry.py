"""Exact geometry of the unit ball of C^n.

Points are 1-d numpy arrays of complex coordinates; batches stack them
along the leading axis.  Everything here is a pure function of its
arguments, and arrays produced by the constructors are frozen so values
can be shared across workers without copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

# Points closer than this to the unit sphere are rejected: the kernel and
# metric formulas lose all precision there and no experiment needs them.
BOUNDARY_MARGIN = 1e-12

# Finite stand-in for an infinite hyperbolic distance (|phi_z(w)| -> 1).
DISTANCE_SENTINEL = 1e6


def ball_point(coords) -> np.ndarray:
    """Validate a point of the open unit ball and return it frozen."""
    z = np.array(coords, dtype=complex)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("a ball point is a 1-d array of complex coordinates")
    if np.linalg.norm(z) >= 1.0 - BOUNDARY_MARGIN:
        raise ValueError("point is outside the unit ball (or too close to the sphere)")
    z.setflags(write=False)
    return z


def herm_inner(z, w):
    """Hermitian inner product sum_j z_j * conj(w_j), batched over leading axes."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.shape[-1] != w.shape[-1]:
        raise ValueError(f"dimension mismatch: {z.shape[-1]} vs {w.shape[-1]}")
    return np.sum(z * np.conj(w), axis=-1)


def norm(z):
    return np.sqrt(np.sum(np.abs(np.asarray(z)) ** 2, axis=-1))


def mobius_involution(a, w):
    """Involutive automorphism of the ball interchanging ``a`` and the origin.

    phi_a(w) = (a - P_a w - sqrt(1-|a|^2) Q_a w) / (1 - <w, a>), where P_a is
    the projection onto span(a).  Broadcasts over a batch of ``w``.
    """
    a = np.asarray(a, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if a.shape[-1] != w.shape[-1]:
        raise ValueError("dimension mismatch")
    na2 = float(np.sum(np.abs(a) ** 2))
    if na2 >= 1.0:
        raise ValueError("automorphism center must lie in the open ball")
    if na2 == 0.0:
        return -w
    wa = herm_inner(w, a)
    proj = (wa / na2)[..., None] * a
    orth = w - proj
    s = math.sqrt(1.0 - na2)
    return (a - proj - s * orth) / (1.0 - wa)[..., None]


def _invariant_ratio(z, w):
    # (1-|z|^2)(1-|w|^2)/|1-<z,w>|^2 = 1 - |phi_z(w)|^2, computed without
    # forming phi_z(w); stable arbitrarily close to the boundary.
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = (1.0 - norm(z) ** 2) * (1.0 - norm(w) ** 2)
    den = np.abs(1.0 - herm_inner(z, w)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 0.0, num / den, 0.0)
    return np.clip(s, 0.0, 1.0)


def bergman_distance(z, w):
    """Hyperbolic (Bergman) distance 0.5*log((1+r)/(1-r)), r = |phi_z(w)|."""
    s = _invariant_ratio(z, w)
    rho = np.sqrt(np.clip(1.0 - s, 0.0, 1.0))
    with np.errstate(divide="ignore"):
        d = 0.5 * np.log((1.0 + rho) ** 2 / np.where(s > 0.0, s, np.inf))
    d = np.where(s > 0.0, d, DISTANCE_SENTINEL)
    return np.minimum(np.abs(d), DISTANCE_SENTINEL)


def koranyi_distance(z, w):
    """Koranyi quasi-metric ||z|-|w|| + |1 - <z,w>/(|z||w|)| (|z|+|w| at 0)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    az = norm(z)
    aw = norm(w)
    prod = az * aw
    safe = np.where(prod > 0.0, prod, 1.0)
    angular = np.abs(1.0 - herm_inner(z, w) / safe)
    return np.where(prod > 0.0, np.abs(az - aw) + angular, az + aw)


def radial_split(z, w):
    """Split w = P_z w + Q_z w into the span(z) part and its complement."""
    z = np.asarray(z, dtype=complex)
    az = float(norm(z))
    if az == 0.0:
        raise ValueError("radial split is undefined at z = 0")
    e1 = z / az
    w = np.asarray(w, dtype=complex)
    proj = herm_inner(w, e1)[..., None] * e1
    return proj, w - proj


def radial_frame(z) -> np.ndarray:
    """Deterministic orthonormal frame whose first row is z/|z|.

    The remaining rows complete the basis by modified Gram-Schmidt over
    standard basis vectors, taken in increasing order of overlap with the
    radial direction; the same z always yields the same frame.
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    az = float(norm(z))
    if az == 0.0:
        frame = np.eye(n, dtype=complex)
        frame.setflags(write=False)
        return frame
    e1 = z / az
    order = np.argsort(np.abs(e1), kind="stable")
    rows = [e1]
    for idx in order[: n - 1]:
        v = np.zeros(n, dtype=complex)
        v[idx] = 1.0
        for _ in range(2):  # double pass keeps orthonormality near 1e-16
            for b in rows:
                v = v - herm_inner(v, b) * b
        v = v / float(norm(v))
        rows.append(v)
    frame = np.vstack(rows)
    frame.setflags(write=False)
    return frame


def frame_coords(frame, w):
    """Coordinates xi_j = <w, e_j> of w in the given frame (rows e_j)."""
    return np.asarray(w, dtype=complex) @ np.conj(frame).T


def frame_point(frame, xi):
    """Inverse of :func:`frame_coords`."""
    return np.asarray(xi, dtype=complex) @ frame


@dataclass(frozen=True)
class EllipsoidParams:
    """Parameters of the hyperbolic ball D(z, r) written as an ellipsoid."""

    R: float
    center: np.ndarray
    sigma: float
    rhat: float


def ellipsoid_params(z, r) -> EllipsoidParams:
    """R = tanh r, c = (1-R^2)z/(1-R^2|z|^2), sigma = (1-|z|^2)/(1-R^2|z|^2)."""
    z = np.asarray(z, dtype=complex)
    if float(norm(z)) == 0.0:
        raise ValueError("ellipsoid parameters require z != 0")
    if r <= 0.0:
        raise ValueError("hyperbolic radius must be positive")
    R = math.tanh(r)
    az2 = float(norm(z)) ** 2
    den = 1.0 - R * R * az2
    sigma = (1.0 - az2) / den
    center = (1.0 - R * R) / den * z
    center = center.copy()
    center.setflags(write=False)
    return EllipsoidParams(R=R, center=center, sigma=sigma, rhat=2.0 * R * sigma)


# ---------------------------------------------------------------------------
# volumes
# ---------------------------------------------------------------------------


def ball_volume(n: int, radius: float = 1.0) -> float:
    """Lebesgue volume of a Euclidean ball of C^n, as a subset of R^{2n}."""
    return math.pi**n * radius ** (2 * n) / math.factorial(n)


def _lens_half_width(x, R):
    # vertical half-width of {|u| < 1} cap {|1-u| < R} at Re u = x
    a = max(0.0, 1.0 - x * x)
    b = max(0.0, R * R - (1.0 - x) * (1.0 - x))
    return math.sqrt(min(a, b))


@lru_cache(maxsize=4096)
def _lens_weighted_integral(R: float, power: int) -> float:
    """Integral of (1-|u|^2)^power over {|u|<1, |1-u|<R} in the plane."""
    if R <= 0.0:
        return 0.0
    if R >= 2.0:
        # whole disk: 2*pi*int_0^1 (1-r^2)^p r dr = pi/(p+1)
        return math.pi / (power + 1)

    def inner(x):
        y = _lens_half_width(x, R)
        a = 1.0 - x * x
        if power == 0:
            return 2.0 * y
        if power == 1:
            return 2.0 * (a * y - y**3 / 3.0)
        if power == 2:
            return 2.0 * (a * a * y - 2.0 * a * y**3 / 3.0 + y**5 / 5.0)
        raise ValueError("lens fiber power > 2 not supported (dimension > 3)")

    lo = max(-1.0, 1.0 - R)
    crossing = (2.0 - R * R) / 2.0  # where the two circular arcs swap
    pts = [x for x in (crossing,) if lo < x < 1.0]
    val, _ = quad(inner, lo, 1.0, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(val)


def cap_volume(n: int, R: float) -> float:
    """Volume of {w in B^n : |1 - <w, zeta>| < R} for any unit zeta."""
    if R >= 2.0:
        return ball_volume(n)
    if n == 1:
        return _lens_weighted_integral(R, 0)
    scale = math.pi ** (n - 1) / math.factorial(n - 1)
    return scale * _lens_weighted_integral(R, n - 1)


def sphere_cap_fraction(n: int, R: float) -> float:
    """Surface-measure fraction of {zeta' : |1 - <zeta', zeta>| < R} on the sphere."""
    if R >= 2.0:
        return 1.0
    if n == 1:
        return 2.0 * math.asin(min(1.0, R / 2.0)) / math.pi
    # pushforward of surface measure under zeta' -> <zeta', zeta> has density
    # (n-1)/pi * (1-|u|^2)^(n-2) on the unit disk
    return (n - 1) / math.pi * _lens_weighted_integral(R, n - 2)


# ---------------------------------------------------------------------------
# sampling primitives (take an np.random.Generator; draw order is part of
# the reproducibility contract)
# ---------------------------------------------------------------------------


def _complex_gaussian(rng, count, n):
    g = rng.standard_normal((count, 2 * n))
    return g[:, :n] + 1j * g[:, n:]


def sample_unit_sphere(rng, count, n):
    g = _complex_gaussian(rng, count, n)
    return g / norm(g)[:, None]


def sample_unit_ball_points(rng, count, n):
    d = sample_unit_sphere(rng, count, n)
    r = rng.random(count) ** (1.0 / (2 * n))
    return d * r[:, None]


def _unit_disk(rng, count):
    theta = rng.random(count) * 2.0 * math.pi
    r = np.sqrt(rng.random(count))
    return r * np.exp(1j * theta)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def _freeze(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EuclideanBall:
    """Euclidean ball {|w - center| < radius} of C^n."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))

    @property
    def dim(self):
        return self.center.shape[-1]

    @property
    def volume(self):
        return ball_volume(self.dim, self.radius)

    def contains(self, w):
        return norm(np.asarray(w) - self.center) < self.radius

    def sample(self, rng, count):
        return self.center + self.radius * sample_unit_ball_points(rng, count, self.dim)

    def cache_key(self):
        return ("eball", self.center.tobytes(), float(self.radius).hex())


def unit_ball(n: int) -> EuclideanBall:
    return EuclideanBall(np.zeros(n, dtype=complex), 1.0)


@dataclass(frozen=True)
class Polydisk:
    """Polydisk of radius rhat along z/|z| and sqrt(rhat) in the tangentials."""

    center: np.ndarray
    rhat: float

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))
        object.__setattr__(self, "_frame", radial_frame(self.center))

    @property
    def dim(self):
        return self.center.shape[-1]

    @property
    def volume(self):
        # pi*rhat^2 for the radial disk, pi*rhat for each tangential one
        return math.pi**self.dim * self.rhat ** (self.dim + 1)

    def contains(self, w):
        xi = frame_coords(self._frame, w)
        c1 = float(norm(self.center))
        ok = np.abs(xi[..., 0] - c1) < self.rhat
        if self.dim > 1:
            ok = ok & np.all(np.abs(xi[..., 1:]) ** 2 < self.rhat, axis=-1)
        return ok

    def sample(self, rng, count):
        n = self.dim
        xi = np.empty((count, n), dtype=complex)
        xi[:, 0] = float(norm(self.center)) + self.rhat * _unit_disk(rng, count)
        for j in range(1, n):
            xi[:, j] = math.sqrt(self.rhat) * _unit_disk(rng, count)
        return frame_point(self._frame, xi)

    def fits_in_ball(self, margin: float = 0.0) -> bool:
        c1 = float(norm(self.center))
        reach2 = (c1 + self.rhat) ** 2 + (self.dim - 1) * self.rhat
        return reach2 < (1.0 - margin) ** 2

    def cache_key(self):
        return ("polydisk", self.center.tobytes(), float(self.rhat).hex())


@dataclass(frozen=True)
class BergmanBall:
    """Hyperbolic ball D(z, r); membership uses the ellipsoid inequality."""

    center: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))
        az = float(norm(self.center))
        if az > 0.0:
            p = ellipsoid_params(self.center, self.r)
            c1 = float(norm(p.center))
        else:
            R = math.tanh(self.r)
            p = EllipsoidParams(R=R, center=self.center, sigma=1.0, rhat=2.0 * R)
            c1 = 0.0
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "_c1", c1)
        object.__setattr__(self, "_frame", radial_frame(self.center))

    @property
    def dim(self):
        return self.center.shape[-1]

    @property
    def volume(self):
        p = self.params
        n = self.dim
        return math.pi**n / math.factorial(n) * p.R ** (2 * n) * p.sigma ** (n + 1)

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        p = self.params
        xi1 = frame_coords(self._frame, w)[..., 0]
        rad2 = np.abs(xi1 - self._c1) ** 2
        tan2 = np.maximum(norm(w) ** 2 - np.abs(xi1) ** 2, 0.0)
        return rad2 / (p.R**2 * p.sigma**2) + tan2 / (p.R**2 * p.sigma) < 1.0

    def sample(self, rng, count):
        n = self.dim
        p = self.params
        u = sample_unit_ball_points(rng, count, n)
        xi = np.empty((count, n), dtype=complex)
        xi[:, 0] = self._c1 + p.R * p.sigma * u[:, 0]
        if n > 1:
            xi[:, 1:] = p.R * math.sqrt(p.sigma) * u[:, 1:]
        return frame_point(self._frame, xi)

    def cache_key(self):
        return ("bergman", self.center.tobytes(), float(self.r).hex())


@dataclass(frozen=True)
class KoranyiBall:
    """Quasi-metric ball {w in B^n : d_K(center, w) < radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))

    @property
    def dim(self):
        return self.center.shape[-1]

    @property
    def volume(self):
        return None

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        return (norm(w) < 1.0) & (koranyi_distance(self.center, w) < self.radius)

    def bounding_region(self):
        return Polydisk(self.center, 2.0 * self.radius)

    def cache_key(self):
        return ("koranyi", self.center.tobytes(), float(self.radius).hex())


@dataclass(frozen=True)
class BoundaryCap:
    """Solid cap {w in B^n : |1 - <w, zeta>| < R} about a boundary direction."""

    direction: np.ndarray
    R: float

    def __post_init__(self):
        d = np.array(self.direction, dtype=complex)
        nd = float(norm(d))
        if nd == 0.0:
            raise ValueError("cap direction must be nonzero")
        d = d / nd
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "_frame", radial_frame(d))

    @property
    def dim(self):
        return self.direction.shape[-1]

    @property
    def volume(self):
        return cap_volume(self.dim, self.R)

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        inside = norm(w) < 1.0
        return inside & (np.abs(1.0 - herm_inner(w, self.direction)) < self.R)

    def sample(self, rng, count):
        if self.R >= 2.0:
            return sample_unit_ball_points(rng, count, self.dim)
        n = self.dim
        out = np.empty((count, n), dtype=complex)
        have = 0
        fiber = math.sqrt(max(self.R * (2.0 - self.R), 0.0))
        while have < count:
            m = max(2 * (count - have), 64)
            u = 1.0 - self.R * _unit_disk(rng, m)
            if n == 1:
                keep = np.abs(u) < 1.0
                w = u[keep, None]
            else:
                v = fiber * sample_unit_ball_points(rng, m, n - 1)
                keep = (np.abs(u) < 1.0) & (norm(v) ** 2 < 1.0 - np.abs(u) ** 2)
                xi = np.concatenate([u[keep, None], v[keep]], axis=1)
                w = frame_point(self._frame, xi)
            take = min(count - have, w.shape[0])
            out[have : have + take] = w[:take]
            have += take
        return out

    def cache_key(self):
        return ("cap", self.direction.tobytes(), float(self.R).hex())


def carleson_tent(z) -> "EuclideanBall | BoundaryCap":
    """Carleson tent T_z = {w in B^n : |1 - <z,w>/|z|| < 1 - |z|}; T_0 = B^n."""
    z = np.asarray(z, dtype=complex)
    az = float(norm(z))
    if az == 0.0:
        return unit_ball(z.shape[-1])
    return BoundaryCap(z / az, 1.0 - az)


@dataclass(frozen=True)
class Annulus:
    """Slab U_m = {z in B^n : 2^(m-k-1) <= |1 - z_1| <= 2^(m-k)} (bounds closed)."""

    k: int
    m: int
    dim: int

    def __post_init__(self):
        if not 0 < self.m < self.k:
            raise ValueError("annulus requires 0 < m < k")

    @property
    def r_lo(self):
        return 2.0 ** (self.m - self.k - 1)

    @property
    def r_hi(self):
        return 2.0 ** (self.m - self.k)

    @property
    def volume(self):
        return None

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        t = np.abs(1.0 - w[..., 0])
        return (t >= self.r_lo) & (t <= self.r_hi) & (norm(w) < 1.0)

    def bounding_region(self):
        return AnnulusBound(self.k, self.m, self.dim)

    def cache_key(self):
        return ("annulus", self.k, self.m, self.dim)


@dataclass(frozen=True)
class AnnulusBound:
    """Exactly sampleable superset of :class:`Annulus` (ring x small ball)."""

    k: int
    m: int
    dim: int

    @property
    def r_lo(self):
        return 2.0 ** (self.m - self.k - 1)

    @property
    def r_hi(self):
        return 2.0 ** (self.m - self.k)

    @property
    def volume(self):
        ring = math.pi * (self.r_hi**2 - self.r_lo**2)
        n = self.dim
        if n == 1:
            return ring
        # points of the slab inside the ball satisfy sum_{j>=2}|z_j|^2 < 2*r_hi
        return ring * ball_volume(n - 1, math.sqrt(2.0 * self.r_hi))

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        t = np.abs(1.0 - w[..., 0])
        ok = (t >= self.r_lo) & (t <= self.r_hi)
        if self.dim > 1:
            ok = ok & (np.sum(np.abs(w[..., 1:]) ** 2, axis=-1) < 2.0 * self.r_hi)
        return ok

    def sample(self, rng, count):
        n = self.dim
        theta = rng.random(count) * 2.0 * math.pi
        r2 = self.r_lo**2 + rng.random(count) * (self.r_hi**2 - self.r_lo**2)
        z1 = 1.0 - np.sqrt(r2) * np.exp(1j * theta)
        out = np.empty((count, n), dtype=complex)
        out[:, 0] = z1
        if n > 1:
            out[:, 1:] = math.sqrt(2.0 * self.r_hi) * sample_unit_ball_points(rng, count, n - 1)
        return out

    def cache_key(self):
        return ("annulus_bound", self.k, self.m, self.dim)


def region_contains(region, w):
    """Membership predicate shared by every region kind."""
    return region.contains(w)
