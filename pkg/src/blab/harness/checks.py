"""Sampled verification of the geometric, dyadic, and Orlicz properties.

Each check returns a dict with at least ``name``, ``passed`` and ``detail``;
fitted constants are reported rather than asserted wherever the underlying
statement only guarantees existence of a constant.
"""

from __future__ import annotations

import math

import numpy as np

from .. import geometry as geo
from .. import operators as op
from .. import orlicz as orz
from ..dyadic import TentCache, TentExpansion, layer_decomposition
from ..geometry import herm_inner, norm
from ..montecarlo import Sampler, sample_ball, superlevel_measure


def _stable_stream(*parts) -> int:
    import hashlib

    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:6], "big")


def _result(name, passed, detail, **extra):
    out = {"name": name, "passed": bool(passed), "detail": detail}
    out.update(extra)
    return out


def _tangential_frame_vector(e1):
    # deterministic unit vector orthogonal to e1 for n = 2 batches
    e2 = np.empty_like(e1)
    e2[:, 0] = -np.conj(e1[:, 1])
    e2[:, 1] = np.conj(e1[:, 0])
    return e2


def _sample_z_r(rng, count, n, r_upper_tanh=0.5, z_low=0.05, z_high=0.995):
    dirs = geo.sample_unit_sphere(rng, count, n)
    radii = z_low + (z_high - z_low) * rng.random(count)
    z = dirs * radii[:, None]
    R = 0.02 + (r_upper_tanh - 0.02) * rng.random(count)
    return z, R


def check_polydisk_chain(n=1, samples=100_000, seed=101):
    """E(z, R^2 sigma/(3n)) inside D(z, r) inside E(z, 2 R sigma), tanh r <= 1/2."""
    if n > 2:
        raise ValueError("vectorized chain check covers n in {1, 2}")
    rng = Sampler(seed, n, stream=1).rng()
    z, R = _sample_z_r(rng, samples, n)
    az = norm(z)
    sigma = (1.0 - az**2) / (1.0 - R**2 * az**2)
    c1 = (1.0 - R**2) * az / (1.0 - R**2 * az**2)
    e1 = z / az[:, None]

    def assemble(xi1, tan):
        w = xi1[:, None] * e1
        if n == 2:
            w = w + tan[:, None] * _tangential_frame_vector(e1)
        return w

    # inner polydisk -> hyperbolic ball
    a_in = R**2 * sigma / (3.0 * n)
    xi1 = az + a_in * geo._unit_disk(rng, samples)
    tan = np.sqrt(a_in) * geo._unit_disk(rng, samples) if n == 2 else np.zeros(samples)
    w = assemble(xi1, tan)
    rad2 = np.abs(xi1 - c1) ** 2
    tan2 = np.abs(tan) ** 2
    in_D = rad2 / (R**2 * sigma**2) + tan2 / (R**2 * sigma) < 1.0
    viol_inner = int(np.count_nonzero(~in_D))

    # hyperbolic ball -> outer polydisk
    u = geo.sample_unit_ball_points(rng, samples, n)
    xi1 = c1 + R * sigma * u[:, 0]
    tan = R * np.sqrt(sigma) * u[:, 1] if n == 2 else np.zeros(samples)
    rhat = 2.0 * R * sigma
    in_E = np.abs(xi1 - az) < rhat
    if n == 2:
        in_E = in_E & (np.abs(tan) ** 2 < rhat)
    viol_outer = int(np.count_nonzero(~in_E))

    passed = viol_inner == 0 and viol_outer == 0
    return _result(
        f"polydisk_chain_n{n}",
        passed,
        f"inner violations {viol_inner}, outer violations {viol_outer} of {samples}",
        violations=viol_inner + viol_outer,
    )


def check_koranyi_chain(n=1, samples=100_000, seed=103):
    """E(z, cr) within B_K(z, r) within E(z, 2r) for c = 1/(8n), |z| >= 1/2."""
    if n > 2:
        raise ValueError("vectorized chain check covers n in {1, 2}")
    rng = Sampler(seed, n, stream=1).rng()
    dirs = geo.sample_unit_sphere(rng, samples, n)
    az = 0.5 + 0.495 * rng.random(samples)
    z = dirs * az[:, None]
    r = 0.01 + 0.98 * rng.random(samples)
    c = 1.0 / (8.0 * n)
    e1 = z / az[:, None]

    def assemble(xi1, tan):
        w = xi1[:, None] * e1
        if n == 2:
            w = w + tan[:, None] * _tangential_frame_vector(e1)
        return w

    # lower containment, checked through the quasi-metric inequality
    xi1 = az + c * r * geo._unit_disk(rng, samples)
    tan = np.sqrt(c * r) * geo._unit_disk(rng, samples) if n == 2 else np.zeros(samples)
    w = assemble(xi1, tan)
    dk = geo.koranyi_distance(z, w)
    viol_lower = int(np.count_nonzero(dk >= r))

    # upper containment: points of B_K(z, r) lie in E(z, 2r); candidates come
    # from an inflated polydisk plus plain ball samples
    xi1 = az + 3.0 * r * geo._unit_disk(rng, samples)
    tan = np.sqrt(3.0 * r) * geo._unit_disk(rng, samples) if n == 2 else np.zeros(samples)
    w = assemble(xi1, tan)
    extra = sample_ball(Sampler(seed, n, stream=2), samples // 4)
    w = np.concatenate([w, extra], axis=0)
    zz = np.concatenate([z, z[: samples // 4]], axis=0)
    azz = norm(zz)
    inball = norm(w) < 1.0
    dk = geo.koranyi_distance(zz, w)
    rr = np.concatenate([r, r[: samples // 4]])
    in_BK = inball & (dk < rr)
    xi1w = herm_inner(w, zz / azz[:, None])
    in_E2 = np.abs(xi1w - azz) < 2.0 * rr
    if n == 2:
        tan2 = np.maximum(norm(w) ** 2 - np.abs(xi1w) ** 2, 0.0)
        in_E2 = in_E2 & (tan2 < 2.0 * rr)
    viol_upper = int(np.count_nonzero(in_BK & ~in_E2))

    passed = viol_lower == 0 and viol_upper == 0
    return _result(
        f"koranyi_chain_n{n}",
        passed,
        f"lower violations {viol_lower}, upper violations {viol_upper}",
        violations=viol_lower + viol_upper,
    )


def check_mobius_invariance(n=1, samples=30_000, seed=107):
    """d(phi_a z, phi_a w) = d(z, w) to 1e-9; phi_a(phi_a(w)) = w to 1e-10."""
    rng = Sampler(seed, n, stream=1).rng()
    worst_d = 0.0
    worst_inv = 0.0
    chunk = 2048
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        a = 0.995 * geo.sample_unit_ball_points(rng, 1, n)[0]
        z = 0.999 * geo.sample_unit_ball_points(rng, m, n)
        w = 0.999 * geo.sample_unit_ball_points(rng, m, n)
        d0 = geo.bergman_distance(z, w)
        d1 = geo.bergman_distance(geo.mobius_involution(a, z), geo.mobius_involution(a, w))
        worst_d = max(worst_d, float(np.max(np.abs(d1 - d0))))
        ww = geo.mobius_involution(a, geo.mobius_involution(a, w))
        worst_inv = max(worst_inv, float(np.max(norm(ww - w))))
        done += m
    passed = worst_d < 1e-9 and worst_inv < 1e-10
    return _result(
        f"mobius_invariance_n{n}",
        passed,
        f"max metric drift {worst_d:.2e}, max involution error {worst_inv:.2e}",
        metric_drift=worst_d,
        involution_error=worst_inv,
    )


def check_frame_determinism(n=2, samples=64, seed=109):
    rng = Sampler(seed, n, stream=1).rng()
    pts = geo.sample_unit_ball_points(rng, samples, n)
    ok = True
    for z in pts:
        f1 = geo.radial_frame(z)
        f2 = geo.radial_frame(z.copy())
        ok &= bool(np.all(f1 == f2))
        ok &= float(np.max(np.abs(f1 @ np.conj(f1).T - np.eye(n)))) < 1e-12
    return _result(f"frame_determinism_n{n}", ok, f"{samples} frames, bitwise stable")


def check_bergman_membership_oracle(n=1, samples=10_000, seed=111):
    """Ellipsoid membership of D(z, r) agrees with the metric oracle."""
    rng = Sampler(seed, n, stream=1).rng()
    z, R = _sample_z_r(rng, 64, n, r_upper_tanh=0.95)
    mismatches = 0
    per = samples // 64
    for i in range(64):
        r = math.atanh(float(R[i]))
        ball = geo.BergmanBall(z[i], r)
        w = geo.sample_unit_ball_points(rng, per, n)
        d = geo.bergman_distance(z[i], w)
        mem = ball.contains(w)
        safe = np.abs(d - r) > 1e-9  # skip knife-edge ties
        mismatches += int(np.count_nonzero(mem[safe] != (d[safe] < r)))
    return _result(
        f"bergman_membership_n{n}", mismatches == 0, f"{mismatches} mismatches of {samples}"
    )


def check_tent_koranyi(n=1, inflation=4.0, per_radius=20_000, seed=113):
    """T_z sits inside B_K(z, C(1-|z|)); for n=1 the volume ratio stays in [1, 64]."""
    worst_ratio = 0.0
    misses = 0
    ratios = []
    for i, az in enumerate((0.5, 0.7, 0.9, 0.99, 0.999)):
        z = np.zeros(n, dtype=complex)
        z[0] = az
        tent = geo.carleson_tent(z)
        smp = Sampler(seed, n, stream=10 + i)
        pts = tent.sample(smp.rng(), per_radius)
        r = inflation * (1.0 - az)
        dk = geo.koranyi_distance(z, pts)
        misses += int(np.count_nonzero(dk >= r))
        bk = geo.KoranyiBall(z, r)
        bound = bk.bounding_region()
        cand = bound.sample(smp.substream(1).rng(), per_radius)
        frac = float(np.mean(bk.contains(cand)))
        ratio = bound.volume * frac / tent.volume
        ratios.append(ratio)
        worst_ratio = max(worst_ratio, ratio)
    in_band = all(1.0 <= r <= 64.0 for r in ratios) if n == 1 else True
    passed = misses == 0 and in_band
    return _result(
        f"tent_koranyi_n{n}",
        passed,
        f"containment misses {misses}; volume ratios {[f'{r:.1f}' for r in ratios]}",
        ratios=ratios,
    )


# ---------------------------------------------------------------------------
# dyadic checks
# ---------------------------------------------------------------------------


def check_partition(grid, samples=100_000, seed=211):
    """Sampled points within the horizon land in exactly one kube per system."""
    smp = Sampler(seed, grid.dim, stream=1)
    pts = sample_ball(smp, samples)
    pts = pts[grid.level_of(pts) <= grid.depth]
    bad = 0
    for system in range(grid.n_systems):
        levels, idx = grid.kube_of(system, pts)
        # membership of the located kube is the defining predicate; spot-check
        # a stratified subset plus uniqueness across sibling cubes
        probe = pts[:: max(1, len(pts) // 512)]
        plv, pidx = grid.kube_of(system, probe)
        for i in range(len(probe)):
            if not grid.kube_contains(system, int(plv[i]), int(pidx[i]), probe[i][None, :])[0]:
                bad += 1
    return _result("dyadic_partition", bad == 0, f"{bad} membership misses", misses=bad)


def check_nesting(grid, cache, pairs=60, per_pair=400, seed=213):
    """Sampled tent pairs in one system are disjoint or nested."""
    rng = Sampler(seed, grid.dim, stream=1).rng()
    keys = cache.sample_tents(per_level=8, system=0)
    suspect = 0
    for _ in range(pairs):
        k1 = keys[int(rng.integers(len(keys)))]
        k2 = keys[int(rng.integers(len(keys)))]
        if k1 == k2:
            continue
        p1 = cache.tent_sample(k1, per_pair, salt=4)
        p2 = cache.tent_sample(k2, per_pair, salt=4)
        f12 = float(np.mean(grid.tent_contains(k2[0], k2[1], k2[2], p1)))
        f21 = float(np.mean(grid.tent_contains(k1[0], k1[1], k1[2], p2)))
        if not (f12 == 0.0 or f12 == 1.0 or f21 == 1.0):
            suspect += 1
    return _result("dyadic_nesting", suspect == 0, f"{suspect} suspect pairs of {pairs}")


def check_child_cap(grid):
    cap = grid.config.child_cap
    worst = 0
    for system in range(grid.n_systems):
        for level in range(grid.depth):
            worst = max(worst, int(grid.child_counts(system, level).max()))
    return _result("dyadic_child_cap", worst <= cap, f"max children {worst}, cap {cap}")


def check_volume_law(grid, cache, per_level=10):
    """Tent and kube volumes track e^(-2(n+1)theta0 k) with a grid constant."""
    scale = 2.0 * (grid.dim + 1) * grid.config.theta0
    ratios = []
    sib_spread = 0.0
    for key in cache.sample_tents(per_level=per_level):
        v = cache.tent_volume(key).value
        ratios.append(v / math.exp(-scale * key[1]))
    # sibling comparison at one level
    for system in range(grid.n_systems):
        level = min(2, grid.depth)
        parents = grid.parent_index(system, level)
        target = parents[0]
        sibs = np.flatnonzero(parents == target)[:8]
        vols = [cache.tent_volume((system, level, int(j))).value for j in sibs]
        if len(vols) > 1:
            sib_spread = max(sib_spread, max(vols) / min(vols))
    spread = max(ratios) / min(ratios)
    passed = spread <= 64.0 and sib_spread <= 16.0
    return _result(
        "dyadic_volume_law",
        passed,
        f"law ratio range [{min(ratios):.3g}, {max(ratios):.3g}] spread {spread:.1f}, "
        f"sibling spread {sib_spread:.1f}",
        spread=spread,
        sibling_spread=sib_spread,
    )


def check_tent_expansion(cache, eta=0.2, per_level=3, budget=4096):
    """|tent_E| / |tent| lies in [1, C_eta]; C_eta reported."""
    grid = cache.grid
    ratios = {}
    for key in cache.sample_tents(per_level=per_level, min_level=1):
        if key[1] >= grid.depth:  # the neighborhood leaks below the horizon
            continue
        exp_vol, _ = TentExpansion(cache, key, eta).expansion_stats(budget=budget)
        vol = cache.tent_volume(key).value
        ratios.setdefault(key[1], []).append(exp_vol / vol)
    flat = [r for rs in ratios.values() for r in rs]
    c_eta = max(flat)
    lo = min(flat)
    per_level_max = {k: max(v) for k, v in ratios.items()}
    spread = max(per_level_max.values()) / max(min(per_level_max.values()), 1e-9)
    passed = lo >= 0.9 and spread <= 8.0
    return _result(
        "tent_expansion",
        passed,
        f"ratio range [{lo:.2f}, {c_eta:.2f}], per-level spread {spread:.2f}",
        c_eta=c_eta,
    )


def _nested_mass_battery(grid, direction=0, coeff=1.0):
    """Test function with mass at every dyadic depth along one boundary ray.

    Equal coefficients with ball volumes tracking tent volumes keep the
    Luxembourg averages of the whole ancestor chain comparable, so the
    chain lands in a single dyadic average bin.
    """
    zeta = grid.net(0, grid.depth)[direction]
    terms = []
    for lev in range(1, grid.depth + 1):
        r_mid = 0.5 * (grid.radii[lev] + grid.radii[lev + 1])
        center = r_mid * zeta
        radius = 0.2 * (1.0 - r_mid)
        terms.append((complex(coeff), geo.EuclideanBall(center, radius)))
    return op.TestFunction(terms=tuple(terms))


def _calibrated_layer(cache, k, direction=0):
    """Battery rescaled (Luxembourg homogeneity) into the bin of index k."""
    grid = cache.grid
    psi = orz.psi_eps(1.0)
    probe = _nested_mass_battery(grid, direction=direction)
    anchor = grid.chain_at(0, probe.terms[1][1].center[None, :] / norm(probe.terms[1][1].center), 1)
    base = cache.tent_lux((0, 1, int(anchor[0])), probe, psi)
    if base <= 0:
        return None, probe
    target = 2.0 * 4.0 ** (-k - 1)  # mid-bin
    f = _nested_mass_battery(grid, direction=direction, coeff=target / base)
    return layer_decomposition(cache, f, k, psi, system=0), f


def check_layer_decomposition(cache, seed=219, points=10_000):
    """Overlap of the inflated sets <= 4, disjointness of the E_K, and decay
    of the deep unions S_k for k in {1, 2, 3}; the battery is calibrated so
    the decompositions are non-vacuous (nested generations exist)."""
    grid = cache.grid
    pts = sample_ball(Sampler(seed, grid.dim, stream=1), points)
    pts = pts[grid.level_of(pts) <= grid.depth]

    worst_overlap = 0
    max_gens = 0
    disjoint_bad = 0
    decay = []
    for k in (1, 2, 3):
        decomp = None
        for direction in range(8):
            cand, _ = _calibrated_layer(cache, k, direction=direction)
            if cand is not None and cand.generations:
                if decomp is None or max(cand.generations.values()) > max(
                    decomp.generations.values()
                ):
                    decomp = cand
            if decomp is not None and max(decomp.generations.values()) >= 2:
                break
        if decomp is None:
            decay.append((k, 0.0, 0.0, True))
            continue
        max_gens = max(max_gens, 1 + max(decomp.generations.values()))
        worst_overlap = max(worst_overlap, int(np.max(decomp.tilde_overlap(pts))))
        deep_members = [m for m in decomp.members() if decomp.generations[m] >= 1]
        probe_pts = [pts]
        for member in deep_members[:4]:
            probe_pts.append(
                cache.tent_sample((decomp.system, member[0], member[1]), 1024, salt=5)
            )
        probe = np.concatenate(probe_pts, axis=0)
        worst_overlap = max(worst_overlap, int(np.max(decomp.tilde_overlap(probe))))
        counts = np.zeros(len(probe), dtype=int)
        for member in decomp.members():
            counts += decomp.in_disjoint_part(member, probe).astype(int)
        disjoint_bad += int(np.count_nonzero(counts > 1))
        member = decomp.members()[0]
        frac, err = decomp.deep_fraction(member, budget=4096)
        bound = 2.0 ** -(2**k) + 3.0 * err
        decay.append((k, frac, bound, frac <= bound))
    passed = (
        worst_overlap <= 4 and disjoint_bad == 0 and all(d[3] for d in decay) and max_gens >= 2
    )
    return _result(
        "layer_decomposition",
        passed,
        f"max overlap {worst_overlap}, disjointness violations {disjoint_bad}, "
        f"deep decay {[(k, f'{fr:.3g} <= {b:.3g}') for k, fr, b, _ in decay]}, "
        f"generations seen {max_gens}",
        overlap=worst_overlap,
        generations=max_gens,
    )


def check_empty_layers(cache):
    """Trivial bins: zero function always empty; f = 1 empty for large k."""
    psi = orz.psi_eps(1.0)
    zero = op.TestFunction(terms=((complex(0.0), geo.unit_ball(cache.grid.dim)),))
    d0 = layer_decomposition(cache, zero, 1, psi)
    one = op.indicator(geo.unit_ball(cache.grid.dim))
    d1 = layer_decomposition(cache, one, 40, psi)
    passed = not d0.generations and not d1.generations
    return _result("layer_trivial_bins", passed, "empty collections for trivial inputs")


# ---------------------------------------------------------------------------
# operator checks
# ---------------------------------------------------------------------------


def check_kernel_hermitian(n=1, samples=2000, seed=301):
    rng = Sampler(seed, n, stream=1).rng()
    z = 0.99 * geo.sample_unit_ball_points(rng, samples, n)
    w = 0.99 * geo.sample_unit_ball_points(rng, samples, n)
    k1 = op.bergman_kernel(z, w)
    k2 = op.bergman_kernel(w, z)
    worst = float(np.max(np.abs(k1 - np.conj(k2))))
    return _result("kernel_hermitian", worst < 1e-12, f"max asymmetry {worst:.2e}")


def check_oracle_equivalence(n=1, trials=100, budget=16384, seed=307):
    """Closed forms agree with MC quadrature within 3 sigma in >= 95% of trials."""
    rng = Sampler(seed, n, stream=1).rng()
    smp = Sampler(seed + 1, n)
    b = op.log_symbol()
    results = {}
    for name in ("project_ball", "project_polydisk", "commutator_log", "commutator_shrink"):
        hits = 0
        for t in range(trials):
            sub = smp.substream(_stable_stream(name, t))
            z = 0.9 * geo.sample_unit_ball_points(rng, 1, n)[0]
            s = 0.2 + 0.7 * rng.random()
            z0 = np.zeros(n, dtype=complex)
            z0[0] = s
            if name == "project_ball":
                region = geo.EuclideanBall(z0, 1.0 - s)
                closed = complex(op.project_indicator_ball(s, z[None, :])[0])
                est = _project_quadrature(region, z, sub, budget, normalize=True)
            elif name == "project_polydisk":
                rhat = min(0.3, 0.5 * (1.0 - s))
                region = geo.Polydisk(z0, rhat)
                closed = complex(op.project_indicator_polydisk(z0, rhat, z[None, :])[0])
                est = _project_quadrature(region, z, sub, budget, normalize=False)
            elif name == "commutator_log":
                region = geo.EuclideanBall(z0, 1.0 - s)
                closed = complex(op.commutator_log_indicator(s, z[None, :])[0])
                f = op.indicator(region, normalize=True)
                est = op.commutator_quadrature(b, f, z, sub, budget)
            else:
                zk = z0  # center at (s, 0, ...)
                region = geo.EuclideanBall(zk, (1.0 - s) / 2.0)
                closed = complex(op.commutator_shrinking_family(b, zk, z[None, :])[0])
                f = op.indicator(region, normalize=True)
                est = op.commutator_quadrature(b, f, z, sub, budget)
            if abs(complex(est.value) - closed) <= 3.0 * est.stderr + 1e-12:
                hits += 1
        results[name] = hits
    passed = all(v >= int(0.95 * trials) for v in results.values())
    return _result(
        "oracle_equivalence",
        passed,
        "3-sigma agreement: " + ", ".join(f"{k} {v}/{trials}" for k, v in results.items()),
        counts=results,
    )


def _project_quadrature(region, z, sampler, budget, normalize):
    from ..montecarlo import integral_mc

    scale = 1.0 / region.volume if normalize else 1.0
    return integral_mc(lambda w: scale * op.bergman_kernel(z, w), region, sampler, budget)


def check_commutator_constant_annihilation(n=1, seed=311, budget=8192):
    """[conj(b), P] vanishes when b is constant: exactly in closed form, and
    within 3 sigma for the quadrature path."""
    b = op.constant_symbol(2.5 + 1.0j)
    z0 = np.zeros(n, dtype=complex)
    z0[0] = 0.4
    z = np.zeros(n, dtype=complex)
    z[0] = 0.2 - 0.1j
    closed = complex(op.commutator_indicator_closed(b, z0, 1.0, z[None, :])[0])
    f = op.indicator(geo.EuclideanBall(z0, 0.3), normalize=True)
    est = op.commutator_quadrature(b, f, z, Sampler(seed, n), budget)
    passed = closed == 0.0 and abs(complex(est.value)) <= 3.0 * est.stderr + 1e-12
    return _result(
        "commutator_annihilates_constants",
        passed,
        f"closed {closed}, quadrature {abs(complex(est.value)):.2e} +/- {est.stderr:.2e}",
    )


def check_majorant_domination(cache, trials=64, budget=4096, seed=313):
    """P+ f <= C * dyadic majorant on random structured (f, z); C reported."""
    grid = cache.grid
    rng = Sampler(seed, grid.dim, stream=1).rng()
    smp = Sampler(seed + 1, grid.dim)
    worst = 0.0
    for t in range(trials):
        az = 0.1 + 0.8 * rng.random()
        center = az * geo.sample_unit_sphere(rng, 1, grid.dim)[0]
        f = op.indicator(geo.EuclideanBall(center, 0.3 * (1.0 - az)), normalize=True)
        zlev = int(rng.integers(0, max(grid.depth - 1, 1)))
        zr = 0.5 * (grid.radii[zlev] + grid.radii[zlev + 1])
        z = zr * geo.sample_unit_sphere(rng, 1, grid.dim)[0]
        plus = op.positive_projection_quadrature(f, z, smp.substream(t), budget)
        major = op.dyadic_majorant(cache, f, z)
        if major > 0:
            worst = max(worst, float(np.real(plus.value)) / major)
    return _result(
        "majorant_domination",
        worst < 1e3 and worst > 0,
        f"fitted constant {worst:.2f} over {trials} trials",
        constant=worst,
    )


def check_model_domination(cache, trials=40, budget=4096, seed=317):
    """|[conj b, P] f| <= C (T_b f + T_b* f) on structured inputs; C reported."""
    grid = cache.grid
    rng = Sampler(seed, grid.dim, stream=1).rng()
    smp = Sampler(seed + 1, grid.dim)
    b = op.log_symbol()
    worst = 0.0
    for t in range(trials):
        az = 0.2 + 0.7 * rng.random()
        center = np.zeros(grid.dim, dtype=complex)
        center[0] = az
        f = op.indicator(geo.EuclideanBall(center, 0.4 * (1.0 - az)), normalize=True)
        zlev = int(rng.integers(0, max(grid.depth - 1, 1)))
        zr = 0.5 * (grid.radii[zlev] + grid.radii[zlev + 1])
        z = zr * geo.sample_unit_sphere(rng, 1, grid.dim)[0]
        comm = abs(complex(op.commutator_indicator_closed(b, center, 1.0, z[None, :])[0]))
        t_b = op.model_T_b(cache, b, f, z)
        t_bs = op.model_T_b_star(cache, b, f, z)
        if t_b + t_bs > 1e-12:
            worst = max(worst, comm / (t_b + t_bs))
    return _result(
        "model_operator_domination",
        0 < worst < 1e3,
        f"fitted constant {worst:.2f} over {trials} trials",
        constant=worst,
    )


def check_model_monotone(cache, seed=319):
    """T_b and T_b* do not decrease when |f| grows pointwise."""
    grid = cache.grid
    b = op.log_symbol()
    center = np.zeros(grid.dim, dtype=complex)
    center[0] = 0.6
    small = op.indicator(geo.EuclideanBall(center, 0.1))
    big = op.TestFunction(
        terms=(
            (complex(2.0), geo.EuclideanBall(center, 0.1)),
            (complex(1.0), geo.EuclideanBall(center, 0.25)),
        ),
        disjoint=False,
    )
    z = np.zeros(grid.dim, dtype=complex)
    z[0] = 0.55
    ok = op.model_T_b(cache, b, big, z) >= op.model_T_b(cache, b, small, z) - 1e-12
    ok &= op.model_T_b_star(cache, b, big, z) >= op.model_T_b_star(cache, b, small, z) - 1e-9
    return _result("model_operator_monotone", ok, "pointwise |f| growth respected")


# ---------------------------------------------------------------------------
# Orlicz checks
# ---------------------------------------------------------------------------


def check_submultiplicativity(samples=100_000, seed=401):
    """Psi_eps(xy) <= 2 Psi_eps(x) Psi_eps(y) on [0, 1e3]^2."""
    rng = Sampler(seed, 1, stream=1).rng()
    bad = 0
    for eps in (0.5, 1.0):
        psi = orz.psi_eps(eps)
        x = 1e3 * rng.random(samples)
        y = 1e3 * rng.random(samples)
        bad += int(np.count_nonzero(psi(x * y) > 2.0 * psi(x) * psi(y) + 1e-12))
    return _result("orlicz_submultiplicative", bad == 0, f"{bad} violations of {2*samples}")


def check_young_comparability(samples=100_000, seed=403):
    """x(1 + log+ x) <= 2 x log(e + x)."""
    rng = Sampler(seed, 1, stream=1).rng()
    x = np.concatenate([rng.random(samples // 2), 10.0 ** (6 * rng.random(samples // 2) - 2)])
    lhs = x * (1.0 + np.log(np.maximum(x, 1.0)))
    rhs = 2.0 * x * np.log(math.e + x)
    bad = int(np.count_nonzero(lhs > rhs + 1e-12))
    return _result("young_comparability", bad == 0, f"{bad} violations of {samples}")


def check_generalized_holder(cache, trials=1000, budget=2048, seed=405):
    """<|fg|> <= C <f>_Psi <g>_Phi over sampled tents and step functions."""
    grid = cache.grid
    rng = Sampler(seed, grid.dim, stream=1).rng()
    keys = cache.sample_tents(per_level=6)
    worst = {0.5: 0.0, 1.0: 0.0}
    for t in range(trials):
        key = keys[int(rng.integers(len(keys)))]
        pts = cache.tent_sample(key, budget, salt=6)
        anchors = pts[rng.integers(0, budget, size=4)]
        fvals = np.zeros(budget)
        gvals = np.zeros(budget)
        for i in range(2):
            rad = 0.5 + rng.random()
            coeff = 10.0 ** (2.0 * rng.random() - 1.0)
            ball = geo.BergmanBall(anchors[i], rad)
            fvals += coeff * ball.contains(pts)
            rad = 0.5 + rng.random()
            coeff = 10.0 ** (2.0 * rng.random() - 1.0)
            ball = geo.BergmanBall(anchors[2 + i], rad)
            gvals += coeff * ball.contains(pts)
        prod = float(np.mean(fvals * gvals))
        if prod <= 0:
            continue
        eps = 0.5 if t % 2 == 0 else 1.0
        lf = orz.luxembourg_from_samples(fvals, orz.psi_eps(eps))
        lg = orz.luxembourg_from_samples(gvals, orz.phi_eps(eps))
        if lf > 0 and lg > 0:
            worst[eps] = max(worst[eps], prod / (lf * lg))
    passed = all(0 < v < 1e3 for v in worst.values())
    return _result(
        "generalized_holder",
        passed,
        f"fitted constants eps=0.5: {worst[0.5]:.2f}, eps=1: {worst[1.0]:.2f}",
        constants=worst,
    )


def check_young_maximal_distributional(cache, seed=407, points=20_000):
    """|{M_Psi f > L}| <= N * int Psi(|f|/L) at 3-sigma slack."""
    grid = cache.grid
    psi = orz.psi_eps(1.0)
    center = np.zeros(grid.dim, dtype=complex)
    center[0] = 0.5
    batteries = [
        op.indicator(geo.EuclideanBall(center, 0.2), normalize=True),
        op.TestFunction(
            terms=(
                (complex(3.0), geo.EuclideanBall(center, 0.15)),
                (complex(1.0), geo.EuclideanBall(-0.3 * center, 0.2)),
            )
        ),
    ]
    pts = sample_ball(Sampler(seed, grid.dim, stream=1), points)
    pts = pts[grid.level_of(pts) <= grid.depth]
    vb = geo.ball_volume(grid.dim)
    failures = []
    for fi, f in enumerate(batteries):
        vals = _young_maximal_batch(cache, psi, f, pts)
        for lam in (0.25, 1.0, 4.0):
            p = float(np.mean(vals > lam))
            lhs = vb * p
            err = vb * math.sqrt(max(p * (1 - p), 0.0) / len(pts))
            rhs = grid.n_systems * sum(
                r.volume * float(psi(abs(c) / lam)) for c, r in f.terms
            )
            if lhs - 3.0 * err > rhs:
                failures.append((fi, lam, lhs, rhs))
    return _result(
        "young_maximal_distributional",
        not failures,
        f"{len(failures)} failures" + (f": {failures}" if failures else ""),
    )


def _young_maximal_batch(cache, psi, f, pts):
    grid = cache.grid
    out = np.zeros(len(pts))
    for system in range(grid.n_systems):
        levels, anc = grid.ancestor_path(system, pts)
        levels = np.minimum(levels, grid.depth)
        for k in range(grid.depth + 1):
            live = np.flatnonzero(levels >= k)
            if live.size == 0:
                break
            idx = anc[live, k]
            for j in np.unique(idx):
                v = cache.tent_lux((system, k, int(j)), f, psi)
                sel = live[idx == j]
                out[sel] = np.maximum(out[sel], v)
    return out


def check_john_nirenberg(cache, bloch_value=1.0, n_tents=20, budget=32768):
    """Exponential decay of oscillation tails for the log symbol."""
    b = op.log_symbol()
    c2, r2, rows = orz.john_nirenberg_fit(
        b, cache, bloch_value, n_tents=n_tents, budget=budget
    )
    passed = c2 > 0.0 and r2 >= 0.9
    return _result(
        "john_nirenberg",
        passed,
        f"fitted rate {c2:.3f}, R^2 {r2:.3f} over {n_tents} tents",
        rate=c2,
        r_squared=r2,
        rows=rows,
    )


def check_norm_equivalences(cache, seed=409):
    """Bloch, dyadic BMO, BMO_r, and exp-osc estimators stay within fixed
    ratios of one another on the holomorphic family."""
    grid = cache.grid
    rng = Sampler(seed, grid.dim, stream=1).rng()
    centers = [
        (1.0 - 2.0**-s) * geo.sample_unit_sphere(rng, 1, grid.dim)[0] for s in range(1, 9)
    ]
    rows = {}
    ok = True
    for b in (op.log_symbol(), op.coordinate_symbol()):
        bloch = orz.bloch_norm(b, dim=grid.dim).value
        bmo_d = orz.bmo_norm_dyadic(b, cache, tents_per_level=8).value
        bmo_r = orz.bmo_r_norm(b, 1.0, centers).value
        eo = orz.exp_osc_norm(b, 1.0, cache, tents_per_level=4).value
        rows[b.key] = (bloch, bmo_d, bmo_r, eo)
        ok &= bmo_d <= 8.0 * bloch and bloch <= 8.0 * max(bmo_d, 1e-12)
        ok &= bmo_r <= 8.0 * max(bmo_d, 1e-12) and bmo_d <= 8.0 * max(bmo_r, 1e-12)
        ok &= np.isfinite(eo) and eo > 0
    return _result(
        "norm_equivalences",
        ok,
        "; ".join(
            f"{k}: bloch {v[0]:.2f}, bmo_dyadic {v[1]:.2f}, bmo_r {v[2]:.2f}, exp_osc {v[3]:.2f}"
            for k, v in rows.items()
        ),
        table=rows,
    )


def check_oscillation_pointwise(cache, tents=10, per_tent=48, eta=0.2, seed=411):
    """Pointwise bound of |b - <b>_tent| by chain sums of inflated averages
    for a harmonic symbol; fitted constant reported."""
    grid = cache.grid
    b = op.harmonic_re_symbol("coordinate")
    keys = [k for k in cache.sample_tents(per_level=3, min_level=1) if k[1] < grid.depth]
    rng = Sampler(seed, grid.dim, stream=1).rng()
    idx = rng.choice(len(keys), size=min(tents, len(keys)), replace=False)
    worst = 0.0
    exp_cache = {}
    for key in (keys[i] for i in sorted(idx)):
        system, level, j = key
        mean_b = cache.symbol_tent_mean(key, b)
        pts = cache.tent_sample(key, per_tent, salt=7)
        levels, anc = grid.ancestor_path(system, pts)
        levels = np.minimum(levels, grid.depth)
        for i in range(len(pts)):
            lhs = abs(complex(b.value(pts[i][None, :])[0]) - mean_b)
            rhs = 0.0
            for k in range(level, int(levels[i]) + 1):
                sub = (system, k, int(anc[i, k]))
                if sub not in exp_cache:
                    _, avg = TentExpansion(cache, sub, eta).expansion_stats(b=b, budget=2048)
                    exp_cache[sub] = avg
                rhs += exp_cache[sub]
            if rhs > 1e-9:
                worst = max(worst, lhs / rhs)
    return _result(
        "oscillation_pointwise",
        0 < worst < 1e3,
        f"fitted constant {worst:.2f} over {tents} tents",
        constant=worst,
    )


# ---------------------------------------------------------------------------
# Monte Carlo checks
# ---------------------------------------------------------------------------


def check_mc_determinism(n=1, seed=501):
    a = superlevel_measure(
        lambda z: norm(z), 0.5, Sampler(seed, n), 20_000, geo.unit_ball(n)
    )
    b = superlevel_measure(
        lambda z: norm(z), 0.5, Sampler(seed, n), 20_000, geo.unit_ball(n)
    )
    return _result("mc_determinism", a == b, "bit-identical reruns")


def check_mc_unbiased(n=1, seed=503, budget=40_000):
    """20 known-volume regions recovered within 3 sigma in >= 19 cases."""
    from ..montecarlo import measure_mc

    rng = Sampler(seed, n, stream=1).rng()
    hits = 0
    for t in range(20):
        az = 0.7 * rng.random()
        center = az * geo.sample_unit_sphere(rng, 1, n)[0]
        r = 0.05 + 0.2 * rng.random()
        region = geo.EuclideanBall(center, r)

        class _Wrap:
            volume = None

            @staticmethod
            def contains(w):
                return region.contains(w)

            @staticmethod
            def bounding_region():
                return geo.unit_ball(n)

            @staticmethod
            def cache_key():
                return ("wrap",)

        est = measure_mc(_Wrap, Sampler(seed, n, stream=10 + t), budget)
        if abs(est.value - region.volume) <= 3.0 * est.stderr:
            hits += 1
    return _result("mc_unbiased", hits >= 19, f"{hits}/20 within 3 sigma")


def check_mc_stratified_agreement(n=1, seed=507, budget=60_000):
    """Stratified and plain superlevel estimates agree within joint 3 sigma."""
    bad = 0
    for t in range(10):
        s = 1.0 - 2.0 ** -(4 + t % 4)
        g = lambda z: op.commutator_log_indicator(s, z)
        lam = 10.0 ** (1 + t % 3)
        plain = superlevel_measure(g, lam, Sampler(seed, n, stream=t), budget, geo.unit_ball(n))
        strat = superlevel_measure(
            g, lam, Sampler(seed, n, stream=100 + t), budget, geo.unit_ball(n), shells=8
        )
        joint = math.hypot(plain.stderr, strat.stderr)
        if abs(plain.value - strat.value) > 3.0 * joint + 1e-12:
            bad += 1
    return _result("mc_stratified_agreement", bad == 0, f"{bad} of 10 tasks disagree")
