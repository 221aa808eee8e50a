"""The seven experiments behind the CLI, each a pure function of its config.

Superlevel sets of the closed-form commutators concentrate at one boundary
point, so their measures are estimated inside a cap-shaped bounding region
whose radius is certified by an analytic envelope: outside the region the
integrand is provably below the threshold, so the exterior contributes
exactly zero and all Monte Carlo budget lands where the set lives.
"""

from __future__ import annotations

import hashlib
import math
import os

import numpy as np

from .. import geometry as geo
from .. import operators as op
from .. import orlicz as orz
from ..dyadic import DyadicGrid, GridConfig, TentCache, build_grid
from ..geometry import norm
from ..montecarlo import MeasureEstimate, Sampler, measure_mc, superlevel_measure
from . import checks
from .config import ExperimentConfig
from .report import line_plot, write_csv


class AssertionLog:
    """Collects named pass/fail assertions for one experiment run."""

    def __init__(self):
        self.entries = []

    def check(self, name, ok, detail=""):
        self.entries.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def all_passed(self):
        return all(ok for _, ok, _ in self.entries)

    def rows(self):
        return [(name, "pass" if ok else "FAIL", detail) for name, ok, detail in self.entries]


def stable_stream(*parts) -> int:
    """Process-independent substream id from hashable labels."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:6], "big")


def axis_point(n, a):
    z = np.zeros(n, dtype=complex)
    z[0] = a
    return z


def fitted_polydisk(n, center_abs, R=0.5):
    """Polydisk comparable to the hyperbolic ball at the center, shrunk until
    it sits inside the unit ball (mandatory for the mean-value closed forms)."""
    sigma = 1.0 if center_abs == 0 else (1 - center_abs**2) / (1 - R**2 * center_abs**2)
    rhat = 2.0 * R * sigma
    margin = 0.02 * (1.0 - center_abs)
    disk = geo.Polydisk(axis_point(n, center_abs), rhat)
    while not disk.fits_in_ball(margin):
        rhat *= 0.8
        disk = geo.Polydisk(axis_point(n, center_abs), rhat)
    return disk


def commutator_envelope(b, center_abs, mass, n):
    """R -> certified upper bound of the closed-form commutator modulus on
    {|1 - z_1| >= R}; requires a symbol with an axis tail bound."""
    c_n = op.normalizing_constant(n)
    b0 = abs(complex(b.value(axis_point(n, center_abs)[None, :])[0]))

    def env(R):
        den = center_abs * R - (1.0 - center_abs)
        if den <= 0.0 or b.tail_bound is None:
            return math.inf
        return mass * c_n * (b.tail_bound(R) + b0) / den ** (n + 1)

    return env


def superlevel_batch(gfun, envelope, lambdas, sampler, budget, n, base_R):
    """Superlevel measures of |gfun| for a whole lambda grid.

    Lambdas sharing a certified bounding radius share one sample batch; the
    exterior of each region contributes exactly zero by the envelope.
    """
    radii = []
    for lam in lambdas:
        R = base_R
        while envelope(R) >= lam and R < 2.0:
            R *= 2.0
        radii.append(min(R, 2.0))
    out = [None] * len(lambdas)
    for tier, R in enumerate(sorted(set(radii), reverse=True)):
        idx = [i for i, r in enumerate(radii) if r == R]
        superset = (
            geo.unit_ball(n) if R >= 2.0 else geo.BoundaryCap(axis_point(n, 1.0), R)
        )
        pts = superset.sample(sampler.substream(tier).rng(), budget)
        inside = norm(pts) < 1.0
        vals = np.zeros(pts.shape[0])
        if np.any(inside):
            vals[inside] = np.abs(gfun(pts[inside]))
        vol = superset.volume
        for i in idx:
            hits = int(np.count_nonzero(inside & (vals > lambdas[i])))
            p = hits / budget
            out[i] = MeasureEstimate(
                value=vol * p,
                stderr=vol * math.sqrt(max(p * (1.0 - p), 0.0) / budget),
                hits=hits,
                samples=budget,
                region=f"cap{R:.3g}",
            )
    return out


def _meta(config: ExperimentConfig, grid_hash=""):
    meta = [("tool", "blab"), ("command", config.command)]
    meta += [("config_hash", config.digest()), ("seed", config.seed)]
    if grid_hash:
        meta.append(("grid_hash", grid_hash))
    meta += [(f"config.{line.split('=')[0]}", line.split("=", 1)[1]) for line in config.to_text().splitlines()]
    return meta


def _grid_and_cache(config: ExperimentConfig):
    cfg = GridConfig(
        dim=config.dim,
        theta0=config.theta0,
        depth=config.depth,
        systems=config.systems,
        seed=config.seed,
    )
    if config.grid_file and os.path.exists(config.grid_file):
        grid = DyadicGrid.load(config.grid_file)
        if grid.config != cfg:
            raise ValueError("grid file does not match the requested configuration")
    else:
        grid = build_grid(cfg)
        if config.grid_file:
            grid.save(config.grid_file)
    return grid, TentCache(grid, tent_budget=config.tent_budget)


def _out(config, name):
    return os.path.join(config.out, name)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def cmd_counterexample(config: ExperimentConfig):
    """Unbounded growth of lambda * |{|[conj b, P] f| > lambda}| for the log
    symbol against shrinking normalized ball indicators."""
    n = config.dim
    log = AssertionLog()
    b = op.log_symbol()
    rows = []
    lams, measures, errs = [], [], []
    for k in config.ks():
        m = k // 2
        s = 1.0 - 2.0**-k
        smp = Sampler(config.seed + k, n)
        annulus = geo.Annulus(k, m, n)
        bound = annulus.bounding_region()
        pts = bound.sample(smp.substream(1).rng(), 10_000)
        keep = annulus.contains(pts)
        vals = np.abs(op.commutator_log_indicator(s, pts[keep]))
        cal_min = float(vals.min())
        if cal_min <= 0:
            raise RuntimeError("calibration minimum is nonpositive")
        lam = 0.99 * cal_min
        env = commutator_envelope(b, s, 1.0, n)
        est = superlevel_batch(
            lambda z: op.commutator_log_indicator(s, z),
            env,
            [lam],
            smp.substream(2),
            config.budget,
            n,
            base_R=2.0 ** (m - k),
        )[0]
        um = measure_mc(annulus, smp.substream(3), max(config.budget // 10, 10_000))
        um_law = 2.0 ** ((n + 1) * (m - k))
        fresh = bound.sample(smp.substream(4).rng(), 10_000)
        fkeep = annulus.contains(fresh)
        contained = bool(
            np.all(np.abs(op.commutator_log_indicator(s, fresh[fkeep])) > lam)
        )
        log.check(f"containment_k{k}", contained, "U_m inside the superlevel set")
        log.check(
            f"um_law_k{k}",
            0.25 <= um.value / um_law <= 4.0,
            f"|U_m|/2^((n+1)(m-k)) = {um.value / um_law:.3f}",
        )
        rows.append(
            (k, m, s, lam, est.value, est.stderr, lam * est.value, um.value, um.stderr, um_law, est.region)
        )
        lams.append(lam)
        measures.append(est.value)
        errs.append(est.stderr)
    increasing = all(
        lams[i + 1] * (measures[i + 1] - 3 * errs[i + 1]) > lams[i] * (measures[i] + 3 * errs[i])
        for i in range(len(lams) - 1)
    )
    log.check("product_increasing", increasing, "strict growth at conservative 3-sigma ends")
    growth = (lams[-1] * (measures[-1] - 3 * errs[-1])) / (lams[0] * (measures[0] + 3 * errs[0]))
    log.check("product_growth", growth >= 2.0, f"conservative growth factor {growth:.3f}")
    header = [
        "k", "m", "s", "lambda", "measure", "measure_stderr", "product",
        "um_measure", "um_stderr", "um_law", "bounding",
    ]
    payload = write_csv(_out(config, "counterexample.csv"), _meta(config), header, rows)
    if config.plot:
        ks = [r[0] for r in rows]
        line_plot(
            _out(config, "counterexample.svg"),
            ks,
            [("lambda * measure", [r[6] for r in rows])],
            "k",
            "weak-type product",
            "restricted weak-type growth",
            hashsalt=config.digest(),
        )
    return payload, log


def cmd_hinfty(config: ExperimentConfig):
    """Weak-type products for shrinking-ball families: divergence for the
    unbounded log probe, uniform boundedness for z_1."""
    n = config.dim
    log = AssertionLog()
    b = op.log_symbol()
    rows = []
    prods = []
    for k in range(config.k_min, config.k_max + 1):
        zk = axis_point(n, 1.0 - 2.0**-k)
        smp = Sampler(config.seed + 31 * k, n)
        ball_half = geo.EuclideanBall(np.zeros(n, dtype=complex), 0.5)
        probes = ball_half.sample(smp.rng(), 10_000)
        bzk = complex(b.value(zk[None, :])[0])
        lam_k = (
            op.normalizing_constant(n)
            / 2 ** (n + 2)
            * float(np.min(np.abs(b.value(probes) - bzk)))
        )
        gfun = lambda z: op.commutator_shrinking_family(b, zk, z)
        contained = bool(np.all(np.abs(gfun(probes)) > lam_k))
        log.check(f"ball_containment_k{k}", contained, "B(0,1/2) inside the superlevel set")
        est = superlevel_measure(gfun, lam_k, smp.substream(1), config.budget, geo.unit_ball(n))
        prods.append((lam_k, est))
        rows.append(("log1mz1", k, lam_k, est.value, est.stderr, lam_k * est.value))
    lo = prods[0][0] * (prods[0][1].value + 3 * prods[0][1].stderr)
    hi = prods[-1][0] * (prods[-1][1].value - 3 * prods[-1][1].stderr)
    log.check(
        "unbounded_product_doubles",
        hi >= 2.0 * lo,
        f"product {lo:.3f} -> {hi:.3f} over k={config.k_min}..{config.k_max}",
    )
    ball_measure = geo.ball_volume(n, 0.5)
    log.check(
        "lambda_ball_divergence",
        prods[-1][0] * ball_measure >= 2.0 * prods[0][0] * ball_measure,
        f"lambda_k |B(0,1/2)|: {prods[0][0] * ball_measure:.4f} -> {prods[-1][0] * ball_measure:.4f}",
    )

    zc = op.coordinate_symbol()
    bounded_products = []
    for k in range(config.k_min, config.k_max + 1):
        zk = axis_point(n, 1.0 - 2.0**-k)
        gfun = lambda z: op.commutator_shrinking_family(zc, zk, z)
        env = commutator_envelope(zc, 1.0 - 2.0**-k, 1.0, n)
        ests = superlevel_batch(
            gfun,
            env,
            list(config.lambda_grid()),
            Sampler(config.seed + 977 * k, n),
            config.budget // 4,
            n,
            base_R=2.0**-k,
        )
        for lam, est in zip(config.lambda_grid(), ests):
            bounded_products.append(lam * (est.value + 3 * est.stderr))
            rows.append(("z1", k, lam, est.value, est.stderr, lam * est.value))
    cap = max(bounded_products)
    median = float(np.median([p for p in bounded_products if p > 0]))
    log.check(
        "bounded_product_stays_bounded",
        cap <= 6.0 * median,
        f"max weak-type product {cap:.3f}, median {median:.3f}",
    )
    header = ["symbol", "k", "lambda", "measure", "measure_stderr", "product"]
    payload = write_csv(_out(config, "hinfty.csv"), _meta(config), header, rows)
    if config.plot:
        ks = list(range(config.k_min, config.k_max + 1))
        line_plot(
            _out(config, "hinfty.svg"),
            ks,
            [("log probe product", [r[5] for r in rows if r[0] == "log1mz1"])],
            "k",
            "weak-type product",
            "unbounded symbol forces divergence",
            hashsalt=config.digest(),
        )
    return payload, log


def _battery(config: ExperimentConfig):
    """(label, center_abs, test function, normalized?) rows shared by the
    distributional experiments."""
    n = config.dim
    out = []
    for center in config.center_list():
        disk = fitted_polydisk(n, center)
        out.append((f"polydisk_norm", center, op.indicator(disk, normalize=True), True))
        out.append((f"polydisk_plain", center, op.indicator(disk), False))
        if center > 0:
            ball = geo.EuclideanBall(axis_point(n, center), (1.0 - center) / 2.0)
        else:
            ball = geo.EuclideanBall(np.zeros(n, dtype=complex), 0.5)
        out.append((f"ball_norm", center, op.indicator(ball, normalize=True), True))
    return out


def _battery_superlevels(b, center, f, lambdas, sampler, budget, n):
    coeff, region = f.terms[0]
    mass = abs(coeff) * region.volume
    gfun = lambda z: op.commutator_indicator_closed(b, axis_point(n, center), mass, z)
    if center == 0:
        sup = geo.unit_ball(n)
        pts = sup.sample(sampler.rng(), budget)
        vals = np.abs(gfun(pts))
        out = []
        for lam in lambdas:
            p = float(np.mean(vals > lam))
            out.append(
                MeasureEstimate(
                    value=sup.volume * p,
                    stderr=sup.volume * math.sqrt(max(p * (1 - p), 0.0) / budget),
                    hits=int(p * budget),
                    samples=budget,
                    region="ball",
                )
            )
        return out
    env = commutator_envelope(b, center, mass, n)
    return superlevel_batch(gfun, env, lambdas, sampler, budget, n, base_R=1.0 - center)


def cmd_llogl_verify(config: ExperimentConfig):
    """Distributional L log+ L bounds for the commutator on the test battery."""
    n = config.dim
    log = AssertionLog()
    lambdas = list(config.lambda_grid())
    symbols = [op.log_symbol(), op.coordinate_symbol(), op.constant_symbol(1.0)]
    rows = []
    per_center_sup = {}
    cond34 = []
    for b in symbols:
        for label, center, f, normalized in _battery(config):
            smp = Sampler(config.seed + 17, n).substream(stable_stream(b.key, label, center))
            if b.key.startswith("const"):
                ests = [MeasureEstimate(0.0, 0.0, 0, config.budget, "const") for _ in lambdas]
            else:
                ests = _battery_superlevels(b, center, f, lambdas, smp, config.budget, n)
            for lam, est in zip(lambdas, ests):
                rhs = orz.llogl_functional(f, lam)
                ratio = est.value / rhs if rhs > 0 else 0.0
                rows.append((b.key, label, center, lam, est.value, est.stderr, rhs, ratio))
                if b.key == "log1mz1" and normalized:
                    key = center
                    per_center_sup[key] = max(per_center_sup.get(key, 0.0), ratio)
                if b.key == "log1mz1" and not normalized and lam > 1.0:
                    coeff, region = f.terms[0]
                    cond34.append(
                        (lam, (est.value + 3 * est.stderr) * lam / region.volume)
                    )
    sups = list(per_center_sup.values())
    log.check(
        "sup_ratio_finite",
        all(np.isfinite(s) for s in sups) and max(sups) > 0,
        f"per-center sup ratios {[f'{s:.3f}' for s in sups]}",
    )
    log.check(
        "sup_ratio_stable",
        max(sups) < 4.0 * min(s for s in sups if s > 0),
        f"spread {max(sups) / min(s for s in sups if s > 0):.2f} (< 4 required)",
    )
    c34 = max(c for _, c in cond34)
    low = [c for lam, c in cond34 if lam <= 10.0]
    high = [c for lam, c in cond34 if lam > 10.0]
    log.check(
        "restricted_conditions",
        c34 < math.inf and (not high or max(high) <= max(max(low), 1e-12) * 4.0 + 1e-9),
        f"restricted-type constant {c34:.3f}; no growth in lambda "
        f"(low {max(low):.3f}, high {max(high) if high else 0.0:.3f})",
    )
    header = ["symbol", "family", "center", "lambda", "lhs", "lhs_stderr", "rhs", "ratio"]
    payload = write_csv(_out(config, "llogl.csv"), _meta(config), header, rows)
    if config.plot:
        series = []
        for center in config.center_list():
            ys = [r[7] for r in rows if r[0] == "log1mz1" and r[1] == "polydisk_norm" and r[2] == center]
            series.append((f"|z0|={center}", ys))
        line_plot(
            _out(config, "llogl.svg"),
            lambdas,
            series,
            "lambda",
            "LHS / RHS",
            "distributional bound: measure vs L log+ L functional",
            logx=True,
            hashsalt=config.digest(),
        )
    return payload, log


def cmd_necessity_functional(config: ExperimentConfig):
    """Square-root oscillation functional over hyperbolic balls: bounded for
    the Bloch symbol, divergent for the non-Bloch probe."""
    n = config.dim
    log = AssertionLog()
    shells = [2.0**-s for s in range(2, 11)]
    r = 1.0
    rows = []
    values = {}
    for b in (op.log_symbol(), op.inverse_symbol(), op.constant_symbol(1.0)):
        for i, gap in enumerate(shells):
            z0 = axis_point(n, 1.0 - gap)
            ball = geo.BergmanBall(z0, r)
            pts = ball.sample(Sampler(config.seed + 3 * i, n, stream=11).rng(), 8192)
            b0 = complex(b.value(z0[None, :])[0])
            val = float(np.mean(np.sqrt(np.abs(b.value(pts) - b0))))
            rows.append((b.key, gap, val))
            values.setdefault(b.key, []).append(val)
    log.check(
        "constant_zero", max(values["const(1+0j)"]) == 0.0, "constant symbol functional vanishes"
    )
    stable = max(values["log1mz1"]) <= 2.0 * min(values["log1mz1"])
    log.check(
        "bloch_stable",
        stable,
        f"log-symbol functional range [{min(values['log1mz1']):.3f}, {max(values['log1mz1']):.3f}]",
    )
    # sqrt-root oscillation grows like 2^(steps/2) for this probe, so the
    # 10x divergence threshold needs the battery's full 8 dyadic steps
    inv = values["inv1mz1"]
    log.check(
        "non_bloch_divergent",
        inv[-1] >= 10.0 * inv[0],
        f"probe functional grows {inv[0]:.3f} -> {inv[-1]:.3f} "
        f"({inv[-1] / inv[0]:.1f}x over {len(shells) - 1} dyadic steps)",
    )

    # pointwise equivalence between the commutator against a polydisk
    # indicator and the symbol increment, on the polydisk itself
    b = op.log_symbol()
    ratios = []
    for center in (0.5, 0.9, 0.99):
        disk = fitted_polydisk(n, center)
        pts = disk.sample(Sampler(config.seed, n, stream=77).rng(), 1000)
        pts = pts[norm(pts) < 1.0]
        z0 = axis_point(n, center)
        comm = np.abs(op.commutator_indicator_closed(b, z0, disk.volume, pts))
        diff = np.abs(b.value(pts) - complex(b.value(z0[None, :])[0]))
        keep = diff > 1e-9
        ratios.extend((comm[keep] / diff[keep]).tolist())
    spread = max(ratios) / min(ratios)
    log.check(
        "pointwise_equivalence",
        spread <= 64.0,
        f"commutator/increment ratio spread {spread:.2f} over {len(ratios)} samples",
    )
    header = ["symbol", "shell", "functional"]
    payload = write_csv(_out(config, "necessity.csv"), _meta(config), header, rows)
    if config.plot:
        line_plot(
            _out(config, "necessity.svg"),
            shells,
            [(k, v) for k, v in values.items()],
            "1-|z0|",
            "sqrt-oscillation functional",
            "necessity functional across boundary shells",
            logx=True,
            logy=True,
            hashsalt=config.digest(),
        )
    return payload, log


def _stratified_points(n, budget, shells, rng):
    """Boundary-stratified z sample with per-point volume weights."""
    edges = [0.0] + [1.0 - 2.0**-s for s in range(1, shells + 1)] + [1.0 - 1e-12]
    pts = []
    weights = []
    per = max(budget // (len(edges) - 1), 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        d = geo.sample_unit_sphere(rng, per, n)
        u = rng.random(per)
        rr = (lo ** (2 * n) + u * (hi ** (2 * n) - lo ** (2 * n))) ** (1.0 / (2 * n))
        pts.append(d * rr[:, None])
        vol = geo.ball_volume(n, hi) - geo.ball_volume(n, lo)
        weights.append(np.full(per, vol / per))
    return np.concatenate(pts), np.concatenate(weights)


def _quadrature_commutator_field(b, f, zs, sampler, budget_w):
    """[conj b, P] f at many z by shared-sample quadrature over f's regions."""
    n = zs.shape[1]
    cn = op.normalizing_constant(n)
    total = np.zeros(len(zs), dtype=complex)
    bz = np.conj(b.value(zs))
    for t, (coeff, region) in enumerate(f.terms):
        w = region.sample(sampler.substream(t).rng(), budget_w)
        bw = np.conj(b.value(w))
        chunk = max(1, 10**7 // budget_w)
        for start in range(0, len(zs), chunk):
            zc = zs[start : start + chunk]
            den = 1.0 - zc @ np.conj(w).T
            kern = cn / den ** (n + 1)
            total[start : start + chunk] += (
                coeff * region.volume * np.mean((bz[start : start + chunk, None] - bw[None, :]) * kern, axis=1)
            )
    return total


def cmd_weaktype_mod(config: ExperimentConfig):
    """L log+ L -> weak L^1 quasi-norm bound for harmonic symbols."""
    n = config.dim
    log = AssertionLog()
    grid, cache = _grid_and_cache(config)
    lambdas = list(config.lambda_grid())
    plain = orz.plain_llogl()
    rows = []
    ratios = {}
    symbols = [
        op.harmonic_re_symbol("coordinate"),
        op.harmonic_re_symbol("exp"),
        op.log_symbol(),
        op.constant_symbol(1.0),
    ]
    battery = [(label, c, f) for label, c, f, normalized in _battery(config) if normalized]
    zs, weights = _stratified_points(
        n, max(config.budget // 50, 4000), 8, Sampler(config.seed, n, stream=3).rng()
    )
    for b in symbols:
        if b.key.startswith("const"):
            bmo_value = 0.0
        else:
            bmo_value = orz.bmo_norm_dyadic(b, cache, tents_per_level=config.tents_per_level).value
        for label, center, f in battery:
            if b.key.startswith("const"):
                l1w = 0.0
            elif b.holomorphic:
                mass = abs(f.terms[0][0]) * f.terms[0][1].volume
                vals = np.abs(
                    op.commutator_indicator_closed(b, axis_point(n, center), mass, zs)
                )
                l1w = max(
                    lam * float(np.sum(weights[vals > lam])) for lam in lambdas
                )
            else:
                smp = Sampler(config.seed + 5, n).substream(stable_stream(b.key, label, center))
                vals = np.abs(_quadrature_commutator_field(b, f, zs, smp, 2048))
                l1w = max(lam * float(np.sum(weights[vals > lam])) for lam in lambdas)
            fnorm = orz.luxembourg_norm_global(f, plain)
            denom = bmo_value * fnorm
            ratio = l1w / denom if denom > 0 else 0.0
            rows.append((b.key, label, center, l1w, bmo_value, fnorm, ratio))
            if not b.key.startswith("const"):
                ratios.setdefault(b.key, []).append(ratio)
    log.check(
        "constant_zero",
        all(r[6] == 0.0 for r in rows if r[0].startswith("const")),
        "constant symbol gives zero ratio",
    )
    finite = all(np.isfinite(v) and v > 0 for vs in ratios.values() for v in vs)
    log.check("ratios_finite", finite, "all weak-type ratios finite and positive")
    a = max(ratios["re_z1"])
    c = max(ratios["log1mz1"])
    log.check(
        "normalized_agreement",
        max(a, c) <= 10.0 * min(a, c),
        f"normalized sup ratios: Re z1 {a:.3f}, log {c:.3f}",
    )
    header = ["symbol", "family", "center", "weak_l1", "bmo_norm", "llogl_norm", "ratio"]
    payload = write_csv(
        _out(config, "weaktype.csv"), _meta(config, grid.content_hash()[:16]), header, rows
    )
    if config.plot:
        keys = sorted(ratios)
        line_plot(
            _out(config, "weaktype.svg"),
            list(range(len(battery))),
            [(k, ratios[k]) for k in keys],
            "battery index",
            "weak-L1 / (BMO * LlogL)",
            "modified weak-type ratios",
            hashsalt=config.digest(),
        )
    return payload, log


def cmd_exp_osc(config: ExperimentConfig):
    """Refined distributional bound under exponential oscillation control."""
    n = config.dim
    log = AssertionLog()
    grid, cache = _grid_and_cache(config)
    lambdas = list(config.lambda_grid())
    rows = []
    sup_ratios = {}
    skip_notices = []
    battery = [(label, c, f) for label, c, f, normalized in _battery(config) if normalized]
    for b in (op.exp_symbol(), op.log_symbol()):
        for eps in config.eps_values():
            norm_report = orz.exp_osc_norm(b, eps, cache, tents_per_level=config.tents_per_level)
            if not np.isfinite(norm_report.value) or norm_report.value <= 0:
                skip_notices.append((b.key, eps))
                rows.append((b.key, eps, "skipped", 0.0, 0.0, 0.0, 0.0, 0.0))
                continue
            bn = norm_report.value
            for label, center, f in battery:
                smp = Sampler(config.seed + 29, n).substream(stable_stream(b.key, eps, label, center))
                ests = _battery_superlevels(b, center, f, lambdas, smp, config.budget, n)
                for lam, est in zip(lambdas, ests):
                    rhs = bn * orz.llogl_functional(f, lam, eps=eps, scale=bn)
                    ratio = est.value / rhs if rhs > 0 else 0.0
                    rows.append((b.key, eps, label, center, lam, est.value, rhs, ratio))
                    sup_ratios[(b.key, eps)] = max(sup_ratios.get((b.key, eps), 0.0), ratio)
    log.check(
        "bounded_symbol_all_eps",
        all((op.exp_symbol().key, eps) in sup_ratios for eps in config.eps_values()),
        "bounded symbol admits every tested eps",
    )
    log.check(
        "log_eps_half_skipped",
        ("log1mz1", 0.5) in skip_notices or 0.5 not in config.eps_values(),
        f"skip notices {skip_notices}",
    )
    finite = all(np.isfinite(v) for v in sup_ratios.values())
    log.check(
        "sup_ratios_finite",
        finite and all(v > 0 for v in sup_ratios.values()),
        "; ".join(f"{k}: {v:.3f}" for k, v in sup_ratios.items()),
    )
    if ("log1mz1", 1.0) in sup_ratios:
        # eps = 1 against the plain L log+ L bound: same shape up to constants
        base = cmd_llogl_reference_ratio(config)
        ratio = sup_ratios[("log1mz1", 1.0)] / base if base > 0 else math.inf
        log.check(
            "eps1_matches_llogl",
            0.25 <= ratio <= 4.0,
            f"eps=1 sup ratio vs plain functional ratio: {ratio:.3f}",
        )
    header = ["symbol", "eps", "family", "center", "lambda", "lhs", "rhs", "ratio"]
    payload = write_csv(
        _out(config, "exposc.csv"), _meta(config, grid.content_hash()[:16]), header, rows
    )
    return payload, log


def cmd_llogl_reference_ratio(config: ExperimentConfig) -> float:
    """Sup ratio of the plain distributional bound for the log symbol on the
    normalized polydisk battery (used as the eps = 1 cross-check)."""
    n = config.dim
    b = op.log_symbol()
    lambdas = list(config.lambda_grid())
    sup = 0.0
    for label, center, f, normalized in _battery(config):
        if not normalized or not label.startswith("polydisk"):
            continue
        smp = Sampler(config.seed + 17, n).substream(stable_stream(b.key, label, center))
        ests = _battery_superlevels(b, center, f, lambdas, smp, config.budget, n)
        for lam, est in zip(lambdas, ests):
            rhs = orz.llogl_functional(f, lam)
            if rhs > 0:
                sup = max(sup, est.value / rhs)
    return sup


def cmd_geometry_check(config: ExperimentConfig):
    """Every geometric, dyadic, and Orlicz property suite, one row each."""
    n = config.dim
    log = AssertionLog()
    grid, cache = _grid_and_cache(config)
    results = [
        checks.check_polydisk_chain(n=n, seed=config.seed + 1),
        checks.check_koranyi_chain(n=n, seed=config.seed + 2),
        checks.check_mobius_invariance(n=n, seed=config.seed + 3),
        checks.check_frame_determinism(n=max(n, 2)),
        checks.check_bergman_membership_oracle(n=n),
        checks.check_tent_koranyi(n=n, inflation=config.koranyi_carleson_c),
        checks.check_partition(grid),
        checks.check_nesting(grid, cache),
        checks.check_child_cap(grid),
        checks.check_volume_law(grid, cache),
        checks.check_tent_expansion(cache, eta=config.eta),
        checks.check_layer_decomposition(cache),
        checks.check_empty_layers(cache),
        checks.check_kernel_hermitian(n=n),
        checks.check_commutator_constant_annihilation(n=n),
        checks.check_majorant_domination(cache),
        checks.check_model_domination(cache),
        checks.check_model_monotone(cache),
        checks.check_submultiplicativity(),
        checks.check_young_comparability(),
        checks.check_generalized_holder(cache),
        checks.check_young_maximal_distributional(cache),
        checks.check_john_nirenberg(cache, bloch_value=orz.bloch_norm(op.log_symbol(), dim=n).value),
        checks.check_norm_equivalences(cache),
        checks.check_oscillation_pointwise(cache, eta=config.eta),
        checks.check_mc_determinism(n=n),
        checks.check_mc_unbiased(n=n),
        checks.check_mc_stratified_agreement(n=n),
    ]
    rows = []
    for res in results:
        log.check(res["name"], res["passed"], res["detail"])
        rows.append((res["name"], "pass" if res["passed"] else "FAIL", res["detail"]))
    header = ["property", "status", "detail"]
    payload = write_csv(
        _out(config, "geometry_check.csv"), _meta(config, grid.content_hash()[:16]), header, rows
    )
    return payload, log


COMMANDS = {
    "counterexample": cmd_counterexample,
    "llogl": cmd_llogl_verify,
    "hinfty": cmd_hinfty,
    "necessity": cmd_necessity_functional,
    "weaktype": cmd_weaktype_mod,
    "exposc": cmd_exp_osc,
    "geometry": cmd_geometry_check,
}
