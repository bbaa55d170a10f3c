"""Acceptance suite: each criterion runs at its stated size and tolerance.

``run_suite`` is shared by the ``verify`` subcommand and the test suite.
Every criterion returns a :class:`CriterionResult` listing its individual
checks with measured value, target and outcome.
"""
from __future__ import annotations

import functools
import hashlib
import inspect
import io
import math
import os
import tempfile
import time
from contextlib import redirect_stdout
from dataclasses import dataclass, field

import numpy as np

from . import experiments as X
from . import floating as FL
from . import hull, noneuclid, stein
from .geometry import parse_body
from .weights import _profile, make_weight, radial_polygon_integral


@dataclass
class Check:
    name: str
    value: object
    target: str
    ok: bool


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.ok for c in self.checks)

    def add(self, name, value, target, ok):
        self.checks.append(Check(name, value, target, bool(ok)))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [c.name for c in self.checks if not c.ok]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"criterion {self.number:2d} {status}  {self.title}  [{self.seconds:.1f}s]{tail}"

    def report(self) -> str:
        rows = [self.line()]
        for c in self.checks:
            v = f"{c.value:.6g}" if isinstance(c.value, float) else str(c.value)
            rows.append(f"    {'ok ' if c.ok else 'BAD'} {c.name}: {v}  (target {c.target})")
        return "\n".join(rows)


def _timed(number, title):
    def deco(fn):
        @functools.wraps(fn)
        def run(*args, **kw):
            res = CriterionResult(number, title)
            t0 = time.perf_counter()
            fn(res, *args, **kw)
            res.seconds = time.perf_counter() - t0
            return res

        return run

    return deco


@functools.lru_cache(maxsize=4)
def euclidean_deficit_run(seed: int = 1, workers: int = 1):
    cfg = X.ExperimentConfig.reference("euclidean", tuple(2 ** k for k in range(7, 14)), 400, seed)
    t0 = time.perf_counter()
    records, summary = X.run_experiment(cfg, workers)
    return summary, time.perf_counter() - t0


@_timed(1, "Euclidean deficit rate (uniform disc, n = 2^7..2^13, R = 400)")
def criterion_1(res, seed=1, workers=1):
    s, secs = euclidean_deficit_run(seed, workers)
    res.add("deficit slope", s.deficit_slope, "-2/3 +- 0.07", abs(s.deficit_slope + 2 / 3) <= 0.07)
    rel = abs(s.limit_empirical / s.limit_rhs - 1)
    res.add("extrapolated limit / rhs - 1", rel, "<= 0.05", rel <= 0.05)
    res.add("runtime [s]", secs, "<= 300", secs <= 300)


@_timed(2, "Variance rate (same run)")
def criterion_2(res, seed=1, workers=1):
    s, _ = euclidean_deficit_run(seed, workers)
    res.add("variance slope", s.variance_slope, "-5/3 +- 0.15", abs(s.variance_slope + 5 / 3) <= 0.15)


@_timed(3, "CLT matrix (six geometries, n = 4096, R = 2000)")
def criterion_3(res, seed=3, workers=1):
    t0 = time.perf_counter()
    mat = X.clt_matrix(4096, 2000, seed, workers)
    for g, s in mat.items():
        res.add(f"{g} KS", s.ks, "<= 0.05", s.ks <= 0.05)
        res.add(f"{g} |skewness|", abs(s.skewness), "<= 0.15", abs(s.skewness) <= 0.15)
        res.add(f"{g} |excess kurtosis|", abs(s.excess_kurtosis), "<= 0.3", abs(s.excess_kurtosis) <= 0.3)
        res.add(f"{g} W1", s.w1, "<= 0.06", s.w1 <= 0.06)
    secs = time.perf_counter() - t0
    res.add("runtime [s]", secs, "<= 1200", secs <= 1200)


def random_convex_polygon(rng, k: int, max_radius: float) -> np.ndarray:
    """Counter-clockwise ``k``-gon inscribed in a random ellipse inside the disc of radius ``max_radius``."""
    a, b = rng.uniform(0.3, 1.0, 2)
    rot = rng.uniform(0, math.pi)
    c = rng.uniform(-0.2, 0.2, 2)
    t = np.sort(rng.uniform(0, 2 * math.pi, k))
    p = np.stack([a * np.cos(t), b * np.sin(t)], axis=1)
    R = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    p = p @ R.T + c
    return p * (max_radius / np.max(np.linalg.norm(p, axis=1)))


@_timed(4, "Pushforward identities (100 random 32-gons per geometry)")
def criterion_4(res, seed=4):
    rng = np.random.default_rng(seed)
    for kind, rmax, lift, area in (("spherical", 3.0, noneuclid.gnomonic_sphere_inverse, noneuclid.spherical_polygon_area),
                                   ("hyperbolic", 0.95, noneuclid.gnomonic_hyper_inverse, noneuclid.hyperbolic_polygon_area)):
        G = _profile(kind, 2, None)[1]
        worst = 0.0
        for _ in range(100):
            v = random_convex_polygon(rng, 32, rng.uniform(0.2, rmax))
            oracle = area(lift(v))
            integral = radial_polygon_integral(v, kind, None, G)
            worst = max(worst, abs(integral / oracle - 1))
        res.add(f"{kind} max relative gap", worst, "<= 1e-6", worst <= 1e-6)


@_timed(5, "Hilbert-hyperbolic consistency (Busemann density for C = disc)")
def criterion_5(res):
    dom = noneuclid.HilbertDomain(parse_body("disc:1"))
    r = np.linspace(0.0, 0.95, 39)
    rng = np.random.default_rng(5)
    ang = rng.uniform(0, 2 * math.pi, len(r))
    x = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    rel = np.abs(dom.busemann_density(x) / (1 - r * r) ** -1.5 - 1)
    res.add("max relative gap", float(rel.max()), "<= 1e-4", rel.max() <= 1e-4)


@_timed(6, "Floating-body suite")
def criterion_6(res, seed=6, vu_reps=200):
    disc, ell = parse_body("disc:1"), parse_body("ellipse:2:1")
    # monotonicity: literal containment along a decreasing delta sequence
    for K, w in ((ell, "uniform"), (parse_body("disc:0.9"), "hyperbolic"), (parse_body("fourier:1:0.08:3"), "spherical")):
        deltas = [0.2, 0.1, 0.05, 0.02, 0.01, 1e-3]
        bodies = [FL.floating_body(K, w, d) for d in deltas]
        ok = all(FL.polygon_contains(b2, b1, 1e-12) for b1, b2 in zip(bodies, bodies[1:]))
        res.add(f"monotone in delta ({K.id}, {w})", ok, "nested", ok)
    # uniform weight reproduces the classical floating body from exact cap areas
    gap = 0.0
    for K in (disc, ell):
        for d in (1e-3, 1e-2, 0.1):
            gap = max(gap, abs(FL.floating_body(K, "uniform", d).area - FL.classical_floating_body(K, d).area))
    res.add("uniform vs classical area gap", gap, "<= 1e-6", gap <= 1e-6)
    # wet part exponent
    ds = np.logspace(-4, -2, 9)
    for K in (disc, ell):
        s = X.fit_rate(ds, [FL.wet_part_volume(K, None, d) for d in ds])[0]
        res.add(f"wet-part slope ({K.id})", s, "2/3 +- 0.03", abs(s - 2 / 3) <= 0.03)
    # comparison with unweighted floating bodies (hyperbolic weight on disc(0.9))
    K9 = parse_body("disc:0.9")
    deltas = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2]
    sw = FL.sandwich_check(K9, make_weight("hyperbolic", K9), deltas)
    cs = np.array(sw["c_delta"])
    res.add("sandwich constant c in (0, 1)", sw["c"], "0 < c < 1", 0 < sw["c"] < 1)
    res.add("sandwich containments", all(sw["contained"]), "all", all(sw["contained"]))
    decade = cs[:4].max() / cs[:4].min()
    res.add("c_delta spread over [1e-3, 1e-2]", float(decade), "<= 1.5", decade <= 1.5)
    # containment in random polytopes
    for w in ("uniform", "hyperbolic"):
        vu = FL.vu_containment(K9, w, reps=vu_reps, seed=seed)
        fail = np.array(vu["failure"])
        mono = bool(np.all(np.diff(fail, axis=1) <= 0))
        res.add(f"Vu failure nonincreasing in c ({w})", mono, "monotone", mono)
        res.add(f"Vu calibrated c* ({w})", vu["c_star"], "finite, failure <= 0.01", math.isfinite(vu["c_star"]))


@_timed(7, "Cap asymptotics and visibility regions")
def criterion_7(res):
    disc = parse_body("disc:1")
    chk = FL.cap_limit_check(disc, 0.0)
    res.add("disc cap ratio at t = 1e-5 vs 4 sqrt2 / 3", chk["rel_error"][-1], "<= 0.01", chk["rel_error"][-1] <= 0.01)
    # two-sided cap bounds over an 8-point boundary grid of the ellipse
    ell = parse_body("ellipse:2:1")
    ratios = np.array([FL.cap_limit_check(ell, th)["ratios"] for th in np.arange(8) * math.pi / 4])
    c1, c2 = ratios.min(), ratios.max()
    k = ell.curvature(np.linspace(0, 2 * math.pi, 721))
    span = math.sqrt(k.max() / k.min())
    res.add("ellipse cap-ratio bounds c2/c1", float(c2 / c1), f"<= 1.05 sqrt(kmax/kmin) = {1.05 * span:.4g}",
            c2 / c1 <= 1.05 * span)
    deltas = np.logspace(-5, -3, 5)
    regs = [FL.visibility_region(disc, 0.3, d) for d in deltas]
    h_in = np.array([r.t_in / d ** (2 / 3) for r, d in zip(regs, deltas)])
    h_out = np.array([r.t_out / d ** (2 / 3) for r, d in zip(regs, deltas)])
    area = np.array([r.area / d for r, d in zip(regs, deltas)])
    union = np.array([FL.visibility_union_area(r) / d for r, d in zip(regs, deltas)])
    for name, v in (("inner cap constant c1", h_in), ("outer cap constant c2", h_out),
                    ("area / delta", area), ("union area / delta", union)):
        spread = float(v.max() / v.min())
        res.add(f"{name} spread over [1e-5, 1e-3] (range {v.min():.4g}..{v.max():.4g})", spread, "<= 1.25",
                spread <= 1.25)
    ok = bool(np.all(h_in > 0) and np.all(h_in <= h_out))
    res.add("cap sandwich C(z, c1 d^2/3) in region in C(z, c2 d^2/3)", ok, "0 < c1 <= c2", ok)


@functools.lru_cache(maxsize=2)
def stein_curve(seed: int = 8):
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    return stein.bound_curve(K, w, w, tuple(2 ** k for k in range(7, 12)), R=3000, R_rec=24,
                             rng=np.random.default_rng(seed))


@_timed(8, "Stein diagnostics (uniform disc)")
def criterion_8(res, seed=8):
    bc = stein_curve(seed)
    ns = np.array(bc.ns)
    s3 = X.fit_rate(ns, [e.value for e in bc.gamma3])[0]
    s2 = X.fit_rate(ns, [e.value for e in bc.gamma2])[0]
    res.add("gamma3 slope (n = 2^7..2^11)", s3, "<= -2.7", s3 <= -2.7)
    res.add("gamma2 surrogate slope (n = 2^7..2^11)", s2, "<= -4.5", s2 <= -4.5)
    b = np.array(bc.bound)
    dec = bool(np.all(np.diff(b) < 0))
    res.add("bound (c = 1) strictly decreasing, n = 2^7..2^11", [round(float(x), 4) for x in b], "decreasing", dec)
    # exact zeros for non-vertices
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    F = stein.Functional(K, w, w, 64)
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(20):
        x = F.sample(rng)
        verts = set(hull.convex_hull(x).indices.tolist())
        for i in range(F.n):
            if i not in verts:
                ok &= stein.diff1(F, x, i) == 0.0 and F(x) - F(np.delete(x, i, axis=0)) == 0.0
    res.add("D_i f = 0 exactly off the vertex set (20 samples)", ok, "exact", ok)


@_timed(9, "Dual-volume consistency")
def criterion_9(res, seed=9):
    disc = parse_body("disc:1")
    P = hull.convex_hull(disc.proxy(4096))
    v1 = X.dual_volume(P, 1)
    res.add("V~1 of the fine disc polygon", abs(v1 - math.pi), "|V~1 - pi| <= 1e-4", abs(v1 - math.pi) <= 1e-4)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        while True:
            Q = hull.convex_hull(rng.uniform(-1, 1, (12, 2)) * rng.uniform(0.3, 1.5, 2))
            if bool(Q.contains(np.zeros((1, 2)), -1e-9)[0]):
                break
        est = X.dual_volume_section_oracle(Q, 1, rng, R=4000)
        worst = max(worst, abs(est.value - X.dual_volume(Q, 1)) / est.se)
    res.add("radial formula vs random sections (max |z|, 20 polygons)", worst, "<= 3", worst <= 3)
    gap = max(abs(X.limit_constant_c(d, d) - X.limit_constant_c_tilde(d, d)) for d in range(2, 7))
    res.add("max |c(d,d) - c~(d,d)|, d = 2..6", gap, "<= 1e-15", gap <= 1e-15)


@_timed(10, "Determinism across worker counts")
def criterion_10(res, seed=10):
    from . import cli

    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "det.ini")
        with open(cfg, "w") as fh:
            fh.write(X.ExperimentConfig.reference("hyperbolic", (64, 256), 24, seed).to_ini())
        for workers in (1, 2, 3):
            out = os.path.join(tmp, f"w{workers}")
            with redirect_stdout(io.StringIO()):
                code = cli.main(["simulate", "--config", cfg, "--seed", str(seed), "--workers", str(workers),
                                 "--out", out])
            with open(os.path.join(out, "records.csv"), "rb") as fh:
                digests.append((code, hashlib.sha256(fh.read()).hexdigest()))
    same = len({d for _, d in digests}) == 1 and all(c == 0 for c, _ in digests)
    res.add("records.csv identical for --workers 1, 2, 3", digests[0][1][:16], "identical", same)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
            7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}
#: Criteria run by ``verify --quick`` (the long CLT and Stein runs are skipped).
QUICK = (1, 2, 4, 5, 6, 7, 9, 10)


def clear_caches():
    euclidean_deficit_run.cache_clear()
    stein_curve.cache_clear()


def run_suite(quick: bool = False, seed: int = 0, workers: int = 1, only=None, echo=print) -> list:
    """Run the criteria (offsetting the per-criterion default seeds by ``seed``)."""
    numbers = only or (QUICK if quick else tuple(CRITERIA))
    out = []
    for k in numbers:
        fn = CRITERIA[k]
        params = inspect.signature(fn).parameters
        kw = {}
        if "seed" in params:
            # criteria 1 and 2 share one run
            kw["seed"] = (1 if k == 2 else k) + seed
        if "workers" in params:
            kw["workers"] = workers
        res = fn(**kw)
        if echo:
            echo(res.report())
        out.append(res)
    return out
