"""Normal-approximation diagnostics for the weighted volume of random polytopes.

The functional is ``f(x_1, ..., x_k) = Psi([x_1, ..., x_k]) - E_n`` with
``Psi`` a probability weight and ``[.]`` the convex hull.  First-order
differences ``D_i f`` are computed locally in the plane: removing a hull
vertex only changes the hull inside the triangle it spans with its two
neighbours, so ``D_i f`` is the measure of that triangle minus the hull of
the sample points inside it.  This gives exact zeros for non-vertices and
avoids cancellation between two nearly equal totals.

Second-order differences enter the moment quantities only through the
event ``D_{i,j} f != 0``, which in the plane is structural: either ``i``
and ``j`` are adjacent hull vertices, or one is a vertex and the other a
point that becomes a vertex once the first is removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import hull
from .geometry import SmoothBody
from .weights import WeightFunction, weighted_volume

#: Recombination patterns sampled for the gamma_1 / gamma_2 surrogates.
RECOMBINATIONS = 16


@dataclass(frozen=True, eq=False)
class Functional:
    """``f(x) = Psi(conv x) - E_n`` for a sampling weight ``phi`` and a measuring weight ``psi``."""

    body: SmoothBody
    phi: WeightFunction
    psi: WeightFunction
    n: int
    mean: float = 0.0

    def __call__(self, points) -> float:
        pts = np.asarray(points, dtype=float)
        P = hull.convex_hull(pts, strict=True)
        return weighted_volume(P, self.psi) - self.mean

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        return self.phi.sample(rng, self.n if n is None else n)

    def with_mean(self, mean: float) -> "Functional":
        return Functional(self.body, self.phi, self.psi, self.n, float(mean))

    def pilot_mean(self, R: int, rng: np.random.Generator) -> float:
        """Monte Carlo estimate of ``E Psi(K_phi(n))``."""
        return float(np.mean([self(self.sample(rng)) + self.mean for _ in range(R)]))


# -- first-order differences ----------------------------------------------------------------------


@dataclass
class LocalDifferences:
    """``D_i f`` for every hull vertex of a planar sample, with removal chains.

    ``ring`` lists sample indices of the hull in counter-clockwise order,
    ``values[k]`` is ``D_{ring[k]} f`` and ``chains[k]`` holds the sample
    indices that become hull vertices when ``ring[k]`` is removed.
    """

    hull: hull.Polytope
    ring: np.ndarray
    values: np.ndarray
    chains: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(zip(self.ring.tolist(), self.values.tolist()))

    def interacting(self) -> dict:
        """``i -> {j : D_{i,j} f != 0}`` (symmetric)."""
        nb: dict = {}
        m = len(self.ring)
        for k, i in enumerate(self.ring.tolist()):
            for j in (int(self.ring[(k - 1) % m]), int(self.ring[(k + 1) % m]), *self.chains[k].tolist()):
                if j != i:
                    nb.setdefault(i, set()).add(j)
                    nb.setdefault(j, set()).add(i)
        return nb


def _removal(points: np.ndarray, ring: np.ndarray, k: int, psi: WeightFunction):
    m = len(ring)
    a, b, c = int(ring[(k - 1) % m]), int(ring[k]), int(ring[(k + 1) % m])
    A, B, C = points[a], points[b], points[c]
    tri = np.array([A, B, C])
    lost = psi.polygon_measure(tri)
    rel = points - A
    e1, e2, e3 = B - A, C - B, A - C
    s1 = e1[0] * rel[:, 1] - e1[1] * rel[:, 0]
    s2 = e2[0] * (points[:, 1] - B[1]) - e2[1] * (points[:, 0] - B[0])
    s3 = e3[0] * (points[:, 1] - C[1]) - e3[1] * (points[:, 0] - C[0])
    inside = np.flatnonzero((s1 >= 0) & (s2 >= 0) & (s3 >= 0))
    inside = inside[(inside != a) & (inside != b) & (inside != c)]
    if len(inside) == 0:
        return lost, np.zeros(0, dtype=np.intp)
    cand = np.concatenate([[a, c], inside])
    small = hull.convex_hull(points[cand])
    if small.degenerate:
        return lost, np.zeros(0, dtype=np.intp)
    chain = cand[small.indices]
    chain = chain[(chain != a) & (chain != c)]
    return lost - psi.polygon_measure(small.vertices), chain


def local_differences(F: Functional, points, P: hull.Polytope | None = None) -> LocalDifferences:
    """All nonzero first-order differences of a planar sample."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] != 2:
        raise ValueError("local differences are planar")
    if P is None:
        P = hull.convex_hull(pts, strict=True)
    ring = np.asarray(P.indices)
    values = np.empty(len(ring))
    chains = []
    for k in range(len(ring)):
        values[k], ch = _removal(pts, ring, k, F.psi)
        chains.append(ch)
    return LocalDifferences(P, ring, values, chains)


def diff1(F: Functional, x, i: int) -> float:
    """``D_i f(x) = f(x) - f(x without x_i)``."""
    pts = np.asarray(x, dtype=float)
    n, d = pts.shape
    if n < d + 2:
        raise ValueError(f"need at least d+2 = {d + 2} points")
    P = hull.convex_hull(pts, strict=True)
    pos = np.flatnonzero(P.indices == i)
    if len(pos) == 0:
        return 0.0
    if d == 2:
        return float(_removal(pts, np.asarray(P.indices), int(pos[0]), F.psi)[0])
    rest = np.delete(pts, i, axis=0)
    return weighted_volume(P, F.psi) - weighted_volume(hull.convex_hull(rest, strict=True), F.psi)


def diff2(F: Functional, x, i: int, j: int) -> float:
    """``D_{i,j} f(x) = f(x) - f(x_{-i}) - f(x_{-j}) + f(x_{-i,-j})``, as ``D_i f(x) - D_i f(x_{-j})``."""
    if i == j:
        raise ValueError("i and j must differ")
    pts = np.asarray(x, dtype=float)
    rest = np.delete(pts, j, axis=0)
    i_rest = i - (i > j)
    return diff1(F, pts, i) - diff1(F, rest, i_rest)


def diff2_nonzero(F: Functional, x, i: int, j: int) -> bool:
    """Structural test of ``D_{i,j} f(x) != 0`` for a planar sample."""
    nb = local_differences(F, x).interacting()
    return j in nb.get(i, ())


# -- moment quantities --------------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with its standard error."""

    value: float
    se: float

    @property
    def rel_se(self) -> float:
        return self.se / self.value if self.value > 0 else math.inf

    @property
    def reliable(self) -> bool:
        """False when the standard error exceeds 20% of the estimate."""
        return self.rel_se <= 0.2

    @classmethod
    def from_samples(cls, xs) -> "Estimate":
        xs = np.asarray(xs, dtype=float)
        se = float(np.std(xs, ddof=1) / math.sqrt(len(xs))) if len(xs) > 1 else math.inf
        return cls(float(np.mean(xs)), se)


def gamma_moments(F: Functional, R: int, rng: np.random.Generator, return_values: bool = False):
    """Estimates of ``gamma_3 = E|D_1 f|^3`` and ``gamma_4 = E|D_1 f|^4``.

    By exchangeability ``E|D_1 f(X)|^p = E[(1/n) sum_i |D_i f(X)|^p]``, and
    the sum only runs over hull vertices.  With ``return_values`` the
    measured ``Psi`` values of the replications are returned as well.
    """
    g3, g4, vals = np.empty(R), np.empty(R), np.empty(R)
    for r in range(R):
        x = F.sample(rng)
        loc = local_differences(F, x)
        a = np.abs(loc.values)
        g3[r] = np.sum(a ** 3) / F.n
        g4[r] = np.sum(a ** 4) / F.n
        vals[r] = weighted_volume(loc.hull, F.psi)
    out = (Estimate.from_samples(g3), Estimate.from_samples(g4))
    return (*out, vals) if return_values else out


@dataclass(frozen=True)
class RecombinationEstimates:
    """Sampled surrogates for ``gamma_1`` and ``gamma_2`` (maxima over patterns)."""

    gamma1: Estimate
    gamma2: Estimate
    gamma1_relaxed: Estimate
    per_pattern: tuple
    patterns: int


def _recombination_patterns(S: int, rng: np.random.Generator) -> list:
    """Per-coordinate selection probabilities over ``{X, X', X''}`` for ``(Y, Y', Z, Z')``.

    Pattern 0 takes every vector equal to ``X``; the others draw Dirichlet
    probabilities, so coordinates are recombined independently and the
    integrand stays exchangeable.
    """
    pats = [np.tile([1.0, 0.0, 0.0], (4, 1))]
    for _ in range(S - 1):
        pats.append(rng.dirichlet(np.full(3, 0.5), size=4))
    return pats


def _select(base, probs, rng):
    n = base.shape[1]
    choice = rng.choice(3, size=n, p=probs)
    return base[choice, np.arange(n)]


def _gamma_terms(F, Y, Y2, Z, Z2):
    locs = [local_differences(F, v) for v in (Y, Y2, Z, Z2)]
    return _gamma_terms_local(F.n, *locs)


def _gamma_terms_local(n, lY, lY2, lZ, lZ2):
    nbY = lY.interacting()
    nbY2 = nbY if lY2 is lY else lY2.interacting()
    dZ = lZ.as_dict()
    dZ2 = dZ if lZ2 is lZ else lZ2.as_dict()
    aZ = {k: v * v for k, v in dZ.items()}
    aZ2 = {k: v * v for k, v in dZ2.items()}
    g2 = 0.0
    for i, js in nbY.items():
        ai = aZ.get(i)
        if ai is None:
            continue
        g2 += ai * sum(aZ2.get(j, 0.0) for j in js)
    g2 /= n * (n - 1)
    g1 = 0.0
    g1r = 0.0
    for i, js in nbY.items():
        a = [aZ.get(j, 0.0) for j in js]
        ks = nbY2.get(i, ())
        for j, aj in zip(js, a):
            if aj == 0.0:
                continue
            g1 += aj * sum(aZ2.get(k, 0.0) for k in ks if k != j)
            g1r += aj * (sum(aZ2.values()) - aZ2.get(j, 0.0) - aZ2.get(i, 0.0))
    scale = n * (n - 1) * (n - 2)
    return g1 / scale, g2, g1r / scale


def gamma_recombination_estimates(F: Functional, R: int, rng: np.random.Generator,
                                  S: int = RECOMBINATIONS) -> RecombinationEstimates:
    """Lower-bound surrogates for the recombination suprema ``gamma_1`` and ``gamma_2``.

    For each of ``S`` recombination patterns the expectation is estimated
    from ``R`` triples ``(X, X', X'')``, symmetrised over index pairs and
    triples; the surrogate is the maximum over patterns.  ``gamma1_relaxed``
    drops the indicator on ``Y'`` and can only be larger.
    """
    pats = _recombination_patterns(S, rng)
    rows = []
    for p in pats:
        t1, t2, t1r = np.empty(R), np.empty(R), np.empty(R)
        for r in range(R):
            base = np.stack([F.sample(rng) for _ in range(3)])
            Y, Y2, Z, Z2 = (_select(base, p[k], rng) for k in range(4))
            t1[r], t2[r], t1r[r] = _gamma_terms(F, Y, Y2, Z, Z2)
        rows.append((Estimate.from_samples(t1), Estimate.from_samples(t2), Estimate.from_samples(t1r)))
    k1 = int(np.argmax([r[0].value for r in rows]))
    k2 = int(np.argmax([r[1].value for r in rows]))
    return RecombinationEstimates(rows[k1][0], rows[k2][1], rows[k1][2], tuple(rows), S)


def normal_approximation_bound(n: int, variance: float, g1: float, g2: float, g3: float, g4: float,
                               c: float = 1.0) -> float:
    """Wasserstein bound for the standardised functional, up to the absolute constant ``c``.

    ``c sqrt(n) / V (sqrt(n^2 g1) + sqrt(n g2) + sqrt(n / V) g3 + sqrt(g4))``.
    """
    V = variance
    return c * math.sqrt(n) / V * (math.sqrt(n * n * g1) + math.sqrt(n * g2) + math.sqrt(n / V) * g3
                                   + math.sqrt(g4))


# -- distance to the normal law ------------------------------------------------------------------


def _G(t):
    """Antiderivative of the standard normal distribution function."""
    return t * special.ndtr(t) + np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)


def wasserstein1_to_normal(samples) -> float:
    """``W_1`` between the empirical law of ``samples`` and ``N(0, 1)``.

    Exact: ``int |F_R - Phi|`` is split at the sample points and at the
    crossings ``Phi^{-1}(k/R)``, and each piece integrated in closed form.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    R = len(s)
    if R < 2:
        raise ValueError("need at least two samples")
    # left tail: int_{-inf}^{s_1} Phi ; right tail: int_{s_R}^{inf} (1 - Phi)
    total = float(_G(s[0])) + float(_G(-s[-1]))
    a, b = s[:-1], s[1:]
    c = np.arange(1, R) / R
    x = special.ndtri(c)
    xm = np.clip(x, a, b)
    # on [a, xm]: c - Phi >= 0 ; on [xm, b]: Phi - c >= 0
    left = c * (xm - a) - (_G(xm) - _G(a))
    right = (_G(b) - _G(xm)) - c * (b - xm)
    return total + float(np.sum(left + right))


@dataclass(frozen=True)
class NormalitySummary:
    ks: float
    skewness: float
    excess_kurtosis: float
    w1: float
    degenerate: bool = False

    def passes(self, ks=0.05, skew=0.15, kurt=0.3, w1=0.06) -> bool:
        return (not self.degenerate and self.ks <= ks and abs(self.skewness) <= skew
                and abs(self.excess_kurtosis) <= kurt and self.w1 <= w1)


def normality_summary(samples) -> NormalitySummary:
    """KS statistic against ``N(0, 1)``, sample skewness, excess kurtosis and ``W_1``.

    Samples are expected to be standardised; constant samples are flagged
    as degenerate (their KS statistic is 0.5).
    """
    x = np.asarray(samples, dtype=float)
    if len(x) < 8:
        raise ValueError("normality summary needs at least 8 samples")
    ks = float(stats.kstest(x, "norm").statistic)
    if np.ptp(x) == 0:
        return NormalitySummary(ks, math.nan, math.nan, wasserstein1_to_normal(x), True)
    return NormalitySummary(ks, float(stats.skew(x)), float(stats.kurtosis(x)), wasserstein1_to_normal(x))


def standardize(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    sd = np.std(v, ddof=1)
    if not sd > 0:
        raise ValueError("zero sample variance")
    return (v - v.mean()) / sd


# -- coupled estimates across sample sizes -------------------------------------------------------------


@dataclass(frozen=True)
class BoundCurve:
    """Moment estimates and the assembled bound along an increasing grid of ``n``."""

    ns: tuple
    variance: tuple
    gamma1: tuple
    gamma2: tuple
    gamma3: tuple
    gamma4: tuple
    bound: tuple
    w1: tuple = ()

    def rows(self) -> list:
        keys = ("variance", "gamma1", "gamma2", "gamma3", "gamma4")
        out = []
        for k, n in enumerate(self.ns):
            row = {"n": n}
            for key in keys:
                e = getattr(self, key)[k]
                row[key], row[key + "_se"] = e.value, e.se
            row["bound"] = self.bound[k]
            if self.w1:
                row["w1"] = self.w1[k]
            out.append(row)
        return out

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.bound) < 0))

    def slope(self, key: str = "bound") -> float:
        y = [v.value if isinstance(v, Estimate) else v for v in getattr(self, key)]
        return float(np.polyfit(np.log(self.ns), np.log(y), 1)[0])


def bound_curve(body: SmoothBody, phi: WeightFunction, psi: WeightFunction, ns, R: int, R_rec: int,
                rng: np.random.Generator, S: int = RECOMBINATIONS, c: float = 1.0) -> BoundCurve:
    """Estimate the moment quantities for every ``n`` in ``ns`` with common random numbers.

    Each replication draws ``max(ns)`` points and evaluates every ``n`` on the
    first ``n`` of them (and likewise for the recombined triples, with the
    same patterns for every ``n``).  Estimates at a single ``n`` are
    unchanged in law; their ratios across ``n`` are far less noisy.  The
    all-``X`` pattern, which carries the maximum in practice, is estimated
    from all ``R`` main replications; the other ``S - 1`` patterns use
    ``R_rec`` recombined triples each.
    """
    ns = tuple(int(n) for n in ns)
    N = max(ns)
    Fs = [Functional(body, phi, psi, n) for n in ns]
    m = len(ns)
    vals, g3, g4 = np.empty((m, R)), np.empty((m, R)), np.empty((m, R))
    t0_1, t0_2 = np.empty((m, R)), np.empty((m, R))
    for r in range(R):
        x = phi.sample(rng, N)
        for k, F in enumerate(Fs):
            loc = local_differences(F, x[:F.n])
            a = np.abs(loc.values)
            g3[k, r] = np.sum(a ** 3) / F.n
            g4[k, r] = np.sum(a ** 4) / F.n
            vals[k, r] = weighted_volume(loc.hull, psi)
            # pattern 0 (all four vectors equal to X) reuses the main samples
            t0_1[k, r], t0_2[k, r], _ = _gamma_terms_local(F.n, loc, loc, loc, loc)
    pats = _recombination_patterns(S, rng)
    t1, t2 = np.empty((S, m, R_rec)), np.empty((S, m, R_rec))
    for s, p in enumerate(pats):
        if s == 0:
            continue
        for r in range(R_rec):
            base = np.stack([phi.sample(rng, N) for _ in range(3)])
            Y, Y2, Z, Z2 = (_select(base, p[q], rng) for q in range(4))
            for k, F in enumerate(Fs):
                n = F.n
                t1[s, k, r], t2[s, k, r], _ = _gamma_terms(F, Y[:n], Y2[:n], Z[:n], Z2[:n])
    var, e1, e2, e3, e4, bound, w1 = [], [], [], [], [], [], []
    for k, n in enumerate(ns):
        v = vals[k]
        V = float(np.var(v, ddof=1))
        # standard error of the sample variance from the fourth central moment
        m4 = float(np.mean((v - v.mean()) ** 4))
        var.append(Estimate(V, math.sqrt(max(m4 - V * V, 0.0) / R)))
        w1.append(wasserstein1_to_normal(standardize(v)) if V > 0 else float("nan"))
        rows1 = [Estimate.from_samples(t0_1[k])] + [Estimate.from_samples(t1[s, k]) for s in range(1, S)]
        rows2 = [Estimate.from_samples(t0_2[k])] + [Estimate.from_samples(t2[s, k]) for s in range(1, S)]
        e1.append(max(rows1, key=lambda e: e.value))
        e2.append(max(rows2, key=lambda e: e.value))
        e3.append(Estimate.from_samples(g3[k]))
        e4.append(Estimate.from_samples(g4[k]))
        bound.append(normal_approximation_bound(n, V, e1[-1].value, e2[-1].value, e3[-1].value, e4[-1].value, c))
    return BoundCurve(ns, tuple(var), tuple(e1), tuple(e2), tuple(e3), tuple(e4), tuple(bound), tuple(w1))
