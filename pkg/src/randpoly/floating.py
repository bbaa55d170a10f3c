"""Weighted floating bodies, minimal cap measures, wet parts, visibility regions
and cap asymptotics for planar bodies.

Cap measures along many directions are evaluated with :class:`CapTable`: the
boundary of ``K`` is replaced by a dense inscribed polygon whose per-edge
integrals are accumulated once, so that the measure of ``K ∩ {x.u >= t}`` only
needs the two boundary crossings (found by binary search, the height
``x.u`` being monotone on each half of the ring) and three extra edges.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import hull
from .geometry import TWO_PI, Cap, SmoothBody, cap_measure, parse_body
from .weights import WeightFunction, make_weight

#: Direction grid of floating-body polygons.
FLOATING_DIRECTIONS = 720
#: Vertex count of the proxy polygon behind :class:`CapTable`.
CAP_TABLE_RESOLUTION = 16384
#: Bisection steps of the vectorised cut-height solver.
BISECTION_STEPS = 60


def _as_body(K) -> SmoothBody:
    return parse_body(K) if isinstance(K, str) else K


def _as_weight(w, K) -> WeightFunction:
    if w is None:
        return make_weight("uniform", K)
    return make_weight(w, K) if isinstance(w, str) else w


class CapTable:
    """Vectorised cap measures ``Phi(K ∩ {x . u(theta) >= t})`` on a proxy polygon."""

    def __init__(self, K: SmoothBody, w: WeightFunction, resolution: int = CAP_TABLE_RESOLUTION):
        if resolution % 2:
            raise ValueError("resolution must be even")
        self.K, self.w, self.N = K, w, int(resolution)
        self.V = K.proxy(self.N)
        self.step = TWO_PI / self.N
        E = w.edge_terms(self.V, np.roll(self.V, -1, axis=0))
        # cumulative edge integrals over three laps so unwrapped index ranges work
        self.cum = np.concatenate([[0.0], np.cumsum(np.tile(E, 3))])
        self.Z = w.normalization

    def _height(self, k, u, t):
        return np.einsum("ij,ij->i", self.V[k % self.N], u) - t

    def _extreme(self, theta, sign):
        k0 = np.floor(theta / self.step).astype(np.int64)
        cand = np.stack([k0 - 1, k0, k0 + 1, k0 + 2], axis=1) % self.N
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        h = np.einsum("ijk,ik->ij", self.V[cand], u)
        pick = np.argmax(sign * h, axis=1)
        return cand[np.arange(len(theta)), pick], h[np.arange(len(theta)), pick]

    def measure(self, theta, t) -> np.ndarray:
        """Normalised cap measures for broadcastable arrays of angles and offsets."""
        theta, t = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(t, dtype=float))
        shape = theta.shape
        theta = np.mod(theta.ravel(), TWO_PI)
        t = t.ravel().astype(float)
        out = np.zeros(len(theta))
        k_top, s_max = self._extreme(theta, 1.0)
        k_bot, s_min = self._extreme(np.mod(theta + math.pi, TWO_PI), 1.0)
        s_min = -s_min
        full = t <= s_min
        out[full] = 1.0
        act = np.flatnonzero((t < s_max) & ~full)
        if len(act) == 0:
            return out.reshape(shape)
        th, tt = theta[act], t[act]
        u = np.stack([np.cos(th), np.sin(th)], axis=1)
        kb = k_bot[act]
        kt = kb + (k_top[act] - kb) % self.N
        # entering crossing: last index in [kb, kt] with height < t
        lo, hi = kb.copy(), kt.copy()
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            below = self._height(mid, u, tt) < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        k1 = lo
        # leaving crossing: last index in [kt, kb + N] with height >= t
        lo, hi = kt.copy(), kb + self.N
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            above = self._height(mid, u, tt) >= 0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        k2 = lo
        s1a, s1b = self._height(k1, u, tt), self._height(k1 + 1, u, tt)
        s2a, s2b = self._height(k2, u, tt), self._height(k2 + 1, u, tt)
        V = self.V
        p1 = V[k1 % self.N] + (s1a / (s1a - s1b))[:, None] * (V[(k1 + 1) % self.N] - V[k1 % self.N])
        p2 = V[k2 % self.N] + (s2a / (s2a - s2b))[:, None] * (V[(k2 + 1) % self.N] - V[k2 % self.N])
        a = np.concatenate([p1, V[k2 % self.N], p2])
        b = np.concatenate([V[(k1 + 1) % self.N], p2, p1])
        extra = self.w.edge_terms(a, b).reshape(3, -1).sum(axis=0)
        # unwrapped indices: k1 + 1 <= k2, both in [0, 2N)
        base = k1 + 1
        inner = self.cum[k2] - self.cum[base]
        out[act] = np.clip((inner + extra) / self.Z, 0.0, 1.0)
        return out.reshape(shape)

    def cut_heights(self, theta, delta: float, steps: int = BISECTION_STEPS) -> np.ndarray:
        """Offsets ``t(theta)`` with cap measure ``delta`` (vectorised bisection)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        _, hi = self._extreme(np.mod(theta, TWO_PI), 1.0)
        _, lo = self._extreme(np.mod(theta + math.pi, TWO_PI), 1.0)
        lo = -lo
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            m = self.measure(theta, mid)
            big = m > delta
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
            if np.all(hi - lo < 1e-15):
                break
        return 0.5 * (lo + hi)


@functools.lru_cache(maxsize=32)
def cap_table(K: SmoothBody, w: WeightFunction, resolution: int = CAP_TABLE_RESOLUTION) -> CapTable:
    return CapTable(K, w, resolution)


# -- cut heights and floating bodies -------------------------------------------------------


def cut_height(K, w, u, delta: float, method: str = "boundary", tol: float = 1e-9) -> float:
    """Offset ``t`` with ``Phi(K ∩ {x.u >= t}) = delta``.

    ``method="boundary"`` brackets the root with exact cap measures (radial
    weights); ``"proxy"`` bisects on the proxy cap table.
    """
    K = _as_body(K)
    w = _as_weight(w, K)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    theta = float(u) if np.ndim(u) == 0 else math.atan2(u[1], u[0])
    if method == "proxy" or not w.radial:
        return float(cap_table(K, w).cut_heights(np.array([theta]), delta)[0])
    lo, hi = K.width_range(theta)

    def f(t):
        return cap_measure(K, w, theta, t, method="boundary") - delta

    # bracket to the measure tolerance, then polish in t
    t = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(t)) > tol:
        raise RuntimeError("cut height did not reach the measure tolerance")
    return float(t)


@dataclass(frozen=True, eq=False)
class FloatingBodyPolygon:
    """Half-plane approximation of a weighted floating body on a direction grid."""

    body: SmoothBody
    weight: WeightFunction
    delta: float
    directions: np.ndarray
    offsets: np.ndarray
    polygon: hull.Polytope

    @property
    def empty(self) -> bool:
        return self.polygon.is_empty or self.polygon.degenerate

    @property
    def area(self) -> float:
        return 0.0 if self.empty else self.polygon.volume

    @property
    def vertices(self) -> np.ndarray:
        return self.polygon.vertices

    def contains(self, points, tol: float = 1e-12):
        if self.empty:
            return np.zeros(len(np.atleast_2d(points)), dtype=bool)
        return self.polygon.contains(points, tol)

    def circumradius_gap(self) -> float:
        """``max |v| - min_k t_k``: zero for an exact concentric disc."""
        if self.empty:
            return math.nan
        return float(np.max(np.linalg.norm(self.vertices, axis=1)) - np.min(self.offsets))


def halfplane_polygon(K: SmoothBody, directions, offsets) -> hull.Polytope:
    """``⋂_k {x . u_k <= t_k}`` clipped to the bounding box of ``K``."""
    lo, hi = K.bounding_box
    pad = 0.01 * float(np.max(hi - lo))
    box = np.array([[lo[0] - pad, lo[1] - pad], [hi[0] + pad, lo[1] - pad],
                    [hi[0] + pad, hi[1] + pad], [lo[0] - pad, hi[1] + pad]])
    normals = np.stack([np.cos(directions), np.sin(directions)], axis=1)
    v = hull.intersect_halfplanes(box, normals, offsets)
    if len(v) < 3 or hull.polygon_area(v) <= 0:
        return hull.EMPTY_POLYGON
    return hull.Polytope(2, v)


def floating_body(K, w=None, delta: float = 0.01, M: int = FLOATING_DIRECTIONS, method: str = "proxy",
                  resolution: int = CAP_TABLE_RESOLUTION) -> FloatingBodyPolygon:
    """Weighted floating body ``K_delta^phi`` as an intersection of ``M`` half-planes.

    Parameters
    ----------
    K : SmoothBody or str
    w : WeightFunction or str, optional
        Defaults to the uniform weight (the classical floating body).
    delta : float
        Cap-measure level in (0, 1).
    M : int
        Number of equally spaced cut directions.
    method : {"proxy", "boundary"}
        Cap measures from the proxy table (vectorised) or from exact boundary
        integration (radial weights).
    """
    K = _as_body(K)
    w = _as_weight(w, K)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    theta = TWO_PI * np.arange(M) / M
    if K.is_centered_disc and w.radial:
        # rotational symmetry: one cut height serves every direction
        t0 = cut_height(K, w, 0.0, delta, method="boundary" if method == "boundary" else "proxy")
        offsets = np.full(M, t0)
    elif method == "boundary":
        offsets = np.array([cut_height(K, w, th, delta, method="boundary") for th in theta])
    else:
        offsets = cap_table(K, w, resolution).cut_heights(theta, delta)
    return FloatingBodyPolygon(K, w, float(delta), theta, offsets, halfplane_polygon(K, theta, offsets))


def classical_floating_body(K, delta: float, M: int = FLOATING_DIRECTIONS) -> FloatingBodyPolygon:
    """Classical floating body from exact cap areas (``delta`` relative to ``Vol(K)``)."""
    K = _as_body(K)
    return floating_body(K, make_weight("uniform", K), delta, M, method="boundary")


def polygon_contains(outer: FloatingBodyPolygon | hull.Polytope, inner, tol: float = 1e-12) -> bool:
    """Containment of convex polygons by vertex tests (empty inner sets are contained)."""
    inner_poly = inner.polygon if isinstance(inner, FloatingBodyPolygon) else inner
    if inner_poly.is_empty or inner_poly.degenerate:
        return True
    outer_poly = outer.polygon if isinstance(outer, FloatingBodyPolygon) else outer
    if outer_poly.is_empty or outer_poly.degenerate:
        return False
    return bool(np.all(outer_poly.contains(inner_poly.vertices, tol)))


# -- minimal cap measure -------------------------------------------------------------------------


def min_cap_measure(K, w, x, grid: int = 180) -> float:
    """``f(x) = min { Phi(K ∩ H+) : x in H+ }`` over half-planes bounded by lines through ``x``."""
    K = _as_body(K)
    w = _as_weight(w, K)
    x = np.asarray(x, dtype=float)
    if not K.contains(x):
        raise ValueError("point outside the body")
    table = cap_table(K, w)
    theta = TWO_PI * np.arange(grid) / grid
    t = x[0] * np.cos(theta) + x[1] * np.sin(theta)
    m = table.measure(theta, t)
    k = int(np.argmin(m))
    d = TWO_PI / grid

    def f(th):
        return float(table.measure(np.array([th]), np.array([x[0] * math.cos(th) + x[1] * math.sin(th)]))[0])

    res = optimize.minimize_scalar(f, bounds=(theta[k] - d, theta[k] + d), method="bounded",
                                   options={"xatol": 1e-10})
    return float(min(m[k], res.fun))


def min_cap_measures(K, w, points, grid: int = 180) -> np.ndarray:
    return np.array([min_cap_measure(K, w, p, grid) for p in np.atleast_2d(points)])


def floating_threshold(K, w=None) -> float:
    """``alpha(K, phi) = max_x f(x)``: floating bodies are nonempty below it."""
    K = _as_body(K)
    w = _as_weight(w, K)
    res = optimize.minimize(lambda p: -min_cap_measure(K, w, p, grid=90) if K.contains(p) else 1.0,
                            np.zeros(2), method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-9})
    return float(-res.fun)


# -- wet part ------------------------------------------------------------------------------------


def wet_part_volume(K, w=None, delta: float = 0.01, M: int = FLOATING_DIRECTIONS) -> float:
    """``Vol(K) - Vol(K_delta^phi)``, the Euclidean area of the wet part."""
    K = _as_body(K)
    fb = floating_body(K, w, delta, M)
    return K.volume - fb.area


# -- visibility regions ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VisibilityRegion:
    """Points of ``K`` seen from a boundary point ``z`` past the floating body ``K_delta``.

    The region is the union of the two parts of ``K`` outside the cone from
    ``z`` spanned by ``K_delta`` and of the front part ``conv(z, K_delta) \\ K_delta``,
    whose boundary is ``z`` followed by the arc of ``K_delta`` visible from ``z``
    (``front``).
    """

    z: np.ndarray
    theta: float
    delta: float
    floating: FloatingBodyPolygon
    pieces: tuple
    front: np.ndarray
    area: float
    t_in: float
    t_out: float

    @property
    def vertices(self) -> np.ndarray:
        """Extreme-point candidates of the region."""
        return np.concatenate([p for p in self.pieces if len(p)] + [self.front])

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        inside = np.zeros(len(pts), dtype=bool)
        for p in self.pieces:
            if len(p) >= 3:
                inside |= hull.points_in_convex_polygon(p, pts, tol)
        front = hull.points_in_convex_polygon(hull.convex_hull(self.front).vertices, pts, tol)
        body = self.floating.contains(pts, -tol)
        return inside | (front & ~body)


def visibility_region(K, theta_z: float, delta: float, M: int = 2048,
                      resolution: int = CAP_TABLE_RESOLUTION) -> VisibilityRegion:
    """Visibility region from ``z = x(theta_z)`` for the classical floating body at ``delta``."""
    K = _as_body(K)
    fb = floating_body(K, None, delta, M, resolution=resolution)
    if fb.empty:
        raise ValueError("floating body is empty at this delta")
    z = K.boundary_point(theta_z)
    Q = fb.vertices
    if bool(fb.contains(z[None])[0]):
        raise ValueError("base point lies in the floating body")
    c = Q.mean(axis=0)
    axis = c - z
    rel = Q - z
    ang = np.arctan2(axis[0] * rel[:, 1] - axis[1] * rel[:, 0], rel @ axis)
    dL, dR = rel[int(np.argmax(ang))], rel[int(np.argmin(ang))]
    P = K.proxy(resolution)
    nR = np.array([-dR[1], dR[0]])
    nL = np.array([-dL[1], dL[0]])
    right = hull.clip_polygon(P, nR, nR @ z)
    left = hull.clip_polygon(P, -nL, -nL @ z)
    cone = hull.clip_polygon(hull.clip_polygon(P, -nR, -nR @ z), nL, nL @ z)
    # near arc of K_delta: endpoints of edges facing z; with z it bounds the front part
    e = np.roll(Q, -1, axis=0) - Q
    facing = e[:, 0] * (z[1] - Q[:, 1]) - e[:, 1] * (z[0] - Q[:, 0]) < 0
    seen = facing | np.roll(facing, 1)
    start = int(np.flatnonzero(facing & ~np.roll(facing, 1))[0])
    order = (start + np.arange(len(Q))) % len(Q)
    arc = Q[order[seen[order]]]
    front = np.vstack([z[None], arc])
    area = hull.polygon_area(right) + hull.polygon_area(left) + abs(hull.polygon_area(front))
    n_z = np.array([math.cos(theta_z), math.sin(theta_z)])
    h_z = float(K.support(theta_z))

    def depth(x):
        return h_z - np.asarray(x) @ n_z

    # shadow = (K ∩ cone) minus the front part: its extreme points are floating-body
    # vertices and cone vertices outside conv(z, K_delta)
    outer = hull.convex_hull(np.vstack([Q, z[None]]))
    outside_front = cone[~outer.contains(cone, 1e-12)] if len(cone) else cone
    t_in = float(min(np.min(depth(Q)), np.min(depth(outside_front)) if len(outside_front) else math.inf))
    region_pts = np.concatenate([p for p in (right, left) if len(p)] + [front])
    t_out = float(np.max(depth(region_pts)))
    return VisibilityRegion(z, float(theta_z), float(delta), fb, (right, left), front, float(area), t_in, t_out)


def visibility_union_area(region: VisibilityRegion, resolution: int = CAP_TABLE_RESOLUTION) -> float:
    """Area of the union of visibility regions of all points of ``region``.

    That union is the union of the ``delta``-caps meeting the region; with
    caps on the direction grid of the floating body it equals ``K`` minus the
    intersection of the complementary half-planes.
    """
    fb = region.floating
    K = fb.body
    u = np.stack([np.cos(fb.directions), np.sin(fb.directions)], axis=1)
    reach = np.max(region.vertices @ u.T, axis=0)
    hit = reach >= fb.offsets
    P = K.proxy(resolution)
    rest = hull.intersect_halfplanes(P, u[hit], fb.offsets[hit])
    return hull.polygon_area(P) - hull.polygon_area(rest)


# -- caps ------------------------------------------------------------------------------------------


def cap_limit_constant(kappa: float, d: int = 2) -> float:
    """``lim Vol(C(z, t)) / t^{(d+1)/2} = 2^{(d+1)/2} Vol(B^{d-1}) / (d+1) * kappa^{-1/2}``."""
    from .geometry import ball_volume

    return 2 ** ((d + 1) / 2) * ball_volume(d - 1) / (d + 1) * kappa ** -0.5


def cap_height_asymptotic(delta: float, kappa: float, d: int = 2) -> float:
    """Height of a cap of volume ``delta`` to leading order.

    Inverting the cap-volume limit gives
    ``t ~ 1/2 ((d+1) / Vol(B^{d-1}))^{2/(d+1)} kappa^{1/(d+1)} delta^{2/(d+1)}``.
    """
    from .geometry import ball_volume

    return 0.5 * ((d + 1) / ball_volume(d - 1)) ** (2 / (d + 1)) * kappa ** (1 / (d + 1)) * delta ** (2 / (d + 1))


def cap_limit_check(K, theta_z: float, ts=(1e-2, 1e-3, 1e-4, 1e-5)) -> dict:
    """Ratios ``Vol(C(z, t)) / t^{3/2}`` against their limit at ``z = x(theta_z)``."""
    K = _as_body(K)
    kappa = float(K.curvature(theta_z))
    limit = cap_limit_constant(kappa)
    ratios = np.array([Cap(K, theta_z, t).area / t ** 1.5 for t in ts])
    return {
        "theta": float(theta_z),
        "kappa": kappa,
        "t": list(map(float, ts)),
        "ratios": ratios.tolist(),
        "limit": limit,
        "rel_error": (np.abs(ratios / limit - 1)).tolist(),
    }


# -- comparison with unweighted floating bodies ------------------------------------------------------


def sandwich_constant(K, w, delta: float, M: int = FLOATING_DIRECTIONS) -> float:
    """Largest ``c`` with ``K_{delta/c} ⊆ K_delta^phi ⊆ K_{c delta}`` on the direction grid.

    With a common direction grid, containment of half-plane polygons follows
    from comparing offsets; the uniform measure ``m_u`` of each weighted cut
    gives ``c = min(delta / max_u m_u, min_u m_u / delta)``.
    """
    K = _as_body(K)
    w = _as_weight(w, K)
    fb = floating_body(K, w, delta, M)
    uni = make_weight("uniform", K)
    if K.is_centered_disc:
        m = np.full(1, cap_measure(K, uni, 0.0, fb.offsets[0], method="boundary"))
    else:
        m = cap_table(K, uni).measure(fb.directions, fb.offsets)
    return float(min(delta / m.max(), m.min() / delta))


def sandwich_check(K, w, deltas, M: int = FLOATING_DIRECTIONS) -> dict:
    """Per-delta sandwich constants, the common constant and literal containment tests."""
    K = _as_body(K)
    w = _as_weight(w, K)
    cs = np.array([sandwich_constant(K, w, d, M) for d in deltas])
    c = float(cs.min())
    checks = []
    for d in deltas:
        fb = floating_body(K, w, d, M)
        inner = floating_body(K, None, min(d / c, 0.999), M)
        outer = floating_body(K, None, c * d, M)
        checks.append(polygon_contains(fb, inner, 1e-10) and polygon_contains(outer, fb, 1e-10))
    return {"deltas": list(map(float, deltas)), "c_delta": cs.tolist(), "c": c, "contained": checks}


# -- containment in random polytopes -------------------------------------------------------------------


def vu_containment(K, w, ns=(512, 2048, 8192), c_grid=(0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0),
                   reps: int = 200, seed: int = 0, M: int = 360) -> dict:
    """Empirical ``P(K^phi_{c ln n / n} ⊄ conv(X_1..X_n))`` over a grid of ``c``.

    Returns the failure-rate table (rows ``n``, columns ``c``) and the
    smallest ``c`` whose failure rate is at most 0.01 for every ``n``.
    """
    K = _as_body(K)
    w = _as_weight(w, K)
    c_grid = np.asarray(c_grid, dtype=float)
    fail = np.zeros((len(ns), len(c_grid)))
    for a, n in enumerate(ns):
        bodies = []
        for c in c_grid:
            delta = c * math.log(n) / n
            bodies.append(floating_body(K, w, delta, M) if delta < 0.5 else None)
        for r in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence([seed, n, r]))
            P = hull.convex_hull(w.sample(rng, n))
            for b, fb in enumerate(bodies):
                if fb is not None and not polygon_contains(P, fb, 1e-12):
                    fail[a, b] += 1
        fail[a] /= reps
    ok = np.all(fail <= 0.01, axis=0)
    c_star = float(c_grid[np.argmax(ok)]) if ok.any() else math.nan
    return {"weight": w.id, "body": K.id, "n": list(ns), "c": c_grid.tolist(), "failure": fail.tolist(),
            "c_star": c_star, "reps": reps}
