"""Weight functions on a convex body: evaluation, normalisation, sampling and
exact integration over polytopes.

Radial weights ``g(|x|)`` are integrated through the cone identity: for the
triangle spanned by the origin and an edge ``[a, b]``

    int_T g(|x|) dx = cross(a, b) * int_0^1 G(|y(l)|) / |y(l)|^2 dl,
    G(r) = int_0^r s g(s) ds,     y(l) = a + l (b - a),

which is valid with a sign for any edge, so a polygon is a signed fan about
the origin whether or not it contains it.  Hilbert weights are not radial;
their density is tabulated once on a grid over the body together with its
``x``-antiderivative ``F``, and polygons are integrated with Green's theorem
``int_P f = oint_P F dy``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate

from .geometry import (
    SmoothBody,
    composite_gauss_legendre,
    gauss_legendre,
    parse_body,
    region_integral,
)

KINDS = ("uniform", "spherical", "hyperbolic", "hilbert_busemann", "hilbert_holmes_thompson", "dual_power")

#: Gauss-Legendre order along polygon edges for radial weights.
EDGE_ORDER = 32
#: Grid nodes per axis of the Hilbert density table.
HILBERT_GRID = 81
#: Default proposal budget of the rejection sampler.
MAX_PROPOSALS = 1_000_000


class SamplingBudgetError(RuntimeError):
    """The rejection sampler exhausted its proposal budget."""


# -- radial profiles ---------------------------------------------------------------


def _profile(kind: str, d: int, j: int | None):
    """Raw radial density ``g`` and its primitive ``int_0^r s^{d-1} g(s) ds``."""
    if kind == "uniform":
        return (lambda r: np.ones_like(r)), (lambda r: r ** d / d)
    if kind == "spherical":
        if d == 2:
            return (lambda r: (1 + r * r) ** -1.5), (lambda r: 1 - 1 / np.sqrt(1 + r * r))
        return (lambda r: (1 + r * r) ** -2.0), (lambda r: 0.5 * (np.arctan(r) - r / (1 + r * r)))
    if kind == "hyperbolic":
        if d == 2:
            return (lambda r: (1 - r * r) ** -1.5), (lambda r: 1 / np.sqrt(1 - r * r) - 1)
        return (lambda r: (1 - r * r) ** -2.0), (lambda r: 0.5 * (r / (1 - r * r) - np.arctanh(r)))
    if kind == "dual_power":
        p = j - d

        def g(r):
            with np.errstate(divide="ignore"):
                return np.power(np.asarray(r, dtype=float), p)

        return g, (lambda r: r ** j / j)
    return None, None


# -- Hilbert tables ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityTable:
    """Tabulated density ``f`` on a box via a bicubic spline of ``F = int f dx``."""

    box: np.ndarray
    spline: interpolate.RectBivariateSpline
    values: np.ndarray = field(repr=False)

    def antiderivative(self, x, y):
        return self.spline.ev(x, y)

    def __call__(self, x, y):
        return self.spline.ev(x, y, dx=1)


@functools.lru_cache(maxsize=16)
def hilbert_table(kind: str, body: SmoothBody, C: SmoothBody, M: int, grid: int = HILBERT_GRID) -> DensityTable:
    """Tabulate a Hilbert density over the bounding box of ``body``."""
    from .noneuclid import HilbertDomain

    dom = HilbertDomain(C, M)
    lo, hi = body.bounding_box
    pad = 0.02 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    if not np.all(C.contains(corners, tol=0.0)):
        raise ValueError(f"the padded bounding box of {body.id} is not inside the Hilbert domain {C.id}")
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    f = dom.density("bu" if kind == "hilbert_busemann" else "ht", np.stack([X.ravel(), Y.ravel()], axis=1))
    f = f.reshape(grid, grid)
    F = np.empty_like(f)
    for jj in range(grid):
        F[:, jj] = interpolate.CubicSpline(xs, f[:, jj]).antiderivative()(xs)
    spline = interpolate.RectBivariateSpline(xs, ys, F, kx=5, ky=3)
    return DensityTable(np.array([lo, hi]), spline, f)


# -- weight functions ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A probability density on a convex body ``K``.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    body : SmoothBody
        The domain ``K``.
    j : int, optional
        Exponent parameter of ``dual_power`` (density ``|x|^{j-d}``).
    C : SmoothBody, optional
        Hilbert domain for the ``hilbert_*`` kinds.
    M : int
        Direction grid of the Hilbert densities.
    """

    kind: str
    body: SmoothBody
    j: int | None = None
    C: SmoothBody | None = None
    M: int = 1024

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        d = self.body.dimension
        if self.kind == "dual_power":
            if self.j is None or not 1 <= int(self.j) <= d:
                raise ValueError(f"dual_power needs 1 <= j <= {d}")
            if not self.body.contains(np.zeros(d), tol=0.0):
                raise ValueError("dual_power needs the origin inside the body")
        if self.kind == "hyperbolic" and self.body.max_radius >= 1.0:
            raise ValueError(f"hyperbolic weight needs {self.body.id} strictly inside the unit ball")
        if self.kind.startswith("hilbert"):
            if self.C is None or d != 2:
                raise ValueError("Hilbert weights need a planar body and a domain C")
            from .noneuclid import HilbertDomain

            gap = HilbertDomain(self.C, 8).clearance(self.body)
            if gap <= 0:
                raise ValueError(f"{self.body.id} is not inside the interior of {self.C.id} (clearance {gap:.3g})")

    # -- identity ------------------------------------------------------------------------

    @property
    def id(self) -> str:
        if self.kind == "dual_power":
            return f"dual:{self.j}"
        if self.kind == "hilbert_busemann":
            return f"hilbert-bu:{self.C.id}"
        if self.kind == "hilbert_holmes_thompson":
            return f"hilbert-ht:{self.C.id}"
        return self.kind

    def __repr__(self):
        return f"WeightFunction({self.id!r} on {self.body.id!r})"

    @property
    def dimension(self) -> int:
        return self.body.dimension

    @property
    def radial(self) -> bool:
        return not self.kind.startswith("hilbert")

    @functools.cached_property
    def _radial_pair(self):
        return _profile(self.kind, self.dimension, self.j)

    @property
    def radial_profile(self):
        """Raw density as a function of ``|x|`` (``None`` for Hilbert weights)."""
        return self._radial_pair[0]

    @property
    def radial_primitive(self):
        """``G(r) = int_0^r s^{d-1} g(s) ds`` (``None`` for Hilbert weights)."""
        return self._radial_pair[1]

    @functools.cached_property
    def table(self) -> DensityTable:
        if self.radial:
            raise AttributeError("radial weights are not tabulated")
        return hilbert_table(self.kind, self.body, self.C, self.M)

    # -- density ---------------------------------------------------------------------------

    def raw(self, x):
        """Unnormalised density (no membership check)."""
        x = np.asarray(x, dtype=float)
        if self.radial:
            return self.radial_profile(np.linalg.norm(x, axis=-1))
        return self.table(x[..., 0], x[..., 1])

    def density(self, x, exact: bool = True):
        """Normalised density at point(s) ``x`` in ``K``.

        For Hilbert weights ``exact`` evaluates the density directly from its
        direction-grid definition; otherwise the tabulated surrogate used for
        sampling and integration is returned.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(self.body.contains(x)):
            raise ValueError(f"point outside {self.body.id}")
        if self.radial or not exact:
            val = self.raw(x)
        else:
            from .noneuclid import HilbertDomain

            dom = HilbertDomain(self.C, self.M)
            val = dom.density("bu" if self.kind == "hilbert_busemann" else "ht", x)
        return val / self.normalization

    # -- normalisation -----------------------------------------------------------------------

    @functools.cached_property
    def normalization(self) -> float:
        """``Z = int_K raw density``."""
        return _normalization(self)

    # -- bounds ---------------------------------------------------------------------------------

    @functools.cached_property
    def _raw_range(self) -> tuple[float, float]:
        if self.radial:
            # |x| ranges over [0, max_radius] (a superset when o is outside K); profiles are monotone
            with np.errstate(divide="ignore"):
                vals = self.radial_profile(np.array([0.0, self.body.max_radius]))
            return float(np.min(vals)), float(np.max(vals))
        lo, hi = self.table.box
        xs = np.linspace(lo[0], hi[0], 401)
        ys = np.linspace(lo[1], hi[1], 401)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        pts = pts[self.body.contains(pts)]
        v = self.raw(pts)
        return float(v.min()), float(v.max())

    @property
    def lower_bound(self) -> float:
        """``c_phi``: infimum of the normalised density on ``K``."""
        return self._raw_range[0] / self.normalization

    @property
    def upper_bound(self) -> float:
        """Bound on the normalised density used for rejection sampling (``inf`` for dual weights with j < d)."""
        if self.kind == "dual_power" and self.j < self.dimension:
            return math.inf
        raw_max = self._raw_range[1]
        if not self.radial:
            raw_max *= 1.02  # grid maximum of a smooth surrogate
        return raw_max / self.normalization

    # -- sampling ---------------------------------------------------------------------------------

    def sample(self, rng: np.random.Generator, n: int, max_proposals: int = MAX_PROPOSALS) -> np.ndarray:
        """Draw ``n`` independent points with this density by rejection from the bounding box."""
        bound = self.upper_bound
        if not math.isfinite(bound):
            raise ValueError(f"{self.id} has an unbounded density and cannot be sampled")
        lo, hi = self.body.bounding_box
        d = self.dimension
        box_vol = float(np.prod(hi - lo))
        rate = 1.0 / (box_vol * bound)  # expected acceptance probability
        out = []
        have = 0
        proposed = 0
        raw_bound = bound * self.normalization
        squeeze = self._raw_range[0] * (1.0 if self.radial else 0.98)
        while have < n:
            m = int(math.ceil((n - have) / rate * 1.1)) + 16
            if proposed + m > max_proposals:
                m = max_proposals - proposed
                if m <= 0:
                    est = have / max(proposed, 1)
                    raise SamplingBudgetError(
                        f"rejection sampler for {self.id} on {self.body.id} used {proposed} proposals; "
                        f"acceptance-rate estimate {est:.3g}"
                    )
            x = lo + (hi - lo) * rng.random((m, d))
            coin = rng.random(m)
            proposed += m
            inside = self.body.contains(x, tol=0.0)
            x = x[inside]
            level = coin[inside] * raw_bound
            # squeeze: levels below the density minimum accept without evaluation
            ok = level < squeeze
            hard = np.flatnonzero(~ok)
            dens = self.raw(x[hard])
            if np.any(dens > raw_bound):
                raise RuntimeError(f"density of {self.id} exceeds its sampling bound")
            ok[hard] = level[hard] < dens
            acc = x[ok]
            out.append(acc)
            have += len(acc)
        return np.concatenate(out)[:n]

    # -- integration ---------------------------------------------------------------------------------

    def edge_terms(self, a, b) -> np.ndarray:
        """Raw contribution of each directed edge ``a[k] -> b[k]``.

        The raw integral over a counterclockwise convex ring is the sum of the
        terms of its edges (signed fan about the origin for radial weights,
        ``int_edge F dy`` for tabulated weights).
        """
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if self.radial:
            return radial_edge_terms(a, b, self.kind, self.j, self.radial_primitive)
        return green_edge_terms(a, b, self.table)

    def polygon_integral(self, vertices) -> float:
        """Raw ``int_P density`` over a counterclockwise convex ring."""
        v = np.asarray(vertices, dtype=float)
        if len(v) < 3:
            return 0.0
        return float(np.sum(self.edge_terms(v, np.roll(v, -1, axis=0))))

    def polygon_measure(self, vertices) -> float:
        """Normalised ``Phi(P)`` of a counterclockwise convex ring."""
        return self.polygon_integral(vertices) / self.normalization

    def audit(self, samples: int = 200) -> dict:
        """Numerical check of the three weight-class conditions.

        Returns the normalisation round trip, ``c_phi`` (positive lower bound),
        ``C_phi`` (upper bound off the core) and the excluded core radius.
        """
        core = 0.0
        d = self.dimension
        if self.kind == "dual_power" and self.j < d:
            core = 0.25 * (self.body.min_radius if d == 2 else min(self.body.params))
        if d == 2:
            lo, hi = self.body.bounding_box
            xs = np.linspace(lo[0], hi[0], samples)
            ys = np.linspace(lo[1], hi[1], samples)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            pts = np.stack([X.ravel(), Y.ravel()], axis=1)
            pts = pts[self.body.contains(pts)]
            theta = np.linspace(0, 2 * math.pi, 4 * samples, endpoint=False)
            pts = np.concatenate([pts, self.body.boundary_point(theta)])
            mass = self.polygon_measure(self.body.proxy())
        else:
            rng = np.random.default_rng(0)
            lo, hi = self.body.bounding_box
            pts = lo + (hi - lo) * rng.random((samples ** 2, 3))
            pts = pts[self.body.contains(pts)]
            mass = 1.0
        vals = self.raw(pts) / self.normalization
        off_core = np.linalg.norm(pts, axis=1) >= core
        return {
            "weight": self.id,
            "body": self.body.id,
            "mass": float(mass),
            "c_phi": float(np.min(vals)),
            "C_phi": float(np.max(vals[off_core])),
            "core_radius": float(core),
            "positive": bool(np.min(vals) > 0),
            "bounded_off_core": bool(np.all(np.isfinite(vals[off_core]))),
        }


# -- integration kernels -----------------------------------------------------------------------


def radial_edge_terms(a: np.ndarray, b: np.ndarray, kind: str, j, primitive, order: int = EDGE_ORDER) -> np.ndarray:
    """Signed cone integrals over the triangles ``(o, a_k, b_k)``."""
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    if kind == "uniform":
        return 0.5 * cross
    if kind == "dual_power" and j == 1:
        # int_0^1 dl / |a + l e| in closed form (asinh)
        e = b - a
        L = np.sqrt(np.einsum("ij,ij->i", e, e))
        term = np.zeros(len(a))
        ok = (np.abs(cross) > 0) & (L > 0)
        p = np.abs(cross[ok]) / L[ok]
        sa = np.einsum("ij,ij->i", a[ok], e[ok]) / L[ok]
        sb = sa + L[ok]
        term[ok] = np.sign(cross[ok]) * p * (np.arcsinh(sb / p) - np.arcsinh(sa / p))
        return term
    lam, w = gauss_legendre(order)
    y = a[:, None, :] + lam[None, :, None] * (b - a)[:, None, :]
    r2 = np.einsum("ijk,ijk->ij", y, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = primitive(np.sqrt(r2)) / r2
    kern = np.where(r2 > 0, kern, 0.0)
    return cross * (kern @ w)


def radial_polygon_integral(v: np.ndarray, kind: str, j, primitive, order: int = EDGE_ORDER) -> float:
    """Signed-fan radial integral of a planar counterclockwise ring."""
    v = np.asarray(v, dtype=float)
    return float(np.sum(radial_edge_terms(v, np.roll(v, -1, axis=0), kind, j, primitive, order)))


def cone_integral_tensor(g, a, b, order: int = 32) -> float:
    """``int_T g(|x|) dx`` over the triangle ``(o, a, b)`` by tensor Gauss-Legendre.

    Uses the cone identity with radial density ``2 s`` and no primitive; the
    generic path for radial profiles without a closed-form primitive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss_legendre(order)
    y = a[None, :] + x[:, None] * (b - a)[None, :]
    r = np.linalg.norm(y, axis=1)
    inner = g(x[None, :] * r[:, None]) @ (w * x)  # int_0^1 s g(s r) ds for each edge node
    area2 = a[0] * b[1] - a[1] * b[0]
    return float(area2 * np.sum(w * inner))


def green_edge_terms(a: np.ndarray, b: np.ndarray, table: DensityTable, order: int = 8) -> np.ndarray:
    """``int_edge F dy`` per edge, with panels no longer than a grid cell."""
    e = b - a
    L = np.sqrt(np.einsum("ij,ij->i", e, e))
    lo, hi = table.box
    cell = float(np.min((hi - lo) / (table.values.shape[0] - 1)))
    panels = np.maximum(1, np.ceil(L / cell).astype(int))
    x, w = gauss_legendre(order)
    out = np.zeros(len(a))
    for k in np.unique(panels):
        sel = panels == k
        nodes = ((np.arange(k)[:, None] + x[None, :]) / k).ravel()
        weights = np.tile(w / k, k)
        pts = a[sel, None, :] + nodes[None, :, None] * e[sel, None, :]
        F = table.antiderivative(pts[..., 0].ravel(), pts[..., 1].ravel()).reshape(pts.shape[:2])
        out[sel] = (F @ weights) * e[sel, 1]
    return out


def green_polygon_integral(v: np.ndarray, table: DensityTable, order: int = 8) -> float:
    """``oint_P F dy`` for a counterclockwise ring."""
    v = np.asarray(v, dtype=float)
    return float(np.sum(green_edge_terms(v, np.roll(v, -1, axis=0), table, order)))


def radial_tetra_integral(vertices, facets, primitive, order: int = 12) -> float:
    """Signed cone integral of a radial density over a 3D polytope."""
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(facets)
    A, B, Cc = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    det = np.einsum("ij,ij->i", A, np.cross(B, Cc))
    # collapsed (Duffy) Gauss-Legendre on the unit simplex
    x, w = gauss_legendre(order)
    U = x[:, None] * np.ones(order)[None, :]
    V = (1 - x)[:, None] * x[None, :]
    W = (1 - x)[:, None] * (w[:, None] * w[None, :])
    U, V, W = U.ravel(), V.ravel(), W.ravel()
    y = A[:, None, :] + U[None, :, None] * (B - A)[:, None, :] + V[None, :, None] * (Cc - A)[:, None, :]
    r = np.linalg.norm(y, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.where(r > 0, primitive(r) / r ** 3, 0.0)
    return float(np.sum(det * (kern @ W)))


def _normalization(w: WeightFunction) -> float:
    body = w.body
    if w.kind == "uniform":
        return body.volume
    if w.dimension == 2:
        if w.radial:
            # closed boundary: Green's theorem in polar form along the exact boundary
            return region_integral(body, 0.0, -math.inf, w.radial_primitive, panels=256, order=16)
        t, wt = composite_gauss_legendre(0.0, 2 * math.pi, 256, 16)
        x = body.boundary_point(t)
        dy = body.radius_of_curvature(t) * np.cos(t)  # dy/dtheta = (h + h'') cos(theta)
        return float(np.sum(wt * w.table.antiderivative(x[:, 0], x[:, 1]) * dy))
    # 3D: int over directions of G(R(omega)) with R the radial function about o
    if not body.contains(np.zeros(3)):
        raise ValueError("3D normalisation needs the origin inside the body")
    cth, wc = composite_gauss_legendre(-1.0, 1.0, 16, 16)
    phi = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    C, P = np.meshgrid(cth, phi, indexing="ij")
    S = np.sqrt(1 - C * C)
    dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    R = _radial_function_3d(body, dirs)
    vals = w.radial_primitive(R).reshape(C.shape)
    return float(np.sum(wc[:, None] * vals) * (2 * math.pi / len(phi)))


def _radial_function_3d(body: SmoothBody, dirs: np.ndarray) -> np.ndarray:
    c = np.array(body.center)
    if body.kind == "ball3":
        r = body.params[0]
        b = dirs @ (-c)
        return -b + np.sqrt(b * b - c @ c + r * r)
    ax = np.array(body.params)
    us, ps = dirs / ax, -c / ax
    qa = np.einsum("ij,ij->i", us, us)
    qb = us @ ps
    qc = ps @ ps - 1
    return (-qb + np.sqrt(qb * qb - qa * qc)) / qa


# -- constructors and the polytope functional ------------------------------------------------------


@functools.lru_cache(maxsize=64)
def make_weight(spec: str, body) -> WeightFunction:
    """Build a weight from its identifier: ``uniform``, ``spherical``, ``hyperbolic``,
    ``dual:<j>``, ``hilbert-bu:<C-id>`` or ``hilbert-ht:<C-id>``.

    Instances are cached per ``(identifier, body)`` so normalisations and
    Hilbert tables are computed once.
    """
    if isinstance(body, str):
        body = parse_body(body)
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head in ("uniform", "spherical", "hyperbolic") and not rest:
        return WeightFunction(head, body)
    if head == "dual":
        try:
            j = int(rest)
        except ValueError as exc:
            raise ValueError(f"malformed dual weight {spec!r}") from exc
        return WeightFunction("dual_power", body, j=j)
    if head in ("hilbert-bu", "hilbert-ht"):
        m = 1024
        if "#M=" in rest:
            rest, _, mtext = rest.partition("#M=")
            m = int(mtext)
        kind = "hilbert_busemann" if head == "hilbert-bu" else "hilbert_holmes_thompson"
        return WeightFunction(kind, body, C=parse_body(rest), M=m)
    raise ValueError(f"unknown weight identifier {spec!r}")


def weighted_volume(P, w: WeightFunction) -> float:
    """Normalised weighted volume ``Psi(P) = int_P psi``."""
    if P.is_empty or P.degenerate:
        return 0.0
    if P.dimension == 2:
        return w.polygon_measure(P.vertices)
    if w.kind == "uniform":
        return P.volume / w.normalization
    if not w.radial:
        raise ValueError("3D integration supports radial weights only")
    return radial_tetra_integral(P.vertices, P.facets, w.radial_primitive) / w.normalization


def raw_weighted_volume(P, w: WeightFunction) -> float:
    """Unnormalised ``int_P density``."""
    return weighted_volume(P, w) * w.normalization


def normalize(w: WeightFunction, K: SmoothBody | None = None) -> float:
    """Normalisation constant ``Z`` of ``w`` on its body."""
    if K is not None and K != w.body:
        w = WeightFunction(w.kind, K, w.j, w.C, w.M)
    return w.normalization
