"""Smooth convex bodies, caps and boundary quadrature.

Planar bodies are described by their support function ``h(theta)``; the
boundary point with outer normal ``u(theta) = (cos theta, sin theta)`` is

    x(theta) = h(theta) u(theta) + h'(theta) u'(theta)

and the radius of curvature there is ``h + h''``.  Three-dimensional bodies
(balls and axis-aligned ellipsoids) only support membership tests, volume and
bounding boxes.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

TWO_PI = 2.0 * math.pi

#: Number of angles used to certify positive curvature at construction.
CURVATURE_CHECK_SAMPLES = 8192
#: Default vertex count of the dense polygonal proxy of a planar body.
PROXY_RESOLUTION = 4096
#: Default composite Gauss-Legendre rule for boundary integrals.
BOUNDARY_PANELS = 512
BOUNDARY_ORDER = 8

_KIND_ARITY = {"disc": 1, "ellipse": 2, "fourier": 3, "ball3": 1, "ellipsoid3": 3}


@functools.lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_gauss_legendre(a: float, b: float, panels: int, order: int):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    width = np.diff(edges)
    nodes = (edges[:-1, None] + width[:, None] * x[None, :]).ravel()
    weights = (width[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class SmoothBody:
    """A convex body with smooth, strictly curved boundary.

    Parameters
    ----------
    kind : str
        One of ``disc``, ``ellipse``, ``fourier``, ``ball3``, ``ellipsoid3``.
    params : tuple of float
        ``disc(r)``, ``ellipse(a, b)``, ``fourier(h0, eps, k)`` with
        ``h = h0 + eps cos(k theta)``, ``ball3(r)``, ``ellipsoid3(a, b, c)``.
    center : tuple of float
        Translation of the body.  Bodies used as ``K`` sit at the origin.
    """

    kind: str
    params: tuple
    center: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _KIND_ARITY:
            raise ValueError(f"unknown body kind {self.kind!r}")
        if len(self.params) != _KIND_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {_KIND_ARITY[self.kind]} parameters, got {self.params}")
        params = tuple(float(p) for p in self.params)
        if self.kind == "fourier":
            k = params[2]
            if k != int(k) or k < 2:
                raise ValueError("fourier frequency k must be an integer >= 2")
            params = (params[0], params[1], int(k))
        object.__setattr__(self, "params", params)
        dim = 3 if self.kind.endswith("3") else 2
        center = tuple(float(c) for c in self.center) if self.center else (0.0,) * dim
        if len(center) != dim:
            raise ValueError(f"center of a {dim}D body needs {dim} coordinates")
        object.__setattr__(self, "center", center)
        positive = params[:1] if self.kind == "fourier" else params
        if any(p <= 0 for p in positive):
            raise ValueError(f"body parameters must be positive: {params}")
        if self.kind == "fourier":
            h0, eps, k = params
            if abs(eps) * (k * k - 1) >= h0:
                raise ValueError("fourier body needs |eps| (k^2 - 1) < h0 for positive curvature")
        if dim == 2:
            theta = np.linspace(0.0, TWO_PI, CURVATURE_CHECK_SAMPLES, endpoint=False)
            if np.min(self.radius_of_curvature(theta)) <= 0.0:
                raise ValueError(f"{self.id} does not have strictly positive curvature")

    # -- identifiers ---------------------------------------------------------

    @property
    def dimension(self) -> int:
        return 3 if self.kind.endswith("3") else 2

    @property
    def id(self) -> str:
        parts = [self.kind] + [_fmt(p) for p in self.params]
        text = ":".join(parts)
        if any(c != 0.0 for c in self.center):
            text += "@" + ",".join(_fmt(c) for c in self.center)
        return text

    def __str__(self):
        return self.id

    @property
    def is_centered_disc(self) -> bool:
        return self.kind == "disc" and all(c == 0.0 for c in self.center)

    # -- support function ----------------------------------------------------

    def _require_planar(self):
        if self.dimension != 2:
            raise ValueError(f"operation needs a planar body, got {self.id}")

    def support(self, theta, deriv: int = 0):
        """Support function ``h`` (or its first/second derivative) at ``theta``."""
        self._require_planar()
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disc":
            r = self.params[0]
            base = [np.full_like(theta, r), np.zeros_like(theta), np.zeros_like(theta)][deriv]
        elif self.kind == "ellipse":
            a, b = self.params
            c, s = np.cos(theta), np.sin(theta)
            q = a * a * c * c + b * b * s * s
            h = np.sqrt(q)
            dq = (b * b - a * a) * np.sin(2 * theta)
            if deriv == 0:
                base = h
            elif deriv == 1:
                base = dq / (2 * h)
            else:
                ddq = 2 * (b * b - a * a) * np.cos(2 * theta)
                base = ddq / (2 * h) - dq * dq / (4 * h ** 3)
        else:
            h0, eps, k = self.params
            if deriv == 0:
                base = h0 + eps * np.cos(k * theta)
            elif deriv == 1:
                base = -eps * k * np.sin(k * theta)
            else:
                base = -eps * k * k * np.cos(k * theta)
        cx, cy = self.center
        if deriv == 0:
            return base + cx * np.cos(theta) + cy * np.sin(theta)
        if deriv == 1:
            return base - cx * np.sin(theta) + cy * np.cos(theta)
        return base - cx * np.cos(theta) - cy * np.sin(theta)

    def radius_of_curvature(self, theta):
        return self.support(theta) + self.support(theta, 2)

    def _point_and_rho(self, theta):
        """Boundary point and radius of curvature of the uncentred body (fused)."""
        if self.kind != "fourier":
            body = SmoothBody(self.kind, self.params)
            return body.boundary_point(theta), body.radius_of_curvature(theta)
        h0, eps, k = self.params
        c, s = np.cos(theta), np.sin(theta)
        ck, sk = np.cos(k * theta), np.sin(k * theta)
        h = h0 + eps * ck
        dh = -eps * k * sk
        x = np.stack([h * c - dh * s, h * s + dh * c], axis=-1)
        return x, h - eps * k * k * ck

    def boundary_point(self, theta):
        """Boundary point(s) with outer unit normal ``(cos theta, sin theta)``."""
        self._require_planar()
        theta = np.asarray(theta, dtype=float)
        h, dh = self.support(theta), self.support(theta, 1)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - dh * s, h * s + dh * c], axis=-1)

    def curvature(self, theta):
        """Curvature ``1 / (h + h'')`` of the boundary at normal angle ``theta``."""
        return 1.0 / self.radius_of_curvature(theta)

    def width_range(self, theta: float) -> tuple[float, float]:
        """Range ``[min x.u, max x.u]`` of the linear functional ``x.u(theta)`` on K."""
        return -float(self.support(theta + math.pi)), float(self.support(theta))

    # -- global quantities ---------------------------------------------------

    @functools.cached_property
    def volume(self) -> float:
        """Area (2D) or volume (3D)."""
        if self.dimension == 3:
            return 4.0 / 3.0 * math.pi * math.prod(self.params if self.kind == "ellipsoid3" else self.params * 3)
        # area = 1/2 \oint h ds = 1/2 \int h (h + h'') dtheta
        theta, w = composite_gauss_legendre(0.0, TWO_PI, BOUNDARY_PANELS, BOUNDARY_ORDER)
        return 0.5 * float(np.sum(w * self.support(theta) * self.radius_of_curvature(theta)))

    @functools.cached_property
    def perimeter(self) -> float:
        return boundary_integral(self, lambda x, kappa: np.ones(len(x)))

    @functools.cached_property
    def bounding_box(self) -> np.ndarray:
        """Rows ``(lower, upper)`` of the axis-aligned bounding box."""
        if self.dimension == 3:
            half = np.array(self.params * 3 if self.kind == "ball3" else self.params)
            c = np.array(self.center)
            return np.stack([c - half, c + half])
        lo = [-float(self.support(math.pi)), -float(self.support(1.5 * math.pi))]
        hi = [float(self.support(0.0)), float(self.support(0.5 * math.pi))]
        return np.array([lo, hi])

    @functools.cached_property
    def max_radius(self) -> float:
        """Largest distance of a point of the body from the origin."""
        if self.dimension == 3:
            return float(np.linalg.norm(self.center) + max(self.params))
        theta = np.linspace(0.0, TWO_PI, CURVATURE_CHECK_SAMPLES, endpoint=False)
        r = np.linalg.norm(self.boundary_point(theta), axis=1)
        i = int(np.argmax(r))
        res = optimize.minimize_scalar(
            lambda t: -np.linalg.norm(self.boundary_point(t)),
            bounds=(theta[i] - TWO_PI / CURVATURE_CHECK_SAMPLES, theta[i] + TWO_PI / CURVATURE_CHECK_SAMPLES),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(max(-res.fun, r[i]))

    @functools.cached_property
    def min_radius(self) -> float:
        """Distance from the origin to the boundary (0 if the origin is outside)."""
        self._require_planar()
        if not self.contains(np.zeros(2)):
            return 0.0
        theta = np.linspace(0.0, TWO_PI, CURVATURE_CHECK_SAMPLES, endpoint=False)
        # for a body containing o the nearest boundary point is where h is minimal
        return float(np.min(self.support(theta)))

    def proxy(self, resolution: int = PROXY_RESOLUTION) -> np.ndarray:
        """Counterclockwise vertices of the inscribed polygon on a uniform normal-angle grid."""
        return _proxy(self, int(resolution))

    # -- membership and ray casting -----------------------------------------

    def contains(self, points, tol: float = 1e-12):
        """Vectorised membership test (boundary included up to ``tol``)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts) - np.array(self.center)
        if self.kind in ("disc", "ball3"):
            r = self.params[0]
            inside = np.einsum("ij,ij->i", pts, pts) <= r * r * (1 + tol) + tol
        elif self.kind in ("ellipse", "ellipsoid3"):
            q = np.sum((pts / np.array(self.params)) ** 2, axis=1)
            inside = q <= 1 + tol
        else:
            norms = np.linalg.norm(pts, axis=1)
            dirs = np.zeros_like(pts)
            nz = norms > 0
            dirs[nz] = pts[nz] / norms[nz, None]
            dirs[~nz] = (1.0, 0.0)
            t = self.ray_exit(np.array(self.center), dirs)
            inside = norms <= t * (1 + tol) + tol
        return bool(inside[0]) if single else inside

    def ray_exit(self, origin, directions, tol: float = 1e-13, max_iter: int = 60):
        """Distance ``t`` with ``origin + t u`` on the boundary, for unit directions ``u``.

        ``origin`` must lie in the interior.  ``directions`` has shape (m, 2)
        (or ``origin`` may itself be an (m, 2) array paired with directions).
        """
        self._require_planar()
        origin = np.asarray(origin, dtype=float)
        u = np.atleast_2d(np.asarray(directions, dtype=float))
        p = np.broadcast_to(origin, u.shape) - np.array(self.center)
        if self.kind == "disc":
            r = self.params[0]
            b = np.einsum("ij,ij->i", p, u)
            c = np.einsum("ij,ij->i", p, p) - r * r
            return -b + np.sqrt(b * b - c)
        if self.kind == "ellipse":
            ab = np.array(self.params)
            ps, us = p / ab, u / ab
            qa = np.einsum("ij,ij->i", us, us)
            qb = np.einsum("ij,ij->i", ps, us)
            qc = np.einsum("ij,ij->i", ps, ps) - 1.0
            return (-qb + np.sqrt(qb * qb - qa * qc)) / qa
        # Exit point has outer normal angle within pi/2 of the ray, and on that
        # interval F(theta) = u x (x(theta) - p) is strictly increasing with
        # F' = (h + h'') cos(theta - phi).  Safeguarded Newton on the active set.
        phi = np.arctan2(u[:, 1], u[:, 0])
        lo, hi = phi - 0.5 * math.pi, phi + 0.5 * math.pi
        # start from the exit normal of the disc of radius h0
        r0 = self.params[0]
        b = np.einsum("ij,ij->i", p, u)
        t0 = -b + np.sqrt(np.maximum(b * b - np.einsum("ij,ij->i", p, p) + r0 * r0, 0.0))
        q = p + t0[:, None] * u
        theta = np.arctan2(q[:, 1], q[:, 0])
        theta = phi + np.clip((theta - phi + math.pi) % TWO_PI - math.pi, -0.49 * math.pi, 0.49 * math.pi)
        active = np.arange(len(u))
        for _ in range(max_iter):
            th = theta[active]
            uu, pp, ph = u[active], p[active], phi[active]
            x, rho = self._point_and_rho(th)
            x -= pp
            f = uu[:, 0] * x[:, 1] - uu[:, 1] * x[:, 0]
            l, h = lo[active], hi[active]
            l = np.where(f < 0, th, l)
            h = np.where(f > 0, th, h)
            lo[active], hi[active] = l, h
            df = rho * np.cos(th - ph)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = th - f / df
            bad = ~np.isfinite(step) | (step < l) | (step > h)
            new = np.where(bad, 0.5 * (l + h), step)
            theta[active] = new
            done = (np.abs(new - th) < tol) | (f == 0.0)
            active = active[~done]
            if len(active) == 0:
                break
        x = self._point_and_rho(theta)[0] - p
        return np.einsum("ij,ij->i", x, u)

    def boundary_angle_of(self, point) -> float:
        """Normal angle ``theta`` of a boundary point (nearest on the proxy, then polished)."""
        self._require_planar()
        point = np.asarray(point, dtype=float)
        prox = self.proxy()
        i = int(np.argmin(np.linalg.norm(prox - point, axis=1)))
        dt = TWO_PI / len(prox)
        t0 = TWO_PI * i / len(prox)
        res = optimize.minimize_scalar(
            lambda t: float(np.sum((self.boundary_point(t) - point) ** 2)),
            bounds=(t0 - 2 * dt, t0 + 2 * dt),
            method="bounded",
            options={"xatol": 1e-14},
        )
        return float(res.x % TWO_PI)


def _fmt(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


@functools.lru_cache(maxsize=64)
def _proxy(body: SmoothBody, resolution: int) -> np.ndarray:
    theta = np.linspace(0.0, TWO_PI, resolution, endpoint=False)
    pts = body.boundary_point(theta)
    pts.setflags(write=False)
    return pts


def parse_body(text: str) -> SmoothBody:
    """Parse a zoo identifier such as ``"disc:1"``, ``"ellipse:2:1"``,
    ``"fourier:1:0.05:3"``, ``"ball3:1"`` or ``"disc:1@0.1,0.2"``."""
    text = text.strip()
    center = ()
    if "@" in text:
        text, ctext = text.split("@", 1)
        center = tuple(float(c) for c in ctext.split(","))
    kind, *params = text.split(":")
    if kind not in _KIND_ARITY:
        raise ValueError(f"unknown body kind {kind!r} in {text!r}")
    try:
        values = tuple(float(p) for p in params)
    except ValueError as exc:
        raise ValueError(f"malformed body identifier {text!r}") from exc
    return SmoothBody(kind, values, center)


def boundary_integral(body: SmoothBody, integrand, panels: int = BOUNDARY_PANELS, order: int = BOUNDARY_ORDER,
                      interval: tuple[float, float] = (0.0, TWO_PI)) -> float:
    """Integrate ``integrand(x, kappa)`` against arc length over the boundary.

    ``integrand`` receives boundary points with shape (m, 2) and curvatures
    with shape (m,), and returns m values.  The arc length element is
    ``(h + h'') dtheta``.
    """
    body._require_planar()
    theta, w = composite_gauss_legendre(interval[0], interval[1], panels, order)
    rho = body.radius_of_curvature(theta)
    x = body.boundary_point(theta)
    vals = np.asarray(integrand(x, 1.0 / rho), dtype=float)
    return float(np.sum(w * vals * rho))


@dataclass(frozen=True)
class HalfSpace:
    """``H+ = {x : x . normal >= offset}``; ``H-`` is the closed complement side."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0:
            raise ValueError("half-space normal must be nonzero")
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("half-space normal must be a unit vector")
        object.__setattr__(self, "normal", tuple(n / norm))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_angle(cls, theta: float, offset: float) -> "HalfSpace":
        return cls((math.cos(theta), math.sin(theta)), offset)

    @property
    def angle(self) -> float:
        return math.atan2(self.normal[1], self.normal[0])

    def signed_distance(self, points):
        return np.asarray(points, dtype=float) @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class Cap:
    """``C(z, t) = {x in K : (x - z) . n_z >= -t}`` with base point ``z = x(theta)``."""

    body: SmoothBody
    theta: float
    height: float

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("cap height must be nonnegative")

    @property
    def base_point(self) -> np.ndarray:
        return self.body.boundary_point(self.theta)

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def halfspace(self) -> HalfSpace:
        return HalfSpace.from_angle(self.theta, float(self.body.support(self.theta)) - self.height)

    @property
    def area(self) -> float:
        if self.height == 0:
            return 0.0
        return region_integral(self.body, self.theta, float(self.body.support(self.theta)) - self.height)

    def contains(self, points):
        inside = self.body.contains(points)
        return inside & (self.halfspace.signed_distance(points) >= -1e-12)


def _direction_angle(u) -> float:
    if np.ndim(u) == 0:
        return float(u)
    u = np.asarray(u, dtype=float)
    return math.atan2(u[1], u[0])


def chord_angles(body: SmoothBody, theta: float, offset: float) -> tuple[float, float]:
    """Normal angles ``(a, b)`` of the two boundary points on the line ``x.u(theta) = offset``.

    The arc from ``a`` to ``b`` (counterclockwise, through ``theta``) bounds the
    part of the body in ``H+``.
    """
    lo, hi = body.width_range(theta)
    if not lo < offset < hi:
        raise ValueError("line does not cut the body")

    def f(t):
        return float(body.boundary_point(t) @ np.array([math.cos(theta), math.sin(theta)])) - offset

    a = optimize.brentq(f, theta - math.pi, theta, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    b = optimize.brentq(f, theta, theta + math.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return a, b


def region_integral(body: SmoothBody, theta: float, offset: float, primitive=None,
                    panels: int = 64, order: int = 16) -> float:
    """Integral over ``K ∩ {x . u(theta) >= offset}`` of a radial function.

    ``primitive(r)`` must return ``G(r) = int_0^r s g(s) ds`` for the radial
    integrand ``g``; ``None`` means ``g = 1`` (plain area).  The region is
    integrated through Green's theorem in polar form, ``int g dA = oint G(r) dphi``,
    along the exact boundary arc and the closing chord.
    """
    lo, hi = body.width_range(theta)
    if offset >= hi:
        return 0.0
    if offset <= lo:
        a, b = theta - math.pi, theta + math.pi
        closed = True
    else:
        a, b = chord_angles(body, theta, offset)
        closed = False
    if primitive is None:
        primitive = _area_primitive
    t, w = composite_gauss_legendre(a, b, panels, order)
    x = body.boundary_point(t)
    r2 = np.einsum("ij,ij->i", x, x)
    # x cross dx/dtheta = h (h + h'')
    dphi = body.support(t) * body.radius_of_curvature(t) / r2
    total = float(np.sum(w * primitive(np.sqrt(r2)) * dphi))
    if not closed:
        xa, xb = body.boundary_point(a), body.boundary_point(b)
        cross = xb[0] * xa[1] - xb[1] * xa[0]
        if cross != 0.0:
            s, ws = composite_gauss_legendre(0.0, 1.0, 4, order)
            p = xb[None, :] + s[:, None] * (xa - xb)[None, :]
            rr2 = np.einsum("ij,ij->i", p, p)
            total += cross * float(np.sum(ws * primitive(np.sqrt(rr2)) / rr2))
    return total


def _area_primitive(r):
    return 0.5 * r * r


def cap_measure(body: SmoothBody, w, u, t: float, method: str = "proxy",
                resolution: int = PROXY_RESOLUTION) -> float:
    """Weighted measure ``Phi(K ∩ H+(u, t))`` of a cap, in [0, 1].

    Parameters
    ----------
    body : SmoothBody
    w : WeightFunction
        Probability density on ``body``.
    u : float or array_like
        Normal angle, or unit direction, of the half-plane.
    t : float
        Offset; ``H+ = {x : x.u >= t}``.
    method : {"proxy", "boundary", "auto"}
        ``proxy`` clips the dense polygonal proxy with the half-plane and
        integrates the polygon.  ``boundary`` integrates along the exact
        boundary arc and chord (radial weights only); it has no
        discretisation error and is what small caps need.  ``auto`` picks
        ``boundary`` whenever the weight is radial.
    resolution : int
        Proxy vertex count for the ``proxy`` method.
    """
    theta = _direction_angle(u)
    lo, hi = body.width_range(theta)
    if t >= hi:
        return 0.0
    if t <= lo:
        return 1.0
    if method == "auto":
        method = "boundary" if w.radial_primitive is not None else "proxy"
    if method == "boundary":
        if w.radial_primitive is None:
            raise ValueError(f"boundary cap integration needs a radial weight, got {w.id}")
        val = region_integral(body, theta, t, w.radial_primitive) / w.normalization
    elif method == "proxy":
        from . import hull

        poly = hull.clip_polygon(body.proxy(resolution), (-math.cos(theta), -math.sin(theta)), -t)
        val = w.polygon_measure(poly) if len(poly) >= 3 else 0.0
    else:
        raise ValueError(f"unknown cap method {method!r}")
    return min(1.0, max(0.0, val))


def ball_volume(d: int) -> float:
    """Volume of the d-dimensional Euclidean unit ball."""
    if d < 0:
        raise ValueError("dimension must be nonnegative")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def ball_binomial(d: int, j: int) -> float:
    """Ball-binomial ``binom(d, j) Vol(B^d) / (Vol(B^j) Vol(B^{d-j}))``."""
    if d < 0 or j < 0 or j > d:
        raise ValueError(f"ball_binomial needs 0 <= j <= d, got d={d}, j={j}")
    return math.comb(d, j) * ball_volume(d) / (ball_volume(j) * ball_volume(d - j))


def ball_binomial_beta(d: int, j: int) -> float:
    """The same constant via ``B(j/2, (d-j)/2) / (2 B(j, d-j))``, for ``0 < j < d``."""
    if not 0 < j < d:
        raise ValueError("Beta form needs 0 < j < d")
    return 0.5 * math.exp(special.betaln(j / 2, (d - j) / 2) - special.betaln(j, d - j))
