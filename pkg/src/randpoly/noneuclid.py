"""Spherical, hyperbolic and Hilbert geometry in the projected picture.

The gnomonic map of the open upper half-sphere and the projective map of the
upper sheet of the hyperboloid both send geodesics to straight lines, so a
geodesic polygon becomes a Euclidean polygon and the natural area becomes a
radial density on the plane:

    sphere      (1 + |y|^2)^{-3/2}
    hyperboloid (1 - |y|^2)^{-3/2}   (Klein model, |y| < 1)

Independent area oracles use Gauss-Bonnet with interior angles measured in an
orthonormal frame of the tangent plane.  Hilbert geometries on a smooth body
``C`` are handled through the harmonic-symmetrisation unit ball at each point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SmoothBody, parse_body


def lorentz(x, y):
    """Lorentz product ``x1 y1 + ... + xd yd - x_{d+1} y_{d+1}`` along the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]


@dataclass(frozen=True)
class SpherePoint:
    """Point of the open upper half-sphere, renormalised on construction."""

    coords: tuple

    def __post_init__(self):
        x = np.asarray(self.coords, dtype=float)
        if x[-1] <= 0:
            raise ValueError("sphere point must have positive last coordinate")
        object.__setattr__(self, "coords", tuple(x / np.linalg.norm(x)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class HyperboloidPoint:
    """Point of the upper hyperboloid sheet ``x o x = -1``, renormalised on construction."""

    coords: tuple

    def __post_init__(self):
        x = np.asarray(self.coords, dtype=float)
        q = -float(lorentz(x, x))
        if x[-1] <= 0 or q <= 0:
            raise ValueError("hyperboloid point must be timelike with positive last coordinate")
        object.__setattr__(self, "coords", tuple(x / math.sqrt(q)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


# -- gnomonic maps -----------------------------------------------------------------


def gnomonic_sphere(x):
    """Central projection of the upper half-sphere onto the tangent plane at the pole."""
    x = np.asarray(x, dtype=float)
    if np.any(x[..., -1] <= 0):
        raise ValueError("gnomonic projection needs points with positive last coordinate")
    return x[..., :-1] / x[..., -1:]


def gnomonic_sphere_inverse(y):
    y = np.asarray(y, dtype=float)
    lift = np.concatenate([y, np.ones(y.shape[:-1] + (1,))], axis=-1)
    return lift / np.sqrt(1.0 + np.sum(y * y, axis=-1))[..., None]


def gnomonic_hyper(x):
    """Projection of the upper hyperboloid sheet onto the open unit ball (Klein model).

    Evaluates ``x / (x o e) + e`` with ``e`` the last basis vector, which
    reduces to ``-x[:d] / x_{d+1}``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x[..., -1] <= 0):
        raise ValueError("hyperboloid points must have positive last coordinate")
    return -x[..., :-1] / x[..., -1:]


def gnomonic_hyper_inverse(y):
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    if np.any(r2 >= 1.0):
        raise ValueError("Klein-model points must lie in the open unit ball")
    lift = np.concatenate([-y, np.ones(y.shape[:-1] + (1,))], axis=-1)
    return lift / np.sqrt(1.0 - r2)[..., None]


# -- Gauss-Bonnet area oracles ----------------------------------------------------


def _interior_angles(v: np.ndarray, inner) -> np.ndarray:
    prev = np.roll(v, 1, axis=0)
    nxt = np.roll(v, -1, axis=0)
    # tangent vectors at each vertex towards its neighbours; for the sphere
    # inner(v, v) = 1, for the hyperboloid inner(v, v) = -1
    s = inner(v, v)[:, None]
    t1 = prev - (inner(prev, v)[:, None] / s) * v
    t2 = nxt - (inner(nxt, v)[:, None] / s) * v
    n1 = np.sqrt(inner(t1, t1))
    e1 = t1 / n1[:, None]
    c = inner(t2, e1)
    perp = t2 - c[:, None] * e1
    sn = np.sqrt(np.maximum(inner(perp, perp), 0.0))
    return np.arctan2(sn, c)


def _euclid(a, b):
    return np.sum(a * b, axis=-1)


def _in_open_hemisphere(v: np.ndarray) -> bool:
    """Whether some ``u`` has ``v @ u > 0`` for every row (LP: maximise the minimum margin)."""
    from scipy.optimize import linprog

    k, d = v.shape
    # variables (u, s): maximise s subject to s - v @ u <= 0, |u_i| <= 1
    A = np.hstack([-v, np.ones((k, 1))])
    out = linprog(np.r_[np.zeros(d), -1.0], A_ub=A, b_ub=np.zeros(k),
                  bounds=[(-1, 1)] * d + [(None, 1)], method="highs")
    return bool(out.success and -out.fun > 1e-12)


def spherical_polygon_area(vertices) -> float:
    """Area of a convex geodesic polygon in an open half-sphere (Gauss-Bonnet).

    ``vertices`` are unit vectors in counterclockwise order seen from outside.
    """
    v = np.asarray(vertices, dtype=float)
    v = v / np.linalg.norm(v, axis=1)[:, None]
    k = len(v)
    if k < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    if not _in_open_hemisphere(v):
        raise ValueError("polygon vertices must lie in an open half-sphere")
    return float(np.sum(_interior_angles(v, _euclid)) - (k - 2) * math.pi)


def hyperbolic_polygon_area(vertices) -> float:
    """Area of a convex geodesic polygon on the hyperboloid (Gauss-Bonnet)."""
    v = np.asarray(vertices, dtype=float)
    q = -lorentz(v, v)
    if np.any(q <= 0) or np.any(v[:, -1] <= 0):
        raise ValueError("vertices must lie on the upper hyperboloid sheet")
    v = v / np.sqrt(q)[:, None]
    k = len(v)
    if k < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    return float((k - 2) * math.pi - np.sum(_interior_angles(v, lorentz)))


def spherical_density(y, d: int = 2):
    """Pushforward of spherical volume under the gnomonic map."""
    r2 = np.sum(np.asarray(y, dtype=float) ** 2, axis=-1)
    return (1.0 + r2) ** (-(d + 1) / 2)


def hyperbolic_density(y, d: int = 2):
    """Pushforward of hyperbolic volume to the Klein model."""
    r2 = np.sum(np.asarray(y, dtype=float) ** 2, axis=-1)
    return (1.0 - r2) ** (-(d + 1) / 2)


# -- Hilbert geometry ----------------------------------------------------------------


class HilbertDomain:
    """Hilbert geometry on the interior of a smooth strictly convex planar body.

    Parameters
    ----------
    C : SmoothBody or str
    M : int
        Number of directions in the density quadratures (even).
    """

    def __init__(self, C, M: int = 1024):
        if isinstance(C, str):
            C = parse_body(C)
        if C.dimension != 2:
            raise ValueError("Hilbert geometries are implemented for planar bodies")
        if M < 8 or M % 4:
            raise ValueError("direction count M must be a multiple of 4 and >= 8")
        self.C = C
        self.M = int(M)
        theta = 2 * math.pi * np.arange(self.M) / self.M
        self._dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)

    def __repr__(self):
        return f"HilbertDomain({self.C.id!r}, M={self.M})"

    def _check_interior(self, pts):
        inside = self.C.contains(pts, tol=0.0)
        if not np.all(inside):
            raise ValueError("points must lie in the interior of the Hilbert domain")

    def clearance(self, body: SmoothBody) -> float:
        """Smallest gap between ``body`` and the boundary of ``C`` over a normal grid.

        Measured as ``min_u h_C(u) - h_K(u)``; positive iff ``K`` lies in the
        interior of ``C``.
        """
        theta = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
        return float(np.min(self.C.support(theta) - body.support(theta)))

    def _exit_grid(self, pts: np.ndarray) -> np.ndarray:
        """``t+`` for every point and every grid direction, shape (m, M)."""
        m = len(pts)
        origins = np.repeat(pts, self.M, axis=0)
        dirs = np.tile(self._dirs, (m, 1))
        return self.C.ray_exit(origins, dirs).reshape(m, self.M)

    def distance(self, x, y) -> float:
        """Hilbert distance via the logarithmic cross-ratio of the chord through x and y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_interior(np.stack([x, y]))
        diff = y - x
        L = float(np.linalg.norm(diff))
        if L == 0.0:
            return 0.0
        u = diff / L
        t_plus, t_minus = self.C.ray_exit(np.stack([x, x]), np.stack([u, -u]))
        # p = x - t_minus u lies beyond x, q = x + t_plus u lies beyond y
        return 0.5 * math.log(((t_minus + L) * t_plus) / (t_minus * (t_plus - L)))

    def harmonic_ball_radial(self, x, u) -> np.ndarray:
        """Radial function ``2 t+ t- / (t+ + t-)`` of the unit ball at ``x`` in directions ``u``."""
        x = np.asarray(x, dtype=float)
        self._check_interior(x[None])
        u = np.atleast_2d(np.asarray(u, dtype=float))
        u = u / np.linalg.norm(u, axis=1)[:, None]
        tp = self.C.ray_exit(x, u)
        tm = self.C.ray_exit(x, -u)
        return 2.0 * tp * tm / (tp + tm)

    def _radial_grid(self, pts: np.ndarray) -> np.ndarray:
        tp = self._exit_grid(pts)
        tm = np.roll(tp, -self.M // 2, axis=1)
        return 2.0 * tp * tm / (tp + tm)

    def _ball_volumes(self, rho: np.ndarray) -> np.ndarray:
        # trapezoid rule on a periodic integrand
        return 0.5 * (2 * math.pi / self.M) * np.sum(rho * rho, axis=1)

    def _polar_volumes(self, rho: np.ndarray, step: int = 1) -> np.ndarray:
        r = rho[:, ::step]
        u = self._dirs[::step]
        p = r[:, :, None] * u[None, :, :]
        q = np.roll(p, -1, axis=1)
        # vertex of the polar polygon: solves p.y = 1 and q.y = 1
        det = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
        yx = (q[..., 1] - p[..., 1]) / det
        yy = (p[..., 0] - q[..., 0]) / det
        return 0.5 * np.sum(yx * np.roll(yy, -1, axis=1) - yy * np.roll(yx, -1, axis=1), axis=1)

    def busemann_density(self, x, chunk: int = 256):
        """Raw Busemann density ``pi / Vol(B_{C,x})`` at one point or an (m, 2) array."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        self._check_interior(pts)
        out = np.empty(len(pts))
        for s in range(0, len(pts), chunk):
            rho = self._radial_grid(pts[s:s + chunk])
            out[s:s + chunk] = math.pi / self._ball_volumes(rho)
        return float(out[0]) if single else out

    def holmes_thompson_density(self, x, chunk: int = 256):
        """Raw Holmes-Thompson density ``Vol(B_{C,x}^o) / pi``.

        The unit ball is replaced by the polygon with vertices ``rho(u_k) u_k``
        on the direction grid, whose polar is a polygon with exactly computable
        area; the ``O(M^-2)`` discretisation error is removed by Richardson
        extrapolation against the half grid.
        """
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        self._check_interior(pts)
        out = np.empty(len(pts))
        for s in range(0, len(pts), chunk):
            rho = self._radial_grid(pts[s:s + chunk])
            fine = self._polar_volumes(rho, 1)
            coarse = self._polar_volumes(rho, 2)
            out[s:s + chunk] = (4.0 * fine - coarse) / 3.0 / math.pi
        return float(out[0]) if single else out

    def ball_volume(self, x) -> float:
        """Area of the harmonic-symmetrisation unit ball at ``x``."""
        x = np.asarray(x, dtype=float)
        self._check_interior(x[None])
        return float(self._ball_volumes(self._radial_grid(x[None]))[0])

    def polar_ball_volume(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self._check_interior(x[None])
        rho = self._radial_grid(x[None])
        return float((4.0 * self._polar_volumes(rho, 1)[0] - self._polar_volumes(rho, 2)[0]) / 3.0)

    def volume_ratio(self, x) -> dict:
        """Holmes-Thompson over Busemann density on points ``x`` (an (m, 2) array).

        For an ellipse ``C`` every harmonic ball is an ellipse, so the ratio
        should be constant; its mean and relative spread are returned.
        """
        r = self.holmes_thompson_density(x) / self.busemann_density(x)
        r = np.atleast_1d(r)
        return {"ratio": float(np.mean(r)), "spread": float(np.ptp(r) / np.mean(r))}

    def density(self, kind: str, x, **kw):
        if kind in ("bu", "busemann"):
            return self.busemann_density(x, **kw)
        if kind in ("ht", "holmes_thompson", "holmes-thompson"):
            return self.holmes_thompson_density(x, **kw)
        raise ValueError(f"unknown Hilbert volume {kind!r}")
