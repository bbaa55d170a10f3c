"""Convex hulls, polytope volume, half-plane clipping and fan decompositions.

Planar hulls use Andrew's monotone chain after an Akl-Toussaint prefilter;
orientation tests fall back to exact rational arithmetic when the floating
point value is within a relative ``EPS`` of zero.  Spatial hulls use
randomised incremental insertion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

#: Relative tolerance of the orientation predicates.
EPS = 1e-12
#: Directions used by the Akl-Toussaint prefilter.
PREFILTER_DIRECTIONS = 16


class DegenerateHullError(ValueError):
    """Raised when a hull of the requested dimension has zero volume."""


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope given by its extreme points.

    Attributes
    ----------
    dimension : int
        2 or 3.  A degenerate hull keeps the ambient dimension and sets
        ``degenerate``; its ``affine_dimension`` is smaller.
    vertices : ndarray, shape (k, d)
        Counterclockwise ring in 2D.
    facets : ndarray, shape (m, 3)
        Outward-oriented triangles (indices into ``vertices``), 3D only.
    indices : ndarray, shape (k,)
        Position of each vertex in the generating point array (``-1`` when
        the vertex was created by clipping).
    """

    dimension: int
    vertices: np.ndarray
    facets: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    indices: np.ndarray = None
    degenerate: bool = False
    affine_dimension: int = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, self.dimension)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if self.indices is None:
            object.__setattr__(self, "indices", np.full(len(v), -1, dtype=np.intp))
        if self.affine_dimension is None:
            object.__setattr__(self, "affine_dimension", self.dimension if not self.degenerate else self.dimension - 1)

    def __len__(self):
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def volume(self) -> float:
        return polytope_volume(self)

    def edges(self) -> np.ndarray:
        """Vertex index pairs of the edges (ring order in 2D)."""
        if self.dimension == 2:
            k = len(self.vertices)
            i = np.arange(k)
            return np.stack([i, (i + 1) % k], axis=1)
        e = np.concatenate([self.facets[:, [0, 1]], self.facets[:, [1, 2]], self.facets[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def contains(self, points, tol: float = 1e-12):
        """Vectorised closed-membership test."""
        if self.dimension == 2:
            return points_in_convex_polygon(self.vertices, points, tol)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n, off = _facet_planes(self.vertices, self.facets)
        scale = max(1.0, float(np.max(np.abs(self.vertices))))
        return np.all(pts @ n.T - off <= tol * scale, axis=1)


EMPTY_POLYGON = Polytope(2, np.zeros((0, 2)), degenerate=True, affine_dimension=-1)


# -- predicates -----------------------------------------------------------------


def _orient_exact(o, a, b) -> int:
    ox, oy = Fraction(float(o[0])), Fraction(float(o[1]))
    v = (Fraction(float(a[0])) - ox) * (Fraction(float(b[1])) - oy) - (Fraction(float(a[1])) - oy) * (
        Fraction(float(b[0])) - ox
    )
    return (v > 0) - (v < 0)


def orient2d(o, a, b) -> int:
    """Sign of the turn ``o -> a -> b`` (+1 left, -1 right, 0 collinear).

    Uses floating point unless the result is within ``EPS`` (relative to the
    magnitude of the products) of zero, where it recomputes exactly.
    """
    ax, ay = a[0] - o[0], a[1] - o[1]
    bx, by = b[0] - o[0], b[1] - o[1]
    l, r = ax * by, ay * bx
    v = l - r
    if abs(v) > EPS * (abs(l) + abs(r)):
        return 1 if v > 0 else -1
    return _orient_exact(o, a, b)


# -- planar hull ------------------------------------------------------------------


def _prefilter_2d(pts: np.ndarray) -> np.ndarray:
    """Indices of points that may be hull vertices (Akl-Toussaint)."""
    n = len(pts)
    if n < 64:
        return np.arange(n)
    ang = np.arange(PREFILTER_DIRECTIONS) * (2 * math.pi / PREFILTER_DIRECTIONS)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ext = np.argmax(pts @ dirs.T, axis=0)
    # extremes in direction order form a counterclockwise convex ring
    keep = np.concatenate([[True], ext[1:] != ext[:-1]])
    ring_idx = ext[keep]
    if len(ring_idx) > 1 and ring_idx[0] == ring_idx[-1]:
        ring_idx = ring_idx[:-1]
    if len(ring_idx) < 3:
        return np.arange(n)
    ring = pts[ring_idx]
    e = np.roll(ring, -1, axis=0) - ring
    rel_x = pts[:, None, 0] - ring[None, :, 0]
    rel_y = pts[:, None, 1] - ring[None, :, 1]
    cross = e[None, :, 0] * rel_y - e[None, :, 1] * rel_x
    scale = float(np.max(np.abs(pts))) ** 2
    strictly_inside = np.all(cross > 1e-9 * scale, axis=1)
    return np.flatnonzero(~strictly_inside)


def _chain(pts: np.ndarray, order: np.ndarray) -> list:
    out: list = []
    for i in order:
        p = pts[i]
        while len(out) >= 2 and orient2d(pts[out[-2]], pts[out[-1]], p) <= 0:
            out.pop()
        out.append(int(i))
    return out


def _hull_2d(pts: np.ndarray, candidates: np.ndarray | None = None) -> Polytope:
    idx = _prefilter_2d(pts) if candidates is None else np.asarray(candidates)
    sub = pts[idx]
    order = np.lexsort((sub[:, 1], sub[:, 0]))
    # drop exact duplicates so the chain never sees zero-length edges
    s = sub[order]
    dup = np.zeros(len(order), dtype=bool)
    dup[1:] = np.all(s[1:] == s[:-1], axis=1)
    order = order[~dup]
    if len(order) < 3:
        verts = idx[order]
        return Polytope(2, pts[verts], indices=verts, degenerate=True, affine_dimension=len(order) - 1)
    lower = _chain(sub, order)
    upper = _chain(sub, order[::-1])
    ring = lower[:-1] + upper[:-1]
    verts = idx[np.array(ring, dtype=np.intp)]
    if len(ring) < 3:
        return Polytope(2, pts[verts], indices=verts, degenerate=True, affine_dimension=1)
    return Polytope(2, pts[verts], indices=verts)


# -- spatial hull -------------------------------------------------------------------


def _facet_planes(v: np.ndarray, f: np.ndarray):
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n, np.einsum("ij,ij->i", n, a)


def _initial_simplex(pts: np.ndarray, tol: float):
    i0 = int(np.argmin(pts[:, 0]))
    i1 = int(np.argmax(np.linalg.norm(pts - pts[i0], axis=1)))
    d = pts[i1] - pts[i0]
    if np.linalg.norm(d) <= tol:
        return None, 0
    cr = np.linalg.norm(np.cross(pts - pts[i0], d), axis=1)
    i2 = int(np.argmax(cr))
    if cr[i2] <= tol * np.linalg.norm(d):
        return None, 1
    nrm = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    h = (pts - pts[i0]) @ nrm
    i3 = int(np.argmax(np.abs(h)))
    if abs(h[i3]) <= tol * np.linalg.norm(nrm):
        return None, 2
    if h[i3] > 0:
        i1, i2 = i2, i1
    return (i0, i1, i2, i3), 3


def _hull_3d(pts: np.ndarray) -> Polytope:
    n = len(pts)
    scale = max(1.0, float(np.max(np.abs(pts))))
    tol = 1e-12 * scale
    simplex, affdim = _initial_simplex(pts, tol)
    if simplex is None:
        return Polytope(3, pts[:0], indices=np.zeros(0, dtype=np.intp), degenerate=True, affine_dimension=affdim)
    a, b, c, d = simplex
    # (a, b, c) is clockwise seen from d, so outward faces are:
    faces = [(a, b, c), (a, d, b), (b, d, c), (a, c, d)]
    # prefilter: discard points inside the hull of axis/diagonal extremes
    dirs = np.array([[sx, sy, sz] for sx in (-1, 0, 1) for sy in (-1, 0, 1) for sz in (-1, 0, 1)
                     if (sx, sy, sz) != (0, 0, 0)], dtype=float)
    extreme = set(int(i) for i in np.argmax(pts @ dirs.T, axis=0))
    rng = np.random.default_rng(0x5EED)
    order = [int(i) for i in rng.permutation(sorted(extreme - set(simplex)))]
    faces = _incremental(pts, faces, order, tol)
    nf, off = _facet_planes(pts, np.array(faces))
    outside = np.any(pts @ nf.T - off > tol, axis=1)
    rest = np.flatnonzero(outside)
    rest = rest[~np.isin(rest, list(extreme | set(simplex)))]
    faces = _incremental(pts, faces, [int(i) for i in rng.permutation(rest)], tol)
    f = np.array(faces, dtype=np.intp)
    used = np.unique(f)
    remap = np.full(n, -1, dtype=np.intp)
    remap[used] = np.arange(len(used))
    return Polytope(3, pts[used], facets=remap[f], indices=used)


def _incremental(pts, faces, order, tol):
    faces = list(faces)
    if not order:
        return faces
    f = np.array(faces, dtype=np.intp)
    nrm, off = _facet_planes(pts, f)
    for i in order:
        p = pts[i]
        vis = nrm @ p - off > tol
        if not vis.any():
            continue
        vis_faces = f[vis]
        directed = set()
        for x, y, z in vis_faces:
            directed.update(((x, y), (y, z), (z, x)))
        horizon = [(x, y) for (x, y) in directed if (y, x) not in directed]
        new = np.array([(x, y, i) for (x, y) in horizon], dtype=np.intp)
        nn, no = _facet_planes(pts, new)
        f = np.concatenate([f[~vis], new])
        nrm = np.concatenate([nrm[~vis], nn])
        off = np.concatenate([off[~vis], no])
    return [tuple(int(v) for v in row) for row in f]


# -- public API ---------------------------------------------------------------------


def convex_hull(points, dimension: int | None = None, *, strict: bool = False) -> Polytope:
    """Convex hull of a finite point set.

    Parameters
    ----------
    points : array_like, shape (n, d)
    dimension : int, optional
        Checked against the point array when given.
    strict : bool
        Raise :class:`DegenerateHullError` instead of returning a flagged
        lower-dimensional result.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    d = pts.shape[1]
    if dimension is not None and dimension != d:
        raise ValueError(f"points have dimension {d}, expected {dimension}")
    if d not in (2, 3):
        raise ValueError("only planar and spatial hulls are supported")
    if len(pts) < d + 1:
        raise DegenerateHullError(f"need at least {d + 1} points for a {d}D hull, got {len(pts)}")
    hull = _hull_2d(pts) if d == 2 else _hull_3d(pts)
    if strict and hull.degenerate:
        raise DegenerateHullError("input points are affinely dependent")
    return hull


def remove_point_hull(points: np.ndarray, hull: Polytope, i: int) -> Polytope:
    """Hull of ``points`` without row ``i``, reusing ``hull = convex_hull(points)``.

    If ``i`` is not a vertex the hull is returned unchanged.  In the plane,
    only points inside the triangle spanned by ``i`` and its two ring
    neighbours can become new vertices, so the new hull is computed from
    those and the remaining old vertices.  Spatial hulls are recomputed.
    """
    pos = np.flatnonzero(hull.indices == i)
    if len(pos) == 0:
        return hull
    mask = np.ones(len(points), dtype=bool)
    mask[i] = False
    if hull.dimension != 2 or hull.degenerate or len(hull) < 4:
        keep = np.flatnonzero(mask)
        sub = convex_hull(points[keep])
        return Polytope(sub.dimension, sub.vertices, facets=sub.facets, indices=keep[sub.indices],
                        degenerate=sub.degenerate, affine_dimension=sub.affine_dimension)
    k = int(pos[0])
    m = len(hull)
    a, b, c = hull.vertices[(k - 1) % m], hull.vertices[k], hull.vertices[(k + 1) % m]
    tri = np.array([a, b, c])
    inside = points_in_convex_polygon(tri, points, tol=1e-12) & mask
    cand = np.union1d(np.delete(hull.indices, k), np.flatnonzero(inside))
    return _hull_2d(points, cand)


def polytope_volume(P: Polytope) -> float:
    """Area (shoelace) or volume (signed tetrahedra from the centroid)."""
    if P.degenerate or P.is_empty:
        return 0.0
    v = P.vertices
    if P.dimension == 2:
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    g = v.mean(axis=0)
    a, b, c = v[P.facets[:, 0]] - g, v[P.facets[:, 1]] - g, v[P.facets[:, 2]] - g
    return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0


def polygon_area(vertices) -> float:
    """Signed shoelace area of a vertex ring."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_polygon(vertices, normal, offset) -> np.ndarray:
    """Part of a convex polygon in ``{x : x . normal <= offset}``.

    Vectorised single-plane Sutherland-Hodgman: every kept vertex and every
    edge crossing is emitted in ring order.
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) == 0:
        return v.reshape(0, 2)
    s = v @ np.asarray(normal, dtype=float) - offset
    if np.all(s <= 0):
        return v
    if np.all(s >= 0):
        return v[:0]
    s_next = np.roll(s, -1)
    v_next = np.roll(v, -1, axis=0)
    keep = s <= 0
    cross = ((s < 0) & (s_next > 0)) | ((s > 0) & (s_next < 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(cross, s / (s - s_next), 0.0)
    inter = v + lam[:, None] * (v_next - v)
    out = np.empty((2 * len(v), 2))
    out[0::2] = v
    out[1::2] = inter
    mask = np.empty(2 * len(v), dtype=bool)
    mask[0::2] = keep
    mask[1::2] = cross
    return out[mask]


def clip_halfspace(P: Polytope, H) -> Polytope:
    """``P ∩ H-`` for a planar polytope and ``H+ = {x . u >= t}``."""
    if P.dimension != 2:
        raise ValueError("clipping is implemented for planar polytopes only")
    if P.is_empty:
        return EMPTY_POLYGON
    v = P.vertices
    s = v @ np.asarray(H.normal) - H.offset
    if np.all(s <= 0):
        return P
    out = clip_polygon(v, H.normal, H.offset)
    if len(out) < 3 or polygon_area(out) <= 0:
        return EMPTY_POLYGON
    return Polytope(2, out)


def intersect_halfplanes(vertices, normals, offsets) -> np.ndarray:
    """Clip a convex polygon successively by ``{x . n_k <= t_k}``."""
    v = np.asarray(vertices, dtype=float)
    for n, t in zip(np.asarray(normals, dtype=float), np.asarray(offsets, dtype=float)):
        v = clip_polygon(v, n, t)
        if len(v) == 0:
            break
    return v


@dataclass(frozen=True)
class FanDecomposition:
    """Simplices ``(apex, v_i, v_{i+1})`` (2D) or ``(apex, facet)`` (3D)."""

    simplices: np.ndarray
    volumes: np.ndarray
    apex: np.ndarray
    dropped: int


def fan_decomposition(P: Polytope, apex=None, *, signed: bool = False) -> FanDecomposition:
    """Decompose ``P`` into simplices sharing a common apex.

    The default apex is the origin when it lies in ``P`` and vertex 0
    otherwise.  Simplices with volume below ``1e-15 Vol(P)`` are dropped and
    counted.  With ``signed=True`` any apex is accepted and the simplices
    carry signed volumes (their signed sum is still ``Vol(P)``).
    """
    if P.is_empty or P.degenerate:
        d = P.dimension
        return FanDecomposition(np.zeros((0, d + 1, d)), np.zeros(0), np.zeros(d), 0)
    v = P.vertices
    d = P.dimension
    if apex is None:
        origin = np.zeros(d)
        apex = origin if bool(P.contains(origin)) else v[0]
    apex = np.asarray(apex, dtype=float)
    if d == 2:
        a = v
        b = np.roll(v, -1, axis=0)
        vol = 0.5 * ((a[:, 0] - apex[0]) * (b[:, 1] - apex[1]) - (a[:, 1] - apex[1]) * (b[:, 0] - apex[0]))
        simp = np.stack([np.broadcast_to(apex, a.shape), a, b], axis=1)
    else:
        f = P.facets
        a, b, c = v[f[:, 0]] - apex, v[f[:, 1]] - apex, v[f[:, 2]] - apex
        vol = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
        simp = np.stack([np.broadcast_to(apex, a.shape), v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]], axis=1)
    total = polytope_volume(P)
    if not signed and np.any(vol < -1e-12 * total):
        raise ValueError("apex is not in the closure of the polytope")
    small = np.abs(vol) < 1e-15 * total
    return FanDecomposition(simp[~small], vol[~small], apex, int(small.sum()))


def points_in_convex_polygon(vertices, points, tol: float = 1e-12) -> np.ndarray:
    """Closed membership test for a counterclockwise convex ring (vectorised).

    Small rings test every edge; large rings locate each point in the fan
    wedge about vertex 0 by binary search and test a single edge.
    """
    v = np.asarray(vertices, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(v) < 3:
        return np.zeros(len(pts), dtype=bool)
    scale = max(1.0, float(np.max(np.abs(v)))) ** 2
    if len(v) <= 16:
        e = np.roll(v, -1, axis=0) - v
        inside = np.ones(len(pts), dtype=bool)
        for k in range(len(v)):
            cr = e[k, 0] * (pts[:, 1] - v[k, 1]) - e[k, 1] * (pts[:, 0] - v[k, 0])
            inside &= cr >= -tol * scale
        return inside
    rel = v[1:] - v[0]
    e0 = rel[0]
    ang = np.arctan2(e0[0] * rel[:, 1] - e0[1] * rel[:, 0], rel @ e0)
    q = pts - v[0]
    qa = np.arctan2(e0[0] * q[:, 1] - e0[1] * q[:, 0], q @ e0)
    j = np.clip(np.searchsorted(ang, qa) - 1, 0, len(rel) - 2)
    a, b = rel[j], rel[j + 1]
    # inside the two bounding rays of the fan and on the left of edge (a, b)
    c_first = e0[0] * q[:, 1] - e0[1] * q[:, 0]
    c_last = rel[-1, 0] * q[:, 1] - rel[-1, 1] * q[:, 0]
    c_edge = (b[:, 0] - a[:, 0]) * (q[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (q[:, 0] - a[:, 0])
    t = -tol * scale
    return (c_first >= t) & (c_last <= -t) & (c_edge >= t)
