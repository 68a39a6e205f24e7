"""Background triangulation, signed distances and level-set machinery.

The optimisation domain lives on a fixed triangulation of the hold-all set
D.  A nodal level set ``phi`` marks the current domain as {phi < 0}; the
finite-element problems are solved on the submesh of background triangles
whose centroid value is negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import Delaunay

TAGS = ("Gamma0", "Gamma1", "Gamma2", "OuterD")


class GeometryError(RuntimeError):
    pass


class EmptyDomain(GeometryError):
    pass


class DetachedGamma0(GeometryError):
    pass


class UntaggedBoundary(GeometryError):
    pass


class NoBracket(GeometryError):
    pass


class NoInterface(GeometryError):
    pass


class InvalidMesh(GeometryError):
    pass


def edge_keys(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    e = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
    return e[:, 0] * n_vertices + e[:, 1]


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with tagged boundary edges.

    ``triangles`` are counterclockwise vertex triples; ``boundary_tags[k]``
    is the tag of ``boundary_edges[k]``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges",
                           np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_tags", np.asarray(self.boundary_tags, dtype="<U6"))
        for arr in (self.vertices, self.triangles, self.boundary_edges, self.boundary_tags):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def grad_basis(self) -> np.ndarray:
        """Constant gradients of the three hat functions, shape (t, 3, 2)."""
        return hat_gradients(self.vertices, self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (sorted vertex pairs)."""
        keys, _ = self._edge_table
        n = self.n_vertices
        return np.stack([keys // n, keys % n], axis=1)

    @cached_property
    def _edge_table(self):
        t = self.triangles
        e = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        keys = edge_keys(e, self.n_vertices)
        uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
        return uniq, counts

    def topological_boundary(self) -> np.ndarray:
        keys, counts = self._edge_table
        n = self.n_vertices
        b = keys[counts == 1]
        return np.stack([b // n, b % n], axis=1)

    def boundary_vertices(self, tags: Sequence[str] | None = None) -> np.ndarray:
        if tags is None:
            sel = np.ones(len(self.boundary_tags), dtype=bool)
        else:
            sel = np.isin(self.boundary_tags, list(tags))
        return np.unique(self.boundary_edges[sel].ravel())

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def locator(self) -> "PointLocator":
        return PointLocator(self)

    def check(self) -> None:
        """Raise InvalidMesh unless all structural invariants hold."""
        if self.n_triangles == 0:
            raise InvalidMesh("mesh has no triangles")
        if np.any(self.signed_areas <= 0.0):
            raise InvalidMesh("non-positive triangle area")
        keys, counts = self._edge_table
        if np.any(counts > 2):
            raise InvalidMesh("edge shared by more than two triangles")
        b_topo = np.sort(keys[counts == 1])
        b_given = np.sort(edge_keys(self.boundary_edges, self.n_vertices))
        if len(b_topo) != len(b_given) or np.any(b_topo != b_given):
            raise InvalidMesh("boundary edge list does not match topology")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise InvalidMesh("one tag per boundary edge required")
        if not np.all(np.isin(self.boundary_tags, TAGS)):
            raise InvalidMesh("unknown boundary tag")


def hat_gradients(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty(p.shape)
    # grad lambda_i = rot90(edge opposite to i) / (2 area)
    g[:, 0, 0] = y[:, 1] - y[:, 2]
    g[:, 0, 1] = x[:, 2] - x[:, 1]
    g[:, 1, 0] = y[:, 2] - y[:, 0]
    g[:, 1, 1] = x[:, 0] - x[:, 2]
    g[:, 2, 0] = y[:, 0] - y[:, 1]
    g[:, 2, 1] = x[:, 1] - x[:, 0]
    return g / det[:, None, None]


def make_mesh(vertices, triangles, tagger: Callable[[np.ndarray], np.ndarray] | None = None) -> TriMesh:
    """Build a TriMesh: orient triangles counterclockwise, derive boundary edges.

    ``tagger`` maps edge midpoints (k, 2) to tag strings; default OuterD.
    """
    vertices = np.asarray(vertices, dtype=float)
    tri = np.array(triangles, dtype=np.int64)
    p = vertices[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    tmp = TriMesh(vertices, tri, np.zeros((0, 2), np.int64), np.zeros(0, "<U6"))
    bedges = tmp.topological_boundary()
    mids = 0.5 * (vertices[bedges[:, 0]] + vertices[bedges[:, 1]])
    if tagger is None:
        tags = np.full(len(bedges), "OuterD")
    else:
        tags = np.asarray(tagger(mids))
    return TriMesh(vertices, tri, bedges, tags)


# ----------------------------------------------------------------------------
# signed distance expressions
# ----------------------------------------------------------------------------

class SDF:
    """Closed CSG expression with signed-distance semantics (negative inside)."""

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.eval(pts.reshape(-1, 2)).reshape(pts.shape[:-1])

    def eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __or__(self, other):
        return Union(self, other)

    def __and__(self, other):
        return Intersection(self, other)

    def __invert__(self):
        return Complement(self)

    def __sub__(self, other):
        return Intersection(self, Complement(other))


@dataclass(frozen=True)
class HalfPlane(SDF):
    """{x : n . x <= offset} with unit normal ``n``."""

    normal: tuple[float, float]
    offset: float

    def eval(self, pts):
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        return pts @ n - self.offset


@dataclass(frozen=True)
class Box(SDF):
    x0: float
    x1: float
    y0: float
    y1: float

    def eval(self, pts):
        cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
        hx, hy = 0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0)
        qx = np.abs(pts[:, 0] - cx) - hx
        qy = np.abs(pts[:, 1] - cy) - hy
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Disk(SDF):
    center: tuple[float, float]
    radius: float

    def eval(self, pts):
        c = np.asarray(self.center, dtype=float)
        return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) - self.radius


@dataclass(frozen=True)
class Union(SDF):
    a: SDF
    b: SDF

    def eval(self, pts):
        return np.minimum(self.a.eval(pts), self.b.eval(pts))


@dataclass(frozen=True)
class Intersection(SDF):
    a: SDF
    b: SDF

    def eval(self, pts):
        return np.maximum(self.a.eval(pts), self.b.eval(pts))


@dataclass(frozen=True)
class Complement(SDF):
    a: SDF

    def eval(self, pts):
        return -self.a.eval(pts)


def eval_sdf(expr: SDF, point) -> float | np.ndarray:
    val = expr(np.asarray(point, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


# ----------------------------------------------------------------------------
# mesh generation
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float
    tagger: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def area(self, h=None) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def min_feature(self) -> float:
        return min(self.x1 - self.x0, self.y1 - self.y0)


@dataclass(frozen=True)
class SquareWithHole:
    """[-half, half]^2 minus the open disk of ``radius`` at the origin."""

    half: float = 2.6
    radius: float = 1.0

    # lattice spacing relative to h_target; keeps the longest edge under 1.5 h
    spacing_factor: float = 1.2

    def n_circle(self, h: float) -> int:
        return max(8, math.ceil(2.0 * math.pi * self.radius / (self.spacing_factor * h)))

    def area(self, h: float) -> float:
        n = self.n_circle(h)
        polygon = 0.5 * n * self.radius**2 * math.sin(2.0 * math.pi / n)
        return (2.0 * self.half) ** 2 - polygon

    @property
    def min_feature(self) -> float:
        return self.radius

    @property
    def sdf(self) -> SDF:
        return Box(-self.half, self.half, -self.half, self.half) - Disk((0.0, 0.0), self.radius)


def generate_background_mesh(geometry, h_target: float) -> TriMesh:
    """Conforming triangulation of a catalog geometry with edges about h_target."""
    if not (h_target > 0.0) or h_target > 0.5:
        raise ValueError(f"h_target must lie in (0, 0.5], got {h_target}")
    if h_target >= geometry.min_feature:
        raise ValueError("h_target must be smaller than the narrowest feature")
    if isinstance(geometry, Rectangle):
        mesh = _structured_rectangle(geometry, h_target)
    elif isinstance(geometry, SquareWithHole):
        mesh = _square_with_hole(geometry, h_target)
    else:
        raise TypeError(f"unsupported geometry {geometry!r}")
    mesh.check()
    return mesh


def _structured_rectangle(g: Rectangle, h: float) -> TriMesh:
    nx = max(1, math.ceil((g.x1 - g.x0) / h - 1e-9))
    ny = max(1, math.ceil((g.y1 - g.y0) / h - 1e-9))
    xs = np.linspace(g.x0, g.x1, nx + 1)
    ys = np.linspace(g.y0, g.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return make_mesh(verts, tris, g.tagger)


def _square_with_hole(g: SquareWithHole, h: float) -> TriMesh:
    s = g.spacing_factor * h
    nc = g.n_circle(h)
    ang = 2.0 * np.pi * np.arange(nc) / nc
    circle = g.radius * np.column_stack([np.cos(ang), np.sin(ang)])
    ns = math.ceil(2.0 * g.half / s)
    t = np.linspace(-g.half, g.half, ns + 1)[:-1]
    H = g.half
    square = np.concatenate([
        np.column_stack([t, np.full(ns, -H)]),
        np.column_stack([np.full(ns, H), t]),
        np.column_stack([-t, np.full(ns, H)]),
        np.column_stack([np.full(ns, -H), -t]),
    ])
    fixed = np.concatenate([circle, square])
    n_fixed = len(fixed)
    sdf = g.sdf

    # hexagonal lattice of interior points
    dy = s * math.sqrt(3.0) / 2.0
    rows = np.arange(-H, H + dy, dy)
    pts = []
    for j, y in enumerate(rows):
        xs = np.arange(-H + (0.5 * s if j % 2 else 0.0), H + s, s)
        pts.append(np.column_stack([xs, np.full(len(xs), y)]))
    pts = np.concatenate(pts)
    pts = pts[sdf(pts) < -0.6 * s]
    p = np.concatenate([fixed, pts])

    # ghost points outside both boundaries keep the real ones off the hull
    n_ghost = 4 * ns
    ga = 2.0 * np.pi * (np.arange(n_ghost) + 0.5) / n_ghost
    ghost = 2.0 * H * np.column_stack([np.cos(ga), np.sin(ga)])
    ghost = np.concatenate([ghost, 0.3 * g.radius * np.column_stack(
        [np.cos(ang[::4]), np.sin(ang[::4])]), [[0.0, 0.0]]])

    def triangulate(points):
        allp = np.concatenate([points, ghost])
        tri = Delaunay(allp).simplices
        tri = tri[np.all(tri < len(points), axis=1)]
        cen = points[tri].mean(axis=1)
        return tri[sdf(cen) < 0.0]

    # spring relaxation of the interior points with fixed boundary nodes
    for _ in range(40):
        tri = triangulate(p)
        e = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
        vec = p[e[:, 0]] - p[e[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        L0 = 1.2 * math.sqrt(np.mean(L**2))
        F = np.maximum(L0 - L, 0.0)
        fv = (F / L)[:, None] * vec
        force = np.zeros_like(p)
        np.add.at(force, e[:, 0], fv)
        np.add.at(force, e[:, 1], -fv)
        force[:n_fixed] = 0.0
        p = p + 0.2 * force
        # pull escaped or boundary-hugging points back inside
        d = sdf(p[n_fixed:])
        bad = d > -0.2 * s
        if np.any(bad):
            q = p[n_fixed:][bad]
            eps = 1e-7
            gx = (sdf(q + [eps, 0.0]) - sdf(q - [eps, 0.0])) / (2 * eps)
            gy = (sdf(q + [0.0, eps]) - sdf(q - [0.0, eps])) / (2 * eps)
            grad = np.column_stack([gx, gy])
            grad /= np.linalg.norm(grad, axis=1, keepdims=True)
            shift = (d[bad] + 0.2 * s)[:, None] * grad
            sub = p[n_fixed:]
            sub[bad] = q - shift
            p[n_fixed:] = sub

    # split the few edges the relaxation left longer than 1.45 h
    for _ in range(10):
        tri = triangulate(p)
        e = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
        L = np.linalg.norm(p[e[:, 0]] - p[e[:, 1]], axis=1)
        long = e[L > 1.45 * h]
        if len(long) == 0:
            break
        p = np.concatenate([p, 0.5 * (p[long[:, 0]] + p[long[:, 1]])])
    tri = triangulate(p)
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=np.int64)
    remap[used] = np.arange(len(used))
    p = p[used]
    tri = remap[tri]

    def tagger(mid):
        r = np.hypot(mid[:, 0], mid[:, 1])
        return np.where(r < g.radius + 0.5 * s, "Gamma0", "OuterD")

    mesh = make_mesh(p, tri, tagger)
    # conformity: the boundary must consist of the prescribed segments
    expected = nc + 4 * ns
    if len(mesh.boundary_edges) != expected:
        raise InvalidMesh(f"non-conforming boundary: {len(mesh.boundary_edges)} edges, expected {expected}")
    bv = mesh.vertices[np.unique(mesh.boundary_edges)]
    on_circle = np.abs(np.hypot(bv[:, 0], bv[:, 1]) - g.radius) < 1e-12
    on_square = np.isclose(np.max(np.abs(bv), axis=1), H, atol=1e-12)
    if not np.all(on_circle | on_square):
        raise InvalidMesh("interior point on the boundary")
    return mesh


# ----------------------------------------------------------------------------
# level sets
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevelSetField:
    mesh: TriMesh
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (self.mesh.n_vertices,):
            raise ValueError("phi must have one value per vertex")
        if not np.all(np.isfinite(phi)):
            raise ValueError("phi must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    def with_phi(self, phi) -> "LevelSetField":
        return LevelSetField(self.mesh, phi)

    @property
    def centroid_values(self) -> np.ndarray:
        return self.phi[self.mesh.triangles].mean(axis=1)


def init_levelset(mesh: TriMesh, expr: SDF) -> LevelSetField:
    return LevelSetField(mesh, expr(mesh.vertices))


class Submesh(NamedTuple):
    mesh: TriMesh
    vertex_map: np.ndarray
    triangle_map: np.ndarray


def extract_submesh(ls: LevelSetField, spec) -> Submesh:
    """Active triangles {centroid phi < 0} with boundary edges retagged.

    ``spec`` provides ``Q1`` and ``Q2`` point predicates (vectorised).
    """
    bg = ls.mesh
    active = np.flatnonzero(ls.centroid_values < 0.0)
    if len(active) == 0:
        raise EmptyDomain("no triangle has a negative centroid value")
    tri_bg = bg.triangles[active]
    vmap = np.unique(tri_bg)
    inv = -np.ones(bg.n_vertices, dtype=np.int64)
    inv[vmap] = np.arange(len(vmap))
    tri = inv[tri_bg]
    verts = bg.vertices[vmap]

    tmp = TriMesh(verts, tri, np.zeros((0, 2), np.int64), np.zeros(0, "<U6"))
    bedges = tmp.topological_boundary()
    bg_keys = edge_keys(vmap[bedges], bg.n_vertices)
    g0_bg = edge_keys(bg.boundary_edges[bg.boundary_tags == "Gamma0"], bg.n_vertices)
    is_g0 = np.isin(bg_keys, g0_bg)
    if not np.all(np.isin(g0_bg, bg_keys)):
        raise DetachedGamma0("a Gamma0 edge is not on the active boundary")
    mids = 0.5 * (verts[bedges[:, 0]] + verts[bedges[:, 1]])
    q1 = np.asarray(spec.Q1(mids), dtype=bool)
    q2 = np.asarray(spec.Q2(mids), dtype=bool)
    tags = np.where(is_g0, "Gamma0", np.where(q1, "Gamma1", np.where(q2, "Gamma2", "")))
    if np.any(tags == ""):
        raise UntaggedBoundary(f"{int(np.sum(tags == ''))} free edges outside Q1 and Q2")
    mesh = TriMesh(verts, tri, bedges, tags)
    return Submesh(mesh, vmap, active)


def measure_region(ls: LevelSetField, shift: float = 0.0) -> float:
    """Area of the triangles whose centroid value satisfies phi < shift."""
    inside = ls.centroid_values - shift < 0.0
    return float(ls.mesh.areas[inside].sum())


def volume_correct(ls: LevelSetField, V_target: float, rtol: float = 1e-3) -> LevelSetField:
    """Shift phi by a constant so the {phi < 0} area matches ``V_target``.

    The active set only changes when the shift passes a centroid value, so
    the candidate shifts are the midpoints between sorted centroid values.
    Among those meeting the tolerance the one closest to zero is taken; if
    the mesh is too coarse for any to meet it, the closest area wins.
    """
    total = ls.mesh.total_area
    if not (0.0 < V_target < total):
        raise NoBracket(f"target area {V_target} outside (0, {total})")
    tol = rtol * V_target
    cv = ls.centroid_values
    areas = ls.mesh.areas
    if abs(float(areas[cv < 0.0].sum()) - V_target) <= tol:
        return ls
    order = np.argsort(cv, kind="stable")
    s = cv[order]
    cum = np.concatenate([[0.0], np.cumsum(areas[order])])
    # shift c_k keeps exactly the k smallest centroid values inside
    gap = np.diff(s)
    c = np.concatenate([[s[0] - 1.0], 0.5 * (s[:-1] + s[1:]), [s[-1] + 1.0]])
    valid = np.concatenate([[True], gap > 0.0, [True]])
    err = np.abs(cum - V_target)
    ok = valid & (err <= tol)
    if np.any(ok):
        k = np.flatnonzero(ok)[np.argmin(np.abs(c[ok]))]
    else:
        cand = np.flatnonzero(valid)
        k = cand[np.argmin(err[cand])]
    return ls.with_phi(ls.phi - c[k])


def extract_interface(ls: LevelSetField) -> np.ndarray:
    """Zero-level segments, shape (s, 2, 2), by linear interpolation on edges.

    A vertex with phi == 0 counts as outside, consistent with {phi < 0}.
    Crossings on shared edges are computed in a canonical orientation so that
    neighbouring segments share bitwise-identical endpoints.
    """
    mesh = ls.mesh
    phi = ls.phi
    tri = mesh.triangles
    neg = phi[tri] < 0.0
    cnt = neg.sum(axis=1)
    cut = np.flatnonzero((cnt == 1) | (cnt == 2))
    if len(cut) == 0:
        raise NoInterface("phi has uniform sign")
    t = tri[cut]
    ng = neg[cut]
    # the vertex whose sign differs from the other two
    lone = np.where(cnt[cut] == 1, np.argmax(ng, axis=1), np.argmin(ng, axis=1))
    rows = np.arange(len(cut))
    a = t[rows, lone]
    b = t[rows, (lone + 1) % 3]
    c = t[rows, (lone + 2) % 3]
    p1 = _edge_zero(mesh.vertices, phi, a, b)
    p2 = _edge_zero(mesh.vertices, phi, a, c)
    return np.stack([p1, p2], axis=1)


def _edge_zero(verts, phi, i, j):
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    f0, f1 = phi[lo], phi[hi]
    t = f0 / (f0 - f1)
    return verts[lo] + t[:, None] * (verts[hi] - verts[lo])


def chain_segments(segments: np.ndarray) -> list[np.ndarray]:
    """Join segments with shared endpoints into polylines (closed ones repeat
    their first point at the end)."""
    pts, inv = np.unique(segments.reshape(-1, 2), axis=0, return_inverse=True)
    inv = inv.reshape(-1, 2)
    adj: dict[int, list[int]] = {}
    for k, (u, v) in enumerate(inv):
        if u == v:
            continue
        adj.setdefault(int(u), []).append(k)
        adj.setdefault(int(v), []).append(k)
    used = np.zeros(len(inv), dtype=bool)
    lines = []
    starts = [v for v, ks in adj.items() if len(ks) == 1] + list(adj)
    for s0 in starts:
        for k0 in adj[s0]:
            if used[k0]:
                continue
            path = [s0]
            cur, k = s0, k0
            while True:
                used[k] = True
                u, v = inv[k]
                nxt = int(v if u == cur else u)
                path.append(nxt)
                cand = [kk for kk in adj[nxt] if not used[kk]]
                if not cand:
                    break
                cur, k = nxt, cand[0]
            lines.append(pts[path])
    return lines


def distance_to_segments(points: np.ndarray, segments: np.ndarray, chunk: int = 2048) -> np.ndarray:
    a = segments[:, 0]
    d = segments[:, 1] - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0.0, dd, 1.0)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :] - a[None]
        t = np.clip(np.einsum("pij,ij->pi", p, d) / dd, 0.0, 1.0)
        r = p - t[..., None] * d[None]
        out[s:s + chunk] = np.sqrt(np.min(np.einsum("pij,pij->pi", r, r), axis=1))
    return out


def reinitialize(ls: LevelSetField) -> LevelSetField:
    """Replace phi by the signed distance to its own zero-level polylines."""
    seg = extract_interface(ls)
    dist = distance_to_segments(ls.mesh.vertices, seg)
    return ls.with_phi(np.where(ls.phi < 0.0, -dist, dist))


# ----------------------------------------------------------------------------
# point location
# ----------------------------------------------------------------------------

class PointLocator:
    """Bucket grid over triangle bounding boxes for vectorised point location."""

    def __init__(self, mesh: TriMesh, tol: float = 1e-12):
        self.mesh = mesh
        self.tol = tol
        v = mesh.vertices
        lo = v.min(axis=0)
        hi = v.max(axis=0)
        size = max(float(np.sqrt(np.mean(mesh.areas)) * 1.5), 1e-12)
        n = np.maximum(np.ceil((hi - lo) / size).astype(int), 1)
        self.lo, self.size, self.n = lo, (hi - lo) / n, n
        self.size = np.where(self.size > 0, self.size, 1.0)
        p = v[mesh.triangles]
        bmin = np.floor((p.min(axis=1) - lo) / self.size).astype(int)
        bmax = np.floor((p.max(axis=1) - lo) / self.size).astype(int)
        bmin = np.clip(bmin, 0, n - 1)
        bmax = np.clip(bmax, 0, n - 1)
        cells, tris = [], []
        span = bmax - bmin + 1
        for dx in range(int(span[:, 0].max())):
            for dy in range(int(span[:, 1].max())):
                ok = (dx < span[:, 0]) & (dy < span[:, 1])
                ix = bmin[ok, 0] + dx
                iy = bmin[ok, 1] + dy
                cells.append(ix * n[1] + iy)
                tris.append(np.flatnonzero(ok))
        cells = np.concatenate(cells)
        tris = np.concatenate(tris)
        order = np.lexsort((tris, cells))
        cells, tris = cells[order], tris[order]
        self.tris = tris
        self.start = np.searchsorted(cells, np.arange(n[0] * n[1] + 1))
        self.kmax = int(np.max(np.diff(self.start))) if len(cells) else 0

    def locate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        nq = len(points)
        tri_out = -np.ones(nq, dtype=np.int64)
        bary_out = np.full((nq, 3), np.nan)
        cell = np.floor((points - self.lo) / self.size).astype(np.int64)
        inside_box = np.all((cell >= 0) & (cell < self.n), axis=1)
        # points exactly on the upper bounding-box edge belong to the last cell
        on_edge = np.all((points >= self.lo) & (points <= self.lo + self.n * self.size), axis=1)
        cell = np.clip(cell, 0, self.n - 1)
        valid = inside_box | on_edge
        cid = cell[:, 0] * self.n[1] + cell[:, 1]
        s = self.start[cid]
        cnt = np.where(valid, self.start[cid + 1] - s, 0)
        mesh = self.mesh
        for k in range(self.kmax):
            todo = (cnt > k) & (tri_out < 0)
            if not np.any(todo):
                continue
            q = np.flatnonzero(todo)
            t = self.tris[s[q] + k]
            lam = barycentric(mesh, t, points[q])
            ok = np.all(lam >= -self.tol, axis=1)
            tri_out[q[ok]] = t[ok]
            lam = np.clip(lam[ok], 0.0, None)
            bary_out[q[ok]] = lam / lam.sum(axis=1, keepdims=True)
        return tri_out, bary_out


def barycentric(mesh: TriMesh, tri_idx, points):
    p = mesh.vertices[mesh.triangles[tri_idx]]
    x0 = p[:, 0]
    d1 = p[:, 1] - x0
    d2 = p[:, 2] - x0
    r = points - x0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def locate_point(mesh: TriMesh, point):
    """Containing triangle and barycentric coordinates, or None if Outside.

    Ties on shared edges go to the lowest triangle index.
    """
    t, lam = mesh.locator.locate(np.asarray(point, dtype=float).reshape(1, 2))
    if t[0] < 0:
        return None
    return int(t[0]), lam[0]


def interpolate(mesh: TriMesh, values: np.ndarray, points: np.ndarray):
    """Barycentric interpolation of nodal values; NaN where Outside."""
    t, lam = mesh.locator.locate(points)
    out = np.full(len(points), np.nan)
    ok = t >= 0
    out[ok] = np.einsum("ij,ij->i", lam[ok], values[mesh.triangles[t[ok]]])
    return out, ok
