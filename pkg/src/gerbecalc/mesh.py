"""Oriented simplicial meshes, group-valued maps on them and quadrature.

Simplices are stored with their vertex ids sorted increasingly; the
orientation is carried by a separate sign (+1 or -1) relative to that sorted
order.  A simplex ``[v_0, ..., v_d]`` with sign +1 is oriented by the
reference coordinates ``(lambda_1, ..., lambda_d)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import roots_jacobi

from . import groups
from .forms import Form
from .groups import SU2, VECTOR, expm, inv, logm


def _perm_parity(seq) -> int:
    seq = list(seq)
    inv_count = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv_count % 2 else 1


def canonical_simplices(simplices, signs=None):
    """Sort vertex ids inside every simplex and fold the permutation parity into the sign."""
    simplices = np.asarray(simplices, dtype=np.int64)
    signs = np.ones(len(simplices), dtype=np.int64) if signs is None else np.asarray(signs, dtype=np.int64).copy()
    order = np.argsort(simplices, axis=1, kind="stable")
    out = np.take_along_axis(simplices, order, axis=1)
    # parity of each sorting permutation
    d1 = simplices.shape[1]
    par = np.zeros(len(simplices), dtype=np.int64)
    for i in range(d1):
        for j in range(i + 1, d1):
            par += order[:, i] > order[:, j]
    signs = signs * np.where(par % 2, -1, 1)
    return out, signs


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Oriented simplicial mesh.

    Args:
        dim: simplex dimension.
        simplices: ``(M, dim+1)`` vertex ids (sorted on construction).
        signs: orientation signs, ``+1`` or ``-1`` per simplex.
        n_vertices: number of vertices (defaults to ``max id + 1``).
        coords: optional embedding coordinates of the vertices.
    """

    dim: int
    simplices: np.ndarray
    signs: np.ndarray | None = None
    n_vertices: int | None = None
    coords: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        simp = np.asarray(self.simplices, dtype=np.int64).reshape(-1, self.dim + 1)
        simp, signs = canonical_simplices(simp, self.signs)
        if np.any(simp[:, :-1] == simp[:, 1:]):
            raise ValueError("simplex with repeated vertex")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("orientation signs must be +1 or -1")
        nv = int(simp.max()) + 1 if self.n_vertices is None else int(self.n_vertices)
        for name, val in (("simplices", simp), ("signs", signs)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "n_vertices", nv)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)

    def __len__(self):
        return len(self.simplices)

    def boundary_chain(self):
        """Boundary as ``(faces, coefficients)`` with sorted faces and nonzero coefficients."""
        return _boundary(self.simplices, self.signs)

    @property
    def boundary_flag(self) -> bool:
        """True when the mesh has a nonempty boundary."""
        return len(self.boundary_chain()[0]) > 0

    @property
    def is_closed(self) -> bool:
        return not self.boundary_flag

    def boundary_mesh(self) -> "SimplicialMesh":
        faces, coef = self.boundary_chain()
        if np.any(np.abs(coef) != 1):
            raise ValueError("boundary chain has multiplicities; mesh is not a manifold")
        return SimplicialMesh(self.dim - 1, faces, coef, self.n_vertices, self.coords, self.name + "/boundary")

    def check(self) -> list[str]:
        """Return a list of violated invariants (empty when valid)."""
        problems = []
        if self.dim >= 1:
            faces, coef = self.boundary_chain()
            if self.dim >= 2:
                f2, c2 = _boundary(faces, coef)
                if len(f2):
                    problems.append("boundary of boundary is nonzero")
            if np.any(np.abs(coef) > 1):
                problems.append("inconsistent orientation: a face is induced twice with the same sign")
            counts = _face_counts(self.simplices)
            if counts.max(initial=0) > 2:
                problems.append("a face is shared by more than two simplices")
        return problems

    def reversed(self) -> "SimplicialMesh":
        return SimplicialMesh(self.dim, self.simplices, -self.signs, self.n_vertices, self.coords, self.name)

    def euler_characteristic(self) -> int:
        chi = 0
        for k in range(self.dim + 1):
            faces = set()
            for comb in itertools.combinations(range(self.dim + 1), k + 1):
                faces.update(map(tuple, self.simplices[:, comb]))
            chi += (-1) ** k * len(faces)
        return chi


def _boundary(simplices, signs):
    simplices = np.asarray(simplices)
    d1 = simplices.shape[1]
    if d1 == 1:
        return np.zeros((0, 0), dtype=np.int64), np.zeros(0, dtype=np.int64)
    acc: dict[tuple, int] = {}
    for i in range(d1):
        faces = np.delete(simplices, i, axis=1)
        coefs = signs * (-1) ** i
        for f, c in zip(map(tuple, faces), coefs):
            acc[f] = acc.get(f, 0) + int(c)
    items = [(f, c) for f, c in acc.items() if c != 0]
    if not items:
        return np.zeros((0, d1 - 1), dtype=np.int64), np.zeros(0, dtype=np.int64)
    items.sort()
    return np.array([f for f, _ in items], dtype=np.int64), np.array([c for _, c in items], dtype=np.int64)


def _face_counts(simplices):
    d1 = simplices.shape[1]
    faces = np.concatenate([np.delete(simplices, i, axis=1) for i in range(d1)])
    _, counts = np.unique(faces, axis=0, return_counts=True)
    return counts


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference simplex ``{lambda_i >= 0, sum <= 1}``.

    ``nodes`` are barycentric coordinates ``(lambda_0, ..., lambda_d)``; the
    weights sum to the reference volume ``1/d!``.
    """

    dim: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray


def quadrature_rule(dim: int, order: int | None = None) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for polynomials of total degree ``order``.

    Defaults: order 4 on triangles, order 3 on tetrahedra, order 5 on edges.
    """
    if order is None:
        order = {1: 5, 2: 4, 3: 3}.get(dim, 3)
    npts = max(1, math.ceil((order + 1) / 2))
    axes = []
    for a in range(dim):
        alpha = dim - 1 - a
        x, w = roots_jacobi(npts, alpha, 0.0)
        x = (x + 1.0) / 2.0
        w = w / 2.0 ** (alpha + 1)
        axes.append((x, w))
    pts, wts = [], []
    for combo in itertools.product(*[range(npts)] * dim):
        u = [axes[a][0][combo[a]] for a in range(dim)]
        w = np.prod([axes[a][1][combo[a]] for a in range(dim)])
        # Duffy map from the cube to the simplex
        lam, rest = [], 1.0
        for a in range(dim):
            lam.append(u[a] * rest)
            rest *= 1.0 - u[a]
        pts.append([1.0 - sum(lam)] + lam)
        wts.append(w)
    return QuadratureRule(dim, order, np.array(pts), np.array(wts))


# ---------------------------------------------------------------------------
# maps on meshes


class MeshMap:
    """Map from a mesh into a product of groups, evaluated at barycentric points."""

    mesh: SimplicialMesh
    arity: int

    def evaluate(self, simplex, bary):  # pragma: no cover - abstract
        raise NotImplementedError

    def values_and_frames(self, simplex, bary):
        """Return ``(point, frame)``: values and tangents along ``d/d lambda_i``."""
        raise NotImplementedError

    def __mul__(self, other: "MeshMap") -> "MeshMap":
        return ProductMap(self, other)

    def inverse(self) -> "MeshMap":
        return InverseMap(self)


INTERPOLATIONS = ("auto", "first-vertex-exponential", "projective-linear")


class GroupMesh(MeshMap):
    """Mesh plus vertex values in ``G_1 x ... x G_q`` with interpolation.

    Args:
        mesh: domain mesh.
        values: one array of shape ``(V, n, n)`` per factor (or a single array).
        group_tags: group tag per factor.
        interpolation: ``first-vertex-exponential``
            (``g_0 exp(sum lambda_i log(g_0^{-1} g_i))``), ``projective-linear``
            (SU(2) only: normalized blend of unit quaternions, which agrees on
            shared faces so the interpolated map is continuous) or ``auto``
            (projective-linear on SU(2) factors, exponential elsewhere).
        periods: per factor, ``None`` or a period for vector-group factors on
            periodic meshes; corner coordinates are unwrapped to the nearest
            image of the first vertex.
        fd_step: barycentric step of the central differences for frames.
    """

    def __init__(self, mesh: SimplicialMesh, values, group_tags=None,
                 interpolation: str = "auto", periods=None,
                 fd_step: float = 1e-5):
        if isinstance(values, np.ndarray):
            values = (values,)
        values = tuple(np.asarray(v, dtype=complex) for v in values)
        for v in values:
            if v.shape[0] != mesh.n_vertices:
                raise ValueError("need one value per mesh vertex")
            v.setflags(write=False)
        if group_tags is None:
            group_tags = (SU2,) * len(values)
        if isinstance(group_tags, str):
            group_tags = (group_tags,) * len(values)
        if interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {interpolation!r}")
        if interpolation == "projective-linear" and any(t != SU2 for t in group_tags):
            raise ValueError("projective-linear interpolation needs SU2 factors")
        for v, t in zip(values, group_tags):
            if groups.membership_error(v, t) > 1e-10:
                raise ValueError(f"vertex values are not in {t}")
        self.mesh = mesh
        self.values = values
        self.group_tags = tuple(group_tags)
        self.interpolation = interpolation
        self.factor_interpolation = tuple(
            ("projective-linear" if t == SU2 else "first-vertex-exponential") if interpolation == "auto"
            else interpolation for t in self.group_tags)
        self.periods = tuple(periods) if periods is not None else (None,) * len(values)
        self.fd_step = fd_step
        self.arity = len(values)

    def with_mesh(self, mesh: SimplicialMesh) -> "GroupMesh":
        return GroupMesh(mesh, self.values, self.group_tags, self.interpolation, self.periods, self.fd_step)

    def reversed(self) -> "GroupMesh":
        return self.with_mesh(self.mesh.reversed())

    def corner_values(self, factor: int) -> np.ndarray:
        """Values at simplex corners, shape ``(M, d+1, n, n)`` (periodic unwrapping applied)."""
        vals = self.values[factor][self.mesh.simplices]
        per = self.periods[factor]
        if per is not None:
            x = groups.translation_coordinates(vals)
            diff = x - x[:, :1]
            diff -= per * np.round(diff / per)
            vals = groups.translation(x[:, :1] + diff)
        return vals

    def _logs(self, s: int):
        cache = self.__dict__.setdefault("_log_cache", {})
        if s not in cache:
            cv = self.corner_values(s)
            g0 = cv[:, 0]
            rel = inv(g0)[:, None] @ cv[:, 1:]
            cache[s] = (g0, logm(rel) if cv.shape[1] > 1 else rel[:, :0])
        return cache[s]

    @cached_property
    def _quats(self):
        return [groups.su2_to_quaternion(self.corner_values(s)) for s in range(self.arity)]

    def evaluate(self, simplex, bary):
        simplex = np.asarray(simplex)
        bary = np.asarray(bary, dtype=float)
        out = []
        for s in range(self.arity):
            if self.factor_interpolation[s] == "projective-linear":
                q = np.einsum("pi,pia->pa", bary, self._quats[s][simplex])
                q /= np.linalg.norm(q, axis=-1, keepdims=True)
                out.append(groups.su2_from_quaternion(q))
            else:
                g0, logs = self._logs(s)
                y = np.einsum("pi,pijk->pjk", bary[:, 1:], logs[simplex])
                out.append(g0[simplex] @ expm(y))
        return tuple(out)

    def values_and_frames(self, simplex, bary):
        simplex = np.asarray(simplex)
        bary = np.asarray(bary, dtype=float)
        d = self.mesh.dim
        h = self.fd_step
        p = len(simplex)
        shifted = [bary]
        for i in range(1, d + 1):
            for sgn in (1.0, -1.0):
                b = bary.copy()
                b[:, i] += sgn * h
                b[:, 0] -= sgn * h
                shifted.append(b)
        allb = np.concatenate(shifted)
        alls = np.tile(simplex, 2 * d + 1)
        vals = self.evaluate(alls, allb)
        point = tuple(v[:p] for v in vals)
        frame = []
        for i in range(d):
            a, b = (1 + 2 * i) * p, (2 + 2 * i) * p
            frame.append(tuple((v[a:a + p] - v[b:b + p]) / (2 * h) for v in vals))
        return point, frame


class ProductMap(MeshMap):
    """Pointwise product ``x -> a(x) b(x)`` (tangents by the Leibniz rule)."""

    def __init__(self, a: MeshMap, b: MeshMap):
        if a.mesh is not b.mesh and not _same_mesh(a.mesh, b.mesh):
            raise ValueError("pointwise product needs maps on the same mesh")
        if a.arity != b.arity:
            raise ValueError("arity mismatch")
        self.a, self.b, self.mesh, self.arity = a, b, a.mesh, a.arity
        self.group_tags = getattr(a, "group_tags", (SU2,) * a.arity)

    def evaluate(self, simplex, bary):
        return tuple(x @ y for x, y in zip(self.a.evaluate(simplex, bary), self.b.evaluate(simplex, bary)))

    def values_and_frames(self, simplex, bary):
        pa, fa = self.a.values_and_frames(simplex, bary)
        pb, fb = self.b.values_and_frames(simplex, bary)
        point = tuple(x @ y for x, y in zip(pa, pb))
        frame = [tuple(va @ y + x @ vb for x, y, va, vb in zip(pa, pb, ta, tb)) for ta, tb in zip(fa, fb)]
        return point, frame


class InverseMap(MeshMap):
    """Pointwise inverse ``x -> a(x)^{-1}``."""

    def __init__(self, a: MeshMap):
        self.a, self.mesh, self.arity = a, a.mesh, a.arity
        self.group_tags = getattr(a, "group_tags", (SU2,) * a.arity)

    def evaluate(self, simplex, bary):
        return tuple(inv(x) for x in self.a.evaluate(simplex, bary))

    def values_and_frames(self, simplex, bary):
        pa, fa = self.a.values_and_frames(simplex, bary)
        ia = tuple(inv(x) for x in pa)
        return ia, [tuple(-(g @ v @ g) for g, v in zip(ia, t)) for t in fa]


class StackMap(MeshMap):
    """Juxtaposition ``x -> (a(x), b(x), ...)`` of maps on one mesh."""

    def __init__(self, *maps: MeshMap):
        m0 = maps[0].mesh
        for m in maps[1:]:
            if m.mesh is not m0 and not _same_mesh(m.mesh, m0):
                raise ValueError("stacked maps need the same mesh")
        self.maps, self.mesh = maps, m0
        self.arity = sum(m.arity for m in maps)
        self.group_tags = tuple(t for m in maps for t in getattr(m, "group_tags", (SU2,) * m.arity))

    def evaluate(self, simplex, bary):
        return tuple(v for m in self.maps for v in m.evaluate(simplex, bary))

    def values_and_frames(self, simplex, bary):
        pts, frs = [], []
        for m in self.maps:
            p, f = m.values_and_frames(simplex, bary)
            pts.append(p)
            frs.append(f)
        point = tuple(v for p in pts for v in p)
        frame = [tuple(v for f in frs for v in f[i]) for i in range(self.mesh.dim)]
        return point, frame


def _same_mesh(a: SimplicialMesh, b: SimplicialMesh) -> bool:
    return (a.dim == b.dim and a.simplices.shape == b.simplices.shape
            and np.array_equal(a.simplices, b.simplices) and np.array_equal(a.signs, b.signs))


# ---------------------------------------------------------------------------
# integration

CHUNK_POINTS = 16384


def integrate_pullback(f: Form, gmap: MeshMap, rule: QuadratureRule | None = None,
                       chunk_points: int = CHUNK_POINTS) -> float:
    """Integrate the pullback of ``f`` along ``gmap`` over its oriented mesh.

    The tangent frame at each quadrature node is the derivative of the
    interpolated map along the reference coordinates; contributions are
    multiplied by the simplex orientation signs and reduced with numpy's
    pairwise summation in a fixed chunk order.
    """
    mesh = gmap.mesh
    if mesh.dim != f.degree:
        raise ValueError(f"form of degree {f.degree} on a {mesh.dim}-mesh")
    if gmap.arity != f.arity:
        raise ValueError(f"map arity {gmap.arity} does not match form arity {f.arity}")
    rule = rule or quadrature_rule(mesh.dim)
    _warn_degenerate(mesh)
    nq = len(rule.weights)
    per_chunk = max(1, chunk_points // nq)
    partial = []
    for start in range(0, len(mesh), per_chunk):
        idx = np.arange(start, min(len(mesh), start + per_chunk))
        simplex = np.repeat(idx, nq)
        bary = np.tile(rule.nodes, (len(idx), 1))
        point, frame = gmap.values_and_frames(simplex, bary)
        vals = np.asarray(f.evaluate(point, frame)).reshape(len(idx), nq)
        partial.append(np.sum(vals @ rule.weights * mesh.signs[idx]))
    return float(np.sum(np.array(partial)))


def _warn_degenerate(mesh: SimplicialMesh, tol: float = 1e-14):
    if mesh.coords is None or mesh.dim == 0:
        return
    c = mesh.coords[mesh.simplices]
    edges = c[:, 1:] - c[:, :1]
    gram = np.einsum("mik,mjk->mij", edges, edges)
    vol = np.sqrt(np.abs(np.linalg.det(gram)))
    scale = np.max(np.linalg.norm(edges, axis=-1), axis=-1) ** mesh.dim
    bad = vol < tol * np.maximum(scale, 1e-300)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} degenerate simplices (near-zero volume); refine the mesh",
                      RuntimeWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# built-in meshes


def _octa_sphere(n: int):
    """Octahedron with every face split into ``n^2`` triangles, projected to S^2."""
    verts: dict[tuple, int] = {}
    coords = []

    def vid(p):
        key = tuple(int(round(x * 2 * n)) for x in p)
        if key not in verts:
            verts[key] = len(coords)
            coords.append(p)
        return verts[key]

    tris, signs = [], []
    for sx, sy, sz in itertools.product((1, -1), repeat=3):
        a, b, c = np.array([sx, 0, 0.0]), np.array([0, sy, 0.0]), np.array([0, 0, sz * 1.0])
        grid = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                p = a + (b - a) * i / n + (c - a) * j / n
                grid[i, j] = vid(p)
        for i in range(n):
            for j in range(n - i):
                tris.append((grid[i, j], grid[i + 1, j], grid[i, j + 1]))
                if i + j < n - 1:
                    tris.append((grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]))
    coords = np.array(coords, dtype=float)
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    tris = np.array(tris)
    # orient by outward normal
    p = coords[tris]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    signs = np.where(np.einsum("ij,ij->i", nrm, p.mean(axis=1)) > 0, 1, -1)
    return coords, tris, signs


def sphere_mesh(resolution: int = 8) -> SimplicialMesh:
    """Closed S^2 mesh (``8 * resolution^2`` triangles), outward orientation."""
    coords, tris, signs = _octa_sphere(resolution)
    return SimplicialMesh(2, tris, signs, len(coords), coords, f"S2[{resolution}]")


def disc_mesh(resolution: int = 8) -> SimplicialMesh:
    """Closed unit disc as the upper hemisphere of :func:`sphere_mesh`.

    Coordinates are the projections ``(x, y)``; the boundary is the equator
    loop with ``4 * resolution`` edges, oriented counterclockwise.
    """
    coords, tris, signs = _octa_sphere(resolution)
    keep = np.all(coords[tris][:, :, 2] >= -1e-12, axis=1)
    tris, signs = tris[keep], signs[keep]
    used = np.unique(tris)
    remap = -np.ones(len(coords), dtype=np.int64)
    # boundary vertices first, ordered by angle, then the interior
    ring = used[np.abs(coords[used, 2]) < 1e-12]
    ring = ring[np.argsort(np.arctan2(coords[ring, 1], coords[ring, 0]))]
    inner = np.setdiff1d(used, ring)
    order = np.concatenate([ring, inner])
    remap[order] = np.arange(len(order))
    return SimplicialMesh(2, remap[tris], signs, len(order), coords[order, :2], f"D2[{resolution}]")


def circle_mesh(n: int) -> SimplicialMesh:
    """Closed circle with ``n`` edges, counterclockwise; coordinates on the unit circle."""
    t = 2 * np.pi * np.arange(n) / n
    edges = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    signs = np.ones(n, dtype=np.int64)  # sorting (n-1, 0) folds its parity into the sign
    return SimplicialMesh(1, edges, signs, n, np.stack([np.cos(t), np.sin(t)], axis=1), f"S1[{n}]")


_KUHN3 = list(itertools.permutations(range(3)))


def _kuhn_cells(n: int):
    """Kuhn tetrahedra of the cube ``[0, n]^3`` as integer corner coordinates."""
    out = []
    for o in itertools.product(range(n), repeat=3):
        for perm in _KUHN3:
            p = np.array(o)
            tet = [p.copy()]
            for ax in perm:
                p = p.copy()
                p[ax] += 1
                tet.append(p)
            out.append(tet)
    return np.array(out)


def s3_mesh(resolution: int = 4) -> SimplicialMesh:
    """Closed S^3 mesh: Kuhn-subdivided boundary of the 4-cube, projected radially.

    Has ``48 * resolution^3`` tetrahedra.  Orientation: boundary orientation of
    the unit ball in ``R^4 = H`` (outward normal first).
    """
    n = resolution
    cells = _kuhn_cells(n)  # (T, 4, 3)
    verts: dict[tuple, int] = {}
    coords = []
    tets, signs = [], []
    for axis in range(4):
        for side in (0, n):
            free = [a for a in range(4) if a != axis]
            full = np.zeros(cells.shape[:2] + (4,), dtype=np.int64)
            full[..., axis] = side
            full[..., free] = cells
            normal = np.zeros(4)
            normal[axis] = 1.0 if side == n else -1.0
            for tet in full:
                ids = []
                for p in map(tuple, tet):
                    if p not in verts:
                        verts[p] = len(coords)
                        coords.append(p)
                    ids.append(verts[p])
                e = (tet[1:] - tet[0]).astype(float)
                det = np.linalg.det(np.vstack([normal, e]))
                tets.append(ids)
                signs.append(1 if det > 0 else -1)
    coords = np.array(coords, dtype=float) * (2.0 / n) - 1.0
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    return SimplicialMesh(3, np.array(tets), np.array(signs), len(coords), coords, f"S3[{resolution}]")


def identity_s3_map(resolution: int = 4, **kwargs) -> GroupMesh:
    """Identity map of SU(2) = S^3 over :func:`s3_mesh`."""
    m = s3_mesh(resolution)
    return GroupMesh(m, groups.su2_from_quaternion(m.coords), SU2, **kwargs)


def torus_mesh(resolution: int = 6) -> SimplicialMesh:
    """Periodic T^3 = R^3 / Z^3 mesh (Kuhn triangulation, ``6 * resolution^3`` tets).

    Coordinates are in ``[0, 1)^3``; use :func:`torus_chart` for the
    vector-group chart with periodic unwrapping.
    """
    n = resolution
    cells = _kuhn_cells(n)
    ids = (cells % n) @ np.array([n * n, n, 1])
    e = cells[:, 1:] - cells[:, :1]
    signs = np.where(np.linalg.det(e.astype(float)) > 0, 1, -1)
    grid = np.array(list(itertools.product(range(n), repeat=3)), dtype=float) / n
    return SimplicialMesh(3, ids, signs, n ** 3, grid, f"T3[{resolution}]")


def torus_chart(resolution: int = 6) -> GroupMesh:
    """The chart ``T^3 -> R^3`` (translation matrices) with periodic unwrapping."""
    m = torus_mesh(resolution)
    return GroupMesh(m, groups.translation(m.coords), VECTOR, periods=(1.0,))


# ---------------------------------------------------------------------------
# cone extension and gluing


def _slerp_from(p, u, r):
    """Point at fraction ``r`` of the great-circle arc from ``p`` to ``u`` (unit 4-vectors)."""
    cosa = np.clip(np.einsum("...i,...i->...", u, p), -1.0, 1.0)
    alpha = np.arccos(cosa)
    w = u - cosa[..., None] * p
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    w = np.where(nw > 1e-15, w / np.where(nw > 1e-15, nw, 1.0), 0.0)
    ang = (r * alpha)[..., None]
    return np.cos(ang) * p + np.sin(ang) * w


def choose_avoided_point(image_quats: np.ndarray, rng: np.random.Generator, candidates: int = 512,
                         threshold: float = 0.2) -> np.ndarray:
    """Pick ``q*`` in S^3 far (chordal distance) from the sampled image points.

    Raises:
        RuntimeError: no candidate exceeds ``threshold``.
    """
    cand = rng.standard_normal((candidates, 4))
    mean = image_quats.mean(axis=0)
    if np.linalg.norm(mean) > 1e-9:
        cand[0] = -mean
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    # chordal distance^2 = 2 - 2 <a, b>
    best, best_d = None, -1.0
    for blk in np.array_split(cand, max(1, candidates // 64)):
        dots = blk @ image_quats.T
        dmin = np.sqrt(np.maximum(2.0 - 2.0 * dots.max(axis=1), 0.0))
        i = int(np.argmax(dmin))
        if dmin[i] > best_d:
            best, best_d = blk[i], float(dmin[i])
    if best_d < threshold:
        raise RuntimeError(f"could not find an avoided point (best distance {best_d:.3g}); "
                           "refine the mesh or re-randomize")
    return best


def _image_samples(gmap: GroupMesh) -> np.ndarray:
    rule = quadrature_rule(gmap.mesh.dim, 4)
    nq = len(rule.weights)
    simplex = np.repeat(np.arange(len(gmap.mesh)), nq)
    bary = np.tile(rule.nodes, (len(gmap.mesh), 1))
    vals = gmap.evaluate(simplex, bary)[0]
    return np.concatenate([groups.su2_to_quaternion(gmap.values[0]), groups.su2_to_quaternion(vals)])


def cone_extension(sphere_map: GroupMesh, layers: int | None = None, rng: np.random.Generator | None = None,
                   q_star=None) -> GroupMesh:
    """Extend an SU(2)-valued map on a closed genus-0 surface to the 3-ball.

    The ball is the cone over the surface with ``layers`` radial shells;
    interior values contract the image along great circles of S^3 towards
    ``-q*`` where ``q*`` avoids the image.  The boundary of the returned mesh
    is the input mesh (same vertex ids, values and orientation).  A constant
    map extends to the constant ball map (``q_star`` is then ``None``).
    """
    mesh = sphere_map.mesh
    if mesh.dim != 2 or sphere_map.arity != 1 or sphere_map.group_tags[0] != SU2:
        raise ValueError("cone extension needs an SU2-valued map on a 2-mesh")
    if not mesh.is_closed:
        raise ValueError("cone extension needs a closed surface")
    if mesh.euler_characteristic() != 2:
        raise ValueError("cone extension needs a genus-0 surface")
    rng = rng if rng is not None else np.random.default_rng(0)
    layers = layers or max(2, int(round(math.sqrt(len(mesh) / 8))))
    v0 = sphere_map.values[0]
    constant = bool(np.all(np.abs(v0 - v0[:1]) <= 1e-14))
    if q_star is None and not constant:
        q_star = choose_avoided_point(_image_samples(sphere_map), rng)
    nv = mesh.n_vertices
    if constant and q_star is None:
        # a constant map extends by the same constant
        q_star = None
        values = np.repeat(v0[:1], layers * nv + 1, axis=0)
    else:
        q_star = np.asarray(q_star, dtype=float)
        q_star = q_star / np.linalg.norm(q_star)
        center = -q_star
        quats = groups.su2_to_quaternion(v0)
        vals = [_slerp_from(center, quats, 1.0 - j / layers) for j in range(layers)]
        vals.append(center[None])
        values = groups.su2_from_quaternion(np.concatenate(vals))
    cidx = layers * nv
    tets, signs = [], []
    for (a, b, c), s in zip(mesh.simplices, mesh.signs):
        for j in range(layers):
            o, i = j * nv, (j + 1) * nv
            if j == layers - 1:
                tets.append((a + o, b + o, c + o, cidx))
                signs.append(-s)
            else:
                tets += [(a + o, b + o, c + o, a + i), (b + o, c + o, a + i, b + i), (c + o, a + i, b + i, c + i)]
                signs += [-s, -s, -s]
    coords = None
    if mesh.coords is not None and mesh.coords.shape[1] == 3:
        coords = np.concatenate([mesh.coords * (1.0 - j / layers) for j in range(layers)] + [np.zeros((1, 3))])
    # tets above are already sorted within the cone only if ids are; canonicalize
    ball = SimplicialMesh(3, np.array(tets), np.array(signs), cidx + 1, coords, f"cone({mesh.name})")
    out = GroupMesh(ball, values, SU2, sphere_map.interpolation, fd_step=sphere_map.fd_step)
    out.q_star = q_star
    return out


def glue_sphere(d1: GroupMesh, d2: GroupMesh, tol: float = 1e-9) -> GroupMesh:
    """Glue two disc maps along their common boundary into a sphere map.

    Both discs must live on the same disc mesh.  ``d1`` becomes the upper
    hemisphere; ``d2`` the lower one with reversed orientation, so the
    result is the closed surface ``D_1 - D_2``.
    """
    m1, m2 = d1.mesh, d2.mesh
    if not _same_mesh(m1, m2):
        raise ValueError("glue_sphere needs both discs on the same mesh")
    if d1.arity != 1 or d2.arity != 1:
        raise ValueError("glue_sphere needs single-factor maps")
    bfaces, _ = m1.boundary_chain()
    bverts = np.unique(bfaces)
    diff = np.abs(d1.values[0][bverts] - d2.values[0][bverts]).max(initial=0.0)
    if diff > tol:
        raise ValueError(f"boundary loops disagree (max difference {diff:.2e})")
    nv = m1.n_vertices
    is_b = np.zeros(nv, dtype=bool)
    is_b[bverts] = True
    remap = np.arange(nv) + nv
    remap[is_b] = np.arange(nv)[is_b]
    inner = np.where(~is_b)[0]
    compact = -np.ones(2 * nv, dtype=np.int64)
    keep = np.concatenate([np.arange(nv), nv + inner])
    compact[keep] = np.arange(len(keep))
    tris = np.concatenate([m1.simplices, compact[remap[m2.simplices]]])
    signs = np.concatenate([m1.signs, -m2.signs])
    values = np.concatenate([d1.values[0], d2.values[0][inner]])
    coords = None
    if m1.coords is not None and m1.coords.shape[1] == 2:
        xy = m1.coords
        z = np.sqrt(np.maximum(0.0, 1.0 - np.sum(xy ** 2, axis=1)))
        up = np.column_stack([xy, z])
        down = np.column_stack([xy[inner], -z[inner]])
        coords = np.concatenate([up, down])
    sph = SimplicialMesh(2, tris, signs, len(keep), coords, f"glue({m1.name})")
    return GroupMesh(sph, values, d1.group_tags, d1.interpolation, fd_step=d1.fd_step)


# ---------------------------------------------------------------------------
# file format

MESH_FORMAT = "gerbecalc-mesh 1"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_mesh(path, gmap: GroupMesh | SimplicialMesh) -> None:
    """Write a mesh (optionally with vertex values) in the text mesh format.

    Each vertex row holds, per factor, the matrix size followed by the
    row-major entries as (real, imag) pairs, then ``|`` and the embedding
    coordinates when present.  Floats are written with ``repr`` so that reading back is bit-exact.
    """
    if isinstance(gmap, SimplicialMesh):
        mesh, values, tags = gmap, (), ()
    else:
        mesh, values, tags = gmap.mesh, gmap.values, gmap.group_tags
    lines = [MESH_FORMAT, f"dim {mesh.dim}", f"arity {len(values)}",
             "group_tag " + (" ".join(tags) if tags else "none")]
    if not isinstance(gmap, SimplicialMesh):
        lines.append("interpolation " + gmap.interpolation)
        lines.append("periods " + " ".join("none" if p is None else _fmt(p) for p in gmap.periods))
    lines.append(f"vertices {mesh.n_vertices}")
    for v in range(mesh.n_vertices):
        row = []
        for val in values:
            m = val[v]
            row.append(str(m.shape[0]))
            for z in m.ravel():
                row += [_fmt(z.real), _fmt(z.imag)]
        if mesh.coords is not None:
            row += ["|"] + [_fmt(x) for x in mesh.coords[v]]
        lines.append(" ".join(row))
    lines.append(f"simplices {len(mesh)}")
    for s, sg in zip(mesh.simplices, mesh.signs):
        lines.append(" ".join(str(int(x)) for x in s) + f" {int(sg):+d}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read a file written by :func:`write_mesh`.

    Returns a :class:`GroupMesh` when the file carries vertex values, else a
    :class:`SimplicialMesh`.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MESH_FORMAT:
        raise ValueError("not a gerbecalc mesh file")
    pos = 1
    header = {}
    while not lines[pos].startswith("vertices"):
        key, _, rest = lines[pos].partition(" ")
        header[key] = rest
        pos += 1
    dim, arity = int(header["dim"]), int(header["arity"])
    tags = header["group_tag"].split() if arity else []
    nv = int(lines[pos].split()[1])
    pos += 1
    vals = [[] for _ in range(arity)]
    coords = []
    for v in range(nv):
        left, bar, right = lines[pos + v].partition("|")
        tok = left.split()
        t = 0
        for f in range(arity):
            n = int(tok[t])
            nums = np.array([float(x) for x in tok[t + 1:t + 1 + 2 * n * n]])
            m = np.empty(n * n, dtype=complex)
            m.real, m.imag = nums[0::2], nums[1::2]
            vals[f].append(m.reshape(n, n))
            t += 1 + 2 * n * n
        if bar:
            coords.append([float(x) for x in right.split()])
    pos += nv
    ns = int(lines[pos].split()[1])
    pos += 1
    simp, signs = [], []
    for ln in lines[pos:pos + ns]:
        tok = ln.split()
        simp.append([int(x) for x in tok[:-1]])
        signs.append(int(tok[-1]))
    mesh = SimplicialMesh(dim, np.array(simp, dtype=np.int64).reshape(-1, dim + 1), np.array(signs), nv,
                          np.array(coords) if coords else None)
    if not arity:
        return mesh
    periods = [None if p == "none" else float(p) for p in header.get("periods", "").split()] or None
    return GroupMesh(mesh, tuple(np.array(v) for v in vals), tuple(tags),
                     header.get("interpolation", "auto"), periods)
