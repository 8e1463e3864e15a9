"""Finite cell-complex models of the simplicial manifold ``G^q``.

A :class:`SimplicialGroupModel` stores, for levels ``q = 1..Q``, a cell
complex ``K_q`` (cells per dimension with integer boundary matrices), a
cover of ``K_q`` by subcomplexes indexed by a simplicial set, and the face
chain maps ``(Delta_i)_#: C(K_q) -> C(K_{q-1})`` for ``q >= 2``.

The built-in example is the circle model: the cyclic group ``Z_N`` acting on
the ``N``-gon, with ``K_q`` the product cell complex of ``q`` polygons,
multiplication realized as the chain map ``v x v -> v``, ``e x v -> e``,
``v x e -> e``, ``e x e -> 0`` and covers built from three overlapping arcs.
"""

from __future__ import annotations

import itertools
from collections import deque
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class Level:
    """One level ``K_q`` of a model.

    Attributes:
        q: level.
        n_cells: number of cells per dimension ``0..dim``.
        boundary: ``boundary[k]`` is the ``(n_{k-1}, n_k)`` integer matrix of
            ``d_k`` (``boundary[0]`` is ``None``).
        patch_labels: ``(P, q)`` simplicial labels of the patches.
        patch_cells: ``patch_cells[k][i]`` sorted cell indices of patch ``i`` in dimension ``k``.
        face_index: for ``q >= 2``, ``face_index[i]`` maps a patch to the patch
            index of ``Delta_i`` of its label at level ``q - 1``.
        face_chain: for ``q >= 2``, ``face_chain[i][k]`` is the ``(n_k(q-1), n_k(q))``
            matrix of ``(Delta_i)_#``.
    """

    q: int
    n_cells: tuple
    boundary: tuple
    patch_labels: np.ndarray
    patch_cells: tuple
    face_index: tuple = ()
    face_chain: tuple = ()
    cell_names: tuple | None = None

    @property
    def dim(self) -> int:
        return len(self.n_cells) - 1

    @property
    def n_patches(self) -> int:
        return len(self.patch_labels)


@dataclass(frozen=True, eq=False)
class SimplicialGroupModel:
    """Levels ``K_1..K_Q`` with covers and face chain maps."""

    levels: tuple
    name: str = "model"
    info: dict = field(default_factory=dict)

    @property
    def Q(self) -> int:
        return len(self.levels)

    def level(self, q: int) -> Level:
        if not 1 <= q <= self.Q:
            raise ValueError(f"level {q} outside 1..{self.Q}")
        return self.levels[q - 1]

    def n_cells(self, q: int, k: int) -> int:
        lv = self.level(q)
        return lv.n_cells[k] if 0 <= k <= lv.dim else 0

    def global_d(self, q: int, k: int) -> sp.csr_matrix:
        """Coboundary ``C^k(K_q) -> C^{k+1}(K_q)`` (transpose of the boundary)."""
        lv = self.level(q)
        if k + 1 > lv.dim:
            return sp.csr_matrix((self.n_cells(q, k + 1), self.n_cells(q, k)), dtype=np.int64)
        return lv.boundary[k + 1].T.tocsr()

    def global_delta(self, q: int, k: int) -> sp.csr_matrix:
        """``Delta = sum_i (-1)^i Delta_i^*: C^k(K_q) -> C^k(K_{q+1})``."""
        up = self.level(q + 1)
        out = sp.csr_matrix((self.n_cells(q + 1, k), self.n_cells(q, k)), dtype=np.int64)
        if k > up.dim:
            return out
        for i, maps in enumerate(up.face_chain):
            out = out + maps[k].T * (-1) ** i
        return out.tocsr()


# ---------------------------------------------------------------------------
# circle model


def _cell_codes(N: int, q: int) -> np.ndarray:
    """All cells of the ``q``-fold product of the ``N``-gon as code tuples.

    Code ``a < N`` is vertex ``a``; code ``N + a`` is the edge ``[a, a+1]``.
    """
    return np.array(list(itertools.product(range(2 * N), repeat=q)), dtype=np.int64).reshape(-1, q)


class _Indexer:
    """Map code tuples to (dimension, index-in-dimension)."""

    def __init__(self, N: int, q: int):
        self.N, self.q = N, q
        codes = _cell_codes(N, q)
        dims = (codes >= N).sum(axis=1)
        self.by_dim = [codes[dims == k] for k in range(q + 1)]
        self.pos = np.empty(len(codes), dtype=np.int64)
        for k in range(q + 1):
            self.pos[self.flat(self.by_dim[k])] = np.arange(len(self.by_dim[k]))

    def flat(self, codes: np.ndarray) -> np.ndarray:
        out = np.zeros(len(codes), dtype=np.int64)
        for j in range(codes.shape[1]):
            out = out * (2 * self.N) + codes[:, j]
        return out

    def index(self, codes: np.ndarray) -> np.ndarray:
        return self.pos[self.flat(codes)]


def _boundary_matrices(ix: _Indexer):
    N, q = ix.N, ix.q
    mats = [None]
    for k in range(1, q + 1):
        cells = ix.by_dim[k]
        rows, cols, vals = [], [], []
        edge = cells >= N
        before = np.cumsum(edge, axis=1) - edge  # edges strictly before each factor
        for j in range(q):
            sel = np.nonzero(edge[:, j])[0]
            if not len(sel):
                continue
            sign = np.where(before[sel, j] % 2, -1, 1)
            a = cells[sel, j] - N
            for end, coef in (((a + 1) % N, 1), (a, -1)):
                face = cells[sel].copy()
                face[:, j] = end
                rows.append(ix.index(face))
                cols.append(sel)
                vals.append(coef * sign)
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(ix.by_dim[k - 1]), len(cells)), dtype=np.int64)
        mats.append(m)
    return tuple(mats)


def _multiply_codes(x: np.ndarray, y: np.ndarray, N: int):
    """Chain-level product of two factor codes; returns (code, alive)."""
    ex, ey = x >= N, y >= N
    s = ((x % N) + (y % N)) % N
    code = np.where(ex | ey, N + s, s)
    return code, ~(ex & ey)


def _face_chain_maps(ix_hi: _Indexer, ix_lo: _Indexer):
    """Chain maps ``(Delta_i)_#`` from ``K_q`` to ``K_{q-1}`` for ``i = 0..q``."""
    N, q = ix_hi.N, ix_hi.q
    out = []
    for i in range(q + 1):
        per_dim = []
        for k in range(q + 1):
            cells = ix_hi.by_dim[k]
            if i == 0 or i == q:
                drop = 0 if i == 0 else q - 1
                alive = cells[:, drop] < N
                img = np.delete(cells, drop, axis=1)
            else:
                code, alive = _multiply_codes(cells[:, i - 1], cells[:, i], N)
                img = np.concatenate([cells[:, :i - 1], code[:, None], cells[:, i + 1:]], axis=1)
            src = np.nonzero(alive)[0]
            kk = k  # images of live cells keep their dimension
            if kk > q - 1:
                per_dim.append(sp.csr_matrix((0, len(cells)), dtype=np.int64))
                continue
            tgt = ix_lo.index(img[src]) if len(src) else np.zeros(0, dtype=np.int64)
            m = sp.csr_matrix((np.ones(len(src), dtype=np.int64), (tgt, src)),
                              shape=(len(ix_lo.by_dim[kk]), len(cells)), dtype=np.int64)
            per_dim.append(m)
        out.append(tuple(per_dim))
    return tuple(out)


def _label_face(labels: np.ndarray, i: int, n_arcs: int) -> np.ndarray:
    """Simplicial face map on patch labels (drop or add adjacent entries mod ``n_arcs``)."""
    q = labels.shape[1]
    if i == 0:
        return labels[:, 1:]
    if i == q:
        return labels[:, :-1]
    merged = (labels[:, i - 1] + labels[:, i]) % n_arcs
    return np.concatenate([labels[:, :i - 1], merged[:, None], labels[:, i + 1:]], axis=1)


def _label_index(labels: np.ndarray, n_arcs: int) -> np.ndarray:
    out = np.zeros(len(labels), dtype=np.int64)
    for j in range(labels.shape[1]):
        out = out * n_arcs + labels[:, j]
    return out


def _arc_patches(ix: _Indexer, n_arcs: int, overlap: int):
    """Vertex/cell membership of the arc patches at one level.

    Patch ``i = (i_1..i_q)`` consists of the cells all of whose corners admit
    lifts ``x_j`` in ``[s i_j - w, s i_j + s + w]`` (``s = N / n_arcs``,
    ``w = overlap``) such that every consecutive partial sum
    ``x_a + ... + x_b`` lies in ``[s I - w, s I + s + w]`` with
    ``I = i_a + ... + i_b`` computed in the integers.  In lifted coordinates
    this is a convex lattice region, so patches are contractible.
    """
    N, q = ix.N, ix.q
    s, w = N // n_arcs, overlap
    labels = np.array(list(itertools.product(range(n_arcs), repeat=q)), dtype=np.int64).reshape(-1, q)
    verts = ix.by_dim[0]
    vmask = np.zeros((len(labels), len(verts)), dtype=bool)
    for a, lab in enumerate(labels):
        lo = s * lab - w
        r = (verts - lo) % N
        ok = np.all(r <= s + 2 * w, axis=1)
        lifted = lo + r
        csum = np.concatenate([np.zeros((len(verts), 1), dtype=np.int64), np.cumsum(lifted, axis=1)], axis=1)
        lsum = np.concatenate([[0], np.cumsum(lab)])
        for u in range(q):
            for v in range(u + 1, q + 1):
                tot = csum[:, v] - csum[:, u]
                idx = lsum[v] - lsum[u]
                ok &= (tot >= s * idx - w) & (tot <= s * idx + s + w)
        vmask[a] = ok
    cells_per_dim = []
    for k in range(q + 1):
        cells = ix.by_dim[k]
        # corners of every cell
        edge = cells >= N
        base = cells % N
        corners = []
        for bits in itertools.product((0, 1), repeat=q):
            b = np.array(bits)
            if k == 0 and any(bits):
                continue
            valid = np.all(edge | (b == 0), axis=1)
            c = (base + b * edge) % N
            corners.append((ix.index(c), valid))
        per_patch = []
        for a in range(len(labels)):
            inside = np.ones(len(cells), dtype=bool)
            for cidx, valid in corners:
                inside &= ~valid | vmask[a][cidx]
            per_patch.append(np.nonzero(inside)[0].astype(np.int64))
        cells_per_dim.append(tuple(per_patch))
    return labels, tuple(cells_per_dim)


def circle_model(N: int = 12, Q: int = 3, n_arcs: int = 3, overlap: int = 3,
                 single_patch: bool = False) -> SimplicialGroupModel:
    """The ``Z_N`` circle model with levels ``1..Q``.

    Args:
        N: polygon size (divisible by ``n_arcs``).
        Q: top level.
        n_arcs: arcs in the level-1 cover; level ``q`` has ``n_arcs^q`` patches.
        overlap: vertices by which neighbouring arcs overlap on each side.
        single_patch: use the one-patch cover ``{K_q}`` on every level instead.
    """
    if N % n_arcs:
        raise ValueError("N must be divisible by the number of arcs")
    if N // n_arcs + 2 * overlap >= N:
        raise ValueError("arcs must not wrap around the polygon")
    levels = []
    prev = None
    for q in range(1, Q + 1):
        ix = _Indexer(N, q)
        bnd = _boundary_matrices(ix)
        if single_patch:
            labels = np.zeros((1, q), dtype=np.int64)
            pcells = tuple((np.arange(len(ix.by_dim[k]), dtype=np.int64),) for k in range(q + 1))
            nlab = 1
        else:
            labels, pcells = _arc_patches(ix, n_arcs, overlap)
            nlab = n_arcs
        face_index, face_chain = (), ()
        if q >= 2:
            face_index = tuple(
                np.zeros(len(labels), dtype=np.int64) if single_patch
                else _label_index(_label_face(labels, i, nlab), nlab) for i in range(q + 1))
            face_chain = _face_chain_maps(ix, prev)
        names = tuple(ix.by_dim)
        levels.append(Level(q, tuple(len(c) for c in ix.by_dim), bnd, labels, pcells, face_index, face_chain, names))
        prev = ix
    name = f"Z{N}-circle" + ("-single" if single_patch else "")
    return SimplicialGroupModel(tuple(levels), name, {"N": N, "n_arcs": n_arcs, "overlap": overlap})


# ---------------------------------------------------------------------------
# validation


def _rank_mod_p(m: np.ndarray, p: int = 2_147_483_647) -> int:
    """Rank over GF(p) by Gaussian elimination (exact)."""
    a = np.array(m, dtype=np.int64) % p
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.nonzero(a[r:, c])[0]
        if not len(piv):
            continue
        i = r + piv[0]
        if i != r:
            a[[r, i]] = a[[i, r]]
        inv = pow(int(a[r, c]), p - 2, p)
        a[r] = (a[r] * inv) % p
        nz = np.nonzero(a[:, c])[0]
        nz = nz[nz != r]
        if len(nz):
            # (a[i] - a[i,c] * a[r]) mod p without int64 overflow
            f = a[nz, c][:, None]
            prod = (f.astype(object) * a[r].astype(object)) % p
            a[nz] = (a[nz] - prod.astype(np.int64)) % p
        r += 1
    return r


def _betti_from_cells(lv: Level, cells) -> list[int]:
    ranks = [0]
    for k in range(1, lv.dim + 1):
        if len(cells[k]) == 0 or len(cells[k - 1]) == 0:
            ranks.append(0)
            continue
        sub = lv.boundary[k][cells[k - 1]][:, cells[k]].toarray()
        ranks.append(_rank_mod_p(sub))
    ranks.append(0)
    return [len(cells[k]) - ranks[k] - ranks[k + 1] for k in range(lv.dim + 1)]


def betti_numbers(lv: Level, patch: int) -> list[int]:
    """Betti numbers of one patch (over GF(p), which bounds the rational ones from above)."""
    return _betti_from_cells(lv, [lv.patch_cells[k][patch] for k in range(lv.dim + 1)])


def coreduction_critical_cells(lv: Level, patch: int) -> list[int]:
    """Critical cells per dimension left by coreductions.

    A cell with exactly one remaining face is removed together with that
    face; whenever no such pair is pending, a lowest-dimensional surviving
    cell is declared critical.  Coreductions preserve homology, so
    ``[1, 0, ..., 0]`` certifies that the patch is acyclic.
    """
    top = lv.dim
    cells = [lv.patch_cells[k][patch] for k in range(top + 1)]
    alive = [set(c.tolist()) for c in cells]
    cof = [dict() for _ in range(top + 1)]
    fac = [dict() for _ in range(top + 1)]
    for k in range(1, top + 1):
        b = lv.boundary[k][:, cells[k]].tocsc()
        for j, c in enumerate(cells[k].tolist()):
            faces = b.indices[b.indptr[j]:b.indptr[j + 1]].tolist()
            fac[k][c] = faces
            for f in faces:
                cof[k - 1].setdefault(f, []).append(c)
    critical = [0] * (top + 1)
    n_faces = [dict() for _ in range(top + 1)]
    for k in range(1, top + 1):
        for c in alive[k]:
            n_faces[k][c] = len(fac[k][c])
    queue: deque = deque()

    def remove(k, c):
        alive[k].discard(c)
        if k + 1 <= top:
            for g in cof[k].get(c, ()):
                if g in alive[k + 1]:
                    n_faces[k + 1][g] -= 1
                    queue.append((k + 1, g))

    while any(alive):
        if not queue:
            k0 = next(k for k in range(top + 1) if alive[k])
            c0 = min(alive[k0])
            critical[k0] += 1
            remove(k0, c0)
            continue
        k, c = queue.popleft()
        if c not in alive[k]:
            continue
        nf = n_faces[k][c]
        if nf == 1:
            f = next(x for x in fac[k][c] if x in alive[k - 1])
            remove(k, c)
            remove(k - 1, f)
    return critical


@dataclass
class ModelReport:
    valid: bool
    good_cover: bool
    violations: list
    notes: list

    def as_dict(self) -> dict:
        return {"valid": self.valid, "good_cover": self.good_cover,
                "violations": list(self.violations), "notes": list(self.notes)}


def validate_model(model: SimplicialGroupModel, acyclicity: str = "auto") -> ModelReport:
    """Check the model invariants exactly.

    Validity covers: ``d o d = 0``; ``d`` commuting with every face chain
    map; the simplicial identities ``Delta_i Delta_j = Delta_{j-1} Delta_i``
    (``i < j``) on chains and on patch labels; cover compatibility
    ``Delta_k(U_i) in U_{Delta_k(i)}``; and that the patches cover ``K_q``.
    Acyclicity of every patch (the good-cover property) is reported
    separately as ``good_cover``; ``acyclicity`` selects the method:
    ``"rank"`` (Betti numbers over GF(p)), ``"coreduction"`` (only one
    critical cell survives), ``"auto"`` (coreduction, falling back to rank
    for patches of at most 2000 cells) or ``"skip"``.
    """
    if acyclicity not in ("auto", "rank", "coreduction", "skip"):
        raise ValueError(f"unknown acyclicity method {acyclicity!r}")
    bad, notes = [], []
    good = True
    for lv in model.levels:
        q = lv.q
        for k in range(2, lv.dim + 1):
            if (lv.boundary[k - 1] @ lv.boundary[k]).count_nonzero():
                bad.append(f"level {q}: boundary of boundary nonzero in dim {k}")
        for k in range(lv.dim + 1):
            covered = np.zeros(lv.n_cells[k], dtype=bool)
            for cells in lv.patch_cells[k]:
                covered[cells] = True
            if not covered.all():
                bad.append(f"level {q}: {int((~covered).sum())} cells of dim {k} not covered")
        # subcomplex property of patches
        for k in range(1, lv.dim + 1):
            for i in range(lv.n_patches):
                faces = lv.boundary[k][:, lv.patch_cells[k][i]].tocoo().row
                if not np.isin(faces, lv.patch_cells[k - 1][i]).all():
                    bad.append(f"level {q}: patch {i} is not a subcomplex in dim {k}")
                    break
        if q >= 2:
            lo = model.level(q - 1)
            for i, maps in enumerate(lv.face_chain):
                for k in range(1, lv.dim + 1):
                    if k > lo.dim:
                        lhs = sp.csr_matrix((lo.n_cells[k - 1], lv.n_cells[k]), dtype=np.int64)
                    else:
                        lhs = lo.boundary[k] @ maps[k]
                    rhs = maps[k - 1] @ lv.boundary[k]
                    if (lhs - rhs).count_nonzero():
                        bad.append(f"level {q}: face map {i} does not commute with the boundary in dim {k}")
                for p_ in range(lv.n_patches):
                    tgt = lv.face_index[i][p_]
                    for k in range(min(lv.dim, lo.dim) + 1):
                        img = maps[k][:, lv.patch_cells[k][p_]].tocoo().row
                        if not np.isin(img, lo.patch_cells[k][tgt]).all():
                            bad.append(f"level {q}: face {i} maps patch {p_} outside patch {tgt} (dim {k})")
                            break
            if q >= 3:
                mid = model.level(q - 1)
                for i in range(q + 1):
                    for j in range(i + 1, q + 1):
                        a = _compose_labels(mid.face_index[i], lv.face_index[j])
                        b = _compose_labels(mid.face_index[j - 1], lv.face_index[i])
                        if not np.array_equal(a, b):
                            bad.append(f"level {q}: label identity fails for faces ({i},{j})")
                        for k in range(lv.dim + 1):
                            if k > mid.dim:
                                continue
                            ca = mid.face_chain[i][k] @ lv.face_chain[j][k]
                            cb = mid.face_chain[j - 1][k] @ lv.face_chain[i][k]
                            if (ca - cb).count_nonzero():
                                bad.append(f"level {q}: chain identity fails for faces ({i},{j}) dim {k}")
        if acyclicity != "skip":
            for i in range(lv.n_patches):
                size = sum(len(lv.patch_cells[k][i]) for k in range(lv.dim + 1))
                method = "rank" if acyclicity == "rank" else "coreduction"
                b = betti_numbers(lv, i) if method == "rank" else coreduction_critical_cells(lv, i)
                ok = b[0] == 1 and not any(b[1:])
                if not ok and acyclicity == "auto" and size <= 2000:
                    method = "rank"
                    b = betti_numbers(lv, i)
                    ok = b[0] == 1 and not any(b[1:])
                if not ok:
                    good = False
                    notes.append(f"level {q}: patch {i} not certified acyclic ({method})")
                    break
    return ModelReport(not bad, good and not bad, bad, notes)


def _compose_labels(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    return outer[inner]


def corrupt_chain_map(model: SimplicialGroupModel, q: int = 2, face: int = 1, k: int = 1,
                      entry: int = 0) -> SimplicialGroupModel:
    """Copy of ``model`` with one entry of a face chain map flipped (negative control)."""
    levels = list(model.levels)
    lv = levels[q - 1]
    maps = [list(m) for m in lv.face_chain]
    m = maps[face][k].tocoo()
    data = m.data.copy()
    data[entry] = -data[entry]
    maps[face][k] = sp.csr_matrix((data, (m.row, m.col)), shape=m.shape, dtype=np.int64)
    levels[q - 1] = Level(lv.q, lv.n_cells, lv.boundary, lv.patch_labels, lv.patch_cells, lv.face_index,
                          tuple(tuple(x) for x in maps), lv.cell_names)
    return SimplicialGroupModel(tuple(levels), model.name + "-corrupted", dict(model.info))


# ---------------------------------------------------------------------------
# file format

MODEL_FORMAT = "gerbecalc-model 1"


def _sparse_to_json(m: sp.spmatrix) -> dict:
    c = m.tocoo()
    return {"shape": list(c.shape), "row": c.row.tolist(), "col": c.col.tolist(), "val": c.data.tolist()}


def _sparse_from_json(d: dict) -> sp.csr_matrix:
    return sp.csr_matrix((np.array(d["val"], dtype=np.int64), (np.array(d["row"], dtype=np.int64),
                                                                 np.array(d["col"], dtype=np.int64))),
                         shape=tuple(d["shape"]), dtype=np.int64)


def write_model(path, model: SimplicialGroupModel) -> None:
    """Write a model as JSON: complexes, covers and chain maps (sparse integer triplets)."""
    levels = []
    for lv in model.levels:
        levels.append({
            "q": lv.q,
            "n_cells": list(lv.n_cells),
            "boundary": [None] + [_sparse_to_json(b) for b in lv.boundary[1:]],
            "patch_labels": lv.patch_labels.tolist(),
            "patch_cells": [[c.tolist() for c in per] for per in lv.patch_cells],
            "face_index": [f.tolist() for f in lv.face_index],
            "face_chain": [[_sparse_to_json(m) for m in maps] for maps in lv.face_chain],
        })
    with open(path, "w") as fh:
        json.dump({"format": MODEL_FORMAT, "name": model.name, "info": model.info, "levels": levels}, fh)


def read_model(path) -> SimplicialGroupModel:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != MODEL_FORMAT:
        raise ValueError("not a gerbecalc model file")
    levels = []
    for d in data["levels"]:
        levels.append(Level(
            int(d["q"]), tuple(d["n_cells"]),
            (None,) + tuple(_sparse_from_json(b) for b in d["boundary"][1:]),
            np.array(d["patch_labels"], dtype=np.int64).reshape(-1, int(d["q"])),
            tuple(tuple(np.array(c, dtype=np.int64) for c in per) for per in d["patch_cells"]),
            tuple(np.array(f, dtype=np.int64) for f in d["face_index"]),
            tuple(tuple(_sparse_from_json(m) for m in maps) for maps in d["face_chain"]),
        ))
    return SimplicialGroupModel(tuple(levels), data.get("name", "model"), data.get("info", {}))
