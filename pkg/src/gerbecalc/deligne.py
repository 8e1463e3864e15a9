"""Exact Čech–Deligne bi-complex over a finite cell-complex model of ``G^q``.

Conventions.  A component ``(q, p, k)`` is a Čech ``p``-cochain on the cover
of ``K_q`` with values in ``k``-cochains (``k = 0`` is the ``U(1)`` part);
its total degree is ``q + p + k``.  Čech cochains are alternating: they are
stored on strictly increasing patch tuples whose intersection is non-empty.
All values are rational with one common denominator per cochain and live in
the additive normalization ``g = exp(2 pi i f)``, so ``dlog g / (2 pi i)`` is
the cell coboundary of the representative ``f``.  A ``U(1)`` part is a
rational vertex cochain modulo one integer per connected component of each
intersection; the canonical representative lies in ``[0, 1)`` at the first
vertex of each component.

Differentials: ``D = delta + (-1)^p d`` on ``(p, k)``, the total one is
``bi_D = (-1)^q D + Delta`` with ``Delta = sum_i (-1)^i Delta_i^*``.  In
degree ``n + 1`` a cochain may carry a ``Delta``-closed ``n``-form ``rho``
on ``K_2``, which contributes ``-rho`` restricted to every patch to the
component ``(2, 0, n)``.  Components with ``k > n`` or ``q > Q`` are dropped.
"""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .cellmodel import SimplicialGroupModel

COCHAIN_FORMAT = "gerbecalc-cochain 1"

# ---------------------------------------------------------------------------
# supports and structure maps


@dataclass(frozen=True, eq=False)
class Support:
    """Flat index set of a component: pairs ``(patch tuple, cell)``.

    Attributes:
        tuples: ``(T, p + 1)`` strictly increasing patch tuples.
        cells: sorted cells of each tuple's intersection.
        offsets: start of each tuple's block in the flat layout.
        n_global: number of cells of the ambient dimension (key stride).
    """

    tuples: np.ndarray
    cells: tuple
    offsets: np.ndarray
    row_of: dict
    n_global: int

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @property
    def flat_rows(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.cells), dtype=np.int64), np.diff(self.offsets))

    @property
    def flat_cells(self) -> np.ndarray:
        return np.concatenate(self.cells) if self.cells else np.zeros(0, dtype=np.int64)

    @property
    def keys(self) -> np.ndarray:
        """Sorted keys ``row * n_global + cell`` of the flat layout."""
        return self.flat_rows * self.n_global + self.flat_cells

    def locate_keys(self, rows: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Flat positions of ``(row, cell)`` pairs, which must belong to the support."""
        keys = self.keys
        want = rows * self.n_global + cells
        pos = np.searchsorted(keys, want)
        if len(want) and (pos.max() >= len(keys) or not np.array_equal(keys[pos], want)):
            raise ValueError("cells outside the patch intersection")
        return pos

    def locate(self, row: int, cells: np.ndarray) -> np.ndarray:
        """Flat positions of ``cells`` in block ``row``."""
        cells = np.asarray(cells, dtype=np.int64)
        return self.locate_keys(np.full(len(cells), row, dtype=np.int64), cells)


def _make_support(tuples: list, cells: list, p: int, n_global: int) -> Support:
    arr = np.array(tuples, dtype=np.int64).reshape(len(tuples), p + 1)
    offsets = np.zeros(len(cells) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(c) for c in cells])
    return Support(arr, tuple(cells), offsets, {t: r for r, t in enumerate(tuples)}, max(n_global, 1))


def _sorted_sign(t: Sequence[int]) -> tuple[tuple | None, int]:
    """Sort a tuple, returning the parity sign, or ``None`` when it has repeats."""
    if len(set(t)) < len(t):
        return None, 0
    order = np.argsort(t, kind="stable")
    inversions = sum(1 for a in range(len(t)) for b in range(a + 1, len(t)) if order[a] > order[b])
    return tuple(int(t[j]) for j in order), (-1) ** inversions


def _coo(rows, cols, vals, shape) -> sp.csr_matrix:
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = v = np.zeros(0, dtype=np.int64)
    return sp.csr_matrix((v.astype(np.int64), (r, c)), shape=shape, dtype=np.int64)


def _gather(mat: sp.spmatrix, b: Support):
    """Entries of ``mat[:, cell]`` for every flat position of ``b``: (position, row cell, value)."""
    sub = mat.tocsc()[:, b.flat_cells].tocoo()
    sub.eliminate_zeros()
    return sub.col.astype(np.int64), sub.row.astype(np.int64), sub.data.astype(np.int64)


class CochainSpace:
    """Supports and sparse integer structure maps of a model, built lazily."""

    def __init__(self, model: SimplicialGroupModel):
        self.model = model
        self._inter: dict = {}
        self._maps: dict = {}

    def _intersections(self, q: int, k: int, p: int) -> Support:
        key = (q, k, p)
        if key in self._inter:
            return self._inter[key]
        lv = self.model.level(q)
        ng = self.model.n_cells(q, k)
        if k > lv.dim:
            sup = _make_support([], [], p, ng)
        elif p == 0:
            cells = list(lv.patch_cells[k])
            keep = [i for i, c in enumerate(cells) if len(c)]
            sup = _make_support([(i,) for i in keep], [np.asarray(cells[i], dtype=np.int64) for i in keep], 0, ng)
        else:
            prev = self._intersections(q, k, p - 1)
            pc = lv.patch_cells[k]
            tuples, cells = [], []
            for r, t in enumerate(map(tuple, prev.tuples.tolist())):
                for j in range(t[-1] + 1, lv.n_patches):
                    x = np.intersect1d(prev.cells[r], pc[j], assume_unique=True)
                    if len(x):
                        tuples.append(t + (j,))
                        cells.append(x)
            sup = _make_support(tuples, cells, p, ng)
        self._inter[key] = sup
        return sup

    def support(self, q: int, p: int, k: int) -> Support:
        if q < 1 or q > self.model.Q or p < 0 or k < 0:
            return _make_support([], [], max(p, 0), 1)
        return self._intersections(q, k, p)

    def size(self, q: int, p: int, k: int) -> int:
        return self.support(q, p, k).size

    def delta(self, q: int, p: int, k: int) -> sp.csr_matrix:
        """Čech coboundary ``(q, p, k) -> (q, p + 1, k)``."""
        key = ("delta", q, p, k)
        if key not in self._maps:
            a, b = self.support(q, p, k), self.support(q, p + 1, k)
            rows, cols, vals = [], [], []
            if b.size:
                brow, bcell = b.flat_rows, b.flat_cells
                tuples = b.tuples.tolist()
                for l in range(p + 2):
                    face_row = np.array([a.row_of[tuple(t[:l] + t[l + 1:])] for t in tuples], dtype=np.int64)
                    rows.append(np.arange(b.size))
                    cols.append(a.locate_keys(face_row[brow], bcell))
                    vals.append(np.full(b.size, (-1) ** l))
            self._maps[key] = _coo(rows, cols, vals, (b.size, a.size))
        return self._maps[key]

    def d(self, q: int, p: int, k: int) -> sp.csr_matrix:
        """Cell coboundary on every intersection ``(q, p, k) -> (q, p, k + 1)``."""
        key = ("d", q, p, k)
        if key not in self._maps:
            a, b = self.support(q, p, k), self.support(q, p, k + 1)
            rows, cols, vals = [], [], []
            if b.size:
                pos, face, val = _gather(self.model.level(q).boundary[k + 1], b)
                arow = np.array([a.row_of[tuple(t)] for t in b.tuples.tolist()], dtype=np.int64)
                rows.append(pos)
                cols.append(a.locate_keys(arow[b.flat_rows[pos]], face))
                vals.append(val)
            self._maps[key] = _coo(rows, cols, vals, (b.size, a.size))
        return self._maps[key]

    def pullback(self, i: int, q: int, p: int, k: int) -> sp.csr_matrix:
        """``Delta_i^*: (q, p, k) -> (q + 1, p, k)`` on alternating cochains."""
        key = ("pull", i, q, p, k)
        if key not in self._maps:
            a, b = self.support(q, p, k), self.support(q + 1, p, k)
            rows, cols, vals = [], [], []
            if b.size and a.size:
                up = self.model.level(q + 1)
                fidx = up.face_index[i]
                target = np.full(len(b.cells), -1, dtype=np.int64)
                sign = np.zeros(len(b.cells), dtype=np.int64)
                for r, t in enumerate(b.tuples.tolist()):
                    s_, sg = _sorted_sign([int(fidx[j]) for j in t])
                    if s_ is not None and s_ in a.row_of:
                        target[r], sign[r] = a.row_of[s_], sg
                pos, img, val = _gather(up.face_chain[i][k], b)
                brow = b.flat_rows[pos]
                keep = target[brow] >= 0
                pos, img, val, brow = pos[keep], img[keep], val[keep], brow[keep]
                rows.append(pos)
                cols.append(a.locate_keys(target[brow], img))
                vals.append(sign[brow] * val)
            self._maps[key] = _coo(rows, cols, vals, (b.size, a.size))
        return self._maps[key]

    def Delta(self, q: int, p: int, k: int) -> sp.csr_matrix:
        """``sum_i (-1)^i Delta_i^*: (q, p, k) -> (q + 1, p, k)``."""
        key = ("Delta", q, p, k)
        if key not in self._maps:
            shape = (self.size(q + 1, p, k), self.size(q, p, k))
            out = sp.csr_matrix(shape, dtype=np.int64)
            if q + 1 <= self.model.Q:
                for i in range(q + 2):
                    out = out + (-1) ** i * self.pullback(i, q, p, k)
            self._maps[key] = out.tocsr()
        return self._maps[key]

    def restrict(self, q: int, k: int) -> sp.csr_matrix:
        """Restriction of global ``k``-cochains of ``K_q`` to every patch, ``-> (q, 0, k)``."""
        key = ("restrict", q, k)
        if key not in self._maps:
            b = self.support(q, 0, k)
            rows = [np.arange(b.offsets[r], b.offsets[r + 1]) for r in range(len(b.cells))]
            cols = list(b.cells)
            vals = [np.ones(len(c), dtype=np.int64) for c in b.cells]
            self._maps[key] = _coo(rows, cols, vals, (b.size, self.model.n_cells(q, k)))
        return self._maps[key]

    def components(self, q: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Connected-component labels of the vertex support ``(q, p, 0)`` and the base position of each."""
        key = ("comp", q, p)
        if key not in self._maps:
            n = self.size(q, p, 0)
            dm = self.d(q, p, 0)
            adj = abs(dm).T @ abs(dm) if dm.shape[0] else sp.csr_matrix((n, n))
            _, labels = connected_components(adj, directed=False)
            _, base = np.unique(labels, return_index=True)
            self._maps[key] = (labels, base)
        return self._maps[key]


_SPACES: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def space_for(model: SimplicialGroupModel) -> CochainSpace:
    """The shared :class:`CochainSpace` of a model."""
    sp_ = _SPACES.get(model)
    if sp_ is None:
        sp_ = _SPACES[model] = CochainSpace(model)
    return sp_


# ---------------------------------------------------------------------------
# discrete forms


@dataclass
class DiscreteForm:
    """Rational ``k``-cochain ``values / denominator`` on ``K_q`` (or on one patch).

    For a patch form ``values`` is aligned with ``patch_cells[k][patch]``.
    """

    q: int
    k: int
    values: np.ndarray
    denominator: int = 1
    patch: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.denominator <= 0:
            raise ValueError("denominator must be positive")

    def as_fractions(self) -> list:
        return [Fraction(int(v), self.denominator) for v in self.values]

    def is_zero(self) -> bool:
        return not self.values.any()

    def equals(self, other: "DiscreteForm") -> bool:
        if (self.q, self.k, self.patch) != (other.q, other.k, other.patch):
            return False
        return np.array_equal(self.values * other.denominator, other.values * self.denominator)


def zero_form(model: SimplicialGroupModel, q: int, k: int) -> DiscreteForm:
    return DiscreteForm(q, k, np.zeros(model.n_cells(q, k), dtype=np.int64))


def random_form(model: SimplicialGroupModel, q: int, k: int, rng: np.random.Generator,
                denominator: int = 12, bound: int = 24) -> DiscreteForm:
    return DiscreteForm(q, k, rng.integers(-bound, bound + 1, model.n_cells(q, k)), denominator)


def _common(dens: Sequence[int]) -> int:
    return math.lcm(*[int(x) for x in dens]) if dens else 1


def _rescale(values: np.ndarray, den: int, target: int) -> np.ndarray:
    return np.asarray(values, dtype=np.int64) * (target // den)


def form_d(model: SimplicialGroupModel, f: DiscreteForm) -> DiscreteForm:
    """Global cell coboundary."""
    return DiscreteForm(f.q, f.k + 1, model.global_d(f.q, f.k) @ f.values, f.denominator)


def form_delta(model: SimplicialGroupModel, f: DiscreteForm) -> DiscreteForm:
    """``Delta f`` on ``K_{q+1}``."""
    return DiscreteForm(f.q + 1, f.k, model.global_delta(f.q, f.k) @ f.values, f.denominator)


def form_add(*forms: DiscreteForm, signs: Sequence[int] | None = None) -> DiscreteForm:
    signs = signs or [1] * len(forms)
    den = _common([f.denominator for f in forms])
    vals = sum(s * _rescale(f.values, f.denominator, den) for s, f in zip(signs, forms))
    return DiscreteForm(forms[0].q, forms[0].k, vals, den, forms[0].patch)


# ---------------------------------------------------------------------------
# cochains


def component_keys(model: SimplicialGroupModel, n: int, degree: int) -> list[tuple[int, int, int]]:
    """Components ``(q, p, k)`` of the truncated complex in a given total degree."""
    return [(q, degree - q - k, k) for q in range(1, model.Q + 1) for k in range(n + 1)
            if degree - q - k >= 0]


@dataclass(eq=False)
class DeligneCochain:
    """A cochain of the truncated bi-complex.

    Attributes:
        model: the cell model.
        n: truncation (forms of degree ``> n`` are dropped).
        degree: total degree.
        denominator: common denominator of all values.
        comps: numerators per component ``(q, p, k)``, laid out by :class:`Support`.
        rho: numerators of the ``n``-form on ``K_2`` (degree ``n + 1`` only).
    """

    model: SimplicialGroupModel
    n: int
    degree: int
    denominator: int = 1
    comps: dict = field(default_factory=dict)
    rho: np.ndarray | None = None

    def __post_init__(self):
        space = space_for(self.model)
        valid = set(component_keys(self.model, self.n, self.degree))
        for key in list(self.comps):
            if key not in valid:
                raise ValueError(f"component {key} does not belong to degree {self.degree}, n = {self.n}")
            arr = np.asarray(self.comps[key], dtype=np.int64)
            if arr.shape != (space.size(*key),):
                raise ValueError(f"component {key} has shape {arr.shape}, expected {(space.size(*key),)}")
            self.comps[key] = arr
        if self.rho is not None:
            if self.degree != self.n + 1:
                raise ValueError("rho is only allowed in degree n + 1")
            self.rho = np.asarray(self.rho, dtype=np.int64)
            if self.rho.shape != (self.model.n_cells(2, self.n),):
                raise ValueError("rho has the wrong number of cells")
        if self.denominator <= 0:
            raise ValueError("denominator must be positive")
        self.canonicalize()

    @property
    def space(self) -> CochainSpace:
        return space_for(self.model)

    def keys(self) -> list:
        return component_keys(self.model, self.n, self.degree)

    def component(self, q: int, p: int, k: int) -> np.ndarray:
        arr = self.comps.get((q, p, k))
        return arr if arr is not None else np.zeros(self.space.size(q, p, k), dtype=np.int64)

    def rho_form(self) -> DiscreteForm:
        vals = self.rho if self.rho is not None else np.zeros(self.model.n_cells(2, self.n), dtype=np.int64)
        return DiscreteForm(2, self.n, vals, self.denominator)

    def canonicalize(self) -> "DeligneCochain":
        """Reduce every ``U(1)`` part to its canonical representative (in place)."""
        D = self.denominator
        for (q, p, k), arr in self.comps.items():
            if k or not arr.size:
                continue
            labels, base = self.space.components(q, p)
            shift = (arr[base] // D) * D
            arr -= shift[labels]
        return self

    def with_denominator(self, den: int) -> "DeligneCochain":
        if den % self.denominator:
            raise ValueError("new denominator must be a multiple of the old one")
        f = den // self.denominator
        return DeligneCochain(self.model, self.n, self.degree, den,
                              {k: v * f for k, v in self.comps.items()},
                              None if self.rho is None else self.rho * f)

    def _compatible(self, other: "DeligneCochain"):
        if other.model is not self.model or other.n != self.n or other.degree != self.degree:
            raise ValueError("cochains live in different groups")

    def combine(self, other: "DeligneCochain", sign: int = 1) -> "DeligneCochain":
        self._compatible(other)
        den = math.lcm(self.denominator, other.denominator)
        a, b = self.with_denominator(den), other.with_denominator(den)
        comps = {key: a.component(*key) + sign * b.component(*key)
                 for key in set(a.comps) | set(b.comps)}
        rho = None
        if a.rho is not None or b.rho is not None:
            rho = a.rho_form().values + sign * b.rho_form().values
        return DeligneCochain(self.model, self.n, self.degree, den, comps, rho)

    def __add__(self, other):
        return self.combine(other, 1)

    def __sub__(self, other):
        return self.combine(other, -1)

    def __neg__(self):
        return DeligneCochain(self.model, self.n, self.degree, self.denominator,
                              {k: -v for k, v in self.comps.items()},
                              None if self.rho is None else -self.rho)

    def is_zero(self) -> bool:
        return not any(v.any() for v in self.comps.values()) and (self.rho is None or not self.rho.any())

    def equals(self, other: "DeligneCochain") -> bool:
        return (self - other).is_zero()

    def nonzero_components(self) -> list[dict]:
        out = [{"component": list(k), "nonzero": int(np.count_nonzero(v)),
                "max_abs": str(Fraction(int(np.abs(v).max()), self.denominator))}
               for k, v in sorted(self.comps.items()) if v.any()]
        if self.rho is not None and self.rho.any():
            out.append({"component": "rho", "nonzero": int(np.count_nonzero(self.rho)),
                        "max_abs": str(Fraction(int(np.abs(self.rho).max()), self.denominator))})
        return out

    def value(self, q: int, p: int, k: int, patches: Sequence[int], cell: int) -> Fraction:
        """Value at an (unsorted) patch tuple and a cell, using alternation."""
        s, sign = _sorted_sign(list(patches))
        if s is None:
            return Fraction(0)
        sup = self.space.support(q, p, k)
        row = sup.row_of.get(s)
        if row is None:
            raise KeyError("empty intersection")
        pos = sup.locate(row, np.array([cell]))[0]
        return Fraction(sign * int(self.component(q, p, k)[pos]), self.denominator)


def zero_cochain(model: SimplicialGroupModel, n: int, degree: int, with_rho: bool = False) -> DeligneCochain:
    rho = np.zeros(model.n_cells(2, n), dtype=np.int64) if with_rho else None
    return DeligneCochain(model, n, degree, 1, {}, rho)


def random_cochain(model: SimplicialGroupModel, n: int, degree: int, rng: np.random.Generator,
                   denominator: int = 12, bound: int = 36, with_rho: bool = True) -> DeligneCochain:
    """Random rational cochain; in degree ``n + 1`` it carries ``rho = Delta sigma``.

    Args:
        model: cell model.
        n: truncation.
        degree: total degree.
        rng: random generator.
        denominator: common denominator.
        bound: numerators are uniform in ``[-bound, bound]``.
        with_rho: attach a random ``Delta``-closed ``rho`` in degree ``n + 1``.
    """
    space = space_for(model)
    comps = {key: rng.integers(-bound, bound + 1, space.size(*key)) for key in component_keys(model, n, degree)}
    rho = None
    if with_rho and degree == n + 1 and model.Q >= 2:
        sigma = rng.integers(-bound, bound + 1, model.n_cells(1, n))
        rho = model.global_delta(1, n) @ sigma
    return DeligneCochain(model, n, degree, denominator, comps, rho)


# ---------------------------------------------------------------------------
# differentials


def _check_rho(c: DeligneCochain):
    if c.rho is not None and c.model.Q >= 3 and (c.model.global_delta(2, c.n) @ c.rho).any():
        raise ValueError("rho is not Delta-closed")


def deligne_D(c: DeligneCochain, q: int) -> DeligneCochain:
    """The Čech–Deligne differential ``delta + (-1)^p d`` of the level-``q`` part of ``c``."""
    sp_ = c.space
    out = {}
    for (qq, p, k) in component_keys(c.model, c.n, c.degree + 1):
        if qq != q:
            continue
        acc = np.zeros(sp_.size(q, p, k), dtype=np.int64)
        if p >= 1:
            acc += sp_.delta(q, p - 1, k) @ c.component(q, p - 1, k)
        if k >= 1:
            acc += (-1) ** p * (sp_.d(q, p, k - 1) @ c.component(q, p, k - 1))
        out[(q, p, k)] = acc
    return DeligneCochain(c.model, c.n, c.degree + 1, c.denominator, out)


def bi_D_terms(model: SimplicialGroupModel, n: int, degree: int) -> list[tuple]:
    """Term table of ``bi_D`` on degree-``degree`` cochains.

    Each entry is ``(target, sign, op, source)`` with ``op`` one of
    ``"delta"``, ``"d"``, ``"Delta"`` or ``"rho"`` (source ``None``).
    """
    terms = []
    for (q, p, k) in component_keys(model, n, degree + 1):
        if p >= 1:
            terms.append(((q, p, k), (-1) ** q, "delta", (q, p - 1, k)))
        if k >= 1:
            terms.append(((q, p, k), (-1) ** (q + p), "d", (q, p, k - 1)))
        if q >= 2:
            terms.append(((q, p, k), 1, "Delta", (q - 1, p, k)))
        if degree == n + 1 and (q, p, k) == (2, 0, n):
            terms.append(((q, p, k), -1, "rho", None))
    return terms


def level_equations(model: SimplicialGroupModel, n: int, degree: int) -> dict:
    """The cocycle condition grouped by target level.

    Returns ``{q: sorted list of (sign, op, source level)}`` where ``delta``
    and ``d`` terms are merged into the Deligne differential ``"D"`` (the sign
    is the one in front of ``D``, i.e. ``(-1)^q``).
    """
    out: dict = {}
    for (q, p, k), sign, op, src in bi_D_terms(model, n, degree):
        if op in ("delta", "d"):
            entry = ((-1) ** q, "D", q)
        elif op == "Delta":
            entry = (sign, "Delta", src[0])
        else:
            entry = (sign, "rho", 2)
        out.setdefault(q, set()).add(entry)
    return {q: sorted(v, key=lambda t: (t[1], t[2])) for q, v in sorted(out.items())}


def _apply(space: CochainSpace, op: str, target: tuple, src: tuple | None, c: DeligneCochain) -> np.ndarray:
    if op == "delta":
        return space.delta(*src) @ c.component(*src)
    if op == "d":
        return space.d(*src) @ c.component(*src)
    if op == "Delta":
        return space.Delta(*src) @ c.component(*src)
    if c.rho is None:
        return np.zeros(space.size(*target), dtype=np.int64)
    return space.restrict(2, c.n) @ c.rho


def bi_D(c: DeligneCochain) -> DeligneCochain:
    """Total differential ``(-1)^q D + Delta`` including the ``rho`` summand.

    Raises:
        ValueError: if ``rho`` is not ``Delta``-closed.
    """
    _check_rho(c)
    sp_ = c.space
    out = {key: np.zeros(sp_.size(*key), dtype=np.int64) for key in component_keys(c.model, c.n, c.degree + 1)}
    for target, sign, op, src in bi_D_terms(c.model, c.n, c.degree):
        out[target] += sign * _apply(sp_, op, target, src, c)
    return DeligneCochain(c.model, c.n, c.degree + 1, c.denominator, out)


def is_cocycle(c: DeligneCochain) -> tuple[bool, list[dict]]:
    """``bi_D(c) == 0`` exactly; the report lists the offending components."""
    res = bi_D(c)
    report = res.nonzero_components()
    return not report, report


def check_coboundary(c1: DeligneCochain, c2: DeligneCochain, witness: DeligneCochain) -> bool:
    """``c2 == c1 + bi_D(witness)`` exactly.

    Raises:
        ValueError: on degree mismatch.
    """
    if c1.degree != c2.degree or witness.degree != c1.degree - 1:
        raise ValueError("degrees do not match: need deg c1 = deg c2 = deg witness + 1")
    if c1.n != c2.n or witness.n != c1.n:
        raise ValueError("truncations do not match")
    return (c1 + bi_D(witness)).equals(c2)


# ---------------------------------------------------------------------------
# constructors


def _forms_to_component(model: SimplicialGroupModel, q: int, k: int, forms: Sequence[DiscreteForm]):
    """Stack per-patch forms into the numerators of ``(q, 0, k)`` over a common denominator."""
    sup = space_for(model).support(q, 0, k)
    lv = model.level(q)
    if len(forms) != lv.n_patches:
        raise ValueError(f"expected {lv.n_patches} patch forms")
    den = _common([f.denominator for f in forms])
    out = np.zeros(sup.size, dtype=np.int64)
    for i, f in enumerate(forms):
        if len(f.values) != len(lv.patch_cells[k][i]):
            raise ValueError(f"patch form {i} has the wrong number of cells")
        row = sup.row_of.get((i,))
        if row is not None:
            out[sup.offsets[row]:sup.offsets[row + 1]] = _rescale(f.values, f.denominator, den)
    return out, den


def make_trivial_multiplicative(model: SimplicialGroupModel, phi: DiscreteForm, psi: DiscreteForm) -> DeligneCochain:
    """Degree-3 cocycle (``n = 2``) built from a 2-form on ``K_1`` and a ``Delta``-closed 1-form on ``K_2``.

    The cochain has ``phi`` restricted to every level-1 patch in ``(1, 0, 2)``,
    ``psi`` restricted to every level-2 patch in ``(2, 0, 1)``, trivial ``U(1)``
    parts and ``rho = d psi + Delta phi``.

    Raises:
        ValueError: if ``Delta psi != 0`` or the degrees are wrong.
    """
    if (phi.q, phi.k, psi.q, psi.k) != (1, 2, 2, 1):
        raise ValueError("need phi a 2-form on K_1 and psi a 1-form on K_2")
    if model.Q >= 3 and form_delta(model, psi).values.any():
        raise ValueError("psi is not Delta-closed")
    sp_ = space_for(model)
    den = math.lcm(phi.denominator, psi.denominator)
    ph = _rescale(phi.values, phi.denominator, den)
    ps = _rescale(psi.values, psi.denominator, den)
    rho = model.global_d(2, 1) @ ps + model.global_delta(1, 2) @ ph
    comps = {(1, 0, 2): sp_.restrict(1, 2) @ ph, (2, 0, 1): sp_.restrict(2, 1) @ ps}
    return DeligneCochain(model, 2, 3, den, comps, rho)


def omega_conditions(model: SimplicialGroupModel, H: DiscreteForm, rho: DiscreteForm) -> dict:
    """The pair conditions ``dH = 0``, ``Delta H = d rho`` and ``Delta rho = 0`` (exact)."""
    out = {"dH_zero": not form_d(model, H).values.any(),
           "delta_H_equals_d_rho": form_add(form_delta(model, H), form_d(model, rho), signs=[1, -1]).is_zero()}
    out["delta_rho_zero"] = model.Q < 3 or not form_delta(model, rho).values.any()
    return out


class PreconditionError(ValueError):
    """Raised with a per-condition report when constructor inputs are invalid."""

    def __init__(self, report: dict):
        self.report = report
        failed = ", ".join(k for k, ok in report.items() if not ok)
        super().__init__(f"preconditions violated: {failed}")


def form_data_preconditions(model: SimplicialGroupModel, H: DiscreteForm, rho: DiscreteForm,
                            B: Sequence[DiscreteForm]) -> dict:
    """Exact check of the inputs of :func:`make_form_data_cocycle`, one entry per condition."""
    report = omega_conditions(model, H, rho)
    lv = model.level(1)
    ok = True
    dmat = model.global_d(1, H.k - 1)
    for i, b in enumerate(B):
        cells = lv.patch_cells[H.k - 1][i]
        up = lv.patch_cells[H.k][i] if H.k <= lv.dim else np.zeros(0, dtype=np.int64)
        full = np.zeros(model.n_cells(1, H.k - 1), dtype=np.int64)
        full[cells] = b.values
        db = (dmat @ full)[up] * H.denominator
        if not np.array_equal(db, H.values[up] * b.denominator):
            ok = False
            break
    report["dB_equals_H"] = ok
    return report


def make_form_data_cocycle(model: SimplicialGroupModel, H: DiscreteForm, rho: DiscreteForm,
                           B: Sequence[DiscreteForm]) -> DeligneCochain:
    """Degree-``(n + 2)`` cochain ``(Delta B - rho, -delta B)`` from a valid pair ``(H, rho)``.

    Its components are ``Delta B - rho|`` in ``(2, 0, n)`` and ``-delta B``
    in ``(1, 1, n)``; it equals ``bi_D`` of the cochain carrying ``B`` and
    ``rho``, so its residual vanishes in every form component.

    Args:
        model: cell model.
        H: ``(n + 1)``-form on ``K_1``.
        rho: ``n``-form on ``K_2``.
        B: one ``n``-form per level-1 patch with ``dB = H`` there.

    Raises:
        PreconditionError: with the per-condition report.
    """
    n = rho.k
    if (H.q, H.k, rho.q) != (1, n + 1, 2) or any(b.k != n for b in B):
        raise ValueError("need H an (n+1)-form on K_1, rho an n-form on K_2, B n-forms")
    report = form_data_preconditions(model, H, rho, B)
    if not all(report.values()):
        raise PreconditionError(report)
    comp, den = _forms_to_component(model, 1, n, B)
    den2 = math.lcm(den, rho.denominator)
    pre = DeligneCochain(model, n, n + 1, den2, {(1, 0, n): _rescale(comp, den, den2)},
                         _rescale(rho.values, rho.denominator, den2))
    return bi_D(pre)


# ---------------------------------------------------------------------------
# invariants


def omega_projection(c: DeligneCochain) -> tuple[DiscreteForm, DiscreteForm, dict]:
    """``(H, rho)``: ``d`` of the top form components on ``K_1`` assembled globally, and ``rho``.

    The report carries the pair conditions and the number of cells on which
    the patchwise values of ``H`` disagree.
    """
    model, n = c.model, c.n
    sp_ = c.space
    lv = model.level(1)
    dtop = sp_.d(1, 0, n) @ c.component(1, 0, n)
    sup = sp_.support(1, 0, n + 1)
    ncell = model.n_cells(1, n + 1)
    H = np.zeros(ncell, dtype=np.int64)
    seen = np.zeros(ncell, dtype=bool)
    disagree = np.zeros(ncell, dtype=bool)
    for r in range(len(sup.cells)):
        cells = sup.cells[r]
        vals = dtop[sup.offsets[r]:sup.offsets[r + 1]]
        disagree[cells] |= seen[cells] & (H[cells] != vals)
        fresh = ~seen[cells]
        H[cells[fresh]] = vals[fresh]
        seen[cells] = True
    Hf = DiscreteForm(1, n + 1, H, c.denominator)
    rho = c.rho_form()
    report = omega_conditions(model, Hf, rho)
    report["disagreeing_cells"] = int(disagree.sum())
    report["uncovered_cells"] = int((~seen).sum()) if lv.dim >= n + 1 else 0
    return Hf, rho, report


def _u1_parts(c: DeligneCochain) -> dict:
    return {(q, p): c.component(q, p, 0) for (q, p, k) in c.keys() if k == 0}


def total_integer_D(model: SimplicialGroupModel, parts: dict, degree: int) -> dict:
    """``(-1)^q delta + Delta`` on vertex cochains indexed ``(q, p)`` with ``q + p = degree``."""
    sp_ = space_for(model)
    out = {}
    for q in range(1, model.Q + 1):
        p = degree + 1 - q
        if p < 0:
            continue
        acc = np.zeros(sp_.size(q, p, 0), dtype=np.int64)
        if p >= 1 and (q, p - 1) in parts:
            acc += (-1) ** q * (sp_.delta(q, p - 1, 0) @ parts[(q, p - 1)])
        if q >= 2 and (q - 1, p) in parts:
            acc += sp_.Delta(q - 1, p, 0) @ parts[(q - 1, p)]
        out[(q, p)] = acc
    return out


def _locally_constant(model: SimplicialGroupModel, parts: dict) -> bool:
    sp_ = space_for(model)
    return all(not (sp_.d(q, p, 0) @ v).any() for (q, p), v in parts.items())


@dataclass
class MCClass:
    """Integer lift ``kappa`` of the ``U(1)`` parts of a cocycle.

    Attributes:
        kappa: integer vertex cochains per ``(q, p)`` (rational numerators if not integral).
        denominator: ``1`` when integral.
        is_integer: every entry is an integer.
        is_locally_constant: constant on each connected component of every intersection.
        is_cocycle: closed under the integer total differential (within truncation).
    """

    kappa: dict
    denominator: int
    is_integer: bool
    is_locally_constant: bool
    is_cocycle: bool

    def is_zero(self) -> bool:
        return not any(v.any() for v in self.kappa.values())


def mc_class(c: DeligneCochain) -> MCClass:
    """``kappa = (-1)^q delta L + Delta L`` for the canonical lifts ``L`` of the ``U(1)`` parts.

    Raises:
        ValueError: for ``n < 1`` or a non-cocycle.
    """
    if c.n < 1:
        raise ValueError("mc_class needs n >= 1 (for n = 0 rho enters the U(1) part)")
    ok, report = is_cocycle(c)
    if not ok:
        raise ValueError(f"input is not a cocycle: {report}")
    D = c.denominator
    kappa = total_integer_D(c.model, _u1_parts(c), c.degree)
    integral = all(not (v % D).any() for v in kappa.values())
    if integral:
        kappa = {k: v // D for k, v in kappa.items()}
    closed = not any(v.any() for v in total_integer_D(c.model, kappa, c.degree + 1).values())
    return MCClass(kappa, 1 if integral else D, integral, _locally_constant(c.model, kappa), closed)


def kappa_shift_witness(c: DeligneCochain, shifted: DeligneCochain, W: DeligneCochain) -> dict:
    """Integer witness ``N`` with ``kappa(shifted) - kappa(c) = D_Z N``.

    ``N = L' - L - D_Z W_0`` where ``L, L'`` are the canonical lifts and
    ``W_0`` the ``U(1)`` parts of ``W``; the report states whether ``N`` is
    integral and locally constant and whether the ``kappa`` difference equals
    its coboundary.

    Raises:
        ValueError: unless ``shifted == c + bi_D(W)``.
    """
    if not check_coboundary(c, shifted, W):
        raise ValueError("shifted cochain is not c + bi_D(W)")
    den = math.lcm(c.denominator, shifted.denominator, W.denominator)
    a, b, w = c.with_denominator(den), shifted.with_denominator(den), W.with_denominator(den)
    dw = total_integer_D(c.model, _u1_parts(w), w.degree)
    la, lb = _u1_parts(a), _u1_parts(b)
    N = {k: lb[k] - la[k] - dw.get(k, 0) for k in la}
    integral = all(not (v % den).any() for v in N.values())
    result = {"is_integer": integral, "is_locally_constant": False, "kappa_difference_matches": False}
    if not integral:
        return result
    N = {k: v // den for k, v in N.items()}
    result["is_locally_constant"] = _locally_constant(c.model, N)
    ka, kb = mc_class(c), mc_class(shifted)
    dN = total_integer_D(c.model, N, c.degree)
    result["kappa_difference_matches"] = (ka.is_integer and kb.is_integer and
                                          all(np.array_equal(kb.kappa[k] - ka.kappa[k], dN[k]) for k in dN))
    result["witness"] = N
    return result


# ---------------------------------------------------------------------------
# smooth side


@dataclass
class ProjectiveHomResult:
    ok: bool
    max_defect: float

    def __bool__(self) -> bool:
        return self.ok


def verify_projective_hom(g: Callable, rho: Callable, samples: Sequence, mul: Callable = np.matmul,
                          tol: float = 1e-10) -> ProjectiveHomResult:
    """Check ``g(x) g(y) = g(xy) exp(2 pi i rho(x, y))`` on consecutive sample pairs.

    Args:
        g: map to ``U(1)`` (complex values).
        rho: real function on pairs.
        samples: group elements (at least three).
        mul: group multiplication.
        tol: pointwise tolerance.

    Raises:
        ValueError: if ``rho`` fails ``Delta rho = 0`` at the sample triples.
    """
    if len(samples) < 3:
        raise ValueError("need at least three samples")
    xs = list(samples)
    for x, y, z in zip(xs, xs[1:], xs[2:]):
        drho = rho(y, z) - rho(mul(x, y), z) + rho(x, mul(y, z)) - rho(x, y)
        if abs(drho) > tol:
            raise ValueError(f"rho is not Delta-closed at the samples (defect {abs(drho):.3g})")
    worst = 0.0
    for x, y in zip(xs, xs[1:] + xs[:1]):
        lhs = g(x) * g(y)
        rhs = g(mul(x, y)) * np.exp(2j * np.pi * rho(x, y))
        worst = max(worst, float(abs(lhs - rhs)))
    return ProjectiveHomResult(worst <= tol, worst)


# ---------------------------------------------------------------------------
# IO


def write_cochain(path, c: DeligneCochain) -> None:
    """JSON file with the nonzero rational values per ``(patch tuple, cell)``."""
    comps = []
    for key in sorted(c.comps):
        vals = c.comps[key]
        sup = c.space.support(*key)
        entries = []
        for r, t in enumerate(sup.tuples.tolist()):
            block = vals[sup.offsets[r]:sup.offsets[r + 1]]
            for j in np.flatnonzero(block):
                entries.append([t, int(sup.cells[r][j]), str(Fraction(int(block[j]), c.denominator))])
        comps.append({"q": key[0], "p": key[1], "k": key[2], "entries": entries})
    doc = {"format": COCHAIN_FORMAT, "model": c.model.name, "model_info": c.model.info,
           "n": c.n, "degree": c.degree, "components": comps}
    if c.rho is not None:
        doc["rho"] = [[int(j), str(Fraction(int(c.rho[j]), c.denominator))] for j in np.flatnonzero(c.rho)]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_cochain(path, model: SimplicialGroupModel) -> DeligneCochain:
    """Inverse of :func:`write_cochain` for the same model."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != COCHAIN_FORMAT:
        raise ValueError("not a gerbecalc cochain file")
    if doc.get("model") != model.name:
        raise ValueError(f"cochain was written for model {doc.get('model')!r}")
    fr = [Fraction(v) for comp in doc["components"] for _, _, v in comp["entries"]]
    fr += [Fraction(v) for _, v in doc.get("rho", [])]
    den = _common([f.denominator for f in fr])
    sp_ = space_for(model)
    comps = {}
    for comp in doc["components"]:
        key = (comp["q"], comp["p"], comp["k"])
        sup = sp_.support(*key)
        arr = np.zeros(sup.size, dtype=np.int64)
        for t, cell, v in comp["entries"]:
            row = sup.row_of[tuple(t)]
            arr[sup.locate(row, np.array([cell]))[0]] = int(Fraction(v) * den)
        comps[key] = arr
    rho = None
    if "rho" in doc:
        rho = np.zeros(model.n_cells(2, doc["n"]), dtype=np.int64)
        for j, v in doc["rho"]:
            rho[j] = int(Fraction(v) * den)
    return DeligneCochain(model, doc["n"], doc["degree"], den, comps, rho)
