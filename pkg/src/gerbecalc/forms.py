"""Compositional differential forms on products of matrix Lie groups.

A form lives on ``G_1 x ... x G_q`` (its *arity* is ``q``) and is evaluated
on a batch of points together with a frame of tangent vectors.  Points are
tuples of arrays of shape ``(B, n, n)``; a frame is a list of ``degree``
tangent tuples with the same layout.  Real forms return arrays of shape
``(B,)``; algebra-valued forms return ``(B, n, n)``.

Wedge conventions: for 1-forms ``(a ^ b)(v, w) = a(v) b(w) - a(w) b(v)``
(sum over shuffles in general).  The bracket of algebra-valued forms is the
matrix-commutator wedge ``[a ^ b] = (a ^ b - (-1)^{pq} b ^ a) / 2`` so that
``[A ^ A] = A ^ A`` and ``dA + [A ^ A]`` is the curvature.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import groups
from .groups import GroupElement, expm, inv

REAL = "real"
ALGEBRA = "algebra"


# ---------------------------------------------------------------------------
# invariant pairing

_CALIBRATION: dict[str, float] = {}


class InvariantPairing:
    """Ad-invariant pairing ``<X, Y> = -c * k * Re tr(XY)``.

    Args:
        level: integer level ``k``.
        normalization_constant: ``c``; ``None`` means "calibrated" and is
            resolved lazily through :func:`calibrate_pairing`.
        group_tag: group the pairing is meant for.
    """

    def __init__(self, level: float = 1, normalization_constant: float | None = None,
                 group_tag: str = groups.SU2):
        self.level = level
        self._c = normalization_constant
        self.group_tag = group_tag

    @property
    def normalization_constant(self) -> float:
        if self._c is None:
            self._c = calibrate_pairing()
        return self._c

    @property
    def scale(self) -> float:
        return self.normalization_constant * self.level

    def __call__(self, x, y) -> np.ndarray:
        return -self.scale * np.einsum("...ij,...ji->...", x, y).real

    def with_level(self, level: float) -> "InvariantPairing":
        return InvariantPairing(level, self._c, self.group_tag)

    def __repr__(self):
        c = "calibrated" if self._c is None else f"{self._c:.12g}"
        return f"InvariantPairing(level={self.level}, c={c})"


def calibrate_pairing(resolution: int = 4, tol: float = 1e-3, force: bool = False) -> float:
    """Return ``c`` such that the canonical 3-form integrates to 1 over SU(2).

    The integral of ``eta`` at ``c = 1`` is computed over the identity map of
    S^3 at two mesh resolutions ``N`` and ``2N``; the finer value is used.
    The result is cached per process.

    Raises:
        RuntimeError: the two resolutions disagree by more than ``tol``.
    """
    key = f"SU2:{resolution}"
    if key in _CALIBRATION and not force:
        return _CALIBRATION[key]
    from . import mesh as _mesh

    unit = InvariantPairing(1, 1.0)
    vals = []
    for n in (resolution, 2 * resolution):
        gm = _mesh.identity_s3_map(n)
        vals.append(_mesh.integrate_pullback(eta(unit), gm))
    c0, c1 = 1.0 / vals[0], 1.0 / vals[1]
    if abs(c0 - c1) > tol * abs(c1):
        raise RuntimeError(f"pairing calibration did not converge: {c0} vs {c1}")
    _CALIBRATION[key] = c1
    return c1


# ---------------------------------------------------------------------------
# index maps


@functools.lru_cache(maxsize=None)
def _shuffles(p: int, q: int):
    """(p, q)-shuffles as ``(I, J, sign)`` triples."""
    out = []
    for idx in itertools.combinations(range(p + q), p):
        rest = tuple(i for i in range(p + q) if i not in idx)
        perm = idx + rest
        inversions = sum(1 for a in range(len(perm)) for b in range(a + 1, len(perm)) if perm[a] > perm[b])
        out.append((idx, rest, -1.0 if inversions % 2 else 1.0))
    return tuple(out)


@dataclass(frozen=True)
class IndexMap:
    """Map ``G^p -> G^r`` given by blocks of 1-based factor indices.

    Block ``(1, 2)`` multiplies factors 1 and 2; a negative entry inverts the
    factor, so ``(1, -2)`` is ``g_1 g_2^{-1}``.  ``IndexMap.parse("12,3", 3)``
    is the map ``m_{12,3}``.
    """

    arity_in: int
    groups: tuple

    def __post_init__(self):
        blocks = tuple(tuple(int(t) for t in b) for b in self.groups)
        object.__setattr__(self, "groups", blocks)
        for b in blocks:
            if not b:
                raise ValueError("empty block")
            for t in b:
                if t == 0 or abs(t) > self.arity_in:
                    raise ValueError(f"index {t} out of range 1..{self.arity_in}")

    @classmethod
    def parse(cls, text: str, arity_in: int) -> "IndexMap":
        return cls(arity_in, tuple(tuple(int(ch) for ch in blk.strip()) for blk in text.split(",")))

    @property
    def arity_out(self) -> int:
        return len(self.groups)

    def _factor(self, point, t):
        g = point[abs(t) - 1]
        return g if t > 0 else inv(g)

    def apply(self, point):
        out = []
        for b in self.groups:
            g = self._factor(point, b[0])
            for t in b[1:]:
                g = g @ self._factor(point, t)
            out.append(g)
        return tuple(out)

    def push(self, point, vec):
        """Push a tangent tuple ``vec`` at ``point`` forward (Leibniz rule)."""
        out = []
        for b in self.groups:
            facs = [self._factor(point, t) for t in b]
            dfacs = []
            for t, f in zip(b, facs):
                v = vec[abs(t) - 1]
                dfacs.append(v if t > 0 else -(f @ v @ f))
            total = None
            for j in range(len(b)):
                term = dfacs[j]
                for f in facs[:j][::-1]:
                    term = f @ term
                for f in facs[j + 1:]:
                    term = term @ f
                total = term if total is None else total + term
            out.append(total)
        return tuple(out)

    def compose(self, inner: "IndexMap") -> "IndexMap":
        """Return the index map of ``self o inner``."""
        if inner.arity_out != self.arity_in:
            raise ValueError("arity mismatch in composition")
        blocks = []
        for b in self.groups:
            nb = []
            for t in b:
                blk = inner.groups[abs(t) - 1]
                nb.extend(blk if t > 0 else [-s for s in reversed(blk)])
            blocks.append(tuple(nb))
        return IndexMap(inner.arity_in, tuple(blocks))


def face_map(i: int, p: int) -> IndexMap:
    """Face map ``Delta_i: G^p -> G^{p-1}`` for ``i = 0..p``.

    ``Delta_0`` drops the first factor, ``Delta_p`` drops the last one and
    ``Delta_i`` multiplies factors ``i`` and ``i+1``.
    """
    if not 0 <= i <= p:
        raise ValueError("face index out of range")
    if i == 0:
        blocks = [(j,) for j in range(2, p + 1)]
    elif i == p:
        blocks = [(j,) for j in range(1, p)]
    else:
        blocks = [(j,) for j in range(1, i)] + [(i, i + 1)] + [(j,) for j in range(i + 2, p + 1)]
    return IndexMap(p, tuple(blocks))


def projection(arity_in: int, *slots: int) -> IndexMap:
    """Projection onto the given 1-based factors."""
    return IndexMap(arity_in, tuple((s,) for s in slots))


# ---------------------------------------------------------------------------
# form nodes


def _repeat_point(point, times: int):
    return tuple(np.concatenate([g] * times, axis=0) for g in point)


def _eval_subframes(form: "Form", point, frame, index_sets):
    """Evaluate ``form`` on several sub-frames at once; returns shape (S, B, ...)."""
    s = len(index_sets)
    bsz = point[0].shape[0]
    pt = _repeat_point(point, s)
    sub = []
    for pos in range(form.degree):
        sub.append(tuple(
            np.concatenate([frame[idx[pos]][slot] for idx in index_sets], axis=0)
            for slot in range(len(point))
        ))
    vals = form.evaluate(pt, sub)
    return vals.reshape((s, bsz) + vals.shape[1:])


class Form:
    """Base class of the form evaluator tree."""

    degree: int = 0
    arity: int = 1
    kind: str = REAL

    def evaluate(self, point, frame):  # pragma: no cover - abstract
        raise NotImplementedError

    # algebra -----------------------------------------------------------
    def __add__(self, other):
        return Sum((self, other))

    def __sub__(self, other):
        return Sum((self, Scale(-1.0, other)))

    def __neg__(self):
        return Scale(-1.0, self)

    def __rmul__(self, c):
        return Scale(float(c), self)

    def __mul__(self, c):
        return Scale(float(c), self)

    def pullback(self, imap: IndexMap) -> "Form":
        return Pullback(imap, self)

    def d(self, step: float = 1e-4, richardson: bool = True) -> "Form":
        return ExtD(self, step, richardson)


FormExpression = Form


class ThetaLeft(Form):
    """Left Maurer-Cartan form ``g^{-1} dg`` on factor ``slot`` (0-based)."""

    kind = ALGEBRA
    degree = 1

    def __init__(self, slot: int = 0, arity: int = 1):
        self.slot, self.arity = slot, arity

    def evaluate(self, point, frame):
        return inv(point[self.slot]) @ frame[0][self.slot]


class ThetaRight(Form):
    """Right Maurer-Cartan form ``dg g^{-1}`` on factor ``slot`` (0-based)."""

    kind = ALGEBRA
    degree = 1

    def __init__(self, slot: int = 0, arity: int = 1):
        self.slot, self.arity = slot, arity

    def evaluate(self, point, frame):
        return frame[0][self.slot] @ inv(point[self.slot])


class _Binary(Form):
    def __init__(self, a: Form, b: Form):
        if a.arity != b.arity:
            raise ValueError("arity mismatch")
        self.a, self.b = a, b
        self.arity = a.arity
        self.degree = a.degree + b.degree

    def _shuffle_sum(self, point, frame, product, a=None, b=None):
        a = self.a if a is None else a
        b = self.b if b is None else b
        shuffles = _shuffles(a.degree, b.degree)
        va = _eval_subframes(a, point, frame, [s[0] for s in shuffles])
        vb = _eval_subframes(b, point, frame, [s[1] for s in shuffles])
        total = 0.0
        for k, (_, _, sign) in enumerate(shuffles):
            total = total + sign * product(va[k], vb[k])
        return total


class Pairing(_Binary):
    """Real form ``P(a ^ b)`` for algebra-valued forms ``a``, ``b``."""

    def __init__(self, pairing: InvariantPairing, a: Form, b: Form):
        super().__init__(a, b)
        if a.kind != ALGEBRA or b.kind != ALGEBRA:
            raise ValueError("pairing needs algebra-valued forms")
        self.pairing = pairing

    def evaluate(self, point, frame):
        return self._shuffle_sum(point, frame, self.pairing)


pairing_wedge = Pairing


class Wedge(_Binary):
    """Wedge product of real forms."""

    def __init__(self, a: Form, b: Form):
        super().__init__(a, b)
        if a.kind != REAL or b.kind != REAL:
            raise ValueError("wedge needs real forms")

    def evaluate(self, point, frame):
        return self._shuffle_sum(point, frame, lambda x, y: x * y)


class MatWedge(_Binary):
    """Matrix-product wedge of algebra-valued forms."""

    kind = ALGEBRA

    def evaluate(self, point, frame):
        return self._shuffle_sum(point, frame, lambda x, y: x @ y)


class Bracket(_Binary):
    """Matrix-commutator wedge ``[a ^ b] = (a ^ b - (-1)^{pq} b ^ a) / 2``."""

    kind = ALGEBRA

    def evaluate(self, point, frame):
        ab = self._shuffle_sum(point, frame, lambda x, y: x @ y)
        ba = self._shuffle_sum(point, frame, lambda x, y: x @ y, self.b, self.a)
        sign = -1.0 if (self.a.degree * self.b.degree) % 2 else 1.0
        return 0.5 * (ab - sign * ba)


def bracket_pairing(pairing: InvariantPairing, a: Form, b: Form, c: Form) -> Form:
    """``P(a ^ [b ^ c])``."""
    return Pairing(pairing, a, Bracket(b, c))


class Sum(Form):
    def __init__(self, terms: Sequence[Form]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("empty sum")
        d, q, kd = terms[0].degree, terms[0].arity, terms[0].kind
        for t in terms:
            if (t.degree, t.arity, t.kind) != (d, q, kd):
                raise ValueError("sum of forms with different degree/arity/kind")
        self.terms, self.degree, self.arity, self.kind = terms, d, q, kd

    def evaluate(self, point, frame):
        total = self.terms[0].evaluate(point, frame)
        for t in self.terms[1:]:
            total = total + t.evaluate(point, frame)
        return total


class Scale(Form):
    def __init__(self, c: float, f: Form):
        self.c, self.f = c, f
        self.degree, self.arity, self.kind = f.degree, f.arity, f.kind

    def evaluate(self, point, frame):
        return self.c * self.f.evaluate(point, frame)


class Pullback(Form):
    """Pullback of ``f`` along an :class:`IndexMap`."""

    def __init__(self, imap: IndexMap, f: Form):
        if imap.arity_out != f.arity:
            raise ValueError(f"index map lands in arity {imap.arity_out}, form has arity {f.arity}")
        self.imap, self.f = imap, f
        self.degree, self.arity, self.kind = f.degree, imap.arity_in, f.kind

    def evaluate(self, point, frame):
        return self.f.evaluate(self.imap.apply(point), [self.imap.push(point, v) for v in frame])


class Conjugate(Form):
    """``g^{-1} f g`` with ``g`` the factor ``slot`` (0-based) of the point."""

    kind = ALGEBRA

    def __init__(self, slot: int, f: Form):
        if f.kind != ALGEBRA:
            raise ValueError("conjugation needs an algebra-valued form")
        self.slot, self.f = slot, f
        self.degree, self.arity = f.degree, f.arity

    def evaluate(self, point, frame):
        g = point[self.slot]
        return inv(g) @ self.f.evaluate(point, frame) @ g


class ConnectionForm(Form):
    """Algebra-valued 1-form ``v -> fn(g, v)`` on factor ``slot``.

    ``fn`` receives the batched factor ``g`` and tangent ``v`` of that slot and
    must be linear in ``v``.
    """

    kind = ALGEBRA
    degree = 1

    def __init__(self, slot: int, arity: int, fn: Callable):
        self.slot, self.arity, self.fn = slot, arity, fn

    def evaluate(self, point, frame):
        return self.fn(point[self.slot], frame[0][self.slot])


connection_form = ConnectionForm


class ConstantForm(Form):
    """Constant real 0-form."""

    def __init__(self, value: float, arity: int = 1):
        self.value, self.arity = float(value), arity

    def evaluate(self, point, frame):
        return np.full(point[0].shape[0], self.value)


constant_form = ConstantForm


class CallableForm(Form):
    """Form given by a batched python callable ``fn(point, frame)``."""

    def __init__(self, fn: Callable, degree: int, arity: int, kind: str = REAL):
        self.fn, self.degree, self.arity, self.kind = fn, degree, arity, kind

    def evaluate(self, point, frame):
        return self.fn(point, frame)


class ExtD(Form):
    """Finite-difference exterior derivative.

    The frame is extended to left-invariant vector fields ``V_j = g X_j``;
    then ``df(V_0..V_k) = sum_j (-1)^j V_j f(..^j..) + sum_{i<j} (-1)^{i+j}
    f([V_i, V_j], ..^i..^j..)`` where the Lie brackets are exact and each
    directional derivative is a central difference along ``g exp(s X_j)``,
    optionally Richardson-extrapolated.  The result is tensorial, so it does
    not depend on the extension.
    """

    MIN_STEP = 1e-7

    def __init__(self, f: Form, step: float = 1e-4, richardson: bool = True):
        if step < self.MIN_STEP:
            raise ValueError(f"step {step} below {self.MIN_STEP}: catastrophic cancellation")
        self.f, self.step, self.richardson = f, step, richardson
        self.degree, self.arity, self.kind = f.degree + 1, f.arity, f.kind

    def evaluate(self, point, frame):
        k1 = len(frame)
        q = len(point)
        bsz = point[0].shape[0]
        ginv = [inv(g) for g in point]
        alg = [[ginv[s] @ frame[j][s] for s in range(q)] for j in range(k1)]

        steps = [self.step, self.step / 2] if self.richardson else [self.step]
        pts, frs = [], []
        for h in steps:
            for sgn in (1.0, -1.0):
                for j in range(k1):
                    p2 = tuple(point[s] @ expm(sgn * h * alg[j][s]) for s in range(q))
                    pts.append(p2)
                    frs.append([tuple(p2[s] @ alg[i][s] for s in range(q)) for i in range(k1) if i != j])
        big_pt = tuple(np.concatenate([p[s] for p in pts], axis=0) for s in range(q))
        big_fr = [tuple(np.concatenate([fr[pos][s] for fr in frs], axis=0) for s in range(q))
                  for pos in range(k1 - 1)]
        vals = self.f.evaluate(big_pt, big_fr)
        vals = vals.reshape((len(steps), 2, k1, bsz) + vals.shape[1:])
        deriv = [(vals[t, 0] - vals[t, 1]) / (2 * steps[t]) for t in range(len(steps))]
        dj = deriv[0] if len(deriv) == 1 else (4.0 * deriv[1] - deriv[0]) / 3.0
        total = 0.0
        for j in range(k1):
            total = total + (-1.0) ** j * dj[j]

        pairs = [(i, j) for i in range(k1) for j in range(i + 1, k1)]
        if pairs:
            frs = []
            for i, j in pairs:
                br = tuple(point[s] @ groups.commutator(alg[i][s], alg[j][s]) for s in range(q))
                frs.append([br] + [frame[m] for m in range(k1) if m not in (i, j)])
            big_pt = _repeat_point(point, len(pairs))
            big_fr = [tuple(np.concatenate([fr[pos][s] for fr in frs], axis=0) for s in range(q))
                      for pos in range(k1 - 1)]
            vals = self.f.evaluate(big_pt, big_fr)
            vals = vals.reshape((len(pairs), bsz) + vals.shape[1:])
            for m, (i, j) in enumerate(pairs):
                total = total + (-1.0) ** (i + j) * vals[m]
        return total


def ext_d(f: Form, step: float = 1e-4, richardson: bool = True) -> Form:
    """Numerical exterior derivative of ``f`` (see :class:`ExtD`)."""
    return ExtD(f, step, richardson)


def simplicial_delta(f: Form) -> Form:
    """``Delta f = sum_i (-1)^i Delta_i^* f`` as a form on ``G^{q+1}``."""
    p = f.arity + 1
    return Sum([Scale((-1.0) ** i, Pullback(face_map(i, p), f)) for i in range(p + 1)])


# ---------------------------------------------------------------------------
# evaluation entry point


def _as_batch(obj):
    m = obj.matrix if isinstance(obj, (GroupElement, groups.AlgebraVector)) else np.asarray(obj, dtype=complex)
    return m[None] if m.ndim == 2 else m


def eval_form(f: Form, point, frame, check_tags: Sequence[str] | None = None):
    """Evaluate ``f`` at ``point`` on ``frame``.

    Args:
        f: form expression.
        point: tuple of ``arity`` group elements (``GroupElement`` or arrays,
            optionally batched along a leading axis).
        frame: list of ``degree`` tangent tuples.
        check_tags: optional group tags; when given, tangent vectors are
            checked against ``g * Lie(G)`` with tolerance 1e-9.

    Returns:
        float (or matrix) for a single point, array for a batch.
    """
    point = tuple(point)
    if len(point) != f.arity:
        raise ValueError(f"form has arity {f.arity}, point has {len(point)} factors")
    if len(frame) != f.degree:
        raise ValueError(f"form has degree {f.degree}, frame has {len(frame)} vectors")
    single = all(_as_batch(g).shape[0] == 1 and np.asarray(getattr(g, "matrix", g)).ndim == 2 for g in point)
    if check_tags is None:
        check_tags = [g.group_tag if isinstance(g, GroupElement) else None for g in point]
    pt = tuple(_as_batch(g) for g in point)
    fr = []
    for vec in frame:
        vec = tuple(vec)
        if len(vec) != f.arity:
            raise ValueError("tangent tuple does not match the point")
        fr.append(tuple(_as_batch(v) for v in vec))
    for vec in fr:
        for g, v, tag in zip(pt, vec, check_tags):
            if tag is not None and groups.tangent_error(g, v, tag) > groups.TANGENT_TOL:
                raise groups.NotTangentError("frame vector is not tangent at the point")
    val = f.evaluate(pt, fr)
    return val[0] if single else val


# ---------------------------------------------------------------------------
# standard forms


def theta(slot: int = 0, arity: int = 1) -> Form:
    return ThetaLeft(slot, arity)


def theta_bar(slot: int = 0, arity: int = 1) -> Form:
    return ThetaRight(slot, arity)


class CanonicalThreeForm(Form):
    """Direct evaluator of ``eta``: ``(1/2) <X_1, [X_2, X_3]>`` with ``X_i = g^{-1} v_i``.

    Agrees with the expanded tree ``(1/6) <theta ^ [theta ^ theta]>`` (cyclic
    symmetry of ``<X, [Y, Z]>``) and is several times cheaper, which matters
    inside mesh quadrature.
    """

    degree, arity = 3, 1

    def __init__(self, pairing: InvariantPairing):
        self.pairing = pairing

    def evaluate(self, point, frame):
        gi = inv(point[0])
        x1, x2, x3 = (gi @ v[0] for v in frame)
        return 0.5 * self.pairing(x1, x2 @ x3 - x3 @ x2)


class MultiplicativeTwoForm(Form):
    """Direct evaluator of ``rho = (1/2) <p_1^* theta ^ p_2^* theta_bar>`` on G^2."""

    degree, arity = 2, 2

    def __init__(self, pairing: InvariantPairing):
        self.pairing = pairing

    def evaluate(self, point, frame):
        g1i, g2i = inv(point[0]), inv(point[1])
        (v1, w1), (v2, w2) = frame
        a1, a2 = g1i @ v1, g1i @ v2
        b1, b2 = w1 @ g2i, w2 @ g2i
        return 0.5 * (self.pairing(a1, b2) - self.pairing(a2, b1))


def eta(pairing: InvariantPairing | None = None, expanded: bool = False) -> Form:
    """Canonical 3-form ``(1/6) <theta ^ [theta ^ theta]>`` on G.

    ``expanded=True`` returns the literal expression tree; otherwise the
    equivalent direct evaluator :class:`CanonicalThreeForm`.
    """
    pairing = pairing or InvariantPairing()
    if not expanded:
        return CanonicalThreeForm(pairing)
    th = ThetaLeft(0, 1)
    return Scale(1.0 / 6.0, bracket_pairing(pairing, th, th, th))


def rho(pairing: InvariantPairing | None = None, expanded: bool = False) -> Form:
    """2-form ``(1/2) <p_1^* theta ^ p_2^* theta_bar>`` on G^2 (see :func:`eta` for ``expanded``)."""
    pairing = pairing or InvariantPairing()
    if not expanded:
        return MultiplicativeTwoForm(pairing)
    return Scale(0.5, Pairing(pairing, ThetaLeft(0, 2), ThetaRight(1, 2)))


def multiplicativity_defect_form(pairing: InvariantPairing | None = None, step: float = 1e-4) -> Form:
    """``eta_1 + eta_2 - eta_12 - d rho`` on G^2 (vanishes identically)."""
    e = eta(pairing)
    return Sum([
        Pullback(IndexMap(2, ((1,),)), e),
        Pullback(IndexMap(2, ((2,),)), e),
        Scale(-1.0, Pullback(IndexMap(2, ((1, 2),)), e)),
        Scale(-1.0, ExtD(rho(pairing), step)),
    ])


# ---------------------------------------------------------------------------
# sampling helpers


def random_point(rng: np.random.Generator, arity: int, batch: int, tag: str = groups.SU2):
    if tag != groups.SU2:
        raise ValueError("random_point supports SU2 only")
    return tuple(groups.random_su2(rng, batch) for _ in range(arity))


def random_frame(rng: np.random.Generator, point, degree: int, scale: float = 1.0):
    """Random tangent frame ``g X`` with Gaussian su(2) coordinates."""
    batch = point[0].shape[0]
    return [tuple(g @ groups.random_su2_algebra(rng, batch, scale) for g in point) for _ in range(degree)]
