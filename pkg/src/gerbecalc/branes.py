"""Conjugacy and biconjugacy classes, the symmetric D-brane 2-form and bi-brane curvature.

A conjugacy class ``C_h = {x h x^{-1}}`` carries the 2-form

    omega_h = <theta ^ T theta>,   T = (Ad_g^{-1} + 1) (Ad_g^{-1} - 1)^{-1},

with ``T`` defined on the image of ``Ad_g^{-1} - 1`` (the left Maurer-Cartan
form of a class tangent always lies there).  A biconjugacy class
``B_{h1,h2} = {(x h1 y^{-1}, x h2 y^{-1})}`` carries the bi-brane curvature, evaluated
two ways: through the multiplicative 2-form pulled back along
``mu(g, h) = (g h^{-1}, h)`` and through the symmetric formula
``m^* omega_{h1 h2^{-1}} - (1/2) <p_1^* theta ^ p_2^* theta>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import groups
from .forms import InvariantPairing, MultiplicativeTwoForm
from .groups import GroupElement, inv

EIGEN_TOL = 1e-10
TANGENT_TOL = 1e-8


class NotClassTangentError(ValueError):
    """Raised when a matrix is not tangent to the relevant class."""


def _matrix(obj) -> np.ndarray:
    if isinstance(obj, (GroupElement, groups.AlgebraVector)):
        return obj.matrix
    return np.asarray(obj, dtype=complex)


def _sorted_eigenvalues(m: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvals(m)
    return w[np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))]


def same_class(a, b, tol: float = EIGEN_TOL) -> bool:
    """True when the unitary matrices ``a`` and ``b`` have the same eigenvalues within ``tol``."""
    wa, wb = _sorted_eigenvalues(_matrix(a)), _sorted_eigenvalues(_matrix(b))
    # pair eigenvalues greedily to stay robust to ordering ties
    remaining = list(wb)
    for w in wa:
        j = int(np.argmin([abs(w - r) for r in remaining]))
        if abs(w - remaining[j]) > tol:
            return False
        remaining.pop(j)
    return True


@dataclass(frozen=True)
class ConjClassPoint:
    """Point ``g`` of the conjugacy class of ``h``.

    Args:
        h: class representative.
        g: element of the class (eigenvalues must match those of ``h`` within 1e-10).
    """

    h: GroupElement
    g: GroupElement

    def __post_init__(self):
        if self.h.group_tag != self.g.group_tag:
            raise ValueError("h and g belong to different groups")
        if self.h.group_tag == groups.VECTOR:
            raise ValueError("conjugacy classes are implemented for compact groups only")
        if not same_class(self.h, self.g):
            raise ValueError("g is not conjugate to h (eigenvalue mismatch)")

    @property
    def is_central(self) -> bool:
        m = self.g.matrix
        return bool(np.abs(m - m[0, 0] * np.eye(len(m))).max() < EIGEN_TOL)


def class_point(h: GroupElement, x) -> ConjClassPoint:
    """The point ``x h x^{-1}`` of the class of ``h``."""
    xm = _matrix(x)
    return ConjClassPoint(h, GroupElement(xm @ h.matrix @ inv(xm), h.group_tag))


def random_class_point(rng: np.random.Generator, h: GroupElement) -> ConjClassPoint:
    if h.group_tag == groups.SU2:
        return class_point(h, groups.random_su2(rng))
    return class_point(h, groups.random_unitary(rng, h.n))


def conj_tangent(p: ConjClassPoint, x) -> np.ndarray:
    """Tangent ``x g - g x`` to the class at ``g`` generated by the algebra element ``x``."""
    xm, g = _matrix(x), p.g.matrix
    return xm @ g - g @ xm


def _ad_inv_minus_one(g: np.ndarray) -> np.ndarray:
    """Matrix of ``Y -> g^{-1} Y g - Y`` acting on row-major flattened ``n x n`` matrices."""
    n = len(g)
    gi = inv(g)
    # vec(A Y B) = (A kron B^T) vec(Y) for row-major vec
    return np.kron(gi, g.T) - np.eye(n * n)


def _solve_on_image(g: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-norm ``Z`` with ``(Ad_g^{-1} - 1) Z = y`` and the residual norm.

    The minimum-norm solution is orthogonal to ``ker(Ad_g^{-1} - 1)`` because
    ``Ad`` is unitary for the Frobenius product.
    """
    n = len(g)
    a = _ad_inv_minus_one(g)
    z, *_ = np.linalg.lstsq(a, y.reshape(-1), rcond=1e-10)
    res = float(np.linalg.norm(a @ z - y.reshape(-1)))
    return z.reshape(n, n), res


def cayley_operator(g, y) -> np.ndarray:
    """Apply ``T = (Ad_g^{-1} + 1)(Ad_g^{-1} - 1)^{-1}`` to ``y`` in the image of ``Ad_g^{-1} - 1``.

    Raises:
        NotClassTangentError: ``y`` is not in the image within 1e-8.
    """
    gm, ym = _matrix(g), _matrix(y)
    z, res = _solve_on_image(gm, ym)
    if res > TANGENT_TOL * max(1.0, float(np.linalg.norm(ym))):
        raise NotClassTangentError(f"vector is not in the image of Ad^-1 - 1 (residual {res:.2e})")
    return inv(gm) @ z @ gm + z


def class_tangent_error(p: ConjClassPoint, v) -> float:
    """Distance of ``v`` from the tangent space of the class at ``g``."""
    g, vm = p.g.matrix, _matrix(v)
    x = inv(g) @ vm
    alg = float(np.abs(x + groups.dagger(x)).max())
    _, res = _solve_on_image(g, x)
    return max(alg, res)


def _check_class_tangent(p: ConjClassPoint, v) -> np.ndarray:
    vm = _matrix(v)
    err = class_tangent_error(p, vm)
    if err > TANGENT_TOL * max(1.0, float(np.abs(vm).max())):
        raise NotClassTangentError(f"vector is not tangent to the conjugacy class (error {err:.2e})")
    return vm


def omega_h(p: ConjClassPoint, v1, v2, pairing: InvariantPairing | None = None) -> float:
    """Evaluate ``<theta ^ T theta>`` on two class tangents at ``g``.

    Uses ``(alpha ^ beta)(v1, v2) = alpha(v1) beta(v2) - alpha(v2) beta(v1)``.

    Args:
        p: point of the class.
        v1: tangent matrix at ``g``.
        v2: tangent matrix at ``g``.
        pairing: invariant pairing (calibrated level 1 by default).

    Raises:
        NotClassTangentError: a vector is not tangent to the class within 1e-8.
    """
    pairing = pairing or InvariantPairing()
    g = p.g.matrix
    gi = inv(g)
    x1 = gi @ _check_class_tangent(p, v1)
    x2 = gi @ _check_class_tangent(p, v2)
    if p.is_central:
        return 0.0
    t1, t2 = cayley_operator(g, x1), cayley_operator(g, x2)
    return float(pairing(x1, t2) - pairing(x2, t1))


# ---------------------------------------------------------------------------
# biconjugacy classes


@dataclass(frozen=True)
class BiconjPoint:
    """Point ``(g1, g2) = (x h1 y^{-1}, x h2 y^{-1})`` of a biconjugacy class.

    Args:
        h1: first representative.
        h2: second representative.
        g1: first component.
        g2: second component; ``g1 g2^{-1}`` must be conjugate to ``h1 h2^{-1}``.
    """

    h1: GroupElement
    h2: GroupElement
    g1: GroupElement
    g2: GroupElement

    def __post_init__(self):
        tags = {e.group_tag for e in (self.h1, self.h2, self.g1, self.g2)}
        if len(tags) != 1:
            raise ValueError("mixed group tags")
        if not same_class(self.g1.matrix @ inv(self.g2.matrix), self.h1.matrix @ inv(self.h2.matrix)):
            raise ValueError("g1 g2^-1 is not conjugate to h1 h2^-1")

    @property
    def quotient(self) -> ConjClassPoint:
        """Image ``g1 g2^{-1}`` in the conjugacy class of ``h1 h2^{-1}``."""
        tag = self.h1.group_tag
        return ConjClassPoint(GroupElement(self.h1.matrix @ inv(self.h2.matrix), tag),
                              GroupElement(self.g1.matrix @ inv(self.g2.matrix), tag))


def biconj_point(h1: GroupElement, h2: GroupElement, x, y) -> BiconjPoint:
    """The point ``(x h1 y^{-1}, x h2 y^{-1})``."""
    xm, yi = _matrix(x), inv(_matrix(y))
    tag = h1.group_tag
    return BiconjPoint(h1, h2, GroupElement(xm @ h1.matrix @ yi, tag), GroupElement(xm @ h2.matrix @ yi, tag))


def random_biconj_point(rng: np.random.Generator, h1: GroupElement, h2: GroupElement) -> BiconjPoint:
    return biconj_point(h1, h2, groups.random_su2(rng), groups.random_su2(rng))


def biconj_tangent(q: BiconjPoint, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Tangent ``(x g1 - g1 y, x g2 - g2 y)`` generated by algebra elements ``x`` and ``y``."""
    xm, ym = _matrix(x), _matrix(y)
    g1, g2 = q.g1.matrix, q.g2.matrix
    return xm @ g1 - g1 @ ym, xm @ g2 - g2 @ ym


def biconj_tangent_error(q: BiconjPoint, v, w) -> float:
    """Residual of the best fit ``(v, w) ~ (x g1 - g1 y, x g2 - g2 y)``."""
    g1, g2 = q.g1.matrix, q.g2.matrix
    n = len(g1)
    eye = np.eye(n)
    # row-major vec: vec(x g) = (I kron g^T) vec(x), vec(g y) = (g kron I) vec(y)
    a = np.block([[np.kron(eye, g1.T), -np.kron(g1, eye)],
                  [np.kron(eye, g2.T), -np.kron(g2, eye)]])
    b = np.concatenate([_matrix(v).reshape(-1), _matrix(w).reshape(-1)])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return float(max(np.linalg.norm(a @ sol - b),
                     np.abs(inv(g1) @ _matrix(v) + groups.dagger(inv(g1) @ _matrix(v))).max(),
                     np.abs(inv(g2) @ _matrix(w) + groups.dagger(inv(g2) @ _matrix(w))).max()))


@dataclass(frozen=True)
class BiBraneValue:
    """Bi-brane curvature evaluated two ways.

    Attributes:
        def4_value: ``-mu^* rho + m^* omega`` with ``mu(g, h) = (g h^{-1}, h)``.
        target_value: ``m^* omega - (1/2) <p_1^* theta ^ p_2^* theta>``.
        defect: absolute difference.
    """

    def4_value: float
    target_value: float
    defect: float


def bibrane_curvature(q: BiconjPoint, t1, t2, k: float = 1,
                      pairing: InvariantPairing | None = None) -> BiBraneValue:
    """Evaluate the bi-brane 2-form on the tangent pairs ``t1 = (v1, w1)`` and ``t2 = (v2, w2)``.

    Args:
        q: point of the biconjugacy class.
        t1: first tangent pair.
        t2: second tangent pair.
        k: level; the pairing is rescaled to this level.
        pairing: base pairing (calibrated by default).

    Raises:
        NotClassTangentError: a pair is not tangent to the biconjugacy class.
    """
    pairing = (pairing or InvariantPairing()).with_level(k)
    g1, g2 = q.g1.matrix, q.g2.matrix
    for v, w in (t1, t2):
        err = biconj_tangent_error(q, v, w)
        if err > TANGENT_TOL * max(1.0, float(np.abs(_matrix(v)).max()), float(np.abs(_matrix(w)).max())):
            raise NotClassTangentError(f"pair is not tangent to the biconjugacy class (error {err:.2e})")
    (v1, w1), (v2, w2) = [(_matrix(v), _matrix(w)) for v, w in (t1, t2)]
    g2i = inv(g2)
    a = g1 @ g2i

    def push_quotient(v, w):
        # d(g1 g2^{-1}) = v g2^{-1} - g1 g2^{-1} w g2^{-1}
        return v @ g2i - a @ w @ g2i

    m_omega = omega_h(q.quotient, push_quotient(v1, w1), push_quotient(v2, w2), pairing)
    # mu(g1, g2) = (g1 g2^{-1}, g2) with differential (d(g1 g2^{-1}), w)
    point = (a, g2)
    frame = [(push_quotient(v1, w1), w1), (push_quotient(v2, w2), w2)]
    mu_rho = float(MultiplicativeTwoForm(pairing).evaluate(point, frame))
    def4 = -mu_rho + m_omega
    g1i = inv(g1)
    a1, a2 = g1i @ v1, g1i @ v2
    b1, b2 = g2i @ w1, g2i @ w2
    sym = 0.5 * (pairing(a1, b2) - pairing(a2, b1))
    target = m_omega - float(sym)
    return BiBraneValue(def4, target, abs(def4 - target))


@dataclass(frozen=True)
class SymmetryCheck:
    """Result of :func:`bibrane_symmetry_check`.

    Attributes:
        max_defect: largest two-sided defect.
        max_value: largest absolute curvature value (scale reference).
        n_samples: number of sampled points.
    """

    max_defect: float
    max_value: float
    n_samples: int


def bibrane_symmetry_check(h1: GroupElement, h2: GroupElement, k: float = 1, n_samples: int = 50,
                           rng: np.random.Generator | None = None,
                           pairing: InvariantPairing | None = None) -> SymmetryCheck:
    """Compare both bi-brane expressions at random points and tangents of ``B_{h1,h2}``."""
    rng = rng or np.random.default_rng()
    worst, scale = 0.0, 0.0
    for _ in range(n_samples):
        q = random_biconj_point(rng, h1, h2)
        xs = [groups.random_su2_algebra(rng) for _ in range(4)]
        t1 = biconj_tangent(q, xs[0], xs[1])
        t2 = biconj_tangent(q, xs[2], xs[3])
        val = bibrane_curvature(q, t1, t2, k, pairing)
        worst = max(worst, val.defect)
        scale = max(scale, abs(val.def4_value), abs(val.target_value))
    return SymmetryCheck(worst, scale, n_samples)
