"""Matrix Lie groups: SU(2), U(n) and vector groups R^d as translation matrices.

Points and tangent vectors are plain complex arrays of shape ``(..., n, n)``;
every helper broadcasts over leading batch axes.  :class:`GroupElement` and
:class:`AlgebraVector` are thin validated wrappers for the public API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

SU2 = "SU2"
UNITARY = "UnitaryN"
VECTOR = "VectorGroupRd"
GROUP_TAGS = (SU2, UNITARY, VECTOR)

GROUP_TOL = 1e-12
TANGENT_TOL = 1e-9

PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
# Basis of su(2): i*sigma_a.  It is orthonormal for -tr(XY)/2.
SU2_BASIS = 1j * PAULI


class SingularElementError(ValueError):
    """Raised when a group element is not invertible."""


class NotTangentError(ValueError):
    """Raised when a matrix is not tangent to the group at the given point."""


@dataclass(frozen=True)
class GroupElement:
    """Group element stored as a complex matrix.

    Args:
        matrix: ``n x n`` complex matrix.
        group_tag: one of ``SU2``, ``UnitaryN``, ``VectorGroupRd``.
    """

    matrix: np.ndarray
    group_tag: str = SU2

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.group_tag not in GROUP_TAGS:
            raise ValueError(f"unknown group tag {self.group_tag!r}")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("group element must be a square matrix")
        err = membership_error(m, self.group_tag)
        if err > GROUP_TOL * 100:
            raise ValueError(f"matrix is not in {self.group_tag} (error {err:.2e})")

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix, self.group_tag)

    def inverse(self) -> "GroupElement":
        return GroupElement(inv(self.matrix), self.group_tag)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class AlgebraVector:
    """Lie algebra element as a complex matrix (anti-hermitian traceless for su(2))."""

    matrix: np.ndarray
    group_tag: str = SU2

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.group_tag == SU2:
            err = max(np.abs(m + m.conj().T).max(), abs(np.trace(m)))
            if err > GROUP_TOL * 100:
                raise ValueError(f"matrix is not in su(2) (error {err:.2e})")


def membership_error(m: np.ndarray, tag: str) -> float:
    """Distance-like measure of how far ``m`` is from the group ``tag``."""
    m = np.asarray(m)
    n = m.shape[-1]
    eye = np.eye(n)
    if tag in (SU2, UNITARY):
        err = np.abs(m @ np.conj(np.swapaxes(m, -1, -2)) - eye).max()
        if tag == SU2:
            err = max(err, np.abs(np.linalg.det(m) - 1).max())
        return float(err)
    if tag == VECTOR:
        blk = m[..., : n - 1, : n - 1]
        last = m[..., n - 1, :]
        err = np.abs(blk - np.eye(n - 1)).max() if n > 1 else 0.0
        err = max(err, np.abs(last - eye[n - 1]).max(), np.abs(m.imag).max())
        return float(err)
    raise ValueError(tag)


# ---------------------------------------------------------------------------
# constructors


def su2_from_quaternion(q) -> np.ndarray:
    """Map quaternions ``(a, b, c, d)`` (last axis) to SU(2) matrices.

    The unit quaternion ``a + bi + cj + dk`` maps to
    ``[[a + ib, c + id], [-c + id, a - ib]]``.
    """
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a + 1j * b
    out[..., 0, 1] = c + 1j * d
    out[..., 1, 0] = -c + 1j * d
    out[..., 1, 1] = a - 1j * b
    return out


def su2_to_quaternion(g) -> np.ndarray:
    """Inverse of :func:`su2_from_quaternion` (valid for SU(2) input)."""
    g = np.asarray(g)
    return np.stack(
        [g[..., 0, 0].real, g[..., 0, 0].imag, g[..., 0, 1].real, g[..., 0, 1].imag],
        axis=-1,
    )


def su2_algebra(x) -> np.ndarray:
    """Return ``sum_a x_a * i*sigma_a`` for coordinates ``x`` on the last axis."""
    x = np.asarray(x, dtype=float)
    return np.einsum("...a,aij->...ij", x, SU2_BASIS)


def su2_coordinates(X) -> np.ndarray:
    """Coordinates of ``X`` in the basis ``i*sigma_a`` (inverse of :func:`su2_algebra`)."""
    return np.einsum("...ij,aji->...a", np.asarray(X), SU2_BASIS).real / -2.0


def translation(x) -> np.ndarray:
    """Translation matrices ``[[I, x], [0, 1]]`` realizing the vector group R^d."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (d + 1, d + 1), dtype=complex)
    idx = np.arange(d + 1)
    out[..., idx, idx] = 1.0
    out[..., :d, d] = x
    return out


def translation_coordinates(g) -> np.ndarray:
    """Recover ``x`` from translation matrices (or algebra elements) ``g``."""
    g = np.asarray(g)
    d = g.shape[-1] - 1
    return g[..., :d, d].real


def random_su2(rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar-random SU(2) matrices."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return su2_from_quaternion(q)


def random_su2_algebra(rng: np.random.Generator, size=None, scale=1.0) -> np.ndarray:
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    return su2_algebra(scale * rng.standard_normal(shape + (3,)))


def random_unitary(rng: np.random.Generator, n: int, size=None) -> np.ndarray:
    """Haar-random U(n) matrices via QR of a complex Gaussian."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))
    qm, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return qm * (d / np.abs(d))[..., None, :]


# ---------------------------------------------------------------------------
# batched arithmetic


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def inv(g) -> np.ndarray:
    """Batched inverse; raises :class:`SingularElementError` on singular input."""
    g = np.asarray(g)
    if g.shape[-1] == 2:
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        if np.any(np.abs(det) < 1e-14):
            raise SingularElementError("singular group element")
        out = np.empty_like(g, dtype=complex)
        out[..., 0, 0] = g[..., 1, 1]
        out[..., 1, 1] = g[..., 0, 0]
        out[..., 0, 1] = -g[..., 0, 1]
        out[..., 1, 0] = -g[..., 1, 0]
        return out / det[..., None, None]
    try:
        return np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularElementError("singular group element") from exc


def commutator(x, y):
    return x @ y - y @ x


def _is_su2_algebra(x) -> bool:
    if x.shape[-1] != 2:
        return False
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    return (
        np.abs(x + dagger(x)).max(initial=0.0) < 1e-10 * scale
        and np.abs(x[..., 0, 0] + x[..., 1, 1]).max(initial=0.0) < 1e-10 * scale
    )


def _is_translation_algebra(x) -> bool:
    n = x.shape[-1]
    return (
        n > 1
        and not np.any(x[..., n - 1, :])
        and not np.any(x[..., : n - 1, : n - 1])
    )


def expm(x) -> np.ndarray:
    """Batched matrix exponential with closed forms for su(2) and R^d."""
    x = np.asarray(x, dtype=complex)
    if _is_su2_algebra(x):
        det = (x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]).real
        r = np.sqrt(np.maximum(det, 0.0))
        eye = np.eye(2)
        return np.cos(r)[..., None, None] * eye + np.sinc(r / np.pi)[..., None, None] * x
    if _is_translation_algebra(x):
        return np.eye(x.shape[-1]) + x
    return scipy.linalg.expm(x)


def logm(g) -> np.ndarray:
    """Batched principal logarithm with closed forms for SU(2) and R^d."""
    g = np.asarray(g, dtype=complex)
    n = g.shape[-1]
    if n == 2 and membership_error(g, SU2) < 1e-9:
        c = np.clip(0.5 * (g[..., 0, 0] + g[..., 1, 1]).real, -1.0, 1.0)
        r = np.arccos(c)
        s = np.sinc(r / np.pi)
        if np.any(s < 1e-8):
            raise ValueError("logarithm undefined at -1 in SU(2)")
        return (0.5 * (g - dagger(g))) / s[..., None, None]
    if membership_error(g, VECTOR) < 1e-12:
        return g - np.eye(n)
    w, v = np.linalg.eig(g)
    return v @ (np.log(w)[..., None] * inv(v))


def ad(g, x):
    """Adjoint action ``g x g^{-1}``."""
    return g @ x @ inv(g)


def tangent_error(g, v, tag: str) -> float:
    """Distance of ``g^{-1} v`` from the Lie algebra of ``tag``."""
    x = inv(g) @ np.asarray(v)
    if tag == SU2:
        return float(max(np.abs(x + dagger(x)).max(), np.abs(np.trace(x, axis1=-2, axis2=-1)).max()))
    if tag == UNITARY:
        return float(np.abs(x + dagger(x)).max())
    n = x.shape[-1]
    return float(max(np.abs(x[..., n - 1, :]).max(), np.abs(x[..., : n - 1, : n - 1]).max(), np.abs(x.imag).max()))


# ---------------------------------------------------------------------------
# Maurer-Cartan forms on single elements


def _matrix(obj):
    return obj.matrix if isinstance(obj, (GroupElement, AlgebraVector)) else np.asarray(obj, dtype=complex)


def left_mc(g, v, check: bool = True) -> AlgebraVector | np.ndarray:
    """Left-invariant Maurer-Cartan form: ``g^{-1} v``.

    Args:
        g: group element (``GroupElement`` or matrix).
        v: tangent matrix at ``g``.
        check: verify that ``v`` is tangent within 1e-9.
    """
    tag = g.group_tag if isinstance(g, GroupElement) else None
    gm, vm = _matrix(g), _matrix(v)
    if check and tag is not None and tangent_error(gm, vm, tag) > TANGENT_TOL:
        raise NotTangentError("v is not tangent at g")
    x = inv(gm) @ vm
    return AlgebraVector(x, tag) if tag is not None else x


def right_mc(g, v, check: bool = True) -> AlgebraVector | np.ndarray:
    """Right-invariant Maurer-Cartan form: ``v g^{-1}``."""
    tag = g.group_tag if isinstance(g, GroupElement) else None
    gm, vm = _matrix(g), _matrix(v)
    if check and tag is not None and tangent_error(gm, vm, tag) > TANGENT_TOL:
        raise NotTangentError("v is not tangent at g")
    x = vm @ inv(gm)
    return AlgebraVector(x, tag) if tag is not None else x
