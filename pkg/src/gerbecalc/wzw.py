"""Surface holonomy of the level-k gerbe on SU(2) and its multiplicative structure.

The holonomy of a closed surface map ``phi: S -> SU(2)`` is computed as
``exp(2 pi i k S_WZ)`` where ``S_WZ`` integrates the canonical 3-form over a
3-ball extension of ``phi`` (SU(2) is 2-connected, so extensions exist and
differ by integers).  On top of this live the Polyakov-Wiegmann check, the
central extension of the loop group on pairs ``(disc map, z)`` and a
holonomy-derivative check for U(1)-bundles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import groups
from .forms import CallableForm, Form, InvariantPairing, eta, rho
from .groups import SU2, VECTOR
from .mesh import (GroupMesh, InverseMap, MeshMap, ProductMap, SimplicialMesh, StackMap, canonical_simplices,
                   circle_mesh, cone_extension, glue_sphere, integrate_pullback)
from .parallel import pmap

TWO_PI = 2.0 * np.pi


def circle_distance(a: complex, b: complex) -> float:
    """``|a / b - 1|`` for unit complex numbers."""
    return float(abs(a / b - 1.0))


def frac_distance(x: float) -> float:
    """Distance from ``x`` to the nearest integer."""
    return float(abs(x - round(x)))


def _unit_pairing(pairing: InvariantPairing | None) -> InvariantPairing:
    if pairing is None:
        return InvariantPairing(1)
    return pairing.with_level(1)


# ---------------------------------------------------------------------------
# WZ holonomy


@dataclass(frozen=True)
class WZHolonomy:
    """Holonomy ``exp(2 pi i k S_WZ)`` of a closed surface map.

    ``wz_integral`` is the level-1 ball integral reduced to ``[0, 1)``;
    ``raw_integral`` keeps the unreduced value of the chosen extension.
    """

    level: int
    value: complex
    wz_integral: float
    raw_integral: float
    extension_id: str

    def __post_init__(self):
        if abs(abs(self.value) - 1.0) > 1e-12:
            raise ValueError("holonomy must have unit modulus")


def extend_to_ball(phi: MeshMap, layers: int | None = None, rng: np.random.Generator | None = None):
    """Ball extension of a closed surface map, plus a string naming the choice.

    Products and inverses of surface maps are extended factorwise, so the
    extension of ``phi_1 phi_2`` is the pointwise product of the extensions
    (all factors share one cone mesh).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if isinstance(phi, GroupMesh):
        if layers is None:
            layers = max(2, int(round(math.sqrt(len(phi.mesh) / 8))))
        ext = cone_extension(phi, layers=layers, rng=rng)
        q = ext.q_star
        tag = "const" if q is None else "cone(q*=" + ",".join(f"{x:.6f}" for x in q) + ")"
        return ext, tag
    if layers is None:
        layers = max(2, int(round(math.sqrt(len(phi.mesh) / 8))))
    if isinstance(phi, ProductMap):
        a, ta = extend_to_ball(phi.a, layers, rng)
        b, tb = extend_to_ball(phi.b, layers, rng)
        return ProductMap(a, b), f"({ta})*({tb})"
    if isinstance(phi, InverseMap):
        a, ta = extend_to_ball(phi.a, layers, rng)
        return InverseMap(a), f"inv({ta})"
    raise TypeError(f"cannot extend {type(phi).__name__} to a ball")


def wz_integral(phi: MeshMap, pairing: InvariantPairing | None = None, layers: int | None = None,
                rng: np.random.Generator | None = None, rule=None) -> tuple[float, str]:
    """Level-1 integral of ``eta`` over a ball extension of ``phi``; returns ``(value, extension_id)``."""
    if not phi.mesh.is_closed or phi.mesh.dim != 2:
        raise ValueError("WZ action needs a closed oriented 2-mesh")
    ext, tag = extend_to_ball(phi, layers, rng)
    return integrate_pullback(eta(_unit_pairing(pairing)), ext, rule), tag


def wz_action(phi: MeshMap, level: int = 1, pairing: InvariantPairing | None = None, layers: int | None = None,
              rng: np.random.Generator | None = None, rule=None) -> WZHolonomy:
    """Holonomy of the level-``k`` gerbe around the closed surface map ``phi``.

    Args:
        phi: SU(2)-valued map on a closed oriented 2-mesh (a :class:`GroupMesh`
            or a pointwise product / inverse of such maps).
        level: the level ``k``.
        pairing: pairing whose normalization constant is used (level ignored).
        layers: radial layers of the cone extension.
        rng: randomness for the avoided point of the cone.
    """
    raw, tag = wz_integral(phi, pairing, layers, rng, rule)
    red = raw - math.floor(raw)
    return WZHolonomy(level, complex(np.exp(1j * TWO_PI * level * raw)), red, raw, tag)


def rho_integral(phi1: MeshMap, phi2: MeshMap, pairing: InvariantPairing | None = None, rule=None) -> float:
    """Level-1 integral of ``rho`` pulled back along ``(phi1, phi2)``."""
    return integrate_pullback(rho(_unit_pairing(pairing)), StackMap(phi1, phi2), rule)


@dataclass(frozen=True)
class PWResult:
    lhs: complex
    rhs: complex
    defect: float
    wz1: float
    wz2: float
    wz12: float
    rho_integral: float


def polyakov_wiegmann_check(phi1: GroupMesh, phi2: GroupMesh, level: int = 1,
                            pairing: InvariantPairing | None = None, layers: int | None = None,
                            rng: np.random.Generator | None = None) -> PWResult:
    """Compare ``Hol(phi1) Hol(phi2)`` with ``Hol(phi1 phi2) exp(2 pi i k int rho)``.

    The product surface map is the pointwise product of the interpolated
    maps; its ball extension is the pointwise product of the two factor
    extensions used for ``S_WZ(phi1)`` and ``S_WZ(phi2)``.  ``defect = |lhs / rhs - 1|``.
    """
    if phi1.mesh is not phi2.mesh and not (
            phi1.mesh.dim == phi2.mesh.dim and np.array_equal(phi1.mesh.simplices, phi2.mesh.simplices)
            and np.array_equal(phi1.mesh.signs, phi2.mesh.signs)):
        raise ValueError("Polyakov-Wiegmann check needs both maps on the same mesh")
    rng = rng if rng is not None else np.random.default_rng(0)
    # the product is extended by the pointwise product of the factor extensions
    ext1, _ = extend_to_ball(phi1, layers, rng)
    ext2, _ = extend_to_ball(phi2, layers, rng)
    form = eta(_unit_pairing(pairing))
    s1 = integrate_pullback(form, ext1)
    s2 = integrate_pullback(form, ext2)
    s12 = integrate_pullback(form, ProductMap(ext1, ext2))
    r = rho_integral(phi1, phi2, pairing)
    lhs = complex(np.exp(1j * TWO_PI * level * (s1 + s2)))
    rhs = complex(np.exp(1j * TWO_PI * level * (s12 + r)))
    return PWResult(lhs, rhs, circle_distance(lhs, rhs), s1, s2, s12, r)


def pw_suite(mesh: SimplicialMesh, n_pairs: int, levels=(1, 2, 3), seed: int = 0, amplitude: float = 1.0,
             pairing: InvariantPairing | None = None) -> list[dict]:
    """Polyakov-Wiegmann defects for random smooth pairs (run in parallel)."""
    ss = np.random.SeedSequence(seed)

    def one(args):
        i, child = args
        rng = np.random.default_rng(child)
        p1 = random_surface_map(mesh, rng, amplitude)
        p2 = random_surface_map(mesh, rng, amplitude)
        k = levels[i % len(levels)]
        res = polyakov_wiegmann_check(p1, p2, k, pairing, rng=rng)
        return {"pair": i, "level": k, "defect": res.defect, "rho_integral": res.rho_integral}

    return pmap(one, list(enumerate(ss.spawn(n_pairs))))


# ---------------------------------------------------------------------------
# random smooth maps


def random_su2_field(coords: np.ndarray, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """``exp`` of a random quadratic su(2)-valued polynomial in the coordinates."""
    dim = coords.shape[1]
    lin = rng.standard_normal((dim, 3)) * amplitude
    quad = rng.standard_normal((3, dim, dim)) * amplitude / 2
    const = rng.standard_normal(3) * amplitude
    f = const + coords @ lin + np.einsum("vi,vj,aij->va", coords, coords, quad)
    return groups.expm(groups.su2_algebra(f))


def random_surface_map(mesh: SimplicialMesh, rng: np.random.Generator, amplitude: float = 1.0) -> GroupMesh:
    """Random smooth SU(2)-valued map on an embedded mesh."""
    if mesh.coords is None:
        raise ValueError("random maps need vertex coordinates")
    return GroupMesh(mesh, random_su2_field(mesh.coords, rng, amplitude), SU2)


# ---------------------------------------------------------------------------
# loop-group central extension


@dataclass(frozen=True)
class MickelssonElement:
    """Pair ``(phi, z)`` of a disc map and a unit complex number at level ``k``."""

    disc: MeshMap
    z: complex
    level: int = 1

    def __post_init__(self):
        if abs(abs(self.z) - 1.0) > 1e-12:
            raise ValueError("z must have unit modulus")
        if self.disc.mesh.dim != 2:
            raise ValueError("disc map must live on a 2-mesh")


def me_identity(mesh: SimplicialMesh, level: int = 1) -> MickelssonElement:
    return MickelssonElement(GroupMesh(mesh, np.repeat(np.eye(2, dtype=complex)[None], mesh.n_vertices, 0)),
                             1.0 + 0j, level)


def me_product(e1: MickelssonElement, e2: MickelssonElement,
               pairing: InvariantPairing | None = None) -> MickelssonElement:
    """``(phi_1 phi_2, z_1 z_2 exp(2 pi i k int_D (phi_1, phi_2)^* rho))``."""
    if e1.level != e2.level:
        raise ValueError("level mismatch")
    r = rho_integral(e1.disc, e2.disc, pairing)
    z = e1.z * e2.z * np.exp(1j * TWO_PI * e1.level * r)
    z /= abs(z)
    return MickelssonElement(ProductMap(e1.disc, e2.disc), complex(z), e1.level)


def me_inverse_disc(e: MickelssonElement) -> MickelssonElement:
    """``(phi^{-1}, 1)``, whose product with ``(phi, 1)`` has the constant disc."""
    return MickelssonElement(InverseMap(e.disc), 1.0 + 0j, e.level)


def me_associator(e1: MickelssonElement, e2: MickelssonElement, e3: MickelssonElement,
                  pairing: InvariantPairing | None = None) -> complex:
    """``z((e1 e2) e3) / z(e1 (e2 e3))``; the discs agree pointwise by associativity."""
    left = me_product(me_product(e1, e2, pairing), e3, pairing)
    right = me_product(e1, me_product(e2, e3, pairing), pairing)
    return complex(left.z / right.z)


def me_relation(e1: MickelssonElement, e2: MickelssonElement, pairing: InvariantPairing | None = None,
                layers: int | None = None, rng: np.random.Generator | None = None) -> dict:
    """Compare ``z_2`` with ``z_1 exp(2 pi i k S_WZ(phi_1 u -phi_2))``.

    Returns the glued-sphere WZ integral and the circle distance of the
    comparison.
    """
    if e1.level != e2.level:
        raise ValueError("level mismatch")
    if not (isinstance(e1.disc, GroupMesh) and isinstance(e2.disc, GroupMesh)):
        raise TypeError("equivalence test needs disc maps given by vertex values")
    sphere = glue_sphere(e1.disc, e2.disc)
    s, _ = wz_integral(sphere, pairing, layers, rng)
    expected = e1.z * np.exp(1j * TWO_PI * e1.level * s)
    return {"wz_integral": s, "distance": circle_distance(e2.z, expected)}


def me_equal(e1: MickelssonElement, e2: MickelssonElement, tol: float = 1e-3,
             pairing: InvariantPairing | None = None, layers: int | None = None,
             rng: np.random.Generator | None = None) -> bool:
    """Equivalence of Mickelsson pairs (boundary loops must agree within 1e-9)."""
    return me_relation(e1, e2, pairing, layers, rng)["distance"] < tol


# ---------------------------------------------------------------------------
# holonomy derivative of U(1)-bundles on the 2-sphere


def monopole_form(charge: float = 1.0) -> Form:
    """Curvature ``q det(x, u, v) / (4 pi |x|^3)`` on ``R^3 minus 0`` (total flux ``q`` through S^2).

    Lives on the vector group ``R^3`` (translation matrices).
    """

    def fn(point, frame):
        x = groups.translation_coordinates(point[0])
        u = groups.translation_coordinates(frame[0][0])
        v = groups.translation_coordinates(frame[1][0])
        r3 = np.linalg.norm(x, axis=-1) ** 3
        return charge * np.einsum("...i,...i->...", x, np.cross(u, v)) / (4 * np.pi * r3)

    return CallableForm(fn, degree=2, arity=1)


NORTH = np.array([0.0, 0.0, 1.0])


def cap_mesh(loop: np.ndarray, layers: int = 16, apex=NORTH) -> GroupMesh:
    """Straight cone from ``apex`` over a closed polygon, oriented so its boundary is the loop.

    Args:
        loop: ``(n, 3)`` points, traversed in order and closed up.
        layers: radial layers.
        apex: cone apex.

    Raises:
        ValueError: a cone segment passes within 1e-6 of the origin.
    """
    loop = np.asarray(loop, dtype=float)
    apex = np.asarray(apex, dtype=float)
    n = len(loop)
    d = loop - apex
    # distance from the origin to each segment apex -> loop point
    t = np.clip(-(apex @ d.T) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    dist = np.linalg.norm(apex + t[:, None] * d, axis=1)
    if np.min(dist) < 1e-6:
        raise ValueError("cap construction failed: the loop passes through the excluded pole")
    pts = [apex[None]] + [apex + (j / layers) * d for j in range(1, layers + 1)]
    coords = np.concatenate(pts)

    def vid(j, i):
        return 0 if j == 0 else 1 + (j - 1) * n + (i % n)

    tris = []
    for i in range(n):
        a, b = i, i + 1
        tris.append((vid(0, a), vid(1, a), vid(1, b)))
        for j in range(1, layers):
            tris.append((vid(j, a), vid(j + 1, a), vid(j + 1, b)))
            tris.append((vid(j, a), vid(j + 1, b), vid(j, b)))
    simp, signs = canonical_simplices(tris)
    mesh = SimplicialMesh(2, simp, signs, len(coords), coords, "cap")
    return GroupMesh(mesh, groups.translation(coords), VECTOR)


def loop_flux(F: Form, loop: np.ndarray, layers: int = 16) -> float:
    """``int_cap F`` over the cone cap of the loop; the holonomy is ``exp(2 pi i flux)``."""
    return integrate_pullback(F, cap_mesh(loop, layers))


def _variation_form(F: Form) -> Form:
    """1-form ``(x, V) -> F_x(V, .)`` on ``R^3 x R^3`` (the second factor carries the variation)."""

    def fn(point, frame):
        x, vfield = point
        # the translation matrix of V minus the identity is V as a tangent vector
        v = vfield - np.eye(vfield.shape[-1])
        return F.evaluate((x,), [(v,), (frame[0][0],)])

    return CallableForm(fn, degree=1, arity=2)


@dataclass(frozen=True)
class HolonomyDerivativeResult:
    fd_derivative: float
    fiber_integral: float
    defect: float
    extra: dict = field(default_factory=dict)


def holonomy_derivative_check(F: Form, family: Callable[[float, np.ndarray], np.ndarray], t0: float,
                              n_points: int = 400, layers: int = 24,
                              step: float = 1e-4) -> HolonomyDerivativeResult:
    """Derivative of the log-holonomy along a loop family vs the fiber integral of ``F``.

    Args:
        F: closed 2-form on ``R^3 minus 0`` with integral flux through S^2.
        family: ``family(t, s)`` returns loop points ``(len(s), 3)`` for
            ``s`` in ``[0, 2 pi)``.
        t0: parameter at which the derivative is taken.
        n_points: loop discretization.
        layers: radial layers of the caps.
        step: finite-difference step in ``t``.

    Returns:
        ``fd_derivative = (1 / 2 pi i) d/dt log Hol`` from holonomies at
        ``t0 +- step``, ``fiber_integral = int_S^1 F(d_t gamma, d_s gamma) ds``
        and their absolute difference.
    """
    s = TWO_PI * np.arange(n_points) / n_points
    hol = [np.exp(1j * TWO_PI * loop_flux(F, family(t0 + sg * step, s), layers)) for sg in (1.0, -1.0)]
    fd = float(np.angle(hol[0] / hol[1]) / (TWO_PI * 2 * step))
    gamma = family(t0, s)
    vfield = (family(t0 + step, s) - family(t0 - step, s)) / (2 * step)
    cm = circle_mesh(n_points)
    loop_map = GroupMesh(cm, groups.translation(gamma), VECTOR)
    var_map = GroupMesh(cm, groups.translation(vfield), VECTOR)
    fiber = integrate_pullback(_variation_form(F), StackMap(loop_map, var_map))
    return HolonomyDerivativeResult(fd, fiber, abs(fd - fiber))


def latitude_family(t: float, s: np.ndarray) -> np.ndarray:
    """Latitude circle at polar angle ``t`` on the unit sphere (counterclockwise seen from the north)."""
    return np.stack([np.sin(t) * np.cos(s), np.sin(t) * np.sin(s), np.full_like(s, np.cos(t))], axis=-1)
