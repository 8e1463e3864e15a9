"""Chern–Simons forms, actions and transition identities on trivial bundles.

The invariant polynomial attached to a level-``k`` pairing ``<,>_k`` is
``P = -(1/2) <,>_k``.  With this choice ``TP(theta) = k eta`` for the
Maurer–Cartan form, so gauge shifts by a map ``h`` of degree ``m`` change
the action by ``+k m``.  Bundles are trivial: ``E = M x G`` with connection
``A_E = Ad_{g^{-1}} a + theta_g`` for a base form ``a``.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import groups
from .forms import (ALGEBRA, Bracket, CallableForm, ExtD, Form, IndexMap, InvariantPairing, Pairing,
                    Pullback, Scale, Sum, ThetaRight, eta, rho)
from .groups import SU2, VECTOR, inv
from .mesh import GroupMesh, MeshMap, QuadratureRule, SimplicialMesh, StackMap, integrate_pullback, quadrature_rule

# ---------------------------------------------------------------------------
# connections


def chart_coordinates(g: np.ndarray, tag: str) -> np.ndarray:
    """Chart coordinates of base points: ``R^d`` for translations, quaternions for SU(2)."""
    if tag == VECTOR:
        return groups.translation_coordinates(g)
    if tag == SU2:
        return groups.su2_to_quaternion(g)
    raise ValueError(f"unsupported base group {tag!r}")


def chart_differential(v: np.ndarray, tag: str) -> np.ndarray:
    """Coordinate differentials ``dx_i(v)`` of tangent vectors (both charts are linear)."""
    return chart_coordinates(v, tag)


@dataclass
class ConnectionData:
    """Connection ``a`` on the trivial bundle ``M x G`` with a level-``k`` pairing.

    Attributes:
        a: algebra-valued 1-form on the base (arity 1).
        pairing: ``<,>_k``; the invariant polynomial is ``P = -(1/2) <,>_k``.
        base_tag: group realizing the base chart (``VectorGroupRd`` or ``SU2``).
    """

    a: Form
    pairing: InvariantPairing
    base_tag: str = VECTOR

    def __post_init__(self):
        if self.a.kind != ALGEBRA or self.a.degree != 1 or self.a.arity != 1:
            raise ValueError("a must be an algebra-valued 1-form on the base")

    @property
    def level(self) -> float:
        return self.pairing.level

    @property
    def polynomial(self) -> InvariantPairing:
        return self.pairing.with_level(-0.5 * self.pairing.level)

    def with_level(self, level: float) -> "ConnectionData":
        return ConnectionData(self.a, self.pairing.with_level(level), self.base_tag)

    def algebra_defect(self, point, frame) -> float:
        """Distance of the values of ``a`` from su(2) (skew-Hermitian, traceless)."""
        x = self.a.evaluate(point, frame)
        skew = np.abs(x + np.conj(np.swapaxes(x, -1, -2))).max()
        tr = np.abs(np.trace(x, axis1=-2, axis2=-1)).max()
        return float(max(skew, tr))


def zero_connection(pairing: InvariantPairing, base_tag: str = VECTOR) -> ConnectionData:
    return ConnectionData(CallableForm(lambda p, f: np.zeros(p[0].shape[:1] + (2, 2), dtype=complex), 1, 1, ALGEBRA),
                          pairing, base_tag)


def coefficient_connection(terms: Sequence[tuple[Callable, int, int]], pairing: InvariantPairing,
                           base_tag: str = VECTOR) -> ConnectionData:
    """``a = sum_t f_t(x) E_{b_t} dx_{i_t}`` with ``E_b = i sigma_b``.

    Args:
        terms: triples ``(f, basis index, coordinate index)``; ``f`` maps an
            array of chart coordinates ``(B, d)`` to ``(B,)``.
        pairing: level-``k`` pairing.
        base_tag: base chart group.
    """
    terms = [(f, int(b), int(i)) for f, b, i in terms]

    def fn(point, frame):
        x = chart_coordinates(point[0], base_tag)
        dx = chart_differential(frame[0][0], base_tag)
        out = np.zeros(x.shape[:1] + (2, 2), dtype=complex)
        for f, b, i in terms:
            out += (np.asarray(f(x), dtype=float) * dx[:, i])[:, None, None] * groups.SU2_BASIS[b]
        return out

    return ConnectionData(CallableForm(fn, 1, 1, ALGEBRA), pairing, base_tag)


# ---------------------------------------------------------------------------
# connection specification files

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sin": np.sin, "cos": np.cos}
_CONSTS = {"pi": math.pi}


def parse_coefficient(text: str, variables: Sequence[str]) -> Callable:
    """Compile a polynomial/trigonometric expression in the chart coordinates.

    Allowed: numbers, ``pi``, the given variable names, ``+ - * / **`` and
    ``sin``/``cos``.

    Raises:
        ValueError: on any other syntax.
    """
    tree = ast.parse(text, mode="eval")

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda x: v
        if isinstance(node, ast.Name):
            if node.id in _CONSTS:
                v = _CONSTS[node.id]
                return lambda x: v
            if node.id in variables:
                j = list(variables).index(node.id)
                return lambda x: x[:, j]
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, l, r = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x: op(l(x), r(x))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda x: sign * inner(x)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            fn, inner = _FUNCS[node.func.id], build(node.args[0])
            return lambda x: fn(inner(x))
        raise ValueError(f"unsupported expression in {text!r}")

    f = build(tree)
    return lambda x: np.broadcast_to(np.asarray(f(np.asarray(x, dtype=float)), dtype=float), np.shape(x)[:1])


BASES = {"R3": (VECTOR, ("x", "y", "z")), "T3": (VECTOR, ("x", "y", "z")),
         "S3": (SU2, ("q0", "q1", "q2", "q3"))}


def connection_from_spec(spec: dict, pairing: InvariantPairing | None = None) -> ConnectionData:
    """Build a connection from a specification dictionary.

    Format: ``{"base": "R3" | "T3" | "S3", "level": k, "terms": [{"coeff":
    "<expr>", "basis": 0..2, "dx": coordinate index}, ...]}``.  Coordinates
    are ``x, y, z`` on ``R3``/``T3`` and the quaternion components ``q0..q3``
    on ``S3``.

    Raises:
        ValueError: on malformed input.
    """
    base = spec.get("base", "R3")
    if base not in BASES:
        raise ValueError(f"unknown base {base!r}")
    tag, names = BASES[base]
    level = spec.get("level", 1)
    pairing = (pairing or InvariantPairing()).with_level(level)
    terms = []
    for t in spec.get("terms", []):
        b, i = int(t["basis"]), int(t["dx"])
        if not 0 <= b < 3 or not 0 <= i < len(names):
            raise ValueError(f"term {t} out of range")
        terms.append((parse_coefficient(str(t["coeff"]), names), b, i))
    return coefficient_connection(terms, pairing, tag)


def read_connection(path, pairing: InvariantPairing | None = None) -> ConnectionData:
    with open(path) as fh:
        return connection_from_spec(json.load(fh), pairing)


# ---------------------------------------------------------------------------
# forms


def tp_form(c: ConnectionData, step: float = 1e-4) -> Form:
    """Chern–Simons 3-form ``TP(a) = P(a ^ da) + (2/3) P(a ^ [a ^ a])``."""
    P = c.polynomial
    return Sum([Pairing(P, c.a, ExtD(c.a, step)), Scale(2.0 / 3.0, Pairing(P, c.a, Bracket(c.a, c.a)))])


def curvature_form(c: ConnectionData, step: float = 1e-4) -> Form:
    """``Omega = da + [a ^ a]``."""
    return Sum([ExtD(c.a, step), Bracket(c.a, c.a)])


def pontryagin_form(c: ConnectionData, step: float = 1e-4) -> Form:
    """``P(Omega ^ Omega)``."""
    om = curvature_form(c, step)
    return Pairing(c.polynomial, om, om)


def bundle_connection(c: ConnectionData) -> Form:
    """``A_E = g^{-1} a g + g^{-1} dg`` as a form on ``M x G`` (arity 2: base, fibre)."""
    a = c.a

    def fn(point, frame):
        x, g = point
        v, w = frame[0]
        gi = inv(g)
        return gi @ a.evaluate((x,), [(v,)]) @ g + gi @ w

    return CallableForm(fn, 1, 2, ALGEBRA)


def bundle_tp_form(c: ConnectionData, step: float = 1e-4) -> Form:
    """``TP(A_E)`` as a form on ``M x G``."""
    A = bundle_connection(c)
    P = c.polynomial
    return Sum([Pairing(P, A, ExtD(A, step)), Scale(2.0 / 3.0, Pairing(P, A, Bracket(A, A)))])


# ---------------------------------------------------------------------------
# actions


def cs_action(base: MeshMap, c: ConnectionData, rule: QuadratureRule | None = None, step: float = 1e-4) -> float:
    """``int_M s^* TP(A)`` for the identity section over a closed 3-mesh chart.

    Raises:
        ValueError: if the mesh is not closed.
    """
    if not base.mesh.is_closed:
        raise ValueError("the Chern-Simons action needs a closed 3-mesh")
    return integrate_pullback(tp_form(c, step), base, rule)


@dataclass
class GaugeShift:
    delta: float
    nearest_integer: int
    nearest_int_defect: float
    action: float
    action_gauged: float


def gauge_shift_check(base: MeshMap, c: ConnectionData, h: MeshMap, rule: QuadratureRule | None = None,
                      step: float = 1e-4) -> GaugeShift:
    """``Z(A^h) - Z(A)`` with ``A^h = Ad_{h^{-1}} A + h^* theta``.

    ``Z(A^h)`` is the integral of ``TP(A_E)`` along the section
    ``x -> (x, h(x))`` of ``M x G``.  Convention: for ``A = 0`` the shift is
    ``+k int h^* eta``, i.e. ``+k deg h``.
    """
    if not base.mesh.is_closed:
        raise ValueError("the Chern-Simons action needs a closed 3-mesh")
    z0 = integrate_pullback(tp_form(c, step), base, rule)
    z1 = integrate_pullback(bundle_tp_form(c, step), StackMap(base, h), rule)
    delta = z1 - z0
    m = int(np.rint(delta))
    return GaugeShift(delta, m, abs(delta - m), z0, z1)


def cone_filling(boundary: SimplicialMesh) -> SimplicialMesh:
    """Cone over a closed 3-mesh in ``R^4`` from the origin; its boundary is ``boundary``.

    Raises:
        ValueError: if the mesh is not a closed 3-mesh with 4-dimensional coordinates.
    """
    if boundary.dim != 3 or not boundary.is_closed:
        raise ValueError("the filling needs a closed 3-mesh")
    if boundary.coords is None or boundary.coords.shape[1] != 4:
        raise ValueError("the filling needs vertex coordinates in R^4")
    apex = boundary.n_vertices
    simp = np.column_stack([np.full(len(boundary), apex), boundary.simplices])
    coords = np.vstack([boundary.coords, np.zeros((1, 4))])
    # face 0 of [apex, a, b, c, d] is [a, b, c, d] with sign +1, so signs carry over
    return SimplicialMesh(4, simp, boundary.signs, apex + 1, coords, boundary.name + "/cone")


@dataclass
class FillingResult:
    bulk: float
    boundary: float
    defect: float


def filling_check(c: ConnectionData, boundary: SimplicialMesh, order: int = 6,
                  step: float = 1e-4) -> FillingResult:
    """Compare ``int_B P(Omega ^ Omega)`` over the cone filling with ``int_{dB} TP(A)``.

    For a trivial bundle over the 4-ball the two agree by Stokes and
    ``d TP(A) = P(Omega ^ Omega)``; with polynomial coefficients the
    quadrature is exact for ``order`` high enough and the defect is
    finite-difference limited.

    Args:
        c: connection on a 4-dimensional vector chart.
        boundary: closed 3-mesh with coordinates in ``R^4``.
        order: quadrature order for both integrals.
        step: finite-difference step.
    """
    if c.base_tag != VECTOR:
        raise ValueError("the filling check needs a connection on a vector chart")
    ball = cone_filling(boundary)
    bulk = integrate_pullback(pontryagin_form(c, step), GroupMesh(ball, groups.translation(ball.coords), VECTOR),
                              quadrature_rule(4, order))
    bnd = integrate_pullback(tp_form(c, step), GroupMesh(boundary, groups.translation(boundary.coords), VECTOR),
                             quadrature_rule(3, order))
    return FillingResult(bulk, bnd, abs(bulk - bnd))


# ---------------------------------------------------------------------------
# transition identities on E^[2] = M x G^2 and E^[3] = M x G^3


def _slots(arity: int, *slots: int) -> IndexMap:
    return IndexMap(arity, tuple((s,) for s in slots))


def transition_forms(c: ConnectionData, step: float = 1e-4) -> dict:
    """Forms entering the transition identities.

    Points of ``E^[2]`` are ``(m, a, b)`` with transition ``g = a^{-1} b``;
    points of ``E^[3]`` are ``(m, a, b, c)``.  Returns the 3-forms
    ``Delta TP`` and ``g^* H + d omega`` on ``E^[2]`` with ``H = k eta`` and
    ``omega = -P(g^* theta_bar ^ p_1^* A_E)``, and the 2-forms ``g^* rho``
    and ``Delta omega`` on ``E^[3]`` with ``rho`` the level-``k`` 2-form.
    """
    P = c.polynomial
    A = bundle_connection(c)
    tp = bundle_tp_form(c, step)
    g12 = IndexMap(3, ((-2, 3),))
    delta_tp = Sum([Pullback(_slots(3, 1, 3), tp), Scale(-1.0, Pullback(_slots(3, 1, 2), tp))])
    omega = Scale(-1.0, Pairing(P, Pullback(g12, ThetaRight(0, 1)), Pullback(_slots(3, 1, 2), A)))
    gH = Pullback(g12, eta(c.pairing))
    rhs_tp = Sum([gH, ExtD(omega, step)])
    g_pair = IndexMap(4, ((-2, 3), (-3, 4)))
    g_rho = Pullback(g_pair, rho(c.pairing))
    # Delta on E^[3] -> E^[2]: drop a, drop b, drop c with signs +, -, +
    d_omega = Sum([Pullback(_slots(4, 1, 3, 4), omega), Scale(-1.0, Pullback(_slots(4, 1, 2, 4), omega)),
                   Pullback(_slots(4, 1, 2, 3), omega)])
    return {"delta_tp": delta_tp, "rhs_tp": rhs_tp, "omega": omega, "g_rho": g_rho, "delta_omega": d_omega}


def random_base_points(rng: np.random.Generator, tag: str, batch: int, dim: int = 3, scale: float = 1.0):
    if tag == VECTOR:
        return groups.translation(rng.uniform(-scale, scale, (batch, dim)))
    return groups.random_su2(rng, batch)


def random_tangents(rng: np.random.Generator, g: np.ndarray, tag: str) -> np.ndarray:
    """Random tangent vectors ``g X`` at a batch of points."""
    if tag == VECTOR:
        d = g.shape[-1] - 1
        X = np.zeros_like(g)
        X[..., :d, d] = rng.standard_normal(g.shape[:1] + (d,))
        return g @ X
    return g @ groups.random_su2_algebra(rng, g.shape[0])


@dataclass
class TransitionResult:
    defect_tp: float
    defect_rho: float
    scale_tp: float
    scale_rho: float


def transition_identity_check(c: ConnectionData, n_samples: int = 50, rng: np.random.Generator | None = None,
                              step: float = 1e-4) -> TransitionResult:
    """Max pointwise defects of ``Delta TP = g^* H + d omega`` and ``g^* rho + Delta omega = 0``."""
    rng = rng or np.random.default_rng(0)
    forms = transition_forms(c, step)
    m = random_base_points(rng, c.base_tag, n_samples)
    pt3 = (m,) + tuple(groups.random_su2(rng, n_samples) for _ in range(2))
    fr3 = [(random_tangents(rng, m, c.base_tag),) + tuple(random_tangents(rng, g, SU2) for g in pt3[1:])
           for _ in range(3)]
    lhs = forms["delta_tp"].evaluate(pt3, fr3)
    rhs = forms["rhs_tp"].evaluate(pt3, fr3)
    pt4 = (m,) + tuple(groups.random_su2(rng, n_samples) for _ in range(3))
    fr4 = [(random_tangents(rng, m, c.base_tag),) + tuple(random_tangents(rng, g, SU2) for g in pt4[1:])
           for _ in range(2)]
    a = forms["g_rho"].evaluate(pt4, fr4)
    b = forms["delta_omega"].evaluate(pt4, fr4)
    return TransitionResult(float(np.abs(lhs - rhs).max()), float(np.abs(a + b).max()),
                            float(np.abs(lhs).max()), float(np.abs(a).max()))


def pontryagin_defect(c: ConnectionData, n_samples: int = 50, rng: np.random.Generator | None = None,
                      step: float = 1e-4, dim: int = 4) -> float:
    """Max pointwise ``|d TP(a) - P(Omega ^ Omega)|`` at random points and 4-frames."""
    if c.base_tag != VECTOR:
        raise ValueError("4-forms vanish on S^3; use a 4-dimensional vector chart")
    rng = rng or np.random.default_rng(0)
    g = groups.translation(rng.uniform(-1, 1, (n_samples, dim)))
    frame = [(random_tangents(rng, g, VECTOR),) for _ in range(4)]
    lhs = ExtD(tp_form(c, step), step).evaluate((g,), frame)
    rhs = pontryagin_form(c, step).evaluate((g,), frame)
    return float(np.abs(lhs - rhs).max())


def random_polynomial_connection(rng: np.random.Generator, pairing: InvariantPairing, dim: int = 4,
                                 scale: float = 0.5) -> ConnectionData:
    """Random connection with quadratic coefficients in every (basis, coordinate) slot."""
    terms = []
    for b in range(3):
        for i in range(dim):
            c0, lin, quad = rng.normal(0, scale), rng.normal(0, scale, dim), rng.normal(0, scale, (dim, dim))
            terms.append((lambda x, c0=c0, lin=lin, quad=quad: c0 + x @ lin + np.einsum("bi,ij,bj->b", x, quad, x),
                          b, i))
    return coefficient_connection(terms, pairing, VECTOR)


def s3_base_map(resolution: int = 4) -> GroupMesh:
    """Identity chart of ``S^3 = SU(2)``."""
    from .mesh import identity_s3_map
    return identity_s3_map(resolution)
