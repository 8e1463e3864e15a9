import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gerbecalc import branes, groups
from gerbecalc.groups import GroupElement


def _elem(v):
    return GroupElement(groups.expm(groups.su2_algebra(np.asarray(v, dtype=float))))


H = _elem([0.3, -0.8, 0.5])
E = groups.SU2_BASIS


def test_same_class():
    x = groups.random_su2(np.random.default_rng(0))
    assert branes.same_class(H, x @ H.matrix @ groups.inv(x))
    assert not branes.same_class(H, _elem([0.3, -0.8, 0.6]))


def test_class_point_validation():
    with pytest.raises(ValueError):
        branes.ConjClassPoint(H, _elem([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        branes.ConjClassPoint(GroupElement(groups.translation(np.ones(3)), groups.VECTOR),
                              GroupElement(groups.translation(np.ones(3)), groups.VECTOR))


def test_conj_tangent_vanishes_for_zero_and_central(rng):
    p = branes.random_class_point(rng, H)
    assert np.abs(branes.conj_tangent(p, np.zeros((2, 2)))).max() == 0.0
    central = branes.class_point(GroupElement(-np.eye(2, dtype=complex)), groups.random_su2(rng))
    assert central.is_central
    assert np.abs(branes.conj_tangent(central, groups.random_su2_algebra(rng))).max() < 1e-15


def test_conj_tangent_stays_in_class_to_second_order(rng):
    p = branes.random_class_point(rng, H)
    x = groups.random_su2_algebra(rng)
    v = branes.conj_tangent(p, x)
    target = np.linalg.eigvals(H.matrix)

    def drift(t):
        w = np.linalg.eigvals(p.g.matrix + t * v)
        return max(np.abs(target - x).min() for x in w)

    drift = [drift(1e-2), drift(1e-3)]
    assert drift[0] / drift[1] == pytest.approx(100, rel=0.05)
    curve = groups.expm(1e-6 * x) @ p.g.matrix @ groups.expm(-1e-6 * x)
    assert np.abs((curve - p.g.matrix) / 1e-6 - v).max() < 1e-5


def test_cayley_operator_is_rotation_by_cotangent():
    # g = exp(theta E3): Ad_{g^-1} rotates the (E1, E2) plane by an angle alpha;
    # there (R + 1)(R - 1)^{-1} = -cot(alpha / 2) J with J the quarter turn in the sense of R
    theta = 0.7
    g = groups.expm(theta * E[2])
    gi = groups.inv(g)
    r_e1 = gi @ E[0] @ g
    cos_a = np.real(np.trace(r_e1 @ groups.dagger(E[0]))) / 2
    sin_a = np.real(np.trace(r_e1 @ groups.dagger(E[1]))) / 2
    alpha = np.arctan2(sin_a, cos_a)
    factor = -1.0 / np.tan(alpha / 2)
    assert np.abs(branes.cayley_operator(g, E[0]) - factor * E[1]).max() < 1e-12
    assert np.abs(branes.cayley_operator(g, E[1]) + factor * E[0]).max() < 1e-12
    with pytest.raises(branes.NotClassTangentError):
        branes.cayley_operator(g, E[2])


def test_omega_on_basis_tangents(unit_pairing):
    theta = 0.7
    h = GroupElement(groups.expm(theta * E[2]))
    p = branes.ConjClassPoint(h, h)
    g = h.matrix
    alpha = np.angle(np.exp(-2j * theta))  # Ad_{g^-1} turns E1 towards E2 by -2 theta
    t = -1.0 / np.tan(alpha / 2)
    pair = unit_pairing(E[0], E[0])
    expected = 2 * t * pair  # <E1, T E2> - <E2, T E1> = 2 t <E1, E1>
    assert branes.omega_h(p, g @ E[0], g @ E[1], unit_pairing) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(branes.NotClassTangentError):
        branes.omega_h(p, g @ E[2], g @ E[0], unit_pairing)


@given(st.integers(0, 2 ** 32 - 1))
def test_omega_is_alternating_and_bilinear(seed):
    rng = np.random.default_rng(seed)
    p = branes.random_class_point(rng, H)
    x1, x2, x3 = (groups.random_su2_algebra(rng) for _ in range(3))
    v1, v2, v3 = (branes.conj_tangent(p, x) for x in (x1, x2, x3))
    w = branes.omega_h
    assert w(p, v1, v2) == pytest.approx(-w(p, v2, v1), abs=1e-12)
    assert abs(w(p, v1, v1)) < 1e-12
    a, b = rng.normal(size=2)
    assert w(p, a * v1 + b * v3, v2) == pytest.approx(a * w(p, v1, v2) + b * w(p, v3, v2), abs=1e-10)


def test_omega_is_conjugation_invariant(rng):
    for _ in range(10):
        x, a = groups.random_su2(rng), groups.random_su2(rng)
        p, pa = branes.class_point(H, x), branes.class_point(H, a @ x)
        y1, y2 = groups.random_su2_algebra(rng), groups.random_su2_algebra(rng)
        v1, v2 = branes.conj_tangent(p, y1), branes.conj_tangent(p, y2)
        ai = groups.inv(a)
        assert branes.omega_h(pa, a @ v1 @ ai, a @ v2 @ ai) == pytest.approx(branes.omega_h(p, v1, v2), abs=1e-10)


def test_omega_vanishes_on_central_class(rng):
    p = branes.class_point(GroupElement(np.eye(2, dtype=complex)), groups.random_su2(rng))
    assert branes.omega_h(p, np.zeros((2, 2)), np.zeros((2, 2))) == 0.0


# ---------------------------------------------------------------------------


def _tangent_pair(rng, q):
    return branes.biconj_tangent(q, groups.random_su2_algebra(rng), groups.random_su2_algebra(rng))


def test_biconj_point_validation():
    with pytest.raises(ValueError):
        branes.BiconjPoint(H, H, H, _elem([0.1, 0.0, 0.0]))


def test_equal_representatives_give_zero_curvature(rng):
    q = branes.random_biconj_point(rng, H, H)
    val = branes.bibrane_curvature(q, _tangent_pair(rng, q), _tangent_pair(rng, q), k=2)
    assert abs(val.def4_value) < 1e-14 and abs(val.target_value) < 1e-14


@pytest.mark.parametrize("h2", [GroupElement(np.eye(2, dtype=complex)), _elem([1.1, 0.2, -0.4])])
def test_two_expressions_agree(h2):
    res = branes.bibrane_symmetry_check(H, h2, k=3, n_samples=20, rng=np.random.default_rng(9))
    assert res.max_defect < 1e-12
    assert res.max_value > 1e-3


def test_curvature_is_level_linear(rng):
    q = branes.random_biconj_point(rng, H, _elem([0.2, 0.2, 0.9]))
    t1, t2 = _tangent_pair(rng, q), _tangent_pair(rng, q)
    v1 = branes.bibrane_curvature(q, t1, t2, k=1).target_value
    v3 = branes.bibrane_curvature(q, t1, t2, k=3).target_value
    assert v3 == pytest.approx(3 * v1, rel=1e-12)


def test_curvature_rejects_non_tangent_pair(rng):
    q = branes.random_biconj_point(rng, H, _elem([0.2, 0.2, 0.9]))
    v, w = _tangent_pair(rng, q)
    with pytest.raises(branes.NotClassTangentError):
        branes.bibrane_curvature(q, (v, w + q.g2.matrix @ E[0]), _tangent_pair(rng, q))
