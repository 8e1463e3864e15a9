import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gerbecalc import groups
from gerbecalc.groups import PAULI, GroupElement, left_mc, right_mc

seeds = st.integers(0, 2**32 - 1)


def test_left_mc_identity_returns_vector():
    x = groups.su2_algebra([0.3, -1.2, 0.5])
    assert np.allclose(left_mc(GroupElement(np.eye(2)), x).matrix, x)


def test_left_mc_diagonal_example():
    g = GroupElement(np.diag([1j, -1j]))
    x = 1j * PAULI[0]
    assert np.allclose(left_mc(g, g.matrix @ x).matrix, x, atol=1e-14)


def test_right_mc_identity_returns_vector():
    x = groups.su2_algebra([0.3, -1.2, 0.5])
    assert np.allclose(right_mc(GroupElement(np.eye(2)), x).matrix, x)


@given(seeds)
def test_mc_forms_invariance_and_adjoint_relation(seed):
    rng = np.random.default_rng(seed)
    g = GroupElement(groups.random_su2(rng))
    x = groups.random_su2_algebra(rng)
    assert np.allclose(left_mc(g, g.matrix @ x).matrix, x, atol=1e-12)
    assert np.allclose(right_mc(g, x @ g.matrix).matrix, x, atol=1e-12)
    v = g.matrix @ x
    assert np.allclose(right_mc(g, v).matrix, groups.ad(g.matrix, left_mc(g, v).matrix), atol=1e-12)


def test_left_mc_rejects_non_tangent():
    g = GroupElement(np.eye(2))
    with pytest.raises(groups.NotTangentError):
        left_mc(g, np.eye(2))


def test_group_element_membership_checked():
    with pytest.raises(ValueError):
        GroupElement(2 * np.eye(2))
    with pytest.raises(ValueError):
        GroupElement(np.eye(2), "NotAGroup")


@given(seeds)
def test_exp_log_roundtrip(seed):
    rng = np.random.default_rng(seed)
    x = groups.random_su2_algebra(rng, scale=0.8)
    assert np.allclose(groups.logm(groups.expm(x)), x, atol=1e-10)


@given(seeds)
def test_quaternion_roundtrip(seed):
    rng = np.random.default_rng(seed)
    g = groups.random_su2(rng, 5)
    assert np.allclose(groups.su2_from_quaternion(groups.su2_to_quaternion(g)), g, atol=1e-14)
    assert groups.membership_error(g, groups.SU2) < 1e-12


def test_translation_group_roundtrip():
    x = np.array([[0.5, -1.0, 2.0]])
    g = groups.translation(x)
    assert np.allclose(groups.translation_coordinates(g), x)
    assert np.allclose(groups.translation_coordinates(g @ g), 2 * x)


def test_unitary_sampler_is_unitary(rng):
    u = groups.random_unitary(rng, 3, 4)
    assert groups.membership_error(u, groups.UNITARY) < 1e-12
