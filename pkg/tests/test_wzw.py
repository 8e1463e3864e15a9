import numpy as np
import pytest

from gerbecalc import groups, mesh, wzw
from gerbecalc.mesh import GroupMesh, ProductMap
from gerbecalc.wzw import MickelssonElement


@pytest.fixture(scope="module")
def sphere():
    return mesh.sphere_mesh(8)


def _inverse(phi: GroupMesh) -> GroupMesh:
    return GroupMesh(phi.mesh, np.linalg.inv(phi.values[0]))


def test_constant_map_has_trivial_holonomy(sphere, pairing):
    g = groups.random_su2(np.random.default_rng(3))
    hol = wzw.wz_action(GroupMesh(sphere, np.repeat(g[None], sphere.n_vertices, 0)), 3, pairing)
    assert hol.value == 1.0
    assert hol.extension_id == "const"


def test_orientation_reversal_conjugates(sphere, rng, pairing):
    phi = wzw.random_surface_map(sphere, rng)
    a = wzw.wz_action(phi, 1, pairing, rng=np.random.default_rng(1))
    b = wzw.wz_action(phi.reversed(), 1, pairing, rng=np.random.default_rng(1))
    assert abs(b.value - np.conj(a.value)) < 1e-9


def test_holonomy_is_level_power(sphere, rng, pairing):
    phi = wzw.random_surface_map(sphere, rng)
    h1 = wzw.wz_action(phi, 1, pairing).value
    h3 = wzw.wz_action(phi, 3, pairing).value
    assert abs(h3 - h1 ** 3) < 1e-9


def test_extensions_differ_by_integers(sphere, pairing):
    phi = wzw.random_surface_map(sphere, np.random.default_rng(11))
    vals = []
    for seed in range(3):
        v, tag = wzw.wz_integral(phi, pairing, rng=np.random.default_rng(100 + seed))
        vals.append(v)
        assert tag.startswith("cone(")
    for v in vals[1:]:
        assert wzw.frac_distance(v - vals[0]) < 1e-3


def test_wz_rejects_open_surface(rng, pairing):
    with pytest.raises(ValueError):
        wzw.wz_integral(wzw.random_surface_map(mesh.disc_mesh(3), rng), pairing)


def test_pw_with_constant_factor_is_exact(sphere, rng, pairing):
    phi = wzw.random_surface_map(sphere, rng)
    const = GroupMesh(sphere, np.repeat(groups.random_su2(rng)[None], sphere.n_vertices, 0))
    res = wzw.polyakov_wiegmann_check(phi, const, 2, pairing)
    assert res.defect < 1e-9
    assert abs(res.rho_integral) < 1e-12


def test_pw_with_inverse_pair(sphere, rng, pairing):
    phi = wzw.random_surface_map(sphere, rng, amplitude=0.7)
    res = wzw.polyakov_wiegmann_check(phi, _inverse(phi), 1, pairing)
    assert res.defect < 1e-2


@pytest.mark.parametrize("level", [1, 2])
def test_pw_generic_pair(sphere, level, pairing):
    rng = np.random.default_rng(40 + level)
    p1 = wzw.random_surface_map(sphere, rng, amplitude=0.7)
    p2 = wzw.random_surface_map(sphere, rng, amplitude=0.7)
    res = wzw.polyakov_wiegmann_check(p1, p2, level, pairing, rng=rng)
    assert res.defect < 2e-2
    assert abs(res.rho_integral) > 1e-3  # the correction term is not trivially zero


def test_pw_rejects_different_meshes(rng, pairing):
    with pytest.raises(ValueError):
        wzw.polyakov_wiegmann_check(wzw.random_surface_map(mesh.sphere_mesh(3), rng),
                                    wzw.random_surface_map(mesh.sphere_mesh(4), rng), 1, pairing)


# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def disc():
    return mesh.disc_mesh(6)


def _element(disc, rng, z=1.0 + 0j, level=2):
    return MickelssonElement(wzw.random_surface_map(disc, rng, amplitude=0.8), z, level)


def test_identity_is_neutral(disc, rng, pairing):
    e = _element(disc, rng, np.exp(0.7j))
    one = wzw.me_identity(disc, 2)
    for prod in (wzw.me_product(one, e, pairing), wzw.me_product(e, one, pairing)):
        assert abs(prod.z - e.z) < 1e-12


def test_associator_is_trivial(disc, pairing):
    rng = np.random.default_rng(8)
    e1, e2, e3 = (_element(disc, rng, np.exp(1j * t)) for t in (0.1, 0.2, 0.3))
    assert abs(wzw.me_associator(e1, e2, e3, pairing) - 1) < 1e-9


def test_inverse_product_has_constant_disc(disc, rng, pairing):
    e = _element(disc, rng)
    prod = wzw.me_product(e, wzw.me_inverse_disc(e), pairing)
    assert isinstance(prod.disc, ProductMap)
    corners = prod.disc.evaluate(np.arange(len(disc)).repeat(3), np.tile(np.eye(3), (len(disc), 1)))[0]
    assert np.abs(corners - np.eye(2)).max() < 1e-12


def test_level_mismatch_rejected(disc, rng, pairing):
    with pytest.raises(ValueError):
        wzw.me_product(_element(disc, rng, level=1), _element(disc, rng, level=2), pairing)


def test_unit_modulus_enforced(disc, rng):
    with pytest.raises(ValueError):
        _element(disc, rng, z=1.1)


def test_equivalence_reflexive_and_phase_sensitive(disc, rng, pairing):
    e = _element(disc, rng, np.exp(0.4j))
    assert wzw.me_equal(e, e, pairing=pairing)
    shifted = MickelssonElement(e.disc, e.z * np.exp(2j * np.pi * 0.3), e.level)
    assert not wzw.me_equal(e, shifted, pairing=pairing)


def test_equivalence_across_the_equator(pairing):
    # upper and lower hemispheres of the great 2-sphere {q0 = 0}; the glued
    # sphere bounds half of SU(2), so at level 1 the phases differ by -1
    d = mesh.disc_mesh(10)
    z = np.sqrt(np.maximum(0.0, 1 - np.sum(d.coords ** 2, axis=1)))
    z[np.unique(d.boundary_chain()[0])] = 0.0
    up = GroupMesh(d, groups.su2_from_quaternion(np.column_stack([np.zeros(len(z)), d.coords, z])))
    down = GroupMesh(d, groups.su2_from_quaternion(np.column_stack([np.zeros(len(z)), d.coords, -z])))
    e1 = MickelssonElement(up, 1.0 + 0j, 1)
    assert wzw.me_equal(e1, MickelssonElement(down, -1.0 + 0j, 1), tol=1e-2, pairing=pairing)
    assert not wzw.me_equal(e1, MickelssonElement(down, 1.0 + 0j, 1), tol=1e-2, pairing=pairing)


# ---------------------------------------------------------------------------


@pytest.mark.parametrize("t0", [0.5, 1.2, 2.3])
def test_latitude_holonomy_derivative(t0):
    res = wzw.holonomy_derivative_check(wzw.monopole_form(1.0), wzw.latitude_family, t0, n_points=200, layers=12)
    assert res.defect < 1e-5
    assert res.fiber_integral == pytest.approx(np.sin(t0) / 2, abs=1e-4)


def test_charge_two_doubles_derivative():
    a = wzw.holonomy_derivative_check(wzw.monopole_form(1.0), wzw.latitude_family, 0.9, n_points=200, layers=12)
    b = wzw.holonomy_derivative_check(wzw.monopole_form(2.0), wzw.latitude_family, 0.9, n_points=200, layers=12)
    assert b.fiber_integral == pytest.approx(2 * a.fiber_integral, rel=1e-12)


def test_stationary_family_has_zero_derivative():
    res = wzw.holonomy_derivative_check(wzw.monopole_form(), lambda t, s: wzw.latitude_family(1.0, s), 0.3,
                                        n_points=100, layers=8)
    assert abs(res.fd_derivative) < 1e-9
    assert abs(res.fiber_integral) < 1e-12


def test_latitude_flux_matches_solid_angle():
    s = 2 * np.pi * np.arange(300) / 300
    flux = wzw.loop_flux(wzw.monopole_form(), wzw.latitude_family(1.1, s), layers=16)
    assert flux == pytest.approx((1 - np.cos(1.1)) / 2, abs=1e-4)


def test_cap_through_pole_rejected():
    loop = np.array([[0.0, 0.0, -1.0], [1.0, 0.0, -1.0], [0.0, 1.0, -1.0]])
    with pytest.raises(ValueError):
        wzw.cap_mesh(loop, apex=np.array([0.0, 0.0, 1.0]))
