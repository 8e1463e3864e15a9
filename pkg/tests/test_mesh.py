import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gerbecalc import forms, groups, mesh, wzw
from gerbecalc.mesh import GroupMesh, SimplicialMesh


def _signed_preimage_count(gm: GroupMesh, y: np.ndarray) -> int:
    """Degree of a piecewise map S^3 -> S^3 from signed preimages of the regular value ``y``.

    Each tetrahedron's corner quaternions are projected gnomonically onto the
    tangent space at ``y``; a tetrahedron counts when the projected simplex
    contains the origin, with the sign of its orientation.
    """
    q = groups.su2_to_quaternion(gm.values[0])[gm.mesh.simplices]  # (T, 4, 4)
    basis = np.linalg.svd(y[None])[2][1:]  # orthonormal complement of y
    total = 0
    for tet, s in zip(q, gm.mesh.signs):
        dots = tet @ y
        if np.any(dots <= 0.2):
            continue
        proj = (tet / dots[:, None]) @ basis.T  # (4, 3)
        m = (proj[1:] - proj[0]).T
        det = np.linalg.det(m)
        lam = np.linalg.solve(m, -proj[0])
        if np.all(lam > 0) and lam.sum() < 1:
            total += int(s) * int(np.sign(det))
    return total


def test_constant_map_integrates_to_zero(pairing):
    m = mesh.s3_mesh(3)
    gm = GroupMesh(m, np.repeat(groups.random_su2(np.random.default_rng(0))[None], m.n_vertices, 0))
    assert abs(mesh.integrate_pullback(forms.eta(pairing), gm)) < 1e-15


def test_identity_map_integrates_to_one(pairing):
    assert mesh.integrate_pullback(forms.eta(pairing), mesh.identity_s3_map(6)) == pytest.approx(1.0, abs=1e-3)


def test_squaring_map_degree_matches_preimage_count(pairing):
    ident = mesh.identity_s3_map(6)
    sq = GroupMesh(ident.mesh, ident.values[0] @ ident.values[0])
    y = np.array([0.3, 0.5, -0.6, 0.55])
    y /= np.linalg.norm(y)
    assert _signed_preimage_count(sq, y) == 2
    assert _signed_preimage_count(ident, y) == 1
    assert mesh.integrate_pullback(forms.eta(pairing), sq) == pytest.approx(2.0, abs=1e-2)


def test_reversed_mesh_negates_integral(pairing):
    gm = mesh.identity_s3_map(3)
    a = mesh.integrate_pullback(forms.eta(pairing), gm)
    b = mesh.integrate_pullback(forms.eta(pairing), gm.reversed())
    assert b == -a


def test_integrate_rejects_degree_mismatch(pairing):
    with pytest.raises(ValueError):
        mesh.integrate_pullback(forms.rho(pairing), mesh.identity_s3_map(2))


@pytest.mark.parametrize("builder", [lambda: mesh.s3_mesh(3), lambda: mesh.sphere_mesh(4), lambda: mesh.torus_mesh(3),
                                     lambda: mesh.circle_mesh(7)])
def test_closed_meshes_are_consistent(builder):
    m = builder()
    assert m.check() == []
    assert m.is_closed


def test_sphere_and_disc_topology():
    assert mesh.sphere_mesh(5).euler_characteristic() == 2
    d = mesh.disc_mesh(5)
    assert d.euler_characteristic() == 1
    assert d.check() == []
    assert d.boundary_mesh().check() == []
    assert len(d.boundary_mesh()) == 20


def test_inconsistent_orientation_is_reported():
    m = mesh.sphere_mesh(2)
    signs = m.signs.copy()
    signs[0] *= -1
    bad = SimplicialMesh(2, m.simplices, signs, m.n_vertices, m.coords)
    assert any("orientation" in p for p in bad.check())


def test_repeated_vertex_rejected():
    with pytest.raises(ValueError):
        SimplicialMesh(2, [[0, 0, 1]])


@given(st.integers(1, 3), st.integers(1, 6), st.data())
def test_quadrature_exact_on_monomials(dim, order, data):
    rule = mesh.quadrature_rule(dim, order)
    assert rule.weights.sum() == pytest.approx(1.0 / math.factorial(dim), rel=1e-13)
    total = data.draw(st.integers(0, order))
    cuts = sorted(data.draw(st.lists(st.integers(0, total), min_size=dim, max_size=dim)))
    alpha = np.diff([0] + cuts + [total])
    exact = np.prod([math.factorial(int(a)) for a in alpha]) / math.factorial(total + dim)
    approx = float(np.sum(rule.weights * np.prod(rule.nodes ** alpha, axis=1)))
    assert approx == pytest.approx(exact, rel=1e-11, abs=1e-15)


def test_interpolation_reproduces_corner_values(rng):
    m = mesh.sphere_mesh(3)
    gm = wzw.random_surface_map(m, rng)
    for interp in ("first-vertex-exponential", "projective-linear"):
        g2 = GroupMesh(m, gm.values, interpolation=interp)
        simplex = np.repeat(np.arange(len(m)), 3)
        bary = np.tile(np.eye(3), (len(m), 1))
        vals = g2.evaluate(simplex, bary)[0]
        expected = gm.values[0][m.simplices.reshape(-1)]
        assert np.abs(vals - expected).max() < 1e-12


def test_cone_extension_of_constant_map_is_constant():
    m = mesh.sphere_mesh(3)
    g = groups.random_su2(np.random.default_rng(1))
    ext = mesh.cone_extension(GroupMesh(m, np.repeat(g[None], m.n_vertices, 0)))
    assert ext.q_star is None
    assert np.abs(ext.values[0] - g).max() == 0.0


def test_cone_extension_boundary_is_input(rng):
    m = mesh.sphere_mesh(4)
    phi = wzw.random_surface_map(m, rng)
    ext = mesh.cone_extension(phi, rng=rng)
    assert ext.mesh.check() == []
    b = ext.mesh.boundary_mesh()
    key = lambda mm: sorted(zip(map(tuple, mm.simplices), mm.signs))  # noqa: E731
    assert key(b) == key(m)
    assert np.abs(ext.values[0][: m.n_vertices] - phi.values[0]).max() < 1e-13


def test_cone_extension_rejects_open_surface(rng):
    d = mesh.disc_mesh(3)
    with pytest.raises(ValueError):
        mesh.cone_extension(wzw.random_surface_map(mesh.sphere_mesh(3), rng).with_mesh(d))


def _equator_discs(res: int):
    d = mesh.disc_mesh(res)
    xy = d.coords
    z = np.sqrt(np.maximum(0.0, 1 - np.sum(xy ** 2, axis=1)))
    z[np.unique(d.boundary_chain()[0])] = 0.0
    upper = np.column_stack([np.zeros(len(xy)), xy, z])
    lower = np.column_stack([np.zeros(len(xy)), xy, -z])
    return (GroupMesh(d, groups.su2_from_quaternion(upper)), GroupMesh(d, groups.su2_from_quaternion(lower)))


def test_glued_equator_bounds_half_of_su2(pairing):
    # the glued map is the great 2-sphere {q0 = 0}; any filling covers half of SU(2) mod 1
    up, down = _equator_discs(10)
    sphere = mesh.glue_sphere(up, down)
    assert sphere.mesh.is_closed
    val, _ = wzw.wz_integral(sphere, pairing)
    assert wzw.frac_distance(val - 0.5) < 2e-3


def test_glue_identical_discs_has_trivial_holonomy(rng, pairing):
    d = mesh.disc_mesh(6)
    phi = wzw.random_surface_map(d, rng)
    hol = wzw.wz_action(mesh.glue_sphere(phi, phi), 1, pairing)
    assert abs(hol.value - 1) < 1e-6


def test_glue_constant_discs_is_constant():
    d = mesh.disc_mesh(4)
    g = np.repeat(np.eye(2, dtype=complex)[None], d.n_vertices, 0)
    s = mesh.glue_sphere(GroupMesh(d, g), GroupMesh(d, g))
    assert np.abs(s.values[0] - np.eye(2)).max() == 0.0


def test_glue_rejects_mismatched_boundaries(rng):
    d = mesh.disc_mesh(4)
    with pytest.raises(ValueError):
        mesh.glue_sphere(wzw.random_surface_map(d, rng), wzw.random_surface_map(d, rng))


def test_mesh_file_roundtrip_is_bit_exact(tmp_path, rng):
    phi = wzw.random_surface_map(mesh.sphere_mesh(3), rng)
    path = tmp_path / "m.txt"
    mesh.write_mesh(path, phi)
    back = mesh.read_mesh(path)
    assert np.array_equal(back.values[0], phi.values[0])
    assert np.array_equal(back.mesh.simplices, phi.mesh.simplices)
    assert np.array_equal(back.mesh.coords, phi.mesh.coords)
    mesh.write_mesh(path, phi.mesh)
    assert np.array_equal(mesh.read_mesh(path).simplices, phi.mesh.simplices)


def test_read_mesh_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        mesh.read_mesh(p)
