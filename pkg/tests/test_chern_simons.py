import json

import numpy as np
import pytest
from scipy.integrate import quad

from gerbecalc import chern_simons as cs, forms, groups, mesh, wzw
from gerbecalc.groups import SU2, VECTOR


@pytest.fixture
def unit():
    return forms.InvariantPairing(1)


def _frame(rng, g, tag, n):
    return [(cs.random_tangents(rng, g, tag),) for _ in range(n)]


def test_tp_of_zero_connection_vanishes(unit, rng):
    c = cs.zero_connection(unit)
    g = cs.random_base_points(rng, VECTOR, 20)
    assert np.abs(cs.tp_form(c).evaluate((g,), _frame(rng, g, VECTOR, 3))).max() == 0.0


def test_tp_of_single_abelian_term_vanishes(unit, rng):
    c = cs.coefficient_connection([(lambda x: np.sin(x[:, 1]) + x[:, 2] ** 2, 0, 0)], unit)
    g = cs.random_base_points(rng, VECTOR, 20)
    assert np.abs(cs.tp_form(c).evaluate((g,), _frame(rng, g, VECTOR, 3))).max() < 1e-12


def test_tp_of_maurer_cartan_is_level_times_eta(rng):
    # on M x G with a = 0 the bundle connection is theta; TP(theta) = k eta
    k = 3
    P = forms.InvariantPairing(1).with_level(k)
    c = cs.zero_connection(P)
    x = cs.random_base_points(rng, VECTOR, 15)
    g = groups.random_su2(rng, 15)
    frame = [(np.zeros_like(x), cs.random_tangents(rng, g, SU2)) for _ in range(3)]
    lhs = cs.bundle_tp_form(c).evaluate((x, g), frame)
    rhs = forms.eta(P).evaluate((g,), [(f[1],) for f in frame])
    assert np.abs(lhs - rhs).max() < 1e-6


def test_pontryagin_identity(unit, rng):
    for _ in range(3):
        c = cs.random_polynomial_connection(rng, unit.with_level(2))
        assert cs.pontryagin_defect(c, 30, rng) < 1e-5


def test_pontryagin_rejects_sphere_base(unit):
    with pytest.raises(ValueError):
        cs.pontryagin_defect(cs.zero_connection(unit, SU2))


def test_action_of_zero_connection_on_torus(unit):
    assert cs.cs_action(mesh.torus_chart(3), cs.zero_connection(unit)) == 0.0


def test_action_of_constant_abelian_connection_on_torus(unit):
    c = cs.coefficient_connection([(lambda x: 0.7, 2, 0), (lambda x: -1.3, 2, 1), (lambda x: 0.4, 2, 2)], unit)
    assert abs(cs.cs_action(mesh.torus_chart(3), c)) < 1e-12


def _torus_example(pairing):
    f = lambda z: np.cos(2 * np.pi * z) + 0.3  # noqa: E731
    g = lambda z: 0.7 * np.sin(2 * np.pi * z) + 0.2 * np.cos(4 * np.pi * z)  # noqa: E731
    c = cs.coefficient_connection([(lambda x: f(x[:, 2]), 0, 0), (lambda x: g(x[:, 2]), 0, 1),
                                   (lambda x: g(x[:, 2]), 1, 1)], pairing)
    return c, f, g


def test_torus_action_matches_one_dimensional_integral(unit):
    # a = f(z) E0 dx + g(z) (E0 + E1) dy; only P(a ^ da) survives and reduces to
    # P(E0, E0 + E1) * int_0^1 (g f' - f g') dz
    c, f, g = _torus_example(unit)
    E = groups.SU2_BASIS
    h = 1e-6
    integrand = lambda z: (g(z) * (f(z + h) - f(z - h)) - f(z) * (g(z + h) - g(z - h))) / (2 * h)  # noqa: E731
    oracle = float(c.polynomial(E[0], E[0] + E[1])) * quad(integrand, 0, 1)[0]
    assert oracle == pytest.approx(0.1114128160, abs=1e-8)
    assert cs.cs_action(mesh.torus_chart(6), c) == pytest.approx(oracle, abs=1e-5)


def test_action_is_linear_in_level(unit):
    c, _, _ = _torus_example(unit)
    a1 = cs.cs_action(mesh.torus_chart(3), c)
    a2 = cs.cs_action(mesh.torus_chart(3), c.with_level(2))
    assert a2 == pytest.approx(2 * a1, rel=1e-12)


def test_action_rejects_open_mesh(unit, rng):
    ball = mesh.cone_extension(wzw.random_surface_map(mesh.sphere_mesh(3), rng))
    with pytest.raises(ValueError):
        cs.cs_action(ball, cs.zero_connection(unit, SU2))
    with pytest.raises(ValueError):
        cs.gauge_shift_check(ball, cs.zero_connection(unit, SU2), ball)


def test_ball_filling_matches_boundary_action(unit, rng):
    c = cs.random_polynomial_connection(rng, unit.with_level(2))
    sphere = mesh.s3_mesh(1)
    r = cs.filling_check(c, sphere)
    assert r.defect < 1e-9
    assert abs(r.bulk) > 1e-2
    flipped = cs.filling_check(c, sphere.reversed())
    assert flipped.bulk == pytest.approx(-r.bulk, rel=1e-12)


def test_cone_filling_boundary(rng):
    sphere = mesh.s3_mesh(1)
    ball = cs.cone_filling(sphere)
    b = ball.boundary_mesh()
    key = lambda m: sorted(zip(map(tuple, m.simplices), m.signs))  # noqa: E731
    assert key(b) == key(sphere)
    with pytest.raises(ValueError):
        cs.cone_filling(mesh.torus_mesh(2))


# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def s3():
    return mesh.identity_s3_map(4)


def test_constant_gauge_shift_is_zero(s3, pairing):
    c = cs.zero_connection(pairing.with_level(2), SU2)
    h = mesh.GroupMesh(s3.mesh, np.repeat(groups.random_su2(np.random.default_rng(2))[None], s3.mesh.n_vertices, 0))
    assert abs(cs.gauge_shift_check(s3, c, h).delta) < 1e-9


def test_identity_gauge_shift_is_level(s3, pairing):
    r = cs.gauge_shift_check(s3, cs.zero_connection(pairing.with_level(2), SU2), s3)
    assert r.nearest_integer == 2
    assert r.nearest_int_defect < 1e-2


def test_degree_zero_gauge_shift_with_connection(s3, pairing):
    spec = {"base": "S3", "level": 2, "terms": [{"coeff": "0.5*q1*q2", "basis": 0, "dx": 3},
                                                {"coeff": "cos(q0)", "basis": 2, "dx": 1}]}
    c = cs.connection_from_spec(spec, pairing)
    h = mesh.GroupMesh(s3.mesh, wzw.random_su2_field(s3.mesh.coords, np.random.default_rng(5), 0.4))
    r = cs.gauge_shift_check(s3, c, h)
    assert r.nearest_integer == 0
    assert r.nearest_int_defect < 1e-2


# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["zero", "abelian", "generic"])
def test_transition_identities(kind, unit, rng):
    P = unit.with_level(2)
    c = {"zero": lambda: cs.zero_connection(P),
         "abelian": lambda: cs.coefficient_connection([(lambda x: x[:, 0] * x[:, 1], 1, 2)], P),
         "generic": lambda: cs.random_polynomial_connection(rng, P, dim=3)}[kind]()
    r = cs.transition_identity_check(c, 30, rng)
    assert r.defect_tp < 1e-5
    assert r.defect_rho < 1e-9
    assert r.scale_rho > 1e-3


def test_transition_identities_on_sphere_base(pairing, rng):
    spec = {"base": "S3", "level": 1, "terms": [{"coeff": "q0 - q3**2", "basis": 1, "dx": 2}]}
    r = cs.transition_identity_check(cs.connection_from_spec(spec, pairing), 20, rng)
    assert r.defect_tp < 1e-5 and r.defect_rho < 1e-9


# ---------------------------------------------------------------------------


def test_parse_coefficient_evaluates():
    f = cs.parse_coefficient("2*x - sin(pi*y)**2 + -z/4", ["x", "y", "z"])
    x = np.array([[1.0, 0.5, 2.0], [0.0, 0.0, 0.0]])
    assert np.allclose(f(x), [2 - 1 - 0.5, 0.0])
    assert np.allclose(cs.parse_coefficient("3", ["x"])(np.zeros((4, 1))), 3.0)


@pytest.mark.parametrize("text", ["__import__('os')", "x.real", "exp(x)", "w + 1", "x if y else z", "sin(x, y)",
                                  "'a'"])
def test_parse_coefficient_rejects(text):
    with pytest.raises(ValueError):
        cs.parse_coefficient(text, ["x", "y", "z"])


@pytest.mark.parametrize("spec", [{"base": "S2"}, {"terms": [{"coeff": "1", "basis": 3, "dx": 0}]},
                                  {"terms": [{"coeff": "1", "basis": 0, "dx": 3}]}])
def test_spec_rejects_malformed(spec):
    with pytest.raises(ValueError):
        cs.connection_from_spec(spec)


def test_read_connection_file(tmp_path, rng):
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"base": "R3", "level": 3, "terms": [{"coeff": "x*y", "basis": 1, "dx": 2}]}))
    c = cs.read_connection(path)
    assert c.level == 3 and c.base_tag == VECTOR
    g = cs.random_base_points(rng, VECTOR, 5)
    v = cs.random_tangents(rng, g, VECTOR)
    val = c.a.evaluate((g,), [(v,)])
    x, dx = groups.translation_coordinates(g), groups.translation_coordinates(v)
    assert np.allclose(val, (x[:, 0] * x[:, 1] * dx[:, 2])[:, None, None] * groups.SU2_BASIS[1])
    assert c.algebra_defect((g,), [(v,)]) < 1e-15
