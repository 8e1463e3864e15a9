import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gerbecalc import forms, groups, mesh
from gerbecalc.forms import IndexMap, Pullback, eval_form

seeds = st.integers(0, 2**32 - 1)
E = [1j * groups.PAULI[a] for a in range(3)]


def test_eta_vanishes_on_repeated_vector(rng, unit_pairing):
    pt = forms.random_point(rng, 1, 10)
    v, w = forms.random_frame(rng, pt, 2)
    val = forms.eta(unit_pairing).evaluate(pt, [v, v, w])
    assert np.abs(val).max() < 1e-14


def test_eta_at_identity_matches_hand_contraction(unit_pairing):
    # <E1, [E2, E3]> = -Re tr(E1 [E2, E3]) with [E2, E3] = -2 E1 gives -4; eta = 1/2 of it
    e = np.eye(2, dtype=complex)
    frame = [(x,) for x in E]
    assert eval_form(forms.eta(unit_pairing), (e,), frame) == pytest.approx(-2.0, abs=1e-14)
    assert eval_form(forms.eta(unit_pairing, expanded=True), (e,), frame) == pytest.approx(-2.0, abs=1e-14)


@given(seeds)
def test_eta_direct_matches_expanded_tree(seed):
    rng = np.random.default_rng(seed)
    p = forms.InvariantPairing(1, 1.0)
    pt = forms.random_point(rng, 1, 8)
    fr = forms.random_frame(rng, pt, 3)
    a = forms.eta(p).evaluate(pt, fr)
    b = forms.eta(p, expanded=True).evaluate(pt, fr)
    assert np.allclose(a, b, atol=1e-12)


@given(seeds)
def test_rho_direct_matches_expanded_tree(seed):
    rng = np.random.default_rng(seed)
    p = forms.InvariantPairing(1, 1.0)
    pt = forms.random_point(rng, 2, 8)
    fr = forms.random_frame(rng, pt, 2)
    assert np.allclose(forms.rho(p).evaluate(pt, fr), forms.rho(p, expanded=True).evaluate(pt, fr), atol=1e-12)


def test_rho_at_identity(unit_pairing):
    e = np.eye(2, dtype=complex)
    x1, y1, x2, y2 = E[0], E[1], E[1], E[2]
    val = eval_form(forms.rho(unit_pairing), (e, e), [(x1, y1), (x2, y2)])
    expected = 0.5 * (unit_pairing(x1, y2) - unit_pairing(x2, y1))
    assert val == pytest.approx(float(expected), abs=1e-14)
    # stationary first factor: every term pairs against a zero vector
    zero = eval_form(forms.rho(unit_pairing), (e, e), [(0 * x1, y1), (0 * x2, y2)])
    assert zero == pytest.approx(0.0, abs=1e-15)


def test_double_simplicial_delta_vanishes(rng, unit_pairing):
    f = forms.simplicial_delta(forms.simplicial_delta(forms.eta(unit_pairing)))
    pt = forms.random_point(rng, 3, 50)
    fr = forms.random_frame(rng, pt, 3)
    assert np.abs(f.evaluate(pt, fr)).max() < 1e-12


def test_simplicial_delta_of_eta_unfolds(rng, unit_pairing):
    eta = forms.eta(unit_pairing)
    pt = forms.random_point(rng, 2, 20)
    fr = forms.random_frame(rng, pt, 3)
    lhs = forms.simplicial_delta(eta).evaluate(pt, fr)
    g1, g2 = pt
    e2 = eta.evaluate((g2,), [(w,) for _, w in fr])
    e12 = eta.evaluate((g1 @ g2,), [(v @ g2 + g1 @ w,) for v, w in fr])
    e1 = eta.evaluate((g1,), [(v,) for v, _ in fr])
    assert np.allclose(lhs, e2 - e12 + e1, atol=1e-12)


def test_rho_is_simplicially_closed(rng, pairing):
    pt = forms.random_point(rng, 3, 100)
    fr = forms.random_frame(rng, pt, 2)
    assert np.abs(forms.simplicial_delta(forms.rho(pairing)).evaluate(pt, fr)).max() < 1e-10


def test_d_of_constant_is_zero(rng):
    pt = forms.random_point(rng, 1, 10)
    fr = forms.random_frame(rng, pt, 1)
    assert np.abs(forms.ext_d(forms.ConstantForm(3.5)).evaluate(pt, fr)).max() < 1e-9


def test_d_squared_of_rho_is_small(rng, unit_pairing):
    f = forms.ext_d(forms.ext_d(forms.rho(unit_pairing), 1e-3), 1e-3)
    pt = forms.random_point(rng, 2, 10)
    fr = forms.random_frame(rng, pt, 4)
    assert np.abs(f.evaluate(pt, fr)).max() < 1e-5


def test_multiplicativity_identity(rng, pairing):
    pt = forms.random_point(rng, 2, 100)
    fr = forms.random_frame(rng, pt, 3)
    assert np.abs(forms.multiplicativity_defect_form(pairing).evaluate(pt, fr)).max() < 1e-6


def test_multiplicativity_fails_without_rho(rng, unit_pairing):
    eta = forms.eta(unit_pairing)
    bad = forms.Sum([Pullback(IndexMap(2, ((1,),)), eta), Pullback(IndexMap(2, ((2,),)), eta),
                     forms.Scale(-1.0, Pullback(IndexMap(2, ((1, 2),)), eta))])
    pt = forms.random_point(rng, 2, 20)
    fr = forms.random_frame(rng, pt, 3)
    assert np.abs(bad.evaluate(pt, fr)).max() > 1e-2


def test_eval_form_rejects_wrong_degree(unit_pairing):
    e = np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        eval_form(forms.eta(unit_pairing), (e,), [(E[0],)])


def test_eval_form_checks_tangency(unit_pairing):
    g = groups.GroupElement(np.eye(2))
    with pytest.raises(groups.NotTangentError):
        eval_form(forms.eta(unit_pairing), (g,), [(np.eye(2),), (E[0],), (E[1],)])


def test_ext_d_rejects_tiny_step(unit_pairing):
    with pytest.raises(ValueError):
        forms.ext_d(forms.rho(unit_pairing), 1e-9)


def test_calibrated_pairing_normalizes_eta(pairing):
    gm = mesh.identity_s3_map(5)
    assert mesh.integrate_pullback(forms.eta(pairing), gm) == pytest.approx(1.0, abs=1e-3)


def test_level_scales_integral(pairing):
    gm = mesh.identity_s3_map(4)
    one = mesh.integrate_pullback(forms.eta(pairing), gm)
    three = mesh.integrate_pullback(forms.eta(pairing.with_level(3)), gm)
    assert three == pytest.approx(3 * one, rel=1e-12)


def test_calibration_stable_across_resolutions():
    a = forms.calibrate_pairing(5, force=True)
    b = forms.calibrate_pairing(4)
    assert abs(a / b - 1) < 1e-3
    assert abs(b * 4 * np.pi ** 2 - 1) < 1e-3


def test_calibration_reports_nonconvergence_on_coarse_mesh():
    with pytest.raises(RuntimeError):
        forms.calibrate_pairing(2, force=True)
