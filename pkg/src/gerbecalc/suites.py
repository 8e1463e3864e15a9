"""Verification suites shared by the command-line driver and the acceptance tests.

Every suite takes a :class:`RunConfig` and returns a list of :class:`Check`
records.  A check passes when ``value <= tolerance``; exact checks count
offending entries and use tolerance 0 (they ignore the tolerance scale).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import branes, cellmodel, chern_simons, deligne, forms, groups, mesh, wzw
from .groups import SU2, GroupElement

ANALYTIC_PAIRING_CONSTANT = 1.0 / (4.0 * math.pi ** 2)


@dataclass
class RunConfig:
    """Settings of one suite run.

    Args:
        command: suite name.
        group: group tag (only ``SU2`` is supported by the suites).
        level: level ``k``; ``None`` selects the suite default.
        resolution: mesh resolution; ``None`` selects the suite default.
        seed: seed for all randomness.
        samples: sample count override.
        tolerance_scale: factor applied to every numeric tolerance.
        mesh: optional mesh file (surface suites use it instead of the built-in mesh).
        model: optional cell-model file (Deligne suites).
        connection: optional connection specification file (Chern-Simons suites).
        quadrature_order: optional quadrature order for mesh integrals.
    """

    command: str
    group: str = SU2
    level: int | None = None
    resolution: int | None = None
    seed: int = 0
    samples: int | None = None
    tolerance_scale: float = 1.0
    mesh: str | None = None
    model: str | None = None
    connection: str | None = None
    quadrature_order: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Check:
    """One pass/fail record.

    Attributes:
        name: check identifier.
        value: measured defect (or count of offending entries for exact checks).
        tolerance: pass threshold (``value <= tolerance``).
        exact: exact arithmetic check (tolerance fixed at 0).
        runtime_s: wall time spent on the check.
        detail: extra numbers for the report.
    """

    name: str
    value: float
    tolerance: float
    exact: bool = False
    runtime_s: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


class _Timer:
    def __init__(self):
        self.t = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        dt, self.t = now - self.t, now
        return dt


def _tol(cfg: RunConfig, base: float) -> float:
    return base * cfg.tolerance_scale


def _rule(cfg: RunConfig, dim: int):
    return mesh.quadrature_rule(dim, cfg.quadrature_order) if cfg.quadrature_order else None


def _require_su2(cfg: RunConfig):
    if cfg.group != SU2:
        raise ValueError(f"suite {cfg.command!r} supports group {SU2} only")


# ---------------------------------------------------------------------------
# smooth form identities


def form_identities(cfg: RunConfig) -> list[Check]:
    """Multiplicativity of ``eta`` and simplicial closedness of ``rho`` at random points."""
    _require_su2(cfg)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.samples or 100
    pairing = forms.InvariantPairing(cfg.level or 1)
    timer = _Timer()
    pt = forms.random_point(rng, 2, n)
    fr = forms.random_frame(rng, pt, 3)
    defect = np.abs(forms.multiplicativity_defect_form(pairing).evaluate(pt, fr))
    scale = np.abs(forms.Pullback(forms.IndexMap(2, ((1, 2),)), forms.eta(pairing)).evaluate(pt, fr))
    out = [Check("multiplicativity_defect", float(defect.max()), _tol(cfg, 1e-5), runtime_s=timer.lap(),
                 detail={"samples": n, "eta_scale": float(scale.max())})]
    pt3 = forms.random_point(rng, 3, n)
    fr3 = forms.random_frame(rng, pt3, 2)
    d_rho = np.abs(forms.simplicial_delta(forms.rho(pairing)).evaluate(pt3, fr3))
    out.append(Check("rho_simplicial_closed", float(d_rho.max()), _tol(cfg, 1e-10), runtime_s=timer.lap(),
                     detail={"samples": n}))
    return out


def normalization(cfg: RunConfig) -> list[Check]:
    """``int_{S^3} eta = 1`` for the calibrated pairing, and agreement with ``1 / (4 pi^2)``."""
    _require_su2(cfg)
    res = cfg.resolution or 6
    timer = _Timer()
    c = forms.calibrate_pairing()
    gm = mesh.identity_s3_map(res)
    val = mesh.integrate_pullback(forms.eta(forms.InvariantPairing(1)), gm, _rule(cfg, 3))
    analytic = mesh.integrate_pullback(forms.eta(forms.InvariantPairing(1, ANALYTIC_PAIRING_CONSTANT)), gm,
                                       _rule(cfg, 3))
    detail = {"tetrahedra": len(gm.mesh), "calibrated_constant": c, "integral": val}
    return [
        Check("eta_integral_calibrated", abs(val - 1.0), _tol(cfg, 1e-3), runtime_s=timer.lap(), detail=detail),
        Check("eta_integral_analytic_constant", abs(analytic - 1.0), _tol(cfg, 1e-3), detail={"integral": analytic}),
        Check("calibrated_vs_analytic_constant", abs(c / ANALYTIC_PAIRING_CONSTANT - 1.0), _tol(cfg, 1e-3)),
    ]


# ---------------------------------------------------------------------------
# surface holonomy


def _surface_mesh(cfg: RunConfig, default_res: int) -> mesh.SimplicialMesh:
    if cfg.mesh:
        loaded = mesh.read_mesh(cfg.mesh)
        return loaded.mesh if isinstance(loaded, mesh.MeshMap) else loaded
    return mesh.sphere_mesh(cfg.resolution or default_res)


def pw(cfg: RunConfig) -> list[Check]:
    """Polyakov-Wiegmann defects and independence of the WZ integral from the ball extension."""
    _require_su2(cfg)
    sm = _surface_mesh(cfg, 16)
    levels = (cfg.level,) if cfg.level else (1, 2, 3)
    n_pairs = cfg.samples or 20
    timer = _Timer()
    rows = wzw.pw_suite(sm, n_pairs, levels, seed=cfg.seed)
    worst = max(r["defect"] for r in rows)
    out = [Check("polyakov_wiegmann_defect", worst, _tol(cfg, 1e-3), runtime_s=timer.lap(),
                 detail={"pairs": n_pairs, "levels": list(levels), "defects": [r["defect"] for r in rows]})]
    rng = np.random.default_rng(cfg.seed + 1)
    diffs = []
    for _ in range(10):
        phi = wzw.random_surface_map(sm, rng)
        a, tag_a = wzw.wz_integral(phi, rng=rng)
        b, tag_b = wzw.wz_integral(phi, rng=rng)
        diffs.append({"difference": a - b, "extensions": [tag_a, tag_b]})
    frac = max(wzw.frac_distance(d["difference"]) for d in diffs)
    out.append(Check("wz_extension_independence", frac, _tol(cfg, 1e-3), runtime_s=timer.lap(),
                     detail={"differences": [d["difference"] for d in diffs]}))
    return out


def mickelsson(cfg: RunConfig) -> list[Check]:
    """Associativity of the central-extension product and reflexivity of pair equivalence."""
    _require_su2(cfg)
    rng = np.random.default_rng(cfg.seed)
    dm = mesh.disc_mesh(cfg.resolution or 8)
    k = cfg.level or 2
    n = cfg.samples or 10
    timer = _Timer()

    def element():
        return wzw.MickelssonElement(wzw.random_surface_map(dm, rng), complex(np.exp(2j * np.pi * rng.random())), k)

    assoc = [abs(wzw.me_associator(element(), element(), element()) - 1.0) for _ in range(n)]
    out = [Check("associator_defect", max(assoc), _tol(cfg, 1e-9), runtime_s=timer.lap(), detail={"triples": n})]
    e = element()
    rel = wzw.me_relation(e, e, rng=rng)
    out.append(Check("equivalence_reflexive", rel["distance"], _tol(cfg, 1e-3), runtime_s=timer.lap(),
                     detail={"wz_integral": rel["wz_integral"]}))
    return out


def holonomy_derivative(cfg: RunConfig) -> list[Check]:
    """Finite-difference holonomy derivative vs fiber integral on the monopole latitude family."""
    F = wzw.monopole_form(1.0)
    n_points = cfg.resolution or 400
    timer = _Timer()
    rows = []
    for t0 in (0.4, 0.9, 1.3, 2.0):
        r = wzw.holonomy_derivative_check(F, wzw.latitude_family, t0, n_points=n_points)
        rows.append({"t0": t0, "fd": r.fd_derivative, "fiber": r.fiber_integral, "defect": r.defect,
                     "analytic": math.sin(t0) / 2})
    return [
        Check("fd_vs_fiber_integral", max(r["defect"] for r in rows), _tol(cfg, 1e-3), runtime_s=timer.lap(),
              detail={"rows": rows}),
        Check("fiber_integral_vs_analytic", max(abs(r["fiber"] - r["analytic"]) for r in rows), _tol(cfg, 1e-3)),
    ]


# ---------------------------------------------------------------------------
# discrete Deligne complex


def _model(cfg: RunConfig) -> cellmodel.SimplicialGroupModel:
    if cfg.model:
        return cellmodel.read_model(cfg.model)
    return cellmodel.circle_model()


def _count(c: deligne.DeligneCochain) -> int:
    return sum(int(np.count_nonzero(v)) for v in c.comps.values())


def _random_trivial_data(model, rng):
    phi = deligne.random_form(model, 1, 2, rng)
    psi = deligne.form_delta(model, deligne.random_form(model, 1, 1, rng))
    return phi, psi


def random_form_data(model: cellmodel.SimplicialGroupModel, n: int, rng: np.random.Generator,
                     denominator: int = 6):
    """Random valid ``(H, rho, B)`` for the form-data constructor with ``n`` in ``{0, 1}``.

    For ``n = 1`` the 2-forms on the 1-dimensional ``K_1`` vanish, so ``B`` is
    arbitrary per patch and ``rho = Delta sigma``.  For ``n = 0``,
    ``H = d beta``, ``B`` is ``beta`` shifted by a constant per patch and
    ``rho = Delta beta'`` with ``beta'`` a constant integer shift of ``beta``.
    """
    lv = model.level(1)
    if n == 1:
        H = deligne.zero_form(model, 1, 2)
        B = [deligne.DiscreteForm(1, 1, rng.integers(-9, 10, len(lv.patch_cells[1][i])), denominator, i)
             for i in range(lv.n_patches)]
        rho = deligne.form_delta(model, deligne.random_form(model, 1, 1, rng))
        return H, rho, B
    if n != 0:
        raise ValueError("random form data is implemented for n in {0, 1}")
    beta = rng.integers(-9, 10, model.n_cells(1, 0))
    H = deligne.DiscreteForm(1, 1, model.global_d(1, 0) @ beta, denominator)
    B = [deligne.DiscreteForm(1, 0, beta[lv.patch_cells[0][i]] + denominator * rng.integers(-2, 3)
                              + rng.integers(0, denominator), denominator, i) for i in range(lv.n_patches)]
    shift = rng.integers(-2, 3)
    rho = deligne.form_delta(model, deligne.DiscreteForm(1, 0, beta + denominator * shift, denominator))
    return H, rho, B


def deligne_suite(cfg: RunConfig) -> list[Check]:
    """Model validity, ``bi_D^2 = 0``, and the two cocycle constructors."""
    rng = np.random.default_rng(cfg.seed)
    model = _model(cfg)
    timer = _Timer()
    rep = cellmodel.validate_model(model)
    out = [Check("model_valid", int(not (rep.valid and rep.good_cover)), 0, exact=True, runtime_s=timer.lap(),
                 detail=rep.as_dict())]
    n_trials = cfg.samples or 100
    bad = 0
    for n in (0, 1, 2):
        for i in range(n_trials):
            c = deligne.random_cochain(model, n, i % (n + 3), rng)
            bad += _count(deligne.bi_D(deligne.bi_D(c)))
    out.append(Check("bi_D_squared_nonzero_entries", bad, 0, exact=True, runtime_s=timer.lap(),
                     detail={"cochains_per_n": n_trials}))
    # constructor from (phi, psi)
    fails = 0
    for _ in range(10):
        phi, psi = _random_trivial_data(model, rng)
        c = deligne.make_trivial_multiplicative(model, phi, psi)
        ok, _ = deligne.is_cocycle(c)
        kappa = deligne.mc_class(c)
        H, rho, report = deligne.omega_projection(c)
        expected_rho = deligne.form_add(deligne.form_d(model, psi), deligne.form_delta(model, phi))
        fails += (not ok) + (not kappa.is_zero()) + (not H.equals(deligne.form_d(model, phi)))
        fails += (not rho.equals(expected_rho)) + (report["disagreeing_cells"] != 0)
    out.append(Check("trivial_multiplicative_constructor_failures", fails, 0, exact=True, runtime_s=timer.lap()))
    # constructor from (H, rho, B); B is chosen per patch, rho = Delta sigma
    residual = 0
    for trial in range(10):
        c = deligne.make_form_data_cocycle(model, *random_form_data(model, trial % 2, rng))
        residual += _count(deligne.bi_D(c))
    out.append(Check("form_data_constructor_residual_entries", residual, 0, exact=True, runtime_s=timer.lap()))
    return out


def mc_class_suite(cfg: RunConfig) -> list[Check]:
    """``kappa`` is integral, locally constant and closed on coboundary-shifted cocycles."""
    rng = np.random.default_rng(cfg.seed)
    model = _model(cfg)
    timer = _Timer()
    fails = 0
    trials = cfg.samples or 10
    for _ in range(trials):
        phi, psi = _random_trivial_data(model, rng)
        c = deligne.make_trivial_multiplicative(model, phi, psi)
        W = deligne.random_cochain(model, 2, 2, rng, denominator=int(rng.choice([5, 7, 12])))
        shifted = c + deligne.bi_D(W)
        k = deligne.mc_class(shifted)
        w = deligne.kappa_shift_witness(c, shifted, W)
        fails += (not k.is_integer) + (not k.is_locally_constant) + (not k.is_cocycle)
        fails += (not w["is_integer"]) + (not w["is_locally_constant"]) + (not w["kappa_difference_matches"])
    return [Check("kappa_property_failures", fails, 0, exact=True, runtime_s=timer.lap(), detail={"trials": trials})]


# ---------------------------------------------------------------------------
# Chern-Simons


def _connection(cfg: RunConfig, pairing: forms.InvariantPairing):
    if cfg.connection:
        return chern_simons.read_connection(cfg.connection, pairing)
    return None


def gauge_maps(base: mesh.GroupMesh, rng: np.random.Generator, amplitude: float = 0.4) -> list[tuple[str, int, mesh.GroupMesh]]:
    """Five gauge transformations ``S^3 -> SU(2)``: the identity and smooth maps of degree 0, 0, 1, -1."""
    coords, ident = base.mesh.coords, base.values[0]
    f1 = wzw.random_su2_field(coords, rng, amplitude)
    f2 = wzw.random_su2_field(coords, rng, amplitude)
    f3 = wzw.random_su2_field(coords, rng, amplitude)
    return [("identity", 1, base),
            ("degree0_a", 0, mesh.GroupMesh(base.mesh, f1)),
            ("degree0_b", 0, mesh.GroupMesh(base.mesh, f2 @ f1)),
            ("degree1", 1, mesh.GroupMesh(base.mesh, ident @ f2)),
            ("degree-1", -1, mesh.GroupMesh(base.mesh, groups.inv(ident) @ f3))]


def cs(cfg: RunConfig) -> list[Check]:
    """Pointwise ``d TP(A) = P(Omega ^ Omega)``, its integrated form on a 4-ball, and gauge shifts on ``S^3``."""
    _require_su2(cfg)
    rng = np.random.default_rng(cfg.seed)
    k = cfg.level or 2
    pairing = forms.InvariantPairing(1).with_level(k)
    timer = _Timer()
    worst = 0.0
    for _ in range(5):
        c = chern_simons.random_polynomial_connection(rng, pairing, dim=4)
        worst = max(worst, chern_simons.pontryagin_defect(c, cfg.samples or 50, rng))
    out = [Check("pontryagin_defect", worst, _tol(cfg, 1e-5), runtime_s=timer.lap(), detail={"connections": 5})]
    fill = chern_simons.filling_check(chern_simons.random_polynomial_connection(rng, pairing), mesh.s3_mesh(1))
    out.append(Check("ball_filling_defect", fill.defect, _tol(cfg, 1e-6), runtime_s=timer.lap(),
                     detail={"bulk": fill.bulk, "boundary": fill.boundary}))
    base = mesh.identity_s3_map(cfg.resolution or 5)
    conn = _connection(cfg, pairing)
    if conn is not None and conn.base_tag != SU2:
        raise ValueError("gauge shifts run on S^3; the connection file must use base S3")
    conn = conn if conn is not None else chern_simons.zero_connection(pairing, SU2)
    rows = []
    for name, degree, h in gauge_maps(base, rng):
        r = chern_simons.gauge_shift_check(base, conn, h, _rule(cfg, 3))
        rows.append({"map": name, "degree": degree, "delta": r.delta, "defect": r.nearest_int_defect,
                     "expected": k * degree})
    out.append(Check("gauge_shift_integrality", max(r["defect"] for r in rows), _tol(cfg, 1e-2),
                     runtime_s=timer.lap(), detail={"rows": rows, "level": k}))
    ident = rows[0]
    out.append(Check("identity_gauge_shift_equals_level", abs(abs(ident["delta"]) - k), _tol(cfg, 1e-2)))
    out.append(Check("gauge_shift_equals_level_times_degree",
                     max(abs(r["delta"] - r["expected"]) for r in rows), _tol(cfg, 1e-2)))
    return out


def transition(cfg: RunConfig) -> list[Check]:
    """Transition identities of the Chern-Simons 2-gerbe data on ``E^[2]`` and ``E^[3]``."""
    _require_su2(cfg)
    rng = np.random.default_rng(cfg.seed)
    k = cfg.level or 1
    pairing = forms.InvariantPairing(1).with_level(k)
    timer = _Timer()
    conns = [chern_simons.random_polynomial_connection(rng, pairing, dim=3) for _ in range(2)]
    extra = _connection(cfg, pairing)
    if extra is not None:
        conns.append(extra)
    results = [chern_simons.transition_identity_check(c, cfg.samples or 50, rng) for c in conns]
    dt = timer.lap()
    return [
        Check("tp_transition_defect", max(r.defect_tp for r in results), _tol(cfg, 1e-5), runtime_s=dt,
              detail={"scale": max(r.scale_tp for r in results)}),
        Check("rho_transition_defect", max(r.defect_rho for r in results), _tol(cfg, 1e-9),
              detail={"scale": max(r.scale_rho for r in results)}),
    ]


# ---------------------------------------------------------------------------
# branes


def brane_pairs() -> list[tuple[str, GroupElement, GroupElement]]:
    """Three fixed ``(h1, h2)`` choices: generic, ``h2 = e`` and a near-central quotient."""
    e = lambda v: GroupElement(groups.expm(groups.su2_algebra(v)))  # noqa: E731
    return [("generic", e([0.3, -0.8, 0.5]), e([1.1, 0.2, -0.4])),
            ("h2_identity", e([0.0, 0.9, 0.0]), GroupElement(np.eye(2))),
            ("small_quotient", e([0.2, 0.1, 1.3]), e([0.25, 0.1, 1.25]))]


def branes_suite(cfg: RunConfig) -> list[Check]:
    """Two-sided bi-brane curvature check plus antisymmetry and Ad-equivariance of ``omega_h``."""
    _require_su2(cfg)
    rng = np.random.default_rng(cfg.seed)
    k = cfg.level or 1
    n = cfg.samples or 50
    timer = _Timer()
    rows = []
    for name, h1, h2 in brane_pairs():
        r = branes.bibrane_symmetry_check(h1, h2, k, n, rng)
        rows.append({"pair": name, "defect": r.max_defect, "scale": r.max_value})
    out = [Check("bibrane_two_sided_defect", max(r["defect"] for r in rows), _tol(cfg, 1e-9),
                 runtime_s=timer.lap(), detail={"rows": rows})]
    h = brane_pairs()[0][1]
    anti, equi = 0.0, 0.0
    pairing = forms.InvariantPairing(k)
    for _ in range(n):
        x = groups.random_su2(rng)
        p = branes.class_point(h, x)
        v1 = branes.conj_tangent(p, groups.random_su2_algebra(rng))
        v2 = branes.conj_tangent(p, groups.random_su2_algebra(rng))
        w = branes.omega_h(p, v1, v2, pairing)
        anti = max(anti, abs(w + branes.omega_h(p, v2, v1, pairing)))
        a = groups.random_su2(rng)
        q = branes.class_point(h, a @ x)
        ai = groups.inv(a)
        equi = max(equi, abs(w - branes.omega_h(q, a @ v1 @ ai, a @ v2 @ ai, pairing)))
    out.append(Check("omega_antisymmetry", anti, _tol(cfg, 1e-12), runtime_s=timer.lap()))
    out.append(Check("omega_ad_equivariance", equi, _tol(cfg, 1e-10)))
    return out


SUITES: dict[str, Callable[[RunConfig], list[Check]]] = {
    "form-identities": form_identities,
    "normalization": normalization,
    "pw": pw,
    "mickelsson": mickelsson,
    "deligne": deligne_suite,
    "mc-class": mc_class_suite,
    "cs": cs,
    "transition": transition,
    "lemma6": holonomy_derivative,
    "holonomy-derivative": holonomy_derivative,
    "branes": branes_suite,
}
