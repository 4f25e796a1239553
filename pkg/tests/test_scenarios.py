import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import CubicSpline

from vpmcf import hypgeom as hg
from vpmcf import scenarios as sc
from vpmcf.config import load_config
from vpmcf.flow import FlowConfig
from vpmcf.grids import AxisymmetricGrid, TriMeshGrid
from vpmcf.surface import DegenerateSurfaceError, curvature_field, embed

L2 = sc.InitialConditionSpec(kind="LegendreModes", r0=1.0, modes=((2, 0.01),), K=65)


def test_sphere_report():
    rep = sc.initial_report(sc.make_initial(sc.InitialConditionSpec(r0=1.0, K=65)))
    assert rep.int_Aring2 < 1e-20
    assert rep.min_H_minus_n == pytest.approx(2 / math.tanh(1) - 2, rel=1e-10)
    assert rep.h_mean_convex and rep.h_convex
    assert rep.area == pytest.approx(hg.sphere_oracle(1.0, 2).area, rel=1e-10)
    assert rep.int_gradAring2 < 1e-20


def test_report_smallness_is_quadratic_in_epsilon():
    eps = np.array([0.0025, 0.005, 0.01])
    reps = [sc.initial_report(sc.make_initial(sc.member_spec(L2, "epsilon", e))) for e in eps]
    for name in ("int_Aring2", "int_gradAring2"):
        vals = [getattr(r, name) for r in reps]
        assert np.polyfit(np.log(eps), np.log(vals), 1)[0] == pytest.approx(2.0, abs=0.05)


def test_trimesh_report_has_no_gradient_term():
    spec = sc.InitialConditionSpec(kind="LegendreModes", modes=((2, 0.01),), backend="trimesh", level=2)
    assert sc.initial_report(sc.make_initial(spec)).int_gradAring2 is None


@pytest.mark.parametrize("backend", ["axisymmetric", "trimesh"])
def test_random_bandlimited_is_seeded(backend):
    spec = sc.InitialConditionSpec(kind="RandomBandlimited", lmax=6, total_amplitude=0.02, seed=7,
                                   backend=backend, K=65, level=3)
    a, b = sc.make_initial(spec), sc.make_initial(spec)
    assert np.array_equal(a.rho, b.rho)
    c = sc.make_initial(sc.InitialConditionSpec(**{**sc.spec_to_dict(spec), "seed": 8, "modes": ()}))
    assert not np.array_equal(a.rho, c.rho)
    assert np.max(np.abs(a.rho - 1.0)) == pytest.approx(0.02, rel=1e-12)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**31), lmax=st.integers(2, 8), amp=st.floats(0.0, 0.3))
def test_random_bandlimited_has_no_low_modes(seed, lmax, amp):
    g = AxisymmetricGrid(2, 65)
    spec = sc.InitialConditionSpec(kind="RandomBandlimited", lmax=lmax, total_amplitude=amp, seed=seed, K=65)
    f = sc.make_initial(spec).rho - 1.0
    x = g.cos_phi
    for l in (0, 1):
        coeff = g.integrate(f * np.polynomial.legendre.legval(x, [0] * l + [1]))
        assert abs(coeff) < 1e-12
    assert np.max(np.abs(f)) == pytest.approx(amp, abs=1e-15)


def test_trimesh_random_field_has_no_low_modes():
    g = TriMeshGrid(4)
    spec = sc.InitialConditionSpec(kind="RandomBandlimited", lmax=4, total_amplitude=0.05, seed=3,
                                   backend="trimesh", level=4)
    f = sc.make_initial(spec).rho - 1.0
    w = g.weights
    assert abs(np.dot(w, f)) < 1e-3 * np.dot(w, np.abs(f))
    for k in range(3):
        assert abs(np.dot(w, f * g.vertices[:, k])) < 1e-3 * np.dot(w, np.abs(f))


def test_nonpositive_radius_rejected():
    with pytest.raises(DegenerateSurfaceError):
        sc.make_initial(sc.InitialConditionSpec(kind="LegendreModes", r0=0.5, modes=((2, -1.0),), K=33))


@pytest.mark.parametrize("kwargs", [
    {"modes": ((1, 0.01),), "kind": "LegendreModes"},
    {"modes": ((0, 0.01),), "kind": "LegendreModes"},
    {"kind": "Blob"},
    {"r0": 0.0},
    {"n": 1},
    {"kind": "RandomBandlimited", "total_amplitude": -1.0},
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        sc.InitialConditionSpec(**kwargs)


def test_low_modes_allowed_on_request():
    spec = sc.InitialConditionSpec(kind="LegendreModes", modes=((1, 0.01),), allow_low_modes=True, K=33)
    assert sc.make_initial(spec).rho[0] == pytest.approx(1.01)


def test_zonal_modes_agree_across_backends():
    modes = ((2, 0.01),)
    fine = sc.make_initial(sc.InitialConditionSpec(kind="LegendreModes", modes=modes, K=129))
    cf = curvature_field(fine)
    mesh = sc.make_initial(sc.InitialConditionSpec(kind="LegendreModes", modes=modes, backend="trimesh",
                                                   level=5))
    cm = curvature_field(mesh)
    phi = np.arccos(np.clip(mesh.grid.directions[:, 0], -1, 1))
    H_ref = CubicSpline(fine.grid.phi, cf.H)(phi)
    assert np.max(np.abs(cm.H - H_ref)) / np.max(np.abs(H_ref)) < 1e-3


def test_small_sphere_is_h_convex():
    for spec in (sc.InitialConditionSpec(r0=0.1, K=33),
                 sc.InitialConditionSpec(kind="LegendreModes", r0=0.1, modes=((2, 1e-3),), K=33)):
        rep = sc.initial_report(sc.make_initial(spec))
        assert rep.h_convex and rep.h_mean_convex


def test_h_convexity_threshold_bisection():
    eps, rep = sc.h_convexity_threshold(L2, 2, tol=1e-6)
    assert 0.13 < eps < 0.15
    assert not rep.h_convex and rep.h_mean_convex
    below = sc.initial_report(sc.make_initial(sc.member_spec(L2, "epsilon", eps - 2e-6)))
    assert below.h_convex


def test_translated_sphere_is_equidistant():
    g = TriMeshGrid(3)
    s = sc.translated_sphere(1.2, 0.4, g)
    centre = hg.polar_to_hyperboloid(0.4, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(hg.hyp_dist(centre[None, :], embed(s)), 1.2, atol=1e-12)
    with pytest.raises(ValueError):
        sc.translated_sphere(1.0, 1.0, g)


def test_stress_preset_is_valid_and_near_the_edge():
    rep = sc.initial_report(sc.make_initial(sc.STRESS_PRESET))
    assert rep.h_mean_convex and not rep.h_convex
    assert rep.min_H_minus_n < 0.1


def test_member_spec():
    tpl = sc.InitialConditionSpec(kind="LegendreModes", modes=((2, 0.01), (4, 0.005)))
    m = sc.member_spec(tpl, "epsilon", 0.02)
    assert m.modes == ((2, 0.02), (4, 0.01))
    assert sc.member_spec(tpl, "epsilon", 0.0).kind == "Sphere"
    assert sc.member_spec(tpl, "r0", 2.0).r0 == 2.0
    with pytest.raises(ValueError):
        sc.member_spec(tpl, "lmax", 3)
    with pytest.raises(ValueError):
        sc.member_spec(sc.InitialConditionSpec(kind="LegendreModes"), "epsilon", 0.1)


SWEEP_CFG = FlowConfig(t_max=0.05, record_every=5)
SWEEP_TPL = sc.InitialConditionSpec(kind="LegendreModes", modes=((2, 0.01),), K=33)


def test_sweep_rows_in_order_and_monotone_smallness():
    values = [0.0, 0.02, 0.005, 0.01]
    rows = sc.epsilon_sweep(SWEEP_TPL, values, SWEEP_CFG)
    assert [r.value for r in rows] == values
    assert rows[0].outcome == "Converged" and rows[0].t_final == 0.0 and rows[0].steps == 0
    assert all(r.outcome == "TMaxReached" for r in rows[1:])
    order = np.argsort(values)
    smallness = np.array([r.int_Aring2_0 for r in rows])[order]
    assert np.all(np.diff(smallness) > 0)
    assert all(r.convexity_preserved for r in rows)


def test_sweep_threads_match_serial():
    values = [0.005, 0.01, 0.02]
    serial = sc.epsilon_sweep(SWEEP_TPL, values, SWEEP_CFG)
    pooled = sc.epsilon_sweep(SWEEP_TPL, values, SWEEP_CFG, threads=2)
    for a, b in zip(serial, pooled):
        assert [str(x) for x in vars(a).values()] == [str(x) for x in vars(b).values()]


def test_sweep_records_failed_members():
    cfg = FlowConfig(t_max=1.0, cfl_coefficient=2.0)
    rows = sc.epsilon_sweep(SWEEP_TPL, [3.0, 0.01], cfg)
    assert rows[0].outcome == "InvalidInitial"
    assert rows[1].outcome in ("Blowup", "MeshDegenerate")
    assert rows[1].cause


def test_r0_sweep():
    rows = sc.epsilon_sweep(SWEEP_TPL, [0.5, 1.0], SWEEP_CFG, parameter="r0")
    assert rows[0].min_H_minus_n_0 > rows[1].min_H_minus_n_0


def test_bundled_epsilon_sweep_converges():
    cfg = load_config("epsilon_sweep.cfg")
    rows = sc.epsilon_sweep(cfg.initial, cfg.sweep.values, cfg.flow)
    assert [r.value for r in rows] == [0.002, 0.005, 0.01]
    for r in rows:
        assert r.outcome == "Converged"
        assert r.rate_sigma > 0 and r.r_squared >= 0.99
        assert r.convexity_preserved and r.h_convex_throughout
