import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpmcf import hypgeom as hg

# frozen closed forms for the r = 1, n = 2 geodesic sphere
H_R1 = 2.626070570998663  # 2 coth 1
AREA_R1 = 17.355387381771433  # 4 pi sinh^2 1
VOL_R1 = 5.110932705708289  # pi (sinh 2 - 2)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_minkowski_dot_examples():
    e0 = np.array([1.0, 0, 0, 0])
    assert hg.minkowski_dot(e0, e0) == -1.0
    assert hg.minkowski_dot([0, 1.0, 0, 0], [0, 0, 1.0, 0]) == 0.0
    p = np.array([math.cosh(1), math.sinh(1), 0, 0])
    assert hg.minkowski_dot(p, p) == pytest.approx(-1.0, abs=1e-14)


def test_minkowski_dot_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        hg.minkowski_dot(np.zeros(3), np.zeros(4))


def test_minkowski_dot_broadcasts():
    P = hg.polar_to_hyperboloid(np.array([0.5, 1.0, 2.0]), np.eye(3))
    assert np.allclose(hg.minkowski_dot(P, P), -1.0, atol=1e-13)


def test_check_hpoint():
    hg.check_hpoint(hg.basepoint(4))
    with pytest.raises(ValueError):
        hg.check_hpoint([2.0, 0, 0, 0])
    with pytest.raises(ValueError):
        hg.check_hpoint([-1.0, 0, 0, 0])
    with pytest.raises(ValueError):
        hg.check_hpoint([np.nan, 0, 0, 0])


def test_check_tangent():
    p = hg.polar_to_hyperboloid(1.0, unit([1, 0, 0]))
    t = np.array([0.0, 0.0, 1.0, 0.0])
    hg.check_tangent(p, t)
    with pytest.raises(ValueError):
        hg.check_tangent(p, np.array([1.0, 0, 0, 0]))


def test_hyp_dist_examples():
    o = hg.basepoint(4)
    assert hg.hyp_dist(o, o) == 0.0
    q = np.array([math.cosh(1), math.sinh(1), 0, 0])
    assert hg.hyp_dist(o, q) == pytest.approx(1.0, rel=1e-14)
    a, b = 0.3, 2.1
    pa = np.array([math.cosh(a), math.sinh(a), 0, 0])
    pb = np.array([math.cosh(b), math.sinh(b), 0, 0])
    assert hg.hyp_dist(pa, pb) == pytest.approx(abs(a - b), rel=1e-13)


def test_hyp_dist_small_separation_keeps_precision():
    # arccosh(1 + x) would lose about half the digits here
    th = unit([1, 0, 0])
    p = hg.polar_to_hyperboloid(1.0, th)
    q = hg.polar_to_hyperboloid(1.0 + 1e-9, th)
    assert hg.hyp_dist(p, q) == pytest.approx(1e-9, rel=1e-6)


def test_hyp_dist_rejects_invalid_points():
    with pytest.raises(ValueError):
        hg.hyp_dist(np.array([0.0, 1, 0, 0]), np.array([0.0, 1, 0, 0]))


def test_polar_examples():
    p = hg.polar_to_hyperboloid(1.0, np.array([1.0, 0, 0]))
    assert np.allclose(p, [math.cosh(1), math.sinh(1), 0, 0], rtol=0, atol=1e-15)
    tiny = hg.polar_to_hyperboloid(1e-12, unit([1, 2, 3]))
    assert np.allclose(tiny, hg.basepoint(4), atol=1e-11)
    for r in (0.5, 1.0, 2.0):
        p = hg.polar_to_hyperboloid(r, unit([0.2, -0.3, 0.9]))
        assert hg.hyp_dist(hg.basepoint(4), p) == pytest.approx(r, rel=1e-13)


def test_polar_rejects_bad_input():
    with pytest.raises(ValueError):
        hg.polar_to_hyperboloid(0.0, np.array([1.0, 0, 0]))
    with pytest.raises(ValueError):
        hg.polar_to_hyperboloid(1.0, np.array([1.0, 1.0, 0]))


directions = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.1
)


@given(r=st.floats(1e-3, 10.0), d=directions)
def test_polar_distance_roundtrip(r, d):
    p = hg.polar_to_hyperboloid(r, unit(d))
    hg.check_hpoint(p, tol=1e-10)
    assert abs(hg.hyp_dist(hg.basepoint(4), p) - r) <= 1e-10 * max(1.0, r)


@given(r1=st.floats(0.01, 4), r2=st.floats(0.01, 4), d1=directions, d2=directions)
def test_hyp_dist_symmetric_nonnegative(r1, r2, d1, d2):
    p = hg.polar_to_hyperboloid(r1, unit(d1))
    q = hg.polar_to_hyperboloid(r2, unit(d2))
    dpq, dqp = hg.hyp_dist(p, q), hg.hyp_dist(q, p)
    assert dpq >= 0
    assert dpq == pytest.approx(dqp, rel=1e-12, abs=1e-12)
    assert hg.hyp_dist(p, p) <= 1e-10


@given(r=st.floats(0.05, 3), d=directions, t=directions, s=st.floats(0.0, 3.0))
def test_exp_map_travels_tangent_length(r, d, t, s):
    base = hg.polar_to_hyperboloid(r, unit(d))
    v = np.concatenate([[0.0], unit(t)])
    v = v + hg.minkowski_dot(v, base) * base  # project to the tangent space
    v = s * v / math.sqrt(hg.minkowski_dot(v, v))
    q = hg.exp_map(base, v)
    hg.check_hpoint(q, tol=1e-9)
    assert hg.hyp_dist(base, q) == pytest.approx(s, abs=1e-9 * max(1, s))


def test_unit_sphere_area():
    assert hg.unit_sphere_area(1) == pytest.approx(2 * math.pi)
    assert hg.unit_sphere_area(2) == pytest.approx(4 * math.pi)
    assert hg.unit_sphere_area(3) == pytest.approx(2 * math.pi**2)


def test_sphere_oracle_r1_n2():
    o = hg.sphere_oracle(1.0, 2)
    assert o.mean_curvature == pytest.approx(H_R1, rel=1e-14)
    assert o.area == pytest.approx(AREA_R1, rel=1e-14)
    assert o.enclosed_volume == pytest.approx(VOL_R1, rel=1e-12)
    assert o.principal_curvature > 1.0
    assert o.Aring2 == 0.0
    assert o.A2 == pytest.approx(2 / math.tanh(1) ** 2)


def test_sphere_oracle_rounded_reference_values():
    o = hg.sphere_oracle(1.0, 2)
    assert o.mean_curvature == pytest.approx(2.626068, rel=5e-6)
    assert o.area == pytest.approx(17.35554, rel=5e-5)
    assert o.enclosed_volume == pytest.approx(5.11080, rel=5e-5)


def test_sphere_oracle_n3_volume_closed_form():
    # int_0^r sinh^3 = cosh^3 r / 3 - cosh r + 2/3
    r = 1.7
    o = hg.sphere_oracle(r, 3)
    exact = 2 * math.pi**2 * (math.cosh(r) ** 3 / 3 - math.cosh(r) + 2.0 / 3.0)
    assert o.enclosed_volume == pytest.approx(exact, rel=1e-12)


def test_sphere_oracle_horosphere_limit():
    ks = [hg.sphere_oracle(r, 2).principal_curvature for r in (5.0, 10.0, 20.0)]
    assert all(k > 1.0 for k in ks[:2])
    assert ks[-1] == pytest.approx(1.0, abs=1e-12)


def test_sphere_oracle_rejects_bad_input():
    with pytest.raises(ValueError):
        hg.sphere_oracle(0.0, 2)
    with pytest.raises(ValueError):
        hg.sphere_oracle(1.0, 1)


def test_sphere_oracle_monotone():
    rs = np.linspace(0.05, 5.0, 100)
    o = [hg.sphere_oracle(r, 2) for r in rs]
    assert np.all(np.diff([x.principal_curvature for x in o]) < 0)
    assert np.all(np.diff([x.area for x in o]) > 0)
    assert np.all(np.diff([x.enclosed_volume for x in o]) > 0)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
def test_volume_derivative_is_area(n, r):
    h = 1e-5
    dV = (hg.sphere_oracle(r + h, n).enclosed_volume - hg.sphere_oracle(r - h, n).enclosed_volume) / (2 * h)
    assert dV == pytest.approx(hg.sphere_oracle(r, n).area, rel=1e-6)


@given(r=st.floats(0.05, 4.0), n=st.integers(2, 4))
def test_radius_for_volume_inverts_oracle(r, n):
    V = hg.sphere_oracle(r, n).enclosed_volume
    assert hg.radius_for_volume(V, n) == pytest.approx(r, rel=1e-10)
