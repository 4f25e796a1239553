import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpmcf.grids import AxisymmetricGrid, TriMeshGrid, icosphere, spherical_triangle_area
from vpmcf.hypgeom import unit_sphere_area


def test_axisymmetric_nodes():
    g = AxisymmetricGrid(2, 33)
    assert g.phi[0] == 0.0 and g.phi[-1] == pytest.approx(math.pi)
    assert np.all(np.diff(g.phi) > 0)
    assert g.sin_phi[0] == 0.0 and g.sin_phi[-1] == 0.0
    assert g.pole.sum() == 2


@pytest.mark.parametrize("bad", [(1, 33), (2, 3), (2.5, 33)])
def test_axisymmetric_rejects_bad_params(bad):
    with pytest.raises(ValueError):
        AxisymmetricGrid(*bad)


def test_spectral_derivatives_of_even_fields():
    g = AxisymmetricGrid(2, 33)
    f = np.cos(3 * g.phi) + 0.5 * np.cos(g.phi) ** 2
    d1, d2 = g.diff12(f)
    e1 = -3 * np.sin(3 * g.phi) - np.cos(g.phi) * np.sin(g.phi)
    e2 = -9 * np.cos(3 * g.phi) - np.cos(2 * g.phi)
    assert np.max(np.abs(d1 - e1)) < 1e-12
    assert np.max(np.abs(d2 - e2)) < 1e-11
    assert np.allclose(g.diff(f), d1) and np.allclose(g.diff(f, 2), d2)
    with pytest.raises(ValueError):
        g.diff(f, 3)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_axisymmetric_quadrature(n):
    g = AxisymmetricGrid(n, 17)
    assert g.integrate(np.ones(g.K)) == pytest.approx(unit_sphere_area(n), rel=1e-13)
    # int_{S^n} cos^2 phi = omega_n / (n + 1)
    assert g.integrate(g.cos_phi**2) == pytest.approx(unit_sphere_area(n) / (n + 1), rel=1e-13)


def test_axisymmetric_grid_equality():
    assert AxisymmetricGrid(2, 33) == AxisymmetricGrid(2, 33)
    assert AxisymmetricGrid(2, 33) != AxisymmetricGrid(3, 33)
    assert AxisymmetricGrid(2, 33).params() == {"K": 33}


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_topology(level):
    v, f = icosphere(level)
    assert len(v) == 10 * 4**level + 2
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)
    # outward orientation: face normal points away from the centre
    nrm = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    assert np.all(np.einsum("ij,ij->i", nrm, v[f].mean(axis=1)) > 0)


def test_trimesh_euler_characteristic_and_weights():
    g = TriMeshGrid(3)
    assert g.size - len(g.edges) + len(g.faces) == 2
    assert g.integrate(np.ones(g.size)) == pytest.approx(4 * math.pi, rel=1e-12)
    assert g.fit_degree == 4


def test_spherical_triangle_octant():
    e = np.eye(3)
    a = spherical_triangle_area(e[[0]], e[[1]], e[[2]])
    assert a[0] == pytest.approx(math.pi / 2)


def test_ring_sizes():
    g = TriMeshGrid(2)
    r1 = np.diff(g.ring(1).indptr)
    assert set(r1) == {5, 6}
    assert np.all(np.diff(g.ring(2).indptr) > r1)


def test_frames_orthonormal():
    g = TriMeshGrid(2)
    fr, p = g.frames, g.vertices
    assert np.allclose(np.einsum("vk,vk->v", fr[:, 0], p), 0, atol=1e-14)
    assert np.allclose(np.einsum("vk,vk->v", fr[:, 1], p), 0, atol=1e-14)
    assert np.allclose(np.linalg.norm(fr, axis=2), 1.0)


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_local_derivatives_linear_and_kill_constants(a, b, seed):
    g = TriMeshGrid(2)
    r = np.random.default_rng(seed)
    f, h = r.standard_normal(g.size), r.standard_normal(g.size)
    lhs = g.local_derivatives(a * f + b * h + 7.0)
    rhs = a * g.local_derivatives(f) + b * g.local_derivatives(h)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_local_gradient_converges():
    # f = <theta, c> has chart gradient (<e1, c>, <e2, c>) at every vertex
    c = np.array([0.3, -0.5, 0.8])
    errs = []
    for level in (2, 3, 4):
        g = TriMeshGrid(level)
        fu, fv, *_ = g.local_derivatives(g.vertices @ c)
        errs.append(max(np.max(np.abs(fu - g.frames[:, 0] @ c)), np.max(np.abs(fv - g.frames[:, 1] @ c))))
    assert errs[0] / errs[1] > 8 and errs[1] / errs[2] > 8
    assert errs[-1] < 1e-3


def test_local_hessian_converges():
    # f = z^2 has exact chart derivatives; error should fall at least like h^2
    errs = []
    for level in (3, 4, 5):
        g = TriMeshGrid(level)
        p, fr = g.vertices, g.frames
        f = p[:, 2] ** 2
        D = g.local_derivatives(f)
        a, b = fr[:, 0, 2], fr[:, 1, 2]
        z = p[:, 2]
        exact_uu = 2 * a * a - 2 * z * z
        errs.append(np.max(np.abs(D[2] - exact_uu)))
    assert errs[0] / errs[1] > 4 and errs[1] / errs[2] > 4
