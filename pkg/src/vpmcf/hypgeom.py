"""Hyperboloid-model primitives for H^{n+1} and geodesic-sphere closed forms.

Points of hyperbolic space live on the upper sheet ``<X, X> = -1, X^0 >= 1``
of Minkowski space with signature ``(-, +, ..., +)``; index 0 is timelike.
All functions accept either single vectors (shape ``(d,)``) or stacks of
vectors (shape ``(..., d)``) and broadcast over the leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

HPOINT_TOL = 1e-12
TANGENT_TOL = 1e-12


def minkowski_dot(u, v):
    """Lorentzian inner product ``-u^0 v^0 + sum_i u^i v^i`` over the last axis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


def basepoint(dim: int) -> np.ndarray:
    """Origin ``(1, 0, ..., 0)`` of the hyperboloid in Minkowski ``dim``-space."""
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def check_hpoint(x, tol: float = HPOINT_TOL) -> np.ndarray:
    """Validate that ``x`` lies on the upper sheet; returns it as an array."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite hyperboloid coordinates")
    q = minkowski_dot(x, x)
    # tolerance is relative to the size of the timelike coordinate
    scale = np.maximum(1.0, x[..., 0] ** 2)
    if np.any(np.abs(q + 1.0) > tol * scale):
        raise ValueError("point is off the hyperboloid <X,X> = -1")
    if np.any(x[..., 0] < 1.0 - tol):
        raise ValueError("point is on the lower sheet")
    return x


def check_tangent(base, vec, tol: float = TANGENT_TOL) -> np.ndarray:
    """Validate ``<base, vec> = 0`` (``vec`` tangent to the hyperboloid at ``base``)."""
    base = np.asarray(base, dtype=float)
    vec = np.asarray(vec, dtype=float)
    scale = np.maximum(1.0, np.abs(base[..., 0]) * np.max(np.abs(vec), axis=-1))
    if np.any(np.abs(minkowski_dot(base, vec)) > tol * scale):
        raise ValueError("vector is not tangent to the hyperboloid at its base point")
    return vec


def hyp_dist(p, q, tol: float = 1e-10):
    """Geodesic distance ``arccosh(-<p, q>)``.

    Raises ``ValueError`` when ``-<p, q>`` falls below 1 by more than ``tol``
    (relative), which only happens for points off the hyperboloid.
    """
    c = -minkowski_dot(p, q)
    if np.any(c < 1.0 - tol * np.maximum(1.0, np.abs(c))):
        raise ValueError("-<p,q> < 1: inputs are not valid hyperboloid points")
    c = np.maximum(c, 1.0)
    # arccosh loses half the digits near 1; recover small distances from the
    # Euclidean-in-Minkowski chord, |p - q|_M = 2 sinh(d/2)
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    chord2 = np.maximum(minkowski_dot(diff, diff), 0.0)
    small = 2.0 * np.arcsinh(0.5 * np.sqrt(chord2))
    return np.where(c < 1.5, small, np.arccosh(c))


def polar_to_hyperboloid(rho, theta):
    """Geodesic polar coordinates about the basepoint: ``(cosh rho, sinh rho * theta)``.

    ``theta`` holds unit vectors of R^{n+1} on its last axis; ``rho`` broadcasts
    against ``theta[..., 0]``.
    """
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("radial coordinate must be positive")
    if np.any(np.abs(np.linalg.norm(theta, axis=-1) - 1.0) > 1e-12):
        raise ValueError("direction vectors must be unit length")
    rho_b = rho[..., None]
    return np.concatenate(
        [np.cosh(rho_b) * np.ones_like(theta[..., :1]), np.sinh(rho_b) * theta], axis=-1
    )


def exp_map(base, vec):
    """Exponential map of the hyperboloid at ``base`` applied to tangent ``vec``."""
    base = np.asarray(base, dtype=float)
    vec = np.asarray(vec, dtype=float)
    nrm = np.sqrt(np.maximum(minkowski_dot(vec, vec), 0.0))[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        sinhc = np.where(nrm > 1e-300, np.sinh(nrm) / np.where(nrm > 0, nrm, 1.0), 1.0)
    out = np.cosh(nrm) * base + sinhc * vec
    # re-project to counter round-off drift
    return out / np.sqrt(-minkowski_dot(out, out))[..., None]


def unit_sphere_area(n: int) -> float:
    """Area ``omega_n`` of the unit n-sphere in R^{n+1}."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


@dataclass(frozen=True)
class SphereOracle:
    """Closed-form data of the geodesic sphere of radius ``radius`` in H^{n+1}."""

    radius: float
    n: int
    principal_curvature: float
    mean_curvature: float
    area: float
    enclosed_volume: float
    Aring2: float = 0.0

    @property
    def A2(self) -> float:
        return self.n * self.principal_curvature ** 2


def _sinh_power_integral(r: float, n: int) -> float:
    val, _ = integrate.quad(
        lambda s: math.sinh(s) ** n, 0.0, r, epsabs=0.0, epsrel=1e-13, limit=200
    )
    return val


def sphere_oracle(r: float, n: int) -> SphereOracle:
    """Geodesic sphere of radius ``r`` about any point of H^{n+1}.

    The enclosed volume uses adaptive Gauss-Kronrod quadrature of
    ``sinh^n``, independent of the closed-form recurrences used by the
    discretisations it validates.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    kappa = 1.0 / math.tanh(r)
    wn = unit_sphere_area(n)
    return SphereOracle(
        radius=float(r),
        n=n,
        principal_curvature=kappa,
        mean_curvature=n * kappa,
        area=wn * math.sinh(r) ** n,
        enclosed_volume=wn * _sinh_power_integral(r, n),
    )


def radius_for_volume(volume: float, n: int) -> float:
    """Radius of the geodesic sphere in H^{n+1} enclosing ``volume`` (oracle inverse)."""
    if volume <= 0:
        raise ValueError("volume must be positive")
    f = lambda r: sphere_oracle(r, n).enclosed_volume - volume
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
