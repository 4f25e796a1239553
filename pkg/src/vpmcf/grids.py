"""Parameter grids over S^n for radial-graph surfaces.

Two backends:

``AxisymmetricGrid``
    Polar angle nodes ``phi_k = k*pi/(K-1)`` (Chebyshev-Lobatto in ``cos phi``).
    Fields are even about both poles, so derivatives come from the cosine
    series of the even 2pi-periodic reflection; quadrature is the matching
    Clenshaw-Curtis rule against ``sin^{n-1} phi``.

``TriMeshGrid``
    Subdivided icosahedron on S^2 (n = 2 only). Derivatives at each vertex come
    from a weighted least-squares Taylor fit (quartic over the 3-ring by
    default, cubic over the 2-ring optionally), expressed in
    gnomonic coordinates of the tangent plane; quadrature uses lumped
    spherical-triangle areas.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import sparse

from .hypgeom import unit_sphere_area


class AxisymmetricGrid:
    """Rotationally symmetric grid: K polar-angle nodes on [0, pi], any n >= 2."""

    backend = "axisymmetric"

    def __init__(self, n: int, K: int):
        if int(n) != n or n < 2:
            raise ValueError("n must be an integer >= 2")
        if int(K) != K or K < 5:
            raise ValueError("K must be an integer >= 5")
        self.n = int(n)
        self.K = int(K)
        self.N = self.K - 1
        self.phi = np.pi * np.arange(self.K) / self.N
        # exact poles so sin/cos vanish where they should
        self.sin_phi = np.sin(self.phi)
        self.sin_phi[0] = self.sin_phi[-1] = 0.0
        self.cos_phi = np.cos(self.phi)
        self.cos_phi[0], self.cos_phi[-1] = 1.0, -1.0
        self.pole = np.zeros(self.K, dtype=bool)
        self.pole[[0, -1]] = True
        self._k = np.arange(self.N + 1, dtype=float)

    def params(self) -> dict:
        return {"K": self.K}

    def __eq__(self, other):
        return isinstance(other, AxisymmetricGrid) and (self.n, self.K) == (other.n, other.K)

    def __hash__(self):
        return hash((self.backend, self.n, self.K))

    def __repr__(self):
        return f"AxisymmetricGrid(n={self.n}, K={self.K})"

    @property
    def size(self) -> int:
        return self.K

    @property
    def directions(self) -> np.ndarray:
        """Unit directions in the meridian slice, shape (K, 2): (cos phi, sin phi)."""
        return np.stack([self.cos_phi, self.sin_phi], axis=-1)

    def _even_coeffs(self, f):
        f = np.asarray(f, dtype=float)
        ext = np.concatenate([f, f[-2:0:-1]])
        return np.fft.rfft(ext)

    def diff(self, f, order: int = 1) -> np.ndarray:
        """Spectral ``d^order f / d phi^order`` of an even (pole-symmetric) field."""
        c = self._even_coeffs(f)
        k = self._k
        if order == 1:
            c = c * (1j * k)
            c[-1] = 0.0
        elif order == 2:
            c = c * (-(k**2))
        else:
            raise ValueError("order must be 1 or 2")
        out = np.fft.irfft(c, n=2 * self.N)[: self.K]
        if order == 1:
            out[0] = out[-1] = 0.0
        return out

    def diff12(self, f):
        """First and second phi-derivatives from one transform."""
        c = self._even_coeffs(f)
        k = self._k
        c1 = c * (1j * k)
        c1[-1] = 0.0
        d1 = np.fft.irfft(c1, n=2 * self.N)[: self.K]
        d1[0] = d1[-1] = 0.0
        d2 = np.fft.irfft(c * (-(k**2)), n=2 * self.N)[: self.K]
        return d1, d2

    @cached_property
    def weights(self) -> np.ndarray:
        """Weights ``w`` with ``sum w G = int_{S^n} G dsigma`` for axisymmetric G.

        Built from the cosine moments of ``sin^p`` (p = (n-1) mod 2) with the
        even factor ``sin^{n-1-p}`` folded into the nodal values.
        """
        N = self.N
        p = (self.n - 1) % 2
        j = np.arange(N + 1)
        if p == 0:
            m = np.zeros(N + 1)
            m[0] = np.pi
        else:
            m = np.zeros(N + 1)
            even = j % 2 == 0
            m[even] = 2.0 / (1.0 - j[even].astype(float) ** 2)
        mh = m.copy()
        mh[0] *= 0.5
        mh[-1] *= 0.5
        C = np.cos(np.outer(j, j) * np.pi / N)
        w = (2.0 / N) * (C @ mh)
        w[0] *= 0.5
        w[-1] *= 0.5
        w = w * self.sin_phi ** (self.n - 1 - p)
        return unit_sphere_area(self.n - 1) * w

    def integrate(self, values) -> float:
        """Quadrature of a per-node field against the round measure of S^n."""
        return float(np.dot(self.weights, values))


# ---------------------------------------------------------------------------
# icosphere


def _icosahedron():
    t = (1.0 + 5**0.5) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return verts / np.linalg.norm(verts, axis=1)[:, None], faces


def _subdivide(verts, faces):
    nv = len(verts)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mids /= np.linalg.norm(mids, axis=1)[:, None]
    nf = len(faces)
    ab = nv + inv[:nf]
    bc = nv + inv[nf : 2 * nf]
    ca = nv + inv[2 * nf :]
    a, b, c = faces.T
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )
    return np.concatenate([verts, mids]), new_faces


def icosphere(level: int):
    """Vertices (unit vectors) and outward-oriented faces of a level-``level`` icosphere."""
    v, f = _icosahedron()
    for _ in range(int(level)):
        v, f = _subdivide(v, f)
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v, f


def spherical_triangle_area(a, b, c):
    """Solid angle of spherical triangles (Van Oosterom-Strackee formula)."""
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def _poly_basis(u, v, degree):
    cols = [u, v, 0.5 * u * u, u * v, 0.5 * v * v]
    if degree >= 3:
        cols += [u**3 / 6.0, 0.5 * u * u * v, 0.5 * u * v * v, v**3 / 6.0]
    if degree >= 4:
        cols += [u**4 / 24.0, u**3 * v / 6.0, 0.25 * u * u * v * v, u * v**3 / 6.0, v**4 / 24.0]
    return np.stack(cols, axis=-1)


class TriMeshGrid:
    """Icosphere grid on S^2 with per-vertex least-squares derivative operators.

    Parameters
    ----------
    level : int
        Subdivision level L (10 * 4^L + 2 vertices).
    fit_degree : int
        Degree of the local Taylor fit: 4 (default, 3-ring) or 3 (2-ring).
    """

    backend = "trimesh"
    n = 2

    def __init__(self, level: int, fit_degree: int = 4):
        if int(level) != level or level < 0:
            raise ValueError("level must be a nonnegative integer")
        if fit_degree not in (3, 4):
            raise ValueError("fit_degree must be 3 or 4")
        self.level = int(level)
        self.fit_degree = int(fit_degree)
        self.vertices, self.faces = icosphere(self.level)
        nv = len(self.vertices)
        euler = nv - len(self.edges) + len(self.faces)
        if euler != 2:
            raise ValueError(f"icosphere is not a closed sphere (Euler characteristic {euler})")

    def params(self) -> dict:
        return {"level": self.level, "fit_degree": self.fit_degree}

    def __eq__(self, other):
        return isinstance(other, TriMeshGrid) and (self.level, self.fit_degree) == (
            other.level,
            other.fit_degree,
        )

    def __hash__(self):
        return hash((self.backend, self.level, self.fit_degree))

    def __repr__(self):
        return f"TriMeshGrid(level={self.level}, fit_degree={self.fit_degree})"

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def directions(self) -> np.ndarray:
        return self.vertices

    @cached_property
    def edges(self) -> np.ndarray:
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        nv = self.size
        e = self.edges
        data = np.ones(2 * len(e))
        A = sparse.coo_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(nv, nv)
        )
        return A.tocsr()

    def ring(self, k: int) -> sparse.csr_matrix:
        """Boolean sparse pattern of the k-ring (excluding the vertex itself)."""
        A = self.adjacency.astype(bool).astype(np.int64)
        R = A.copy()
        P = A.copy()
        for _ in range(k - 1):
            P = (P @ A).astype(bool).astype(np.int64)
            R = (R + P).astype(bool).astype(np.int64)
        R = R.tolil()
        R.setdiag(0)
        R = R.tocsr()
        R.eliminate_zeros()
        return R

    @cached_property
    def weights(self) -> np.ndarray:
        """Lumped vertex areas on the unit sphere (one third of incident triangles)."""
        v, f = self.vertices, self.faces
        ar = spherical_triangle_area(v[f[:, 0]], v[f[:, 1]], v[f[:, 2]])
        w = np.zeros(self.size)
        for j in range(3):
            np.add.at(w, f[:, j], ar / 3.0)
        return w

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @cached_property
    def frames(self) -> np.ndarray:
        """Orthonormal tangent frames (e1, e2) per vertex, shape (V, 2, 3)."""
        p = self.vertices
        # reference axis least aligned with p
        ref = np.zeros_like(p)
        idx = np.argmin(np.abs(p), axis=1)
        ref[np.arange(len(p)), idx] = 1.0
        e1 = ref - np.einsum("ij,ij->i", ref, p)[:, None] * p
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(p, e1)
        return np.stack([e1, e2], axis=1)

    @cached_property
    def _stencil(self):
        ring = self.ring(2 if self.fit_degree == 3 else 3)
        counts = np.diff(ring.indptr)
        m = counts.max()
        nv = self.size
        idx = np.zeros((nv, m), dtype=np.int64)
        mask = np.zeros((nv, m), dtype=bool)
        for i in range(nv):
            nb = ring.indices[ring.indptr[i] : ring.indptr[i + 1]]
            idx[i, : len(nb)] = nb
            idx[i, len(nb) :] = i
            mask[i, : len(nb)] = True
        return idx, mask

    @cached_property
    def fit_operator(self) -> np.ndarray:
        """Per-vertex matrices mapping neighbour differences to Taylor coefficients.

        Returns an array of shape (V, 5, m): rows give (f_u, f_v, f_uu, f_uv,
        f_vv) at the vertex in its gnomonic chart ``theta = (p + u e1 + v e2)/|.|``.
        """
        idx, mask = self._stencil
        p = self.vertices
        q = p[idx]
        fr = self.frames
        dot_p = np.einsum("vmk,vk->vm", q, p)
        u = np.einsum("vmk,vk->vm", q, fr[:, 0]) / dot_p
        v = np.einsum("vmk,vk->vm", q, fr[:, 1]) / dot_p
        B = _poly_basis(u, v, self.fit_degree)
        # scale columns by local spacing for conditioning, Gaussian-ish weights
        r2 = u * u + v * v
        h2 = np.array([np.max(r2[i][mask[i]]) for i in range(len(p))])
        wts = np.where(mask, 1.0 / (1.0 + r2 / h2[:, None]), 0.0)
        Bw = B * wts[..., None]
        P = np.linalg.pinv(Bw)  # (V, ncoef, m)
        P = P * wts[:, None, :]
        return P[:, :5, :]

    def local_derivatives(self, f) -> np.ndarray:
        """Gnomonic-chart derivatives (f_u, f_v, f_uu, f_uv, f_vv), shape (5, V)."""
        f = np.asarray(f, dtype=float)
        idx, _ = self._stencil
        diffs = f[idx] - f[:, None]
        return np.einsum("vcm,vm->cv", self.fit_operator, diffs)

    @cached_property
    def min_chord_angle(self) -> float:
        e = self.edges
        d = np.einsum("ij,ij->i", self.vertices[e[:, 0]], self.vertices[e[:, 1]])
        return float(np.arccos(np.clip(d.max(), -1, 1)))
