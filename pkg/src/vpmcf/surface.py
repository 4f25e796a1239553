"""Radial-graph hypersurfaces in H^{n+1} and their discrete curvature.

A surface is ``X(theta) = (cosh rho(theta), sinh rho(theta) * theta)`` for
``theta`` on a parameter grid over S^n. Fundamental forms are Minkowski dot
products of embedding partials; the normal is the Minkowski-unit vector
orthogonal to ``X`` and all partials, oriented outward.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra, connected_components

from . import hypgeom
from .grids import AxisymmetricGrid, TriMeshGrid

# Test hook: flipping this sign corrupts the second fundamental form.
_SFF_SIGN = 1.0


class DegenerateSurfaceError(RuntimeError):
    """Raised when the induced metric degenerates or rho leaves (0, inf)."""


@dataclass(frozen=True, eq=False)
class RadialSurface:
    grid: AxisymmetricGrid | TriMeshGrid
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (self.grid.size,):
            raise ValueError(f"rho has shape {rho.shape}, grid expects ({self.grid.size},)")
        if not np.all(np.isfinite(rho)):
            raise DegenerateSurfaceError("non-finite radial values")
        if np.any(rho <= 0.0):
            raise DegenerateSurfaceError("rho <= 0: surface is not star-shaped about the basepoint")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.grid.n

    def with_rho(self, rho) -> "RadialSurface":
        return RadialSurface(self.grid, rho)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Per-node curvature data of a :class:`RadialSurface`.

    ``g`` and ``a`` are (g_phiphi, g_angular) pairs on the axisymmetric
    backend and full 2x2 chart matrices on the mesh backend.
    """

    g: np.ndarray
    a: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    Aring2: np.ndarray
    nu: np.ndarray
    X: np.ndarray
    gradH2: np.ndarray
    lapH: np.ndarray
    v: np.ndarray
    # dmu/dsigma: area element relative to the round measure of S^n
    J: np.ndarray
    # principal curvatures, shape (nodes, 2): meridian/angular or sorted pair
    lam: np.ndarray
    rho_d: tuple = field(repr=False, default=())
    extra: dict = field(repr=False, default_factory=dict)


# ---------------------------------------------------------------------------
# embedding


def embed(s: RadialSurface) -> np.ndarray:
    """Hyperboloid points of all nodes.

    Axisymmetric surfaces are embedded in the meridian slice H^2 (3 Minkowski
    coordinates); rotating it about the axis sweeps the full hypersurface.
    """
    return hypgeom.polar_to_hyperboloid(s.rho, s.grid.directions)


def _lorentz_normal(*vecs):
    """Vector Minkowski-orthogonal to d-1 vectors in R^{d-1,1} (unnormalised)."""
    if len(vecs) == 2 and vecs[0].shape[-1] == 3:
        out = np.cross(vecs[0], vecs[1])
        out[..., 0] *= -1.0
        return out
    M = np.stack(vecs, axis=-2)  # (..., d-1, d)
    d = M.shape[-1]
    out = np.empty(M.shape[:-2] + (d,))
    for i in range(d):
        cols = [j for j in range(d) if j != i]
        out[..., i] = (-1) ** i * np.linalg.det(M[..., cols])
    out[..., 0] *= -1.0
    return out


def _axisym_curvature(s: RadialSurface, full: bool = True) -> CurvatureField:
    grid: AxisymmetricGrid = s.grid
    n = grid.n
    rho = s.rho
    r1, r2 = grid.diff12(rho)
    c, sn = grid.cos_phi, grid.sin_phi
    ch, sh = np.cosh(rho), np.sinh(rho)

    X = np.stack([ch, sh * c, sh * sn], axis=-1)
    Xp = np.stack([sh * r1, ch * r1 * c - sh * sn, ch * r1 * sn + sh * c], axis=-1)
    q = sh * r1 * r1 + ch * r2
    Xpp = np.stack(
        [
            ch * r1 * r1 + sh * r2,
            q * c - 2.0 * ch * r1 * sn - sh * c,
            q * sn + 2.0 * ch * r1 * c - sh * sn,
        ],
        axis=-1,
    )
    e_rho = np.stack([sh, ch * c, ch * sn], axis=-1)

    nu = _lorentz_normal(X, Xp)
    nrm2 = hypgeom.minkowski_dot(nu, nu)
    if np.any(nrm2 <= 0):
        raise DegenerateSurfaceError("normal is not spacelike")
    nu = nu / np.sqrt(nrm2)[:, None]
    nu *= np.sign(hypgeom.minkowski_dot(nu, e_rho))[:, None]

    gpp = hypgeom.minkowski_dot(Xp, Xp)
    if np.any(gpp <= 0):
        raise DegenerateSurfaceError("degenerate induced metric (g_phiphi <= 0)")
    app = -_SFF_SIGN * hypgeom.minkowski_dot(Xpp, nu)
    lam_m = app / gpp

    radial = sh * sn
    gang = radial**2
    aang = _SFF_SIGN * radial * nu[:, 2]
    lam_a = np.empty_like(lam_m)
    inner = ~grid.pole
    lam_a[inner] = _SFF_SIGN * nu[inner, 2] / radial[inner]
    # umbilic at the poles by symmetry
    lam_a[grid.pole] = lam_m[grid.pole]

    H = lam_m + (n - 1) * lam_a
    A2 = lam_m**2 + (n - 1) * lam_a**2
    Aring2 = (n - 1) / n * (lam_m - lam_a) ** 2

    v = 1.0 / hypgeom.minkowski_dot(nu, e_rho)
    J = np.sqrt(gpp) * sh ** (n - 1)

    gradH2 = lapH = None
    if full:
        H1, H2 = grid.diff12(H)
        gradH2 = H1**2 / gpp
        lapH = axisym_laplacian(grid, rho, r1, r2, gpp, H1, H2)

    return CurvatureField(
        g=np.stack([gpp, gang], axis=-1),
        a=np.stack([app, aang], axis=-1),
        H=H,
        A2=A2,
        Aring2=Aring2,
        nu=nu,
        X=X,
        gradH2=gradH2,
        lapH=lapH,
        v=v,
        J=J,
        lam=np.stack([lam_m, lam_a], axis=-1),
        rho_d=(r1, r2),
        extra={"Xp": Xp},
    )


def axisym_laplacian(grid, rho, r1, r2, gpp, f1, f2):
    """Laplace-Beltrami of an axisymmetric field given its phi-derivatives f1, f2."""
    n = grid.n
    gp = 2.0 * r1 * r2 + 2.0 * np.sinh(rho) * np.cosh(rho) * r1
    out = np.empty_like(f1)
    inner = ~grid.pole
    cot = grid.cos_phi[inner] / grid.sin_phi[inner]
    coth = 1.0 / np.tanh(rho[inner])
    out[inner] = f2[inner] / gpp[inner] + (f1[inner] / gpp[inner]) * (
        (n - 1) * (coth * r1[inner] + cot) - gp[inner] / (2.0 * gpp[inner])
    )
    # cot(phi) f' -> f'' at the poles
    out[grid.pole] = n * f2[grid.pole] / gpp[grid.pole]
    return out


def _tri_partials(grid: TriMeshGrid, rho, D):
    ru, rv, ruu, ruv, rvv = D
    p = grid.vertices
    e1, e2 = grid.frames[:, 0], grid.frames[:, 1]
    ch, sh = np.cosh(rho)[:, None], np.sinh(rho)[:, None]
    zero = np.zeros((len(rho), 1))

    def lift(t, s_):
        return np.concatenate([t[:, None] if t.ndim == 1 else t, s_], axis=1)

    X = lift(ch[:, 0], sh * p)
    th = {"u": e1, "v": e2}
    rd = {"u": ru[:, None], "v": rv[:, None]}
    Xi = {k: lift(sh[:, 0] * rd[k][:, 0], ch * rd[k] * p + sh * th[k]) for k in "uv"}
    rdd = {"uu": ruu[:, None], "uv": ruv[:, None], "vv": rvv[:, None]}
    thdd = {"uu": -p, "uv": np.zeros_like(p), "vv": -p}
    Xij = {}
    for key in ("uu", "uv", "vv"):
        i, j = key
        rr = rd[i] * rd[j]
        t0 = ch * rr + sh * rdd[key]
        sp = (sh * rr + ch * rdd[key]) * p + ch * (rd[i] * th[j] + rd[j] * th[i]) + sh * thdd[key]
        Xij[key] = lift(t0[:, 0], sp)
    e_rho = lift(sh[:, 0], ch * p)
    return X, Xi, Xij, e_rho


def _tri_curvature(s: RadialSurface, full: bool = True) -> CurvatureField:
    grid: TriMeshGrid = s.grid
    rho = s.rho
    D = grid.local_derivatives(rho)
    X, Xi, Xij, e_rho = _tri_partials(grid, rho, D)
    mdot = hypgeom.minkowski_dot

    nu = _lorentz_normal(X, Xi["u"], Xi["v"])
    nrm2 = mdot(nu, nu)
    if np.any(nrm2 <= 0):
        raise DegenerateSurfaceError("normal is not spacelike")
    nu = nu / np.sqrt(nrm2)[:, None]
    nu *= np.sign(mdot(nu, e_rho))[:, None]

    g = np.empty((len(rho), 2, 2))
    g[:, 0, 0] = mdot(Xi["u"], Xi["u"])
    g[:, 0, 1] = g[:, 1, 0] = mdot(Xi["u"], Xi["v"])
    g[:, 1, 1] = mdot(Xi["v"], Xi["v"])
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    if np.any(det <= 0):
        raise DegenerateSurfaceError("degenerate induced metric (det g <= 0)")
    ginv = np.empty_like(g)
    ginv[:, 0, 0] = g[:, 1, 1] / det
    ginv[:, 1, 1] = g[:, 0, 0] / det
    ginv[:, 0, 1] = ginv[:, 1, 0] = -g[:, 0, 1] / det

    a = np.empty_like(g)
    a[:, 0, 0] = -_SFF_SIGN * mdot(Xij["uu"], nu)
    a[:, 0, 1] = a[:, 1, 0] = -_SFF_SIGN * mdot(Xij["uv"], nu)
    a[:, 1, 1] = -_SFF_SIGN * mdot(Xij["vv"], nu)

    S = ginv @ a
    H = S[:, 0, 0] + S[:, 1, 1]
    A2 = np.einsum("vij,vji->v", S, S)
    disc = (S[:, 0, 0] - S[:, 1, 1]) ** 2 + 4.0 * S[:, 0, 1] * S[:, 1, 0]
    disc = np.maximum(disc, 0.0)
    Aring2 = 0.5 * disc
    sq = np.sqrt(disc)
    lam = np.stack([0.5 * (H - sq), 0.5 * (H + sq)], axis=-1)

    v = 1.0 / mdot(nu, e_rho)
    J = np.sqrt(det)

    # Christoffel symbols of the first kind: <X_ij, X_k>
    keys = {(0, 0): "uu", (0, 1): "uv", (1, 0): "uv", (1, 1): "vv"}
    Xk = (Xi["u"], Xi["v"])
    G1 = np.empty((len(rho), 2, 2, 2))
    for (i, j), key in keys.items():
        for k in range(2):
            G1[:, i, j, k] = mdot(Xij[key], Xk[k])
    Gamma = np.einsum("vkl,vijl->vkij", ginv, G1)

    extra = {"ginv": ginv, "Gamma": Gamma, "partials": (X, Xi, Xij)}
    gradH2 = lapH = None
    if full:
        gradH2, lapH = _tri_grad_lap(ginv, Gamma, grid.local_derivatives(H))

    return CurvatureField(
        g=g,
        a=a,
        H=H,
        A2=A2,
        Aring2=Aring2,
        nu=nu,
        X=X,
        gradH2=gradH2,
        lapH=lapH,
        v=v,
        J=J,
        lam=lam,
        rho_d=tuple(D),
        extra=extra,
    )


def _tri_grad_lap(ginv, Gamma, D):
    fu, fv, fuu, fuv, fvv = D
    grad = np.stack([fu, fv], axis=-1)
    hess = np.stack([np.stack([fuu, fuv], -1), np.stack([fuv, fvv], -1)], -2)
    grad2 = np.einsum("vi,vij,vj->v", grad, ginv, grad)
    cov = hess - np.einsum("vkij,vk->vij", Gamma, grad)
    lap = np.einsum("vij,vij->v", ginv, cov)
    return grad2, lap


def curvature_field(s: RadialSurface, full: bool = True) -> CurvatureField:
    """Metric, second fundamental form, H, |A|^2, |Å|^2, normal and H-derivatives.

    With ``full=False`` the H-derivative fields (``gradH2``, ``lapH``) are
    skipped and left as None; integrator stages only need H, v and J.
    """
    if s.grid.backend == "axisymmetric":
        if s.grid.K < 9:
            raise ValueError("axisymmetric curvature needs at least 9 nodes")
        return _axisym_curvature(s, full)
    return _tri_curvature(s, full)


# ---------------------------------------------------------------------------
# field calculus on the surface


def surface_gradient_dot(s: RadialSurface, c: CurvatureField, f, w) -> np.ndarray:
    """Pointwise ``<grad f, grad w>`` in the induced metric."""
    grid = s.grid
    if grid.backend == "axisymmetric":
        return grid.diff(f) * grid.diff(w) / c.g[:, 0]
    Df = grid.local_derivatives(f)
    Dw = grid.local_derivatives(w)
    gf = np.stack([Df[0], Df[1]], -1)
    gw = np.stack([Dw[0], Dw[1]], -1)
    return np.einsum("vi,vij,vj->v", gf, c.extra["ginv"], gw)


def laplacian(s: RadialSurface, c: CurvatureField, f) -> np.ndarray:
    """Discrete Laplace-Beltrami of a per-node field."""
    grid = s.grid
    if grid.backend == "axisymmetric":
        f1, f2 = grid.diff12(f)
        r1, r2 = c.rho_d
        return axisym_laplacian(grid, s.rho, r1, r2, c.g[:, 0], f1, f2)
    D = grid.local_derivatives(f)
    return _tri_grad_lap(c.extra["ginv"], c.extra["Gamma"], D)[1]


def rho_gradient_dot(s: RadialSurface, c: CurvatureField, f) -> np.ndarray:
    """Pointwise ``<grad f, grad rho>``; the tangential transport term of radial motion."""
    grid = s.grid
    if grid.backend == "axisymmetric":
        return grid.diff(f) * c.rho_d[0] / c.g[:, 0]
    Df = grid.local_derivatives(f)
    gf = np.stack([Df[0], Df[1]], -1)
    gr = np.stack([c.rho_d[0], c.rho_d[1]], -1)
    return np.einsum("vi,vij,vj->v", gf, c.extra["ginv"], gr)


def principal_curvatures(c: CurvatureField, node: int, n: int | None = None) -> np.ndarray:
    """Eigenvalues of the shape operator at ``node``.

    On the axisymmetric backend returns the meridian value followed by the
    angular value repeated ``n - 1`` times (pass ``n``; defaults to 2).
    """
    lam = c.lam[node]
    if c.g.ndim == 2:  # axisymmetric
        n = 2 if n is None else n
        if c.g[node, 0] <= 0:
            raise DegenerateSurfaceError("degenerate metric")
        return np.array([lam[0]] + [lam[1]] * (n - 1))
    return np.array(lam)


def traceless_cubic_trace(c: CurvatureField, n: int) -> np.ndarray:
    """``tr(Å^3)`` from principal curvatures."""
    lam = c.lam
    mean = c.H / n
    if c.g.ndim == 2:
        return (lam[:, 0] - mean) ** 3 + (n - 1) * (lam[:, 1] - mean) ** 3
    return np.sum((lam - mean[:, None]) ** 3, axis=1)


# ---------------------------------------------------------------------------
# integrals


def _sinh_power_integral(rho, n: int):
    """``int_0^rho sinh^n s ds`` by the reduction recurrence."""
    rho = np.asarray(rho, dtype=float)
    sh, ch = np.sinh(rho), np.cosh(rho)
    I_prev, I = rho, ch - 1.0  # I_0, I_1
    if n == 0:
        return I_prev
    for k in range(2, n + 1):
        I_prev, I = I, sh ** (k - 1) * ch / k - (k - 1) / k * I_prev
    return I


def area(s: RadialSurface, c: CurvatureField | None = None) -> float:
    if c is None:
        c = curvature_field(s)
    return s.grid.integrate(c.J)


def enclosed_volume(s: RadialSurface) -> float:
    """Volume of the star-shaped region ``{r < rho(theta)}``."""
    if np.any(s.rho <= 0):
        raise DegenerateSurfaceError("rho <= 0")
    return s.grid.integrate(_sinh_power_integral(s.rho, s.n))


def surface_integral(s: RadialSurface, c: CurvatureField, f) -> float:
    return s.grid.integrate(np.asarray(f) * c.J)


def mean_of_H(s: RadialSurface, c: CurvatureField) -> float:
    """Area-weighted average of the mean curvature."""
    w = s.grid.weights * c.J
    return float(np.dot(w, c.H) / np.sum(w))


# ---------------------------------------------------------------------------
# diameter


def _graph_diameter(points, edges, n_nodes, sources, sweeps: int = 3) -> float:
    d = hypgeom.hyp_dist(points[edges[:, 0]], points[edges[:, 1]])
    G = coo_matrix((d, (edges[:, 0], edges[:, 1])), shape=(n_nodes, n_nodes)).tocsr()
    ncomp, _ = connected_components(G, directed=False)
    if ncomp != 1:
        raise ValueError("node graph is disconnected")
    best = 0.0
    srcs = list(sources)
    seen = set()
    for _ in range(sweeps + 1):
        srcs = [x for x in srcs if x not in seen]
        if not srcs:
            break
        dist = dijkstra(G, directed=False, indices=srcs)
        seen.update(srcs)
        row, col = np.unravel_index(np.argmax(dist), dist.shape)
        best = max(best, float(dist[row, col]))
        srcs = [int(col)]
    return best


def _axisym_diameter(s: RadialSurface) -> float:
    grid: AxisymmetricGrid = s.grid
    K = grid.K
    M = (K + 1) // 2
    psi = np.pi * np.arange(M) / (M - 1)
    inner = np.arange(1, K - 1)
    # node ids: north pole 0, south pole 1, interior (k, m) -> 2 + (k-1)*M + m
    def nid(k, m):
        k = np.asarray(k)
        m = np.asarray(m)
        out = 2 + (k - 1) * M + m
        out = np.where(k == 0, 0, out)
        out = np.where(k == K - 1, 1, out)
        return out

    n_nodes = 2 + (K - 2) * M
    pts = np.zeros((n_nodes, 4))
    rho = s.rho
    pts[0] = [np.cosh(rho[0]), np.sinh(rho[0]), 0, 0]
    pts[1] = [np.cosh(rho[-1]), -np.sinh(rho[-1]), 0, 0]
    kk, mm = np.meshgrid(inner, np.arange(M), indexing="ij")
    r = rho[kk]
    ph = grid.phi[kk]
    ids = nid(kk, mm).ravel()
    pts[ids, 0] = np.cosh(r).ravel()
    pts[ids, 1] = (np.sinh(r) * np.cos(ph)).ravel()
    pts[ids, 2] = (np.sinh(r) * np.sin(ph) * np.cos(psi[mm])).ravel()
    pts[ids, 3] = (np.sinh(r) * np.sin(ph) * np.sin(psi[mm])).ravel()

    offsets = [(1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)]
    edges = []
    K_all, M_all = np.meshgrid(np.arange(K), np.arange(M), indexing="ij")
    for dk, dm in offsets:
        k2 = K_all + dk
        m2 = M_all + dm
        ok = (k2 >= 0) & (k2 < K) & (m2 >= 0) & (m2 < M)
        a = nid(K_all[ok], M_all[ok])
        b = nid(k2[ok], m2[ok])
        keep = a != b
        edges.append(np.stack([a[keep], b[keep]], axis=1))
    edges = np.unique(np.sort(np.concatenate(edges), axis=1), axis=0)
    land = np.unique(np.linspace(0, K - 1, 9).round().astype(int))
    sources = np.unique(nid(land, np.zeros_like(land)))
    return _graph_diameter(pts, edges, n_nodes, sources.tolist())


def _tri_diameter(s: RadialSurface) -> float:
    grid: TriMeshGrid = s.grid
    pts = embed(s)
    R = grid.ring(2).tocoo()
    e = np.stack([R.row, R.col], axis=1)
    e = e[e[:, 0] < e[:, 1]]
    # landmarks: the 12 icosahedron vertices plus farthest-point sweeps
    return _graph_diameter(pts, e, grid.size, list(range(12)))


def diameter_estimate(s: RadialSurface) -> float:
    """Intrinsic diameter from landmark shortest paths on the node graph.

    Edge weights are hyperbolic chord lengths between embedded neighbours; the
    estimate is accurate to O(mesh spacing).
    """
    if s.grid.backend == "axisymmetric":
        return _axisym_diameter(s)
    return _tri_diameter(s)


# ---------------------------------------------------------------------------
# gradient norms


def gradient_terms(s: RadialSurface, c: CurvatureField) -> dict:
    """Per-node |grad H|^2 and, on the axisymmetric backend, |grad A|^2 and |grad Å|^2.

    For a rotation hypersurface the only nonzero components of the (totally
    symmetric) tensor grad A are d(lam_m)/ds on the meridian and
    d(lam_a)/ds, the latter appearing in 3(n-1) index slots.
    """
    out = {"gradH2": c.gradH2}
    if s.grid.backend == "axisymmetric":
        n = s.n
        sq = np.sqrt(c.g[:, 0])
        dm = s.grid.diff(c.lam[:, 0]) / sq
        da = s.grid.diff(c.lam[:, 1]) / sq
        gradA2 = dm**2 + 3 * (n - 1) * da**2
        out["gradA2"] = gradA2
        out["gradAring2"] = gradA2 - c.gradH2 / n
    return out


def grad_norms(s: RadialSurface, c: CurvatureField):
    """``(max |grad H|, int |grad A|^2 dmu)``; the integral is None on the mesh backend."""
    terms = gradient_terms(s, c)
    max_grad = float(np.sqrt(np.max(terms["gradH2"])))
    if "gradA2" in terms:
        return max_grad, surface_integral(s, c, terms["gradA2"])
    return max_grad, None


# ---------------------------------------------------------------------------
# snapshots


def make_grid(backend: str, n: int, **params):
    backend = backend.lower()
    if backend == "axisymmetric":
        return AxisymmetricGrid(n, int(params["K"]))
    if backend == "trimesh":
        if n != 2:
            raise ValueError("trimesh backend supports n = 2 only")
        return TriMeshGrid(int(params["level"]), int(params.get("fit_degree", 4)))
    raise ValueError(f"unknown backend {backend!r}")


def snapshot_dict(s: RadialSurface) -> dict:
    return {"backend": s.grid.backend, "n": s.n, "grid": s.grid.params(), "rho": s.rho.tolist()}


def save_snapshot(s: RadialSurface, path) -> None:
    """Write a surface snapshot; floats carry 17 significant digits."""
    head = {"backend": s.grid.backend, "n": s.n, "grid": s.grid.params()}
    body = ", ".join(f"{x:.17g}" for x in s.rho)
    text = json.dumps(head)[:-1] + f', "rho": [{body}]}}'
    Path(path).write_text(text + "\n")


def load_snapshot(path) -> RadialSurface:
    d = json.loads(Path(path).read_text())
    grid = make_grid(d["backend"], int(d["n"]), **d["grid"])
    return RadialSurface(grid, np.array(d["rho"], dtype=float))
