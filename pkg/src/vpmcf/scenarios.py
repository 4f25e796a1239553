"""Initial-condition generators, initial-data classification and parameter sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import eval_legendre, sph_harm_y

from . import diagnostics
from .flow import FlowAborted, FlowConfig, run
from .surface import (
    DegenerateSurfaceError,
    RadialSurface,
    area,
    curvature_field,
    make_grid,
    surface_integral,
)

KINDS = ("Sphere", "LegendreModes", "RandomBandlimited")


@dataclass(frozen=True)
class InitialConditionSpec:
    """Recipe for an initial radial graph.

    ``modes`` holds ``(degree, amplitude)`` pairs for ``LegendreModes``;
    ``lmax``, ``total_amplitude`` and ``seed`` drive ``RandomBandlimited``,
    whose amplitude is the largest node deviation ``max|rho - r0|``.
    Grid fields: ``backend`` with ``K`` (axisymmetric) or ``level`` and
    ``fit_degree`` (trimesh).
    """

    kind: str = "Sphere"
    r0: float = 1.0
    n: int = 2
    modes: tuple = ()
    lmax: int = 6
    total_amplitude: float = 0.0
    seed: int = 0
    backend: str = "axisymmetric"
    K: int = 129
    level: int = 5
    fit_degree: int = 4
    allow_low_modes: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        modes = tuple((int(l), float(e)) for l, e in self.modes)
        object.__setattr__(self, "modes", modes)
        lowest = 0 if self.allow_low_modes else 2
        for l, _ in modes:
            if l < lowest:
                raise ValueError(f"mode degree {l} < {lowest} (set allow_low_modes to permit)")
        if self.kind == "RandomBandlimited":
            if self.lmax < lowest:
                raise ValueError("lmax below the lowest admissible degree")
            if self.total_amplitude < 0:
                raise ValueError("total_amplitude must be nonnegative")

    def grid(self):
        if self.backend.lower() == "axisymmetric":
            return make_grid("axisymmetric", self.n, K=self.K)
        return make_grid("trimesh", self.n, level=self.level, fit_degree=self.fit_degree)


def _polar_cos(grid) -> np.ndarray:
    """cos of the angle from the symmetry (first) axis at each grid direction."""
    return grid.directions[:, 0]


def _zonal(grid, l: int) -> np.ndarray:
    return eval_legendre(l, _polar_cos(grid))


def _random_field(spec: InitialConditionSpec, grid) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    lowest = 0 if spec.allow_low_modes else 2
    x = _polar_cos(grid)
    out = np.zeros(grid.size)
    if grid.backend == "axisymmetric":
        for l in range(lowest, spec.lmax + 1):
            out += rng.standard_normal() * eval_legendre(l, x)
    else:
        d = grid.directions
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        az = np.arctan2(d[:, 2], d[:, 1])
        for l in range(lowest, spec.lmax + 1):
            coef = rng.standard_normal(2 * l + 1)
            for m in range(0, l + 1):
                Y = sph_harm_y(l, m, theta, az)
                if m == 0:
                    out += coef[l] * Y.real
                else:
                    out += math.sqrt(2.0) * (coef[l + m] * Y.real + coef[l - m] * Y.imag)
    peak = float(np.max(np.abs(out)))
    if peak == 0.0:
        return out
    return spec.total_amplitude / peak * out


def make_initial(spec: InitialConditionSpec) -> RadialSurface:
    """Sample the initial radius field on the grid named by spec.

    Zonal modes are Legendre polynomials of the cosine of the angle from the
    first axis, so the trimesh sampling matches the axisymmetric profile.
    """
    grid = spec.grid()
    rho = np.full(grid.size, float(spec.r0))
    if spec.kind == "LegendreModes":
        for l, eps in spec.modes:
            rho = rho + eps * _zonal(grid, l)
    elif spec.kind == "RandomBandlimited":
        rho = rho + _random_field(spec, grid)
    if np.any(rho <= 0):
        raise DegenerateSurfaceError(f"rho <= 0 after superposition (min {np.min(rho):.3g})")
    return RadialSurface(grid, rho)


def translated_sphere(r: float, shift: float, grid) -> RadialSurface:
    """Geodesic sphere of radius ``r`` centred at distance ``shift`` along the first axis.

    Solves ``cosh(a) cosh(rho) - sinh(a) cos(psi) sinh(rho) = cosh(r)`` for
    ``rho`` in each grid direction (``psi`` is the angle to the axis).
    """
    if not 0 <= shift < r:
        raise ValueError("the basepoint must lie inside the sphere (0 <= shift < r)")
    A = math.cosh(shift)
    B = math.sinh(shift) * _polar_cos(grid)
    norm = np.sqrt(A * A - B * B)
    rho = np.arctanh(B / A) + np.arccosh(math.cosh(r) / norm)
    return RadialSurface(grid, rho)


# ---------------------------------------------------------------------------
# initial-data classification


@dataclass(frozen=True)
class InitialReport:
    int_Aring2: float
    min_H_minus_n: float
    area: float
    max_A2: float
    h_mean_convex: bool
    h_convex: bool
    int_gradAring2: float | None = None


def initial_report(s: RadialSurface) -> InitialReport:
    """Smallness, convexity and size proxies of an initial surface."""
    c = curvature_field(s)
    m = float(np.min(c.H)) - s.n
    grad = None
    if s.grid.backend == "axisymmetric":
        from .surface import gradient_terms

        grad = surface_integral(s, c, gradient_terms(s, c)["gradAring2"])
    return InitialReport(
        int_Aring2=surface_integral(s, c, c.Aring2),
        min_H_minus_n=m,
        area=area(s, c),
        max_A2=float(np.max(c.A2)),
        h_mean_convex=bool(m > 0),
        h_convex=bool(np.min(c.lam) > 1.0),
        int_gradAring2=grad,
    )


def h_convexity_threshold(template: InitialConditionSpec, degree: int, tol: float = 1e-6):
    """Smallest amplitude of a single ``degree`` mode at which h-convexity fails.

    Starting from ``template`` (its ``r0`` and grid), the amplitude is doubled
    until the surface is no longer h-convex, then bisected to width ``tol``.
    Returns ``(amplitude, report)`` for the first non-h-convex amplitude found.
    """

    def rep(eps):
        spec = replace(template, kind="LegendreModes", modes=((degree, eps),))
        return initial_report(make_initial(spec))

    lo, hi = 0.0, 0.01
    r = rep(hi)
    while r.h_convex:
        lo, hi = hi, 2 * hi
        if hi > template.r0:
            raise ValueError("h-convexity never lost before rho reaches zero")
        r = rep(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        rm = rep(mid)
        if rm.h_convex:
            lo = mid
        else:
            hi, r = mid, rm
    return hi, r


# named preset: a large two-mode perturbation with no asserted outcome
STRESS_PRESET = InitialConditionSpec(kind="LegendreModes", r0=1.0, modes=((2, 0.2), (4, 0.1)))


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    value: float
    int_Aring2_0: float
    min_H_minus_n_0: float
    outcome: str
    cause: str
    t_final: float
    steps: int
    rate_sigma: float
    r_squared: float
    convexity_preserved: bool | None
    h_convex_throughout: bool | None

    @classmethod
    def columns(cls):
        return list(cls.__dataclass_fields__)


def member_spec(template: InitialConditionSpec, parameter: str, value: float) -> InitialConditionSpec:
    """Sweep member: ``epsilon`` rescales the mode list so its first amplitude is ``value``."""
    if parameter == "r0":
        return replace(template, r0=float(value))
    if parameter != "epsilon":
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    if template.kind == "RandomBandlimited":
        return replace(template, total_amplitude=float(value))
    if not template.modes:
        raise ValueError("epsilon sweep needs at least one mode in the template")
    if value == 0:
        return replace(template, kind="Sphere", modes=())
    base = template.modes[0][1]
    scale = value / base if base != 0 else 0.0
    modes = tuple((l, e * scale) if base != 0 else (l, float(value)) for l, e in template.modes)
    return replace(template, kind="LegendreModes", modes=modes)


def run_member(spec: InitialConditionSpec, cfg: FlowConfig, value: float,
               value_window=(1e-5, 5e-3)) -> SweepRow:
    nan = math.nan
    try:
        s0 = make_initial(spec)
        rep = initial_report(s0)
    except DegenerateSurfaceError as exc:
        return SweepRow(value, nan, nan, "InvalidInitial", str(exc), 0.0, 0, nan, nan, None, None)
    try:
        res = run(s0, cfg)
    except FlowAborted as exc:
        return SweepRow(value, rep.int_Aring2, rep.min_H_minus_n, exc.outcome.value, exc.cause,
                        0.0, 0, nan, nan, None, None)
    rate = r2 = nan
    try:
        fit = diagnostics.decay_fit(res.records, "max_Aring", value_window=value_window)
        rate, r2 = fit.rate_sigma, fit.r_squared
    except ValueError:
        pass
    conv = diagnostics.convexity_monitor(res.records, rep.min_H_minus_n) if rep.h_mean_convex else None
    return SweepRow(
        value=float(value),
        int_Aring2_0=rep.int_Aring2,
        min_H_minus_n_0=rep.min_H_minus_n,
        outcome=res.outcome.value,
        cause=res.cause,
        t_final=float(res.final.t),
        steps=int(res.steps),
        rate_sigma=rate,
        r_squared=r2,
        convexity_preserved=None if conv is None else conv["preserved"],
        h_convex_throughout=None if conv is None else conv["h_convex_throughout"],
    )


def _member_task(args):
    return run_member(*args)


def epsilon_sweep(template: InitialConditionSpec, values, cfg: FlowConfig, parameter: str = "epsilon",
                  threads: int = 1, value_window=(1e-5, 5e-3)) -> list:
    """Run one flow per value and tabulate the outcomes in input order.

    Members are independent; with ``threads > 1`` they run in a process
    pool. A member that fails records its outcome instead of stopping the
    sweep.
    """
    tasks = [(member_spec(template, parameter, v), cfg, float(v), value_window) for v in values]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            return list(pool.map(_member_task, tasks))
    return [_member_task(t) for t in tasks]


def spec_to_dict(spec: InitialConditionSpec) -> dict:
    d = asdict(spec)
    d["modes"] = [list(m) for m in spec.modes]
    return d
