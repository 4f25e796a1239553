"""Explicit time integration of the volume-preserving mean curvature flow.

Normal speed ``h - H`` is converted to radial speed through the graph factor
``v``; the nonlocal average ``h`` is re-evaluated at every integrator stage.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import hypgeom
from .surface import (
    CurvatureField,
    DegenerateSurfaceError,
    RadialSurface,
    _sinh_power_integral,
    curvature_field,
    embed,
    enclosed_volume,
    mean_of_H,
)

log = logging.getLogger(__name__)


class Integrator(str, enum.Enum):
    EULER = "ExplicitEuler"
    RK4 = "RK4"


class Outcome(str, enum.Enum):
    CONVERGED = "Converged"
    TMAX = "TMaxReached"
    BLOWUP = "Blowup"
    MESH_DEGENERATE = "MeshDegenerate"


class FlowAborted(RuntimeError):
    def __init__(self, outcome: Outcome, cause: str):
        super().__init__(f"{outcome.value}: {cause}")
        self.outcome = outcome
        self.cause = cause


class RenormalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    integrator: Integrator = Integrator.RK4
    cfl_coefficient: float = 0.2
    t_max: float = 10.0
    renormalize_volume: bool = True
    conv_tol_Aring: float = 1e-7
    blowup_cap_A2: float = 1e4
    min_rho: float = 1e-3
    record_every: int = 1
    # False keeps integrating to t_max (stationarity checks on spheres)
    stop_at_convergence: bool = True

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        for name in ("cfl_coefficient", "t_max", "conv_tol_Aring", "blowup_cap_A2", "min_rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    surface: RadialSurface
    curvature: CurvatureField
    h: float
    step_index: int
    V0: float

    @property
    def max_Aring(self) -> float:
        return float(np.sqrt(np.max(self.curvature.Aring2)))


@dataclass(frozen=True)
class StepReport:
    dt_used: float
    volume_drift_before_renorm: float
    renorm_offset: float
    max_speed: float


@dataclass
class RunResult:
    records: list
    final: FlowState
    outcome: Outcome
    cause: str = ""
    steps: int = 0
    history: list = field(default_factory=list, repr=False)


def make_state(surface: RadialSurface, t: float = 0.0, step_index: int = 0, V0=None) -> FlowState:
    c = curvature_field(surface)
    V0 = enclosed_volume(surface) if V0 is None else V0
    return FlowState(t, surface, c, mean_of_H(surface, c), step_index, V0)


def velocity(state: FlowState) -> np.ndarray:
    """Radial rate ``d rho/dt = (h - H) v``."""
    c = state.curvature
    return (state.h - c.H) * c.v


def _radial_rate(surface: RadialSurface):
    c = curvature_field(surface, full=False)
    h = mean_of_H(surface, c)
    return (h - c.H) * c.v


def min_spacing(surface: RadialSurface) -> float:
    """Smallest hyperbolic distance between neighbouring embedded nodes."""
    X = embed(surface)
    grid = surface.grid
    if grid.backend == "axisymmetric":
        d = hypgeom.hyp_dist(X[1:], X[:-1])
    else:
        e = grid.edges
        d = hypgeom.hyp_dist(X[e[:, 0]], X[e[:, 1]])
    m = float(np.min(d))
    if not m > 0:
        raise DegenerateSurfaceError("nonpositive node spacing")
    return m


def cfl_dt(state: FlowState, cfg: FlowConfig) -> float:
    """Parabolic step ``cfl * spacing^2``, clipped to the remaining time."""
    dt = cfg.cfl_coefficient * min_spacing(state.surface) ** 2
    remaining = cfg.t_max - state.t
    return min(dt, remaining) if remaining > 0 else dt


def _advance(surface: RadialSurface, rate0, dt: float, integrator: Integrator):
    rho = surface.rho
    if integrator is Integrator.EULER:
        return rho + dt * rate0
    k1 = rate0
    k2 = _radial_rate(surface.with_rho(rho + 0.5 * dt * k1))
    k3 = _radial_rate(surface.with_rho(rho + 0.5 * dt * k2))
    k4 = _radial_rate(surface.with_rho(rho + dt * k3))
    return rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guard(surface_rho, c: CurvatureField | None, cfg: FlowConfig):
    if not np.all(np.isfinite(surface_rho)):
        raise FlowAborted(Outcome.BLOWUP, "non-finite radial values")
    if np.min(surface_rho) < cfg.min_rho:
        raise FlowAborted(
            Outcome.MESH_DEGENERATE, f"rho fell below min_rho ({np.min(surface_rho):.3e} < {cfg.min_rho})"
        )
    if c is not None:
        if not np.all(np.isfinite(c.A2)):
            raise FlowAborted(Outcome.BLOWUP, "non-finite curvature")
        if np.max(c.A2) > cfg.blowup_cap_A2:
            raise FlowAborted(
                Outcome.BLOWUP, f"max|A|^2 = {np.max(c.A2):.3e} exceeds cap {cfg.blowup_cap_A2}"
            )


def renormalize_volume(state: FlowState, tol: float = 1e-12, max_iter: int = 20):
    """Restore the enclosed volume to ``V0`` by a uniform normal offset.

    Solves ``V(rho + delta * v) = V0`` by Newton's method; the derivative is
    the exact derivative of the discrete volume, which equals the area to
    first order. Returns the new state and ``delta``.
    """
    s = state.surface
    v = state.curvature.v
    n = s.n
    w = s.grid.weights
    V0 = state.V0
    delta = 0.0
    for _ in range(max_iter):
        rho = s.rho + delta * v
        V = float(np.dot(w, _sinh_power_integral(rho, n)))
        if abs(V - V0) <= tol * V0:
            break
        dV = float(np.dot(w, np.sinh(rho) ** n * v))
        delta -= (V - V0) / dV
    else:
        raise RenormalizationError("volume renormalisation did not converge in %d iterations" % max_iter)
    if delta == 0.0:
        if state.curvature.lapH is None:
            state = replace(state, curvature=curvature_field(s))
        return state, 0.0
    new = s.with_rho(s.rho + delta * v)
    c = curvature_field(new)
    return replace(state, surface=new, curvature=c, h=mean_of_H(new, c)), delta


def step(state: FlowState, cfg: FlowConfig, dt: float | None = None):
    """Advance one step; returns ``(new_state, StepReport)``.

    Raises :class:`FlowAborted` on blowup, ``rho < min_rho`` or a degenerate
    metric.
    """
    if dt is None:
        dt = cfl_dt(state, cfg)
    if not dt > 0:
        raise ValueError("dt must be positive")
    rate = velocity(state)
    try:
        rho = _advance(state.surface, rate, dt, cfg.integrator)
        _guard(rho, None, cfg)
        s_new = state.surface.with_rho(rho)
        c = curvature_field(s_new, full=not cfg.renormalize_volume)
    except DegenerateSurfaceError as exc:
        raise FlowAborted(Outcome.MESH_DEGENERATE, str(exc)) from exc
    except FloatingPointError as exc:
        raise FlowAborted(Outcome.BLOWUP, str(exc)) from exc
    _guard(rho, c, cfg)
    new = FlowState(state.t + dt, s_new, c, mean_of_H(s_new, c), state.step_index + 1, state.V0)
    drift = (enclosed_volume(s_new) - state.V0) / state.V0
    offset = 0.0
    if cfg.renormalize_volume:
        try:
            new, offset = renormalize_volume(new)
        except DegenerateSurfaceError as exc:
            raise FlowAborted(Outcome.MESH_DEGENERATE, str(exc)) from exc
        _guard(new.surface.rho, new.curvature, cfg)
    report = StepReport(dt, drift, offset, float(np.max(np.abs(rate / state.curvature.v))))
    return new, report


def run(initial: RadialSurface, cfg: FlowConfig, recorder=None, keep_history: bool = False,
        on_record=None) -> RunResult:
    """Integrate until convergence, ``t_max`` or an abort.

    ``recorder(state, prev_state, report)`` turns a state into a diagnostics
    row; it defaults to :func:`vpmcf.diagnostics.record_row`. ``on_record``
    is called with each recorded state (snapshots, progress).
    """
    if recorder is None:
        from .diagnostics import record_row as recorder

    records = []
    history = []
    try:
        state = make_state(initial)
        _guard(state.surface.rho, state.curvature, cfg)
    except DegenerateSurfaceError as exc:
        raise FlowAborted(Outcome.MESH_DEGENERATE, str(exc)) from exc

    def emit(st, prev, rep):
        records.append(recorder(st, prev, rep))
        if keep_history:
            history.append(st)
        if on_record is not None:
            on_record(st)

    emit(state, None, None)
    last_recorded = 0
    prev, report = None, None
    outcome, cause = None, ""
    t_eps = 1e-12 * max(1.0, cfg.t_max)
    while True:
        if cfg.stop_at_convergence and state.max_Aring < cfg.conv_tol_Aring:
            outcome = Outcome.CONVERGED
            break
        if state.t >= cfg.t_max - t_eps:
            outcome = Outcome.TMAX
            break
        try:
            new, report = step(state, cfg)
        except FlowAborted as exc:
            outcome, cause = exc.outcome, exc.cause
            log.info("run aborted at t=%.6g: %s", state.t, exc)
            break
        prev, state = state, new
        if state.step_index % cfg.record_every == 0:
            emit(state, prev, report)
            last_recorded = state.step_index
    if last_recorded != state.step_index:
        emit(state, prev, report)
    return RunResult(records, state, outcome, cause, state.step_index, history)


# ---------------------------------------------------------------------------
# limit sphere


class FitError(RuntimeError):
    pass


def _tangent_basis(c, dims):
    """Boost images of the coordinate axes ``dims`` at hyperboloid point ``c``."""
    d = len(c)
    out = []
    for j in dims:
        e = np.zeros(d)
        e[j] = 1.0
        e0 = np.zeros(d)
        e0[0] = 1.0
        out.append(e + c[j] / (1.0 + c[0]) * (e0 + c))
    return np.array(out)


def fit_limit_sphere(s: RadialSurface, max_iter: int = 200, tol: float = 1e-13):
    """Centre, radius and RMS distance deviation of the best-fitting geodesic sphere.

    Minimises the (quadrature-weighted) variance of distances from a candidate
    centre to the embedded nodes with Gauss-Newton steps in the tangent space
    of the hyperboloid, halving the step until the variance decreases. On the
    axisymmetric backend the centre is restricted to the symmetry axis.
    """
    X = embed(s)
    w = s.grid.weights / np.sum(s.grid.weights)
    d_amb = X.shape[1]
    dims = [1] if s.grid.backend == "axisymmetric" else list(range(1, d_amb))
    c = hypgeom.basepoint(d_amb)

    def objective(c):
        d = hypgeom.hyp_dist(c[None, :], X)
        mean = float(np.dot(w, d))
        return float(np.dot(w, (d - mean) ** 2)), d, mean

    F, d, mean = objective(c)
    for it in range(max_iter):
        B = _tangent_basis(c, dims)
        sh = np.sinh(d)
        Jm = -hypgeom.minkowski_dot(B[None, :, :], X[:, None, :]) / np.where(sh > 0, sh, 1.0)[:, None]
        Jc = Jm - w @ Jm
        r = d - mean
        sw = np.sqrt(w)[:, None]
        xi, *_ = np.linalg.lstsq(sw * Jc, -(sw[:, 0] * r), rcond=None)
        step_len = float(np.linalg.norm(xi))
        if step_len < tol:
            break
        alpha = 1.0
        while alpha > 1e-12:
            c_try = hypgeom.exp_map(c, alpha * (xi @ B))
            F_try, d_try, mean_try = objective(c_try)
            if F_try <= F:
                break
            alpha *= 0.5
        else:
            break
        c, F, d, mean = c_try, F_try, d_try, mean_try
        if alpha * step_len < tol:
            break
    else:
        raise FitError("limit-sphere fit did not converge in %d iterations" % max_iter)
    return c, mean, float(np.sqrt(max(F, 0.0)))
