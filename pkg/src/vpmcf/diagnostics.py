"""Monitors and property checks along a flow: conservation, decay, residuals, convexity."""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .surface import (
    RadialSurface,
    area as surface_area,
    diameter_estimate,
    enclosed_volume,
    gradient_terms,
    laplacian,
    rho_gradient_dot,
    surface_integral,
    traceless_cubic_trace,
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    area: float
    volume: float
    h: float
    minH: float
    maxH: float
    min_H_minus_n: float
    max_Aring: float
    int_Aring2: float
    max_gradH: float
    max_h_minus_H: float
    diameter: float
    topping_ratio: float
    resid_H: float
    dt_used: float
    renorm_offset: float
    # appended columns: integrands needed by the rate checks and the h-convexity flag
    int_h_minus_H2: float
    dh_dt_rhs: float
    min_lambda: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


def record(state, prev=None, report=None) -> DiagnosticsRecord:
    """One diagnostics row for ``state``.

    ``resid_H`` is filled only when ``prev`` is the immediately preceding state
    and the step between them applied no volume renormalisation.
    """
    s, c = state.surface, state.curvature
    n = s.n
    h = state.h
    if c.lapH is None:
        raise ValueError("record needs a full curvature field")
    A = surface_area(s, c)
    minH, maxH = float(np.min(c.H)), float(np.max(c.H))
    diam = diameter_estimate(s)
    topping = diam / surface_integral(s, c, np.abs(c.H) ** (n - 1))
    resid = math.nan
    if prev is not None and report is not None and report.renorm_offset == 0.0:
        resid = evolution_residual_H(prev, state)[1]
    return DiagnosticsRecord(
        t=float(state.t),
        area=A,
        volume=enclosed_volume(s),
        h=float(h),
        minH=minH,
        maxH=maxH,
        min_H_minus_n=minH - n,
        max_Aring=float(np.sqrt(np.max(c.Aring2))),
        int_Aring2=surface_integral(s, c, c.Aring2),
        max_gradH=float(np.sqrt(np.max(c.gradH2))),
        max_h_minus_H=float(np.max(np.abs(h - c.H))),
        diameter=diam,
        topping_ratio=topping,
        resid_H=resid,
        dt_used=math.nan if report is None else report.dt_used,
        renorm_offset=0.0 if report is None else report.renorm_offset,
        int_h_minus_H2=surface_integral(s, c, (h - c.H) ** 2),
        dh_dt_rhs=h_rate_rhs(s, c, h),
        min_lambda=float(np.min(c.lam)),
    )


record_row = record


def h_rate_rhs(s: RadialSurface, c, h: float) -> float:
    """Predicted ``dh/dt``: area-average of ``(H - h)(|A|^2 - H^2 + hH)``."""
    num = surface_integral(s, c, (c.H - h) * (c.A2 - c.H**2 + h * c.H))
    return num / surface_integral(s, c, np.ones_like(c.H))


# ---------------------------------------------------------------------------
# CSV


def write_csv(records, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DiagnosticsRecord.columns())
        for r in records:
            w.writerow([f"{x:.17g}" for x in astuple(r)])


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != DiagnosticsRecord.columns():
            raise ValueError("unexpected diagnostics columns")
        return [DiagnosticsRecord(*map(float, row)) for row in rd]


def column(series, name) -> np.ndarray:
    return np.array([getattr(r, name) for r in series], dtype=float)


# ---------------------------------------------------------------------------
# decay fit


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    rate_sigma: float
    r_squared: float
    n_points: int


def decay_fit(series, quantity: str = "max_Aring", value_window=None, time_window=None,
              floor: float = 0.0, min_points: int = 10) -> DecayFit:
    """Least-squares line through ``(t, log q)``; ``rate_sigma`` is minus the slope.

    ``series`` is a list of records or a pair of arrays ``(t, q)``. Samples
    are restricted to ``value_window = (lo, hi)`` and/or
    ``time_window = (t0, t1)``; with ``floor > 0`` samples at or below it
    are dropped (e.g. ten times the convergence tolerance).
    """
    if quantity not in ("max_Aring", "max_gradH", "max_h_minus_H"):
        raise ValueError(f"unsupported quantity {quantity!r}")
    if isinstance(series, tuple):
        t, q = (np.asarray(a, dtype=float) for a in series)
    else:
        t, q = column(series, "t"), column(series, quantity)
    keep = np.ones_like(t, dtype=bool)
    if value_window is not None:
        keep &= (q >= value_window[0]) & (q <= value_window[1])
    if time_window is not None:
        keep &= (t >= time_window[0]) & (t <= time_window[1])
    if floor > 0:
        keep &= q > floor
    t, q = t[keep], q[keep]
    if len(t) < min_points:
        raise InsufficientSamples(f"{len(t)} samples in window, need {min_points}")
    if np.any(q <= 0):
        raise ValueError("nonpositive values in fit window")
    y = np.log(q)
    A = np.stack([t, np.ones_like(t)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit((float(t[0]), float(t[-1])), float(-slope), min(max(r2, 0.0), 1.0), len(t))


# ---------------------------------------------------------------------------
# conservation


def centered_derivative(t, f):
    """Second-order derivative at interior samples of a nonuniform series."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    return (hm**2 * f[2:] - hp**2 * f[:-2] - (hm**2 - hp**2) * f[1:-1]) / (hp * hm * (hp + hm))


def conservation_checks(series, mono_rtol: float = 1e-6, rate_floor: float = 1e-4) -> dict:
    """Volume drift, area monotonicity and area-rate agreement.

    The area rate is compared only at interior records with
    ``max_Aring >= rate_floor``; with no such records the error is 0.
    """
    if len(series) < 2:
        raise ValueError("need at least two records")
    t = column(series, "t")
    A = column(series, "area")
    V = column(series, "volume")
    drift = float(np.max(np.abs(V - V[0])) / V[0])
    monotone = bool(np.all(np.diff(A) <= mono_rtol * A[:-1]))
    rate_err = 0.0
    n_rate = 0
    if len(series) >= 3:
        dA = centered_derivative(t, A)
        pred = -column(series, "int_h_minus_H2")[1:-1]
        sel = column(series, "max_Aring")[1:-1] >= rate_floor
        if np.any(sel):
            rel = np.abs(dA[sel] - pred[sel]) / np.abs(pred[sel])
            rate_err = float(np.max(rel))
            n_rate = int(np.sum(sel))
    return {
        "max_rel_volume_drift": drift,
        "area_monotone": monotone,
        "area_rate_rel_error": rate_err,
        "area_rate_points": n_rate,
    }


# ---------------------------------------------------------------------------
# evolution-equation residuals


def _check_consecutive(s0, s1):
    if s1.step_index != s0.step_index + 1 or not s1.t > s0.t:
        raise ValueError("states are not consecutive")
    if s0.curvature.lapH is None or s1.curvature.lapH is None:
        raise ValueError("states need full curvature fields")


def _H_rhs(state, mutate: bool):
    s, c, h = state.surface, state.curvature, state.h
    n = s.n
    reaction = (c.H - h) * (c.A2 - n)
    if mutate:
        reaction = -reaction
    transport = (h - c.H) * c.v * rho_gradient_dot(s, c, c.H)
    return c.lapH + reaction + transport


def evolution_residual_H(state0, state1, mutate: bool = False):
    """Residual of ``dH/dt = Lap H + (H - h)(|A|^2 - n)`` between consecutive states.

    Nodes move radially, so the fixed-node time derivative picks up the
    transport term ``(h - H) v <grad H, grad rho>``. The right side is
    averaged over both states (midpoint to second order). Returns
    ``(field, max_norm, l2_norm)``; ``mutate`` flips the sign of the reaction
    term for sensitivity checks.
    """
    _check_consecutive(state0, state1)
    dt = state1.t - state0.t
    lhs = (state1.curvature.H - state0.curvature.H) / dt
    rhs = 0.5 * (_H_rhs(state0, mutate) + _H_rhs(state1, mutate))
    r = lhs - rhs
    s1, c1 = state1.surface, state1.curvature
    l2 = math.sqrt(surface_integral(s1, c1, r**2) / surface_integral(s1, c1, np.ones_like(r)))
    return r, float(np.max(np.abs(r))), l2


def _Aring2_rhs(state, mutate: bool):
    s, c, h = state.surface, state.curvature, state.h
    n = s.n
    grads = gradient_terms(s, c)
    tr3 = traceless_cubic_trace(c, n)
    reaction = 2 * c.Aring2 * (c.A2 + n) - 2 * h * (tr3 + 2.0 / n * c.Aring2 * c.H)
    if mutate:
        reaction = -reaction
    transport = (h - c.H) * c.v * rho_gradient_dot(s, c, c.Aring2)
    return laplacian(s, c, c.Aring2) - 2 * grads["gradAring2"] + reaction + transport


def evolution_residual_Aring2(state0, state1, mutate: bool = False) -> float:
    """Max-norm residual of the |Å|^2 evolution equation (axisymmetric backend only)."""
    if state0.surface.grid.backend != "axisymmetric":
        raise ValueError("|Å|^2 residual needs the axisymmetric backend")
    _check_consecutive(state0, state1)
    dt = state1.t - state0.t
    lhs = (state1.curvature.Aring2 - state0.curvature.Aring2) / dt
    rhs = 0.5 * (_Aring2_rhs(state0, mutate) + _Aring2_rhs(state1, mutate))
    return float(np.max(np.abs(lhs - rhs)))


def h_derivative_check(series, floor: float = 1e-10, mutate: bool = False) -> float:
    """Centred-difference ``dh/dt`` against the predicted rate, relative to its peak.

    Returns 0 when both sides stay below ``floor`` (static surfaces).
    ``mutate`` flips the sign of the predicted rate.
    """
    if len(series) < 3:
        raise ValueError("need at least three records")
    t = column(series, "t")
    dh = centered_derivative(t, column(series, "h"))
    pred = column(series, "dh_dt_rhs")[1:-1]
    if mutate:
        pred = -pred
    scale = float(np.max(np.abs(pred)))
    err = float(np.max(np.abs(dh - pred)))
    if scale < floor:
        return 0.0 if err < floor else math.inf
    return err / scale


# ---------------------------------------------------------------------------
# convexity


def convexity_monitor(series, c0: float | None = None) -> dict:
    """Track ``min(H - n) >= c0/2`` and strict h-convexity (all principal curvatures > 1)."""
    t = column(series, "t")
    m = column(series, "min_H_minus_n")
    if c0 is None:
        c0 = float(m[0])
    bad = np.nonzero(m < 0.5 * c0)[0]
    lam = column(series, "min_lambda")
    hc = lam > 1.0
    first_loss = np.nonzero(~hc)[0]
    return {
        "c0": c0,
        "preserved": bool(len(bad) == 0),
        "first_violation_t": float(t[bad[0]]) if len(bad) else None,
        "min_H_minus_n": float(np.min(m)),
        "h_convex_initial": bool(hc[0]),
        "h_convex_throughout": bool(np.all(hc)),
        "first_h_convex_loss_t": float(t[first_loss[0]]) if len(first_loss) else None,
        "h_convex": hc.tolist(),
    }
