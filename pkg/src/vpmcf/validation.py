"""Self-check suites run by ``vpmcf validate``.

Each suite returns a list of :class:`Check` rows; the command passes iff every
row passes. Resolutions are chosen so the whole battery runs in well under a
minute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics, hypgeom
from .flow import FlowConfig, make_state, run, step
from .scenarios import InitialConditionSpec, make_initial
from .surface import (
    area,
    curvature_field,
    embed,
    enclosed_volume,
    gradient_terms,
    traceless_cubic_trace,
)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    limit: float


def _row(suite, name, value, limit, ok=None):
    value = float(value)
    if ok is None:
        ok = bool(np.isfinite(value) and value <= limit)
    return Check(suite, name, bool(ok), value, float(limit))


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - b)) / abs(b))


def sphere_oracle_suite(trimesh_level: int = 4):
    out = []
    cases = [("axisymmetric", n, r, 1e-6) for n in (2, 3) for r in (0.5, 1.0, 2.0)]
    cases.append(("trimesh", 2, 1.0, 1e-3))
    for backend, n, r, tol in cases:
        spec = InitialConditionSpec(r0=r, n=n, backend=backend, K=129, level=trimesh_level)
        s = make_initial(spec)
        c = curvature_field(s)
        o = hypgeom.sphere_oracle(r, n)
        tag = f"{backend} n={n} r={r}"
        err = max(_rel(c.H, o.mean_curvature), _rel(area(s, c), o.area),
                  _rel(enclosed_volume(s), o.enclosed_volume))
        out.append(_row("sphere-oracle", tag, err, tol))
    return out


def stationarity_suite(t_max: float = 0.2):
    s = make_initial(InitialConditionSpec(r0=1.0, K=65))
    res = run(s, FlowConfig(t_max=t_max, record_every=10**6, stop_at_convergence=False))
    moved = float(np.max(hypgeom.hyp_dist(embed(s), embed(res.final.surface))))
    return [_row("stationarity", f"sphere r=1 to t={t_max}", moved, 1e-8)]


def _perturbed(eps=0.01, K=65, l=2):
    return make_initial(InitialConditionSpec(kind="LegendreModes", r0=1.0, modes=((l, eps),), K=K))


def conservation_suite():
    res = run(_perturbed(), FlowConfig(t_max=0.3, record_every=10))
    cc = diagnostics.conservation_checks(res.records)
    return [
        _row("conservation", "volume drift (renormalised)", cc["max_rel_volume_drift"], 1e-10),
        _row("conservation", "area non-increasing", 0.0 if cc["area_monotone"] else 1.0, 0.0),
        _row("conservation", "area rate vs -int (h-H)^2", cc["area_rate_rel_error"], 0.05),
    ]


def _one_step_residuals(dts, eps=0.05, K=33):
    st = make_state(_perturbed(eps, K))
    cfg = FlowConfig(renormalize_volume=False)
    rH, rHm, rA, rAm = [], [], [], []
    for dt in dts:
        s1, _ = step(st, cfg, dt)
        rH.append(diagnostics.evolution_residual_H(st, s1)[1])
        rHm.append(diagnostics.evolution_residual_H(st, s1, mutate=True)[1])
        rA.append(diagnostics.evolution_residual_Aring2(st, s1))
        rAm.append(diagnostics.evolution_residual_Aring2(st, s1, mutate=True))
    return map(np.array, (rH, rHm, rA, rAm))


def observed_order(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def residual_suite():
    dts = np.array([8e-3, 4e-3, 2e-3, 1e-3])
    rH, rHm, rA, rAm = _one_step_residuals(dts)
    oH, oA = observed_order(dts, rH), observed_order(dts, rA)
    out = [
        _row("residuals", "H residual order in dt (>= limit)", oH, 1.0, ok=oH >= 1.0),
        _row("residuals", "H mutation ratio (>= limit)", rHm[-1] / rH[-1], 10.0, ok=rHm[-1] >= 10 * rH[-1]),
        _row("residuals", "|Å|^2 residual order in dt (>= limit)", oA, 1.0, ok=oA >= 1.0),
        _row("residuals", "|Å|^2 mutation ratio (>= limit)", rAm[-1] / rA[-1], 10.0, ok=rAm[-1] >= 10 * rA[-1]),
    ]
    res = run(_perturbed(0.02), FlowConfig(t_max=0.2, renormalize_volume=False, record_every=10))
    e = diagnostics.h_derivative_check(res.records)
    em = diagnostics.h_derivative_check(res.records, mutate=True)
    out.append(_row("residuals", "h'(t) relative error", e, 0.10))
    out.append(_row("residuals", "h'(t) mutation ratio (>= limit)", em / max(e, 1e-300), 10.0, ok=em >= 10 * e))
    sphere = make_state(make_initial(InitialConditionSpec(r0=1.0, K=65)))
    s1, _ = step(sphere, FlowConfig(renormalize_volume=False))
    out.append(_row("residuals", "sphere H residual", diagnostics.evolution_residual_H(sphere, s1)[1], 1e-8))
    out.append(_row("residuals", "sphere |Å|^2 residual", diagnostics.evolution_residual_Aring2(sphere, s1), 1e-8))
    return out


def identity_errors(s) -> dict:
    """Worst violations of the pointwise curvature identities on a surface."""
    c = curvature_field(s)
    n = s.n
    lam = c.lam
    out = {
        "aring_split": float(np.max(np.abs(c.Aring2 - (c.A2 - c.H**2 / n)))),
    }
    if s.grid.backend == "axisymmetric":
        pair = (lam[:, 0] - lam[:, 1]) ** 2 * (n - 1)  # sum_{i<j} over one meridian/angular split
        out["pairwise"] = float(np.max(np.abs(c.Aring2 - pair / n)))
    else:
        out["pairwise"] = float(np.max(np.abs(c.Aring2 - (lam[:, 0] - lam[:, 1]) ** 2 / n)))
    tr3 = traceless_cubic_trace(c, n)
    out["cubic_excess"] = float(np.max(np.abs(tr3) - c.Aring2**1.5))
    if s.grid.backend == "axisymmetric":
        g = gradient_terms(s, c)
        out["kato_deficit"] = float(np.max(3.0 / (n + 2) * g["gradH2"] - g["gradA2"]))
        out["traceless_deficit"] = float(np.max((n - 1) / (2 * n + 1) * g["gradA2"] - g["gradAring2"]))
    return out


def identity_suite():
    out = []
    for n in (2, 3):
        s = make_initial(InitialConditionSpec(kind="LegendreModes", r0=1.0, n=n,
                                              modes=((2, 0.05), (3, 0.02)), K=129))
        e = identity_errors(s)
        out.append(_row("identities", f"n={n} |Å|^2 = |A|^2 - H^2/n", e["aring_split"], 1e-10))
        out.append(_row("identities", f"n={n} pairwise principal form", e["pairwise"], 1e-9))
        out.append(_row("identities", f"n={n} |tr Å^3| <= |Å|^3", e["cubic_excess"], 1e-12))
        out.append(_row("identities", f"n={n} |grad A|^2 >= 3/(n+2)|grad H|^2", e["kato_deficit"], 1e-8))
        out.append(_row("identities", f"n={n} |grad Å|^2 >= (n-1)/(2n+1)|grad A|^2",
                        e["traceless_deficit"], 1e-8))
    return out


SUITES = {
    "sphere-oracle": sphere_oracle_suite,
    "stationarity": stationarity_suite,
    "conservation": conservation_suite,
    "residuals": residual_suite,
    "identities": identity_suite,
}


def run_all(suites=None):
    rows = []
    for name in suites or SUITES:
        try:
            rows.extend(SUITES[name]())
        except Exception as exc:  # a crashing suite is a failing suite
            rows.append(Check(name, f"suite raised {type(exc).__name__}: {exc}", False, math.nan, math.nan))
    return rows


def format_table(rows) -> str:
    w = max(len(f"{r.suite}: {r.name}") for r in rows)
    lines = []
    for r in rows:
        label = f"{r.suite}: {r.name}"
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {label:<{w}}  value={r.value:.3e}  limit={r.limit:.1e}")
    return "\n".join(lines)
