"""Command-line runner: ``vpmcf run|sweep|validate``.

Exit codes: 0 success, 1 failed validation, 2 config error, 3 blowup,
4 mesh degeneration, 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import diagnostics, hypgeom, scenarios, surface, validation
from .config import ConfigError, RunConfig, load_config, with_output_overrides
from .flow import FlowAborted, Outcome, fit_limit_sphere, run

log = logging.getLogger("vpmcf")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_MESH = 4
EXIT_IO = 5

OUTCOME_EXIT = {
    Outcome.CONVERGED: EXIT_OK,
    Outcome.TMAX: EXIT_OK,
    Outcome.BLOWUP: EXIT_BLOWUP,
    Outcome.MESH_DEGENERATE: EXIT_MESH,
}

DECAY_WINDOW = (1e-5, 5e-3)


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python scalars."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_clean(data), indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------------------
# charts


def write_svg(records, path, title: str = "") -> None:
    """Four static line charts against t: log max|Å|, area, volume, min(H - n)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "vpmcf"
    t = diagnostics.column(records, "t")
    panels = [
        ("max_Aring", "max |Å|", True),
        ("area", "area", False),
        ("volume", "volume", False),
        ("min_H_minus_n", "min (H - n)", False),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    for ax, (col, label, logy) in zip(axes.ravel(), panels):
        y = diagnostics.column(records, col)
        if logy:
            y = np.where(y > 0, y, np.nan)
            ax.set_yscale("log")
        ax.plot(t, y, lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        ax.grid(True, lw=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# run


def summarize(cfg: RunConfig, res, report) -> dict:
    recs = res.records
    out = {
        "experiment": cfg.name,
        "outcome": res.outcome.value,
        "cause": res.cause,
        "steps": res.steps,
        "t_final": res.final.t,
        "seed": cfg.initial.seed,
        "config": cfg.to_json_dict(),
        "initial_report": asdict(report),
    }
    try:
        fit = diagnostics.decay_fit(recs, "max_Aring", value_window=DECAY_WINDOW)
        out["decay"] = {"quantity": "max_Aring", "value_window": list(DECAY_WINDOW), **asdict(fit)}
    except ValueError as exc:
        out["decay"] = {"quantity": "max_Aring", "value_window": list(DECAY_WINDOW), "error": str(exc)}
    if len(recs) >= 2:
        out["conservation"] = diagnostics.conservation_checks(recs)
    else:  # converged before the first step
        out["conservation"] = {"max_rel_volume_drift": 0.0, "area_monotone": True,
                               "area_rate_rel_error": 0.0, "area_rate_points": 0}
    if report.h_mean_convex and len(recs) >= 1:
        conv = diagnostics.convexity_monitor(recs, report.min_H_minus_n)
        conv.pop("h_convex")
        out["convexity"] = conv
    if not cfg.flow.renormalize_volume and len(recs) >= 3:
        out["h_derivative_rel_error"] = diagnostics.h_derivative_check(recs)
    resid = diagnostics.column(recs, "resid_H")
    if np.any(np.isfinite(resid)):
        out["max_resid_H"] = float(np.nanmax(resid))
    if res.outcome is Outcome.CONVERGED:
        centre, radius, dev = fit_limit_sphere(res.final.surface)
        v_sphere = hypgeom.sphere_oracle(radius, res.final.surface.n).enclosed_volume
        out["limit_sphere"] = {
            "centre": centre.tolist(),
            "radius": radius,
            "distance_deviation": dev,
            "volume_rel_mismatch": abs(v_sphere - res.final.V0) / res.final.V0,
        }
    return out


def validate_summary(cfg: RunConfig, summary: dict) -> dict:
    """Pass/fail checks attached to runs with ``validate_mode`` on."""
    checks = {}
    cons = summary.get("conservation")
    if cons is not None:
        if cfg.flow.renormalize_volume:
            checks["volume_drift"] = cons["max_rel_volume_drift"] <= 1e-10
        checks["area_monotone"] = cons["area_monotone"]
    if "convexity" in summary:
        checks["h_mean_convexity_preserved"] = summary["convexity"]["preserved"]
    if "error" not in summary["decay"]:
        checks["decay_r_squared"] = summary["decay"]["r_squared"] >= 0.99
    if "h_derivative_rel_error" in summary:
        checks["h_derivative"] = summary["h_derivative_rel_error"] <= 0.10
    return checks


def cmd_run(cfg: RunConfig, quiet: bool = False) -> int:
    try:
        s0 = scenarios.make_initial(cfg.initial)
    except surface.DegenerateSurfaceError as exc:
        print(f"config error: initial: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = scenarios.initial_report(s0)
    out = cfg.outputs
    snap_dir = None
    counter = {"k": 0}
    if out.snapshot_every > 0:
        snap_dir = Path(out.snapshot_dir or f"{cfg.name}_snapshots")
        snap_dir.mkdir(parents=True, exist_ok=True)

    def on_record(state):
        if snap_dir is not None and counter["k"] % out.snapshot_every == 0:
            surface.save_snapshot(state.surface, snap_dir / f"snapshot_{state.step_index:08d}.json")
        counter["k"] += 1

    try:
        res = run(s0, cfg.flow, on_record=on_record)
    except FlowAborted as exc:
        print(f"{exc.outcome.value}: {exc.cause}", file=sys.stderr)
        return OUTCOME_EXIT[exc.outcome]
    summary = summarize(cfg, res, report)
    code = OUTCOME_EXIT[res.outcome]
    if cfg.validate_mode:
        checks = validate_summary(cfg, summary)
        summary["checks"] = checks
        if code == EXIT_OK and not all(checks.values()):
            code = EXIT_VALIDATION
    if out.csv_path:
        diagnostics.write_csv(res.records, out.csv_path)
    if out.summary_path:
        _write_json(out.summary_path, summary)
    if out.svg_path:
        write_svg(res.records, out.svg_path, cfg.name)
    if not quiet:
        last = res.records[-1]
        print(f"{cfg.name}: {res.outcome.value} at t={res.final.t:.6g} after {res.steps} steps; "
              f"max|Å|={last.max_Aring:.3e}")
        if res.cause:
            print(f"  cause: {res.cause}")
    return code


# ---------------------------------------------------------------------------
# sweep


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_sweep_csv(rows, path) -> None:
    import csv

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(scenarios.SweepRow.columns())
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in scenarios.SweepRow.columns()])


def cmd_sweep(cfg: RunConfig, threads: int = 1, quiet: bool = False) -> int:
    if cfg.sweep is None:
        print("config error: sweep: section missing", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = scenarios.epsilon_sweep(cfg.initial, cfg.sweep.values, cfg.flow,
                                       parameter=cfg.sweep.parameter, threads=threads,
                                       value_window=DECAY_WINDOW)
    except ValueError as exc:
        print(f"config error: sweep: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.outputs.csv_path:
        write_sweep_csv(rows, cfg.outputs.csv_path)
    if cfg.outputs.summary_path:
        _write_json(cfg.outputs.summary_path, {
            "experiment": cfg.name,
            "seed": cfg.initial.seed,
            "config": cfg.to_json_dict(),
            "members": [asdict(r) for r in rows],
        })
    if not quiet:
        for r in rows:
            print(f"{cfg.sweep.parameter}={r.value:g}: {r.outcome} rate={r.rate_sigma:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(quiet: bool = False, inject_sff_flip: bool = False) -> int:
    saved = surface._SFF_SIGN
    if inject_sff_flip:
        surface._SFF_SIGN = -1.0
    try:
        rows = validation.run_all()
    finally:
        surface._SFF_SIGN = saved
    if not quiet:
        print(validation.format_table(rows))
    ok = all(r.passed for r in rows)
    print(f"validate: {'all passed' if ok else 'FAILED'} ({sum(r.passed for r in rows)}/{len(rows)})")
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------


def _threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("VPMCF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vpmcf", description="Volume-preserving mean curvature flow in H^{n+1}.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker processes for sweeps (default: $VPMCF_THREADS or 1)")

    for name in ("run", "sweep"):
        sp = sub.add_parser(name, help=f"{name} a configuration file")
        sp.add_argument("config", help="config file (or the name of a bundled config)")
        sp.add_argument("--csv", default=None, help="diagnostics CSV path (overrides config)")
        sp.add_argument("--summary", default=None, help="summary JSON path (overrides config)")
        sp.add_argument("--svg", default=None, help="SVG chart path (overrides config)")
        common(sp)
    sp = sub.add_parser("validate", help="run the built-in self-check suites")
    common(sp)
    sp.add_argument("--inject-sff-sign-flip", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("vpmcf").setLevel(logging.WARNING if args.quiet else logging.INFO)
    if args.command == "validate":
        return cmd_validate(args.quiet, args.inject_sff_sign_flip)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    cfg = with_output_overrides(cfg, args.csv, args.summary, args.svg)
    try:
        if args.command == "run":
            return cmd_run(cfg, args.quiet)
        return cmd_sweep(cfg, _threads(args.threads), args.quiet)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
