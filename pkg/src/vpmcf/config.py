"""Run-configuration files: an INI-style schema with strict keys.

Example::

    [experiment]
    name = perturbed_l2

    [initial]
    kind = LegendreModes
    r0 = 1.0
    modes = 2:0.01

    [flow]
    integrator = RK4
    t_max = 10

    [outputs]
    csv_path = perturbed_l2.csv
    summary_path = perturbed_l2.json

A ``[sweep]`` section (``parameter``, ``values``) turns a file into a sweep
configuration.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .flow import FlowConfig, Integrator
from .scenarios import InitialConditionSpec


class ConfigError(ValueError):
    """Schema or value error; the message names the offending key path."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    return int(text.strip())


def _modes(text: str) -> tuple:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        l, eps = item.split(":")
        out.append((int(l), float(eps)))
    return tuple(out)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Integrator):
        return value.value
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return ", ".join(f"{l}:{e!r}" for l, e in value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    return str(value)


INITIAL_KEYS = {
    "kind": str, "r0": float, "n": _int, "modes": _modes, "lmax": _int,
    "total_amplitude": float, "seed": _int, "backend": str, "K": _int, "level": _int,
    "fit_degree": _int, "allow_low_modes": _bool,
}
FLOW_KEYS = {
    "integrator": str, "cfl_coefficient": float, "t_max": float, "renormalize_volume": _bool,
    "conv_tol_Aring": float, "blowup_cap_A2": float, "min_rho": float, "record_every": _int,
    "stop_at_convergence": _bool,
}
OUTPUT_KEYS = {
    "csv_path": str, "summary_path": str, "svg_path": str, "snapshot_every": _int,
    "snapshot_dir": str,
}
EXPERIMENT_KEYS = {"name": str, "validate_mode": _bool}
SWEEP_KEYS = {"parameter": str, "values": _floats}
SCHEMA = {
    "experiment": EXPERIMENT_KEYS,
    "initial": INITIAL_KEYS,
    "flow": FLOW_KEYS,
    "outputs": OUTPUT_KEYS,
    "sweep": SWEEP_KEYS,
}
REQUIRED = {("experiment", "name"), ("initial", "kind"), ("initial", "r0")}


@dataclass(frozen=True)
class Outputs:
    csv_path: str = ""
    summary_path: str = ""
    svg_path: str = ""
    snapshot_every: int = 0
    snapshot_dir: str = ""


@dataclass(frozen=True)
class SweepSpec:
    parameter: str = "epsilon"
    values: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    name: str
    initial: InitialConditionSpec
    flow: FlowConfig = field(default_factory=FlowConfig)
    outputs: Outputs = field(default_factory=Outputs)
    validate_mode: bool = False
    sweep: SweepSpec | None = None

    def sections(self) -> dict:
        """Resolved configuration as ``{section: {key: value}}`` (all keys present)."""
        d = {
            "experiment": {"name": self.name, "validate_mode": self.validate_mode},
            "initial": {f.name: getattr(self.initial, f.name) for f in fields(self.initial)},
            "flow": {f.name: getattr(self.flow, f.name) for f in fields(self.flow)},
            "outputs": {f.name: getattr(self.outputs, f.name) for f in fields(self.outputs)},
        }
        if self.sweep is not None:
            d["sweep"] = {"parameter": self.sweep.parameter, "values": self.sweep.values}
        return d

    def to_text(self) -> str:
        lines = []
        for sec, kv in self.sections().items():
            lines.append(f"[{sec}]")
            for k, v in kv.items():
                lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        out = {}
        for sec, kv in self.sections().items():
            out[sec] = {k: (_fmt(v) if isinstance(v, (tuple, Integrator)) else v) for k, v in kv.items()}
        return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (K)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{sec}: unknown section")
        raw[sec] = {}
        for key, value in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
            try:
                raw[sec][key] = SCHEMA[sec][key](value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{sec}.{key}: invalid value {value!r} ({exc})") from exc
    for sec, key in sorted(REQUIRED):
        if key not in raw.get(sec, {}):
            raise ConfigError(f"{sec}.{key}: missing required key")

    def build(section, cls):
        try:
            return cls(**raw.get(section, {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    exp = raw["experiment"]
    if not exp["name"].strip():
        raise ConfigError("experiment.name: must be nonempty")
    initial = build("initial", InitialConditionSpec)
    flow = build("flow", FlowConfig)
    outputs = build("outputs", Outputs)
    if outputs.snapshot_every < 0:
        raise ConfigError("outputs.snapshot_every: must be nonnegative")
    sweep = None
    if "sweep" in raw:
        sweep = build("sweep", SweepSpec)
        if sweep.parameter not in ("epsilon", "r0"):
            raise ConfigError("sweep.parameter: must be 'epsilon' or 'r0'")
        if not sweep.values:
            raise ConfigError("sweep.values: missing or empty")
    return RunConfig(exp["name"], initial, flow, outputs, exp.get("validate_mode", False), sweep)


BUNDLED_DIR = Path(__file__).resolve().parent / "configs"


def resolve_config_path(path) -> Path:
    """``path`` itself if it exists, else a bundled config of that file name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = BUNDLED_DIR / p.name
    if bundled.exists():
        return bundled
    return p


def load_config(path) -> RunConfig:
    p = resolve_config_path(path)
    text = p.read_text()  # OSError propagates to the caller
    return parse_config(text)


def with_output_overrides(cfg: RunConfig, csv=None, summary=None, svg=None) -> RunConfig:
    o = cfg.outputs
    o = replace(
        o,
        csv_path=csv if csv is not None else o.csv_path,
        summary_path=summary if summary is not None else o.summary_path,
        svg_path=svg if svg is not None else o.svg_path,
    )
    return replace(cfg, outputs=o)
