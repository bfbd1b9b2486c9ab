"""Sectioned plain-text experiment configuration.

Sections and keys (all optional; defaults shown by ``default_config_text()``):

[parameters]    D1 D2 chi1 chi2 lambda1 lambda2 mu1 mu2 a1 a2 m1 m2
[grid]          points (comma list, one per axis), lengths (comma list)
[perturbation]  epsilon, u_modes, v_modes, seed, random_modes, fold_v
[stepping]      scheme, dt, t_end, sample_interval, stability_guard, clip_negative
[monitoring]    eta (``auto`` or number), weights (``paper`` or six numbers A1,A2,B1,B2,C1,C2),
                tail_fraction
[outputs]       directory, snapshot_times (comma list), plots
[inequalities]  points, seed, max_mode, decay, count

Mode lists are ``;``-separated ``index[,index...]:amplitude`` entries,
e.g. ``1:1.0; 0:0.5``.  Validation collects every problem before failing.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import Parameters, validate

SECTIONS = ("parameters", "grid", "perturbation", "stepping", "monitoring", "outputs", "inequalities")


class ConfigError(ValueError):
    def __init__(self, problems):
        problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class GridConfig:
    points: tuple = (256,)
    lengths: tuple = (1.0,)


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float = 1e-2
    u_modes: tuple = (((1,), 1.0),)
    v_modes: tuple = (((1,), 1.0),)
    seed: int = 0
    random_modes: int = 0
    fold_v: bool = True


@dataclass(frozen=True)
class SteppingConfig:
    scheme: str = "imex_euler"
    dt: float = 0.01
    t_end: float = 50.0
    sample_interval: float = 0.1
    stability_guard: float = 0.25
    clip_negative: bool = True


@dataclass(frozen=True)
class MonitoringConfig:
    eta: float | None = None
    weights: tuple | None = None
    tail_fraction: float = 0.8


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_times: tuple = ()
    plots: bool = True


@dataclass(frozen=True)
class InequalityConfig:
    points: int = 128
    seed: int = 0
    max_mode: int = 16
    decay: float = 2.0
    count: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    parameters: Parameters = field(default_factory=Parameters)
    grid: GridConfig = field(default_factory=GridConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    stepping: SteppingConfig = field(default_factory=SteppingConfig)
    monitoring: MonitoringConfig = field(default_factory=MonitoringConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    inequalities: InequalityConfig = field(default_factory=InequalityConfig)

    def canonical_text(self) -> str:
        return to_ini(self)

    @property
    def hash(self) -> str:
        return config_hash(self)

    def with_value(self, dotted: str, value) -> "ExperimentConfig":
        """Return a copy with one dotted key replaced (``value`` as text or typed)."""
        return apply_overrides(self, [f"{dotted}={_format(value)}"])


# -- value codecs --------------------------------------------------------

def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], tuple) and len(value[0]) == 2 and isinstance(value[0][0], tuple):
            return "; ".join(",".join(str(k) for k in idx) + ":" + repr(float(a)) for idx, a in value)
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text, conv):
    text = text.strip()
    if not text:
        return ()
    return tuple(conv(x.strip()) for x in text.split(",") if x.strip())


def _parse_modes(text):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        idx, _, amp = chunk.partition(":")
        if not amp:
            raise ValueError(f"mode entry {chunk!r} needs 'index:amplitude'")
        out.append((tuple(int(k) for k in idx.split(",")), float(amp)))
    return tuple(out)


def _parse_optional_float(text):
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


def _parse_weights(text):
    if text.strip().lower() in ("paper", "auto", ""):
        return None
    vals = _parse_list(text, float)
    if len(vals) != 6:
        raise ValueError("explicit weights need six numbers A1,A2,B1,B2,C1,C2")
    return vals


_CODECS = {
    "grid": {"points": lambda s: _parse_list(s, int), "lengths": lambda s: _parse_list(s, float)},
    "perturbation": {"epsilon": float, "u_modes": _parse_modes, "v_modes": _parse_modes,
                     "seed": int, "random_modes": int, "fold_v": _parse_bool},
    "stepping": {"scheme": str.strip, "dt": float, "t_end": float, "sample_interval": float,
                 "stability_guard": float, "clip_negative": _parse_bool},
    "monitoring": {"eta": _parse_optional_float, "weights": _parse_weights, "tail_fraction": float},
    "outputs": {"directory": str.strip, "snapshot_times": lambda s: _parse_list(s, float),
                "plots": _parse_bool},
    "inequalities": {"points": int, "seed": int, "max_mode": int, "decay": float, "count": int},
}
_CODECS["parameters"] = {f.name: float for f in fields(Parameters)}

_BLOCKS = {
    "grid": GridConfig, "perturbation": PerturbationConfig, "stepping": SteppingConfig,
    "monitoring": MonitoringConfig, "outputs": OutputConfig, "inequalities": InequalityConfig,
}


# -- parsing -------------------------------------------------------------

def _collect(sections: dict[str, dict[str, str]], problems: list) -> ExperimentConfig:
    values = {}
    for section in SECTIONS:
        raw = sections.get(section, {})
        codec = _CODECS[section]
        parsed = {}
        for key, text in raw.items():
            if key not in codec:
                problems.append(f"[{section}] unknown key {key!r}")
                continue
            try:
                parsed[key] = codec[key](text)
            except (TypeError, ValueError) as exc:
                problems.append(f"[{section}] {key} = {text!r}: {exc}")
        values[section] = parsed
    for section in sections:
        if section not in SECTIONS:
            problems.append(f"unknown section [{section}]")

    base = Parameters()
    pvals = {f.name: getattr(base, f.name) for f in fields(Parameters)}
    pvals.update(values["parameters"])
    param_problems = []
    for name, v in pvals.items():
        if not np.isfinite(v):
            param_problems.append(f"{name} must be finite")
    if not param_problems:
        probe = object.__new__(Parameters)
        for name, v in pvals.items():
            object.__setattr__(probe, name, float(v))
        param_problems = validate(probe)
    problems.extend(f"[parameters] {msg}" for msg in param_problems)
    params = base if param_problems else Parameters(**pvals)

    blocks = {name: cls(**values[name]) for name, cls in _BLOCKS.items()}
    cfg = ExperimentConfig(parameters=params, **blocks)
    problems.extend(_check(cfg))
    return cfg


def _check(cfg: ExperimentConfig) -> list[str]:
    out = []
    g = cfg.grid
    if not 1 <= len(g.points) <= 3:
        out.append("[grid] points must list 1 to 3 axes")
    if len(g.lengths) not in (1, len(g.points)):
        out.append("[grid] lengths must give one value or one per axis")
    if any(n < 2 for n in g.points):
        out.append("[grid] every axis needs at least 2 points")
    if any(not L > 0 for L in g.lengths):
        out.append("[grid] lengths must be positive")
    pt = cfg.perturbation
    if not pt.epsilon > 0:
        out.append("[perturbation] epsilon must be > 0")
    if pt.random_modes < 0:
        out.append("[perturbation] random_modes must be >= 0")
    if not pt.u_modes and not pt.v_modes and not pt.random_modes:
        out.append("[perturbation] no modes given")
    st = cfg.stepping
    if st.scheme not in ("imex_euler", "strang_imex"):
        out.append(f"[stepping] scheme must be imex_euler or strang_imex, not {st.scheme!r}")
    if not st.dt > 0:
        out.append("[stepping] dt must be > 0")
    if not st.t_end > 0:
        out.append("[stepping] t_end must be > 0")
    if not st.sample_interval > 0:
        out.append("[stepping] sample_interval must be > 0")
    if not 0 < st.stability_guard <= 1:
        out.append("[stepping] stability_guard must lie in (0, 1]")
    for name, span in (("t_end", st.t_end), ("sample_interval", st.sample_interval)):
        if st.dt > 0 and span > 0:
            n = round(span / st.dt)
            if n < 1 or abs(n * st.dt - span) > 1e-9 * span:
                out.append(f"[stepping] {name} must be a whole multiple of dt")
    mon = cfg.monitoring
    if mon.eta is not None and not mon.eta > 0:
        out.append("[monitoring] eta must be > 0 or auto")
    if mon.weights is not None and any(w < 0 for w in mon.weights):
        out.append("[monitoring] weights must be >= 0")
    if not 0 < mon.tail_fraction <= 1:
        out.append("[monitoring] tail_fraction must lie in (0, 1]")
    if any(not 0 <= ts <= st.t_end for ts in cfg.outputs.snapshot_times):
        out.append("[outputs] snapshot_times must lie in [0, t_end]")
    iq = cfg.inequalities
    if iq.points < 2 or iq.max_mode < 1 or iq.count < 1 or iq.decay < 0:
        out.append("[inequalities] need points >= 2, max_mode >= 1, count >= 1, decay >= 0")
    elif iq.max_mode >= iq.points:
        out.append("[inequalities] max_mode must be below points")
    return out


def _read_sections(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _merge_overrides(sections, overrides, problems):
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            problems.append(f"override {item!r} must look like section.key=value")
            continue
        sections.setdefault(section, {})[name] = value.strip()


def config_keys() -> dict[str, tuple]:
    return {section: tuple(codec) for section, codec in _CODECS.items()}


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    sections = _read_sections(text)
    problems: list[str] = []
    _merge_overrides(sections, overrides, problems)
    cfg = _collect(sections, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, overrides)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    return parse_config(to_ini(cfg), overrides)


# -- canonical text and hash ---------------------------------------------

def to_ini(cfg: ExperimentConfig) -> str:
    lines = []
    lines.append("[parameters]")
    for f in fields(Parameters):
        lines.append(f"{f.name} = {_format(getattr(cfg.parameters, f.name))}")
    for section, cls in _BLOCKS.items():
        lines.append("")
        lines.append(f"[{section}]")
        block = getattr(cfg, section)
        for f in fields(cls):
            value = getattr(block, f.name)
            if section == "monitoring" and f.name == "weights" and value is None:
                text = "paper"
            else:
                text = _format(value)
            lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(to_ini(cfg).encode()).hexdigest()


def default_config_text() -> str:
    return to_ini(ExperimentConfig())


def bundled_config_path(name: str) -> Path:
    here = Path(__file__).parent / "configs"
    path = here / (name if name.endswith(".ini") else name + ".ini")
    if not path.exists():
        available = ", ".join(sorted(p.stem for p in here.glob("*.ini")))
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path


def resolve_config(spec: str, overrides=()) -> ExperimentConfig:
    """Load a path, or a bundled config by name when no such file exists."""
    path = Path(spec)
    if path.exists():
        return load_config(path, overrides)
    return load_config(bundled_config_path(spec), overrides)
