"""Experiment configuration: plain ``key = value`` files plus command-line overrides."""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .homogenization import PLACEMENTS
from .state import DEFAULT_PENALTY, STATE_INITIALIZATIONS, PointConstraint

COMMANDS = ("solve-state", "optimize-design", "homogenize", "verify", "sweep")
DESIGN_INITIALIZATIONS = ("undecided", "all-soft", "all-hard", "random")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    command: str = "solve-state"
    delta: float = 100.0
    K0: float = 0.0
    a: float = 0.5
    b: float = 1.0
    stiffness: float | None = None
    cl: float = 1.0
    cp: float = 1.0
    eps: float | None = None
    level_coarse: int = 3
    level_fine: int = 9
    init: str = "simple"
    design_init: str = "undecided"
    constraints: list[PointConstraint] = field(default_factory=list)
    max_iter: int = 2000
    theta: float = 0.5
    periods: list[int] = field(default_factory=lambda: [8, 32, 128])
    placement: str = "leading"
    out: str = "results"
    seed: int = 0
    base_command: str = "optimize-design"
    sweep_param: str | None = None
    sweep_values: list[float] = field(default_factory=list)
    workers: int = 1

    @property
    def epsilon(self) -> float:
        return self.eps if self.eps is not None else 1.0 / 2**self.level_fine

    @property
    def homogeneous_stiffness(self) -> float:
        return self.stiffness if self.stiffness is not None else self.b

    def to_text(self) -> str:
        """Resolved configuration in the same format :func:`read_config_file` accepts."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "eps" and value is None:
                value = self.epsilon
            lines.append(f"{f.name.replace('_', '-')} = {format_value(f.name, value)}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def format_value(name: str, value) -> str:
    if value is None:
        return "none"
    if name == "constraints":
        return "; ".join(
            f"({c.time!r}, {c.target[0]!r}, {c.target[1]!r}, {c.weight!r})" for c in value
        )
    if isinstance(value, list):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_constraints(text: str) -> list[PointConstraint]:
    """``"(t, x, y); (t, x, y, weight)"`` -> constraints."""
    out = []
    text = text.strip()
    if not text or text.lower() == "none":
        return out
    for chunk in re.findall(r"\(([^()]*)\)", text):
        parts = [float(s) for s in chunk.split(",") if s.strip()]
        if len(parts) not in (3, 4):
            raise ConfigError("constraints", f"expected (t, x, y[, weight]), got ({chunk})")
        weight = parts[3] if len(parts) == 4 else DEFAULT_PENALTY
        try:
            out.append(PointConstraint(parts[0], (parts[1], parts[2]), weight))
        except ValueError as exc:
            raise ConfigError("constraints", str(exc)) from exc
    if not out:
        raise ConfigError("constraints", f"could not parse {text!r}")
    return out


def _convert(key: str, raw):
    name = key.replace("-", "_")
    if name not in _FIELD_TYPES:
        raise ConfigError(key, "unknown configuration key")
    if not isinstance(raw, str):
        return name, raw
    text = raw.strip()
    kind = _FIELD_TYPES[name]
    try:
        if name == "constraints":
            return name, parse_constraints(text)
        if text.lower() == "none" and "None" in kind:
            return name, None
        if kind.startswith("float"):
            return name, float(text)
        if kind == "int":
            return name, int(text)
        if name == "periods":
            return name, [int(s) for s in re.split(r"[,\s]+", text) if s]
        if name == "sweep_values":
            return name, [float(s) for s in re.split(r"[,\s]+", text) if s]
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {text!r}: {exc}") from exc
    return name, text


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        name, value = _convert(key.strip(), raw)
        values[name] = value
    return values


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}")
    if cfg.base_command not in COMMANDS or cfg.base_command == "sweep":
        raise ConfigError("base-command", "must name a non-sweep command")
    for key in ("delta", "K0", "a", "b", "cl", "cp", "theta"):
        if not math.isfinite(getattr(cfg, key)):
            raise ConfigError(key, "must be finite")
    if not cfg.a > 0.0:
        raise ConfigError("a", "must be positive")
    if cfg.a > cfg.b:
        raise ConfigError("a", f"requires a < b (got a={cfg.a}, b={cfg.b})")
    needs_two = cfg.command in ("optimize-design", "verify", "homogenize") or (
        cfg.command == "sweep" and cfg.base_command != "solve-state"
    )
    if needs_two and not cfg.a < cfg.b:
        raise ConfigError("a", f"requires a < b for design problems (got a={cfg.a}, b={cfg.b})")
    if cfg.delta < 0.0:
        raise ConfigError("delta", "must be nonnegative")
    if cfg.stiffness is not None and not cfg.stiffness > 0.0:
        raise ConfigError("stiffness", "must be positive")
    if not cfg.cl > 0.0:
        raise ConfigError("cl", "must be positive")
    if cfg.cp < 0.0:
        raise ConfigError("cp", "must be nonnegative")
    if cfg.eps is not None and not cfg.eps > 0.0:
        raise ConfigError("eps", "must be positive")
    if cfg.level_coarse < 1:
        raise ConfigError("level-coarse", "must be >= 1")
    if cfg.level_fine < 1:
        raise ConfigError("level-fine", "must be >= 1")
    if cfg.level_fine > 16:
        raise ConfigError("level-fine", "must be <= 16")
    if cfg.level_coarse > cfg.level_fine:
        raise ConfigError("level-coarse", "must not exceed level-fine")
    if cfg.init not in STATE_INITIALIZATIONS:
        raise ConfigError("init", f"must be one of {STATE_INITIALIZATIONS}")
    if cfg.design_init not in DESIGN_INITIALIZATIONS:
        raise ConfigError("design-init", f"must be one of {DESIGN_INITIALIZATIONS}")
    if cfg.max_iter < 0:
        raise ConfigError("max-iter", "must be nonnegative")
    if not 0.0 <= cfg.theta <= 1.0:
        raise ConfigError("theta", "must lie in [0, 1]")
    if cfg.placement not in PLACEMENTS:
        raise ConfigError("placement", f"must be one of {PLACEMENTS}")
    if not cfg.periods or any(n < 1 for n in cfg.periods):
        raise ConfigError("periods", "need a nonempty list of positive integers")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    if cfg.command == "sweep":
        if cfg.sweep_param is None:
            raise ConfigError("sweep-param", "required for the sweep command")
        name = cfg.sweep_param.replace("-", "_")
        if name not in _FIELD_TYPES or not (
            _FIELD_TYPES[name].startswith("float") or _FIELD_TYPES[name] == "int"
        ):
            raise ConfigError("sweep-param", f"{cfg.sweep_param!r} is not a numeric key")
        if not cfg.sweep_values:
            raise ConfigError("sweep-values", "need at least one value")
    return cfg


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then file values, then overrides; validated."""
    values = {}
    for src in (file_values or {}, overrides or {}):
        for key, raw in src.items():
            if raw is None:
                continue
            name, value = _convert(key, raw)
            values[name] = value
    cfg = ExperimentConfig(**values)
    return validate(cfg)


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    return resolve_config(read_config_file(path) if path else None, overrides)


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["constraints"] = [
        {"time": c.time, "target": list(c.target), "weight": c.weight} for c in cfg.constraints
    ]
    d["eps"] = cfg.epsilon
    return d
