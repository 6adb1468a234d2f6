"""Experiment configuration: a JSON document of named sections.

Every section is a dataclass.  Parsing is strict: unknown keys and values of
the wrong type are collected and reported together, so one run of the
validator lists every offending key.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError

EXPERIMENTS = ("simulate", "noise-stats", "verify-estimates", "norms", "windows")
CHECKS = ("strichartz", "uuu", "uff", "uuf", "quintic")
INITIAL_KINDS = ("zero", "constant", "single_mode", "random")


@dataclass
class SimSection:
    K: int = 4
    M: int | None = None
    M_pad: int | None = None
    dt: float = 0.01
    T: float = 1.0
    scheme: str = "strang"
    stride: int = 1
    nonlinear: bool = True
    save_path: bool = False


@dataclass
class InitialSection:
    kind: str = "random"
    amplitude: float = 0.1
    norm: str = "L2"
    decay: float = 2.0
    mode: list[int] = field(default_factory=lambda: [0, 0, 0])
    seed: int | None = None


@dataclass
class NoiseSection:
    family: str | None = None
    s: float = 1.0
    c: float = 1.0
    alpha: float = 2.0
    radius: float | None = None
    mode: list[int] = field(default_factory=lambda: [0, 0, 0])


@dataclass
class NoiseStatsSection:
    ensemble: int = 200
    n_steps: int = 20
    T: float = 1.0
    s: float = 1.0
    p: float = 2.0
    q: float = 6.0
    r: float = 6.0
    scales: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])
    mass_ensemble: int = 0
    mass_T: float = 0.1
    mass_dt: float = 0.02


@dataclass
class EstimatesSection:
    check: str = "strichartz"
    p: list[float] = field(default_factory=lambda: [6.0, 100.0])
    N_list: list[int] | None = None
    trials: int = 50
    interval: float | None = None
    k_cap: int | None = None
    lengths: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.25])
    slack: float = 0.2


@dataclass
class WindowsSection:
    eta: float = 0.1
    max_length: float = 1.0
    solve: bool = True


@dataclass
class NormsSection:
    s: float = 1.0
    q: list[float] = field(default_factory=lambda: [2.0, 6.0])


SECTIONS = {
    "sim": SimSection,
    "initial": InitialSection,
    "noise": NoiseSection,
    "noise_stats": NoiseStatsSection,
    "estimates": EstimatesSection,
    "windows": WindowsSection,
    "norms": NormsSection,
}


@dataclass
class ExperimentConfig:
    kind: str = "simulate"
    seed: int = 0
    out_dir: str = "runs/latest"
    sim: SimSection = field(default_factory=SimSection)
    initial: InitialSection = field(default_factory=InitialSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    noise_stats: NoiseStatsSection = field(default_factory=NoiseStatsSection)
    estimates: EstimatesSection = field(default_factory=EstimatesSection)
    windows: WindowsSection = field(default_factory=WindowsSection)
    norms: NormsSection = field(default_factory=NormsSection)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        errors: list[str] = []
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        top = _parse_fields(cls, {k: v for k, v in data.items() if k not in SECTIONS}, "", errors)
        sections = {}
        for name, sec_cls in SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                errors.append(f"{name}: expected an object")
                raw = {}
            sections[name] = sec_cls(**_parse_fields(sec_cls, raw, name + ".", errors))
        if errors:
            raise ConfigError("invalid config: " + "; ".join(errors))
        cfg = cls(**top, **sections)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)

    def save(self, path):
        Path(path).write_text(self.to_json())

    # -- semantic checks -----------------------------------------------

    def validate(self):
        errors = []
        if self.kind not in EXPERIMENTS:
            errors.append(f"kind: must be one of {EXPERIMENTS}, got {self.kind!r}")
        if self.seed < 0:
            errors.append("seed: must be nonnegative")
        if self.initial.kind not in INITIAL_KINDS:
            errors.append(f"initial.kind: must be one of {INITIAL_KINDS}")
        if self.initial.norm not in ("L2", "H1"):
            errors.append("initial.norm: must be 'L2' or 'H1'")
        if self.initial.amplitude < 0:
            errors.append("initial.amplitude: must be nonnegative")
        if len(self.initial.mode) != 3 or len(self.noise.mode) != 3:
            errors.append("mode: needs three integer components")
        if self.estimates.check not in CHECKS:
            errors.append(f"estimates.check: must be one of {CHECKS}")
        if self.estimates.trials < 1:
            errors.append("estimates.trials: must be >= 1")
        if not self.estimates.p:
            errors.append("estimates.p: needs at least one exponent")
        if self.windows.eta <= 0:
            errors.append("windows.eta: must be positive")
        if self.noise_stats.ensemble < 1 or self.noise_stats.n_steps < 1:
            errors.append("noise_stats: ensemble and n_steps must be >= 1")
        if self.kind in ("noise-stats", "windows") and self.noise.family is None:
            errors.append(f"noise.family: the {self.kind} experiment needs a noise operator")
        sim = self.sim
        if sim.K < 1:
            errors.append("sim.K: must be >= 1")
        else:
            from ..dynamics import SimConfig
            from ..spectral import FrequencyLattice

            try:
                SimConfig(FrequencyLattice(sim.K, sim.M, sim.M_pad), sim.dt, sim.T, sim.scheme, stride=sim.stride)
            except (ConfigError, ValueError) as exc:
                errors.append(f"sim: {exc}")
        if errors:
            raise ConfigError("invalid config: " + "; ".join(errors))


def _check_type(value, hint, path: str, errors: list[str]):
    """Coerce ``value`` to ``hint`` (int, float, bool, str, list[...] and optionals)."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _check_type(value, inner, path, errors)
    if origin is list:
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list")
            return value
        return [_check_type(v, args[0], f"{path}[{i}]", errors) for i, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true or false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number")
            return value
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string")
        return value
    return value


def _parse_fields(cls, raw: dict, prefix: str, errors: list[str]) -> dict:
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.name not in SECTIONS}
    out = {}
    for key, value in raw.items():
        if key not in names:
            errors.append(f"{prefix}{key}: unknown key")
            continue
        out[key] = _check_type(value, hints[key], prefix + key, errors)
    return out
