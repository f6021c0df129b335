"""Experiment configuration: strict YAML with per-stage sections.

A config file holds everything a run needs; command-line flags never carry
parameters, only paths and verbosity.  Unknown keys are rejected by name so
a typo cannot silently fall back to a default.  Configs round-trip through
to_dict/from_dict losslessly, and config_hash over the canonical dump is
what run manifests record.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import PerturbationSpec, SystemParams


def _check_keys(cls, data: dict, where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field {unknown[0]!r} (allowed: {sorted(allowed)})")


@dataclass(frozen=True)
class SystemSection:
    """mu, a0, and the coupling, as written in config files.

    perturbation is either a preset name ("arnold", "zero") or a list of
    term mappings {c, kQ, kq, kt, phi}.
    """

    mu: float = 0.0
    a0: float = 10.0
    perturbation: object = "arnold"

    @classmethod
    def from_dict(cls, data: dict) -> "SystemSection":
        _check_keys(cls, data, "system")
        return cls(**data)

    def to_system(self) -> SystemParams:
        if isinstance(self.perturbation, str):
            pert = PerturbationSpec.preset(self.perturbation)
        elif isinstance(self.perturbation, (list, tuple)):
            pert = PerturbationSpec.from_records(self.perturbation)
        else:
            raise ConfigError(
                "system.perturbation must be a preset name or a list of terms"
            )
        return SystemParams(mu=float(self.mu), a0=float(self.a0), perturbation=pert)


@dataclass(frozen=True)
class MelnikovStage:
    """Field grids and the certification sweep."""

    omega_values: tuple = (1.0,)
    grid_n: int = 65
    certify: bool = True
    sweep_start: float = 0.5
    sweep_stop: float = 2.5
    sweep_step: float = 0.0  # 0 disables the sweep; only omega_values certify

    def __post_init__(self):
        object.__setattr__(self, "omega_values", tuple(self.omega_values))

    @classmethod
    def from_dict(cls, data: dict) -> "MelnikovStage":
        _check_keys(cls, data, "melnikov")
        return cls(**data)


@dataclass(frozen=True)
class LoopStage:
    omega: float = 1.0
    duration: float = 0.0  # 0 means the natural window 2 a0 / mu
    n_segments: int = 0  # 0 keeps the adaptive mesh
    opt_tol: float = 1e-8

    @classmethod
    def from_dict(cls, data: dict) -> "LoopStage":
        _check_keys(cls, data, "loop")
        return cls(**data)


@dataclass(frozen=True)
class TransitionStage:
    omega1: float = 1.0
    omega2: float = 1.02
    opt_tol: float = 1e-8
    grid_n: int = 9
    boundary_samples: int = 256

    @classmethod
    def from_dict(cls, data: dict) -> "TransitionStage":
        _check_keys(cls, data, "transition")
        return cls(**data)


@dataclass(frozen=True)
class DiffuseStage:
    omega_start: float = 1.0
    omega_end: float = 2.0
    opt_tol: float = 1e-8
    boundary_samples: int = 256

    @classmethod
    def from_dict(cls, data: dict) -> "DiffuseStage":
        _check_keys(cls, data, "diffuse")
        return cls(**data)


@dataclass(frozen=True)
class ScalingStage:
    mu_values: tuple = (0.05, 0.025, 0.0125)
    omega_start: float = 1.0
    omega_end: float = 2.0
    opt_tol: float = 1e-8
    boundary_samples: int = 256

    def __post_init__(self):
        object.__setattr__(self, "mu_values", tuple(self.mu_values))

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingStage":
        _check_keys(cls, data, "scaling")
        return cls(**data)


_SECTIONS = {
    "system": SystemSection,
    "melnikov": MelnikovStage,
    "loop": LoopStage,
    "transition": TransitionStage,
    "diffuse": DiffuseStage,
    "scaling": ScalingStage,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: the system, stage parameters, and output plumbing.

    Stage sections are optional; a subcommand that needs a missing section
    fails with a config error naming it.
    """

    output_dir: str = "runs"
    seed: int = 0
    workers: int = 1
    figures: bool = True
    system: SystemSection = field(default_factory=SystemSection)
    melnikov: MelnikovStage | None = None
    loop: LoopStage | None = None
    transition: TransitionStage | None = None
    diffuse: DiffuseStage | None = None
    scaling: ScalingStage | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _check_keys(cls, data, "config")
        kwargs = dict(data)
        for name, section_cls in _SECTIONS.items():
            if name in kwargs and kwargs[name] is not None:
                kwargs[name] = section_cls.from_dict(kwargs[name])
        return cls(**kwargs)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        if data is None:
            data = {}
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.loads(path.read_text())

    def to_dict(self) -> dict:
        out = {
            "output_dir": self.output_dir,
            "seed": self.seed,
            "workers": self.workers,
            "figures": self.figures,
            "system": asdict(self.system),
        }
        for name in ("melnikov", "loop", "transition", "diffuse", "scaling"):
            section = getattr(self, name)
            if section is not None:
                sec = asdict(section)
                for key, value in sec.items():
                    if isinstance(value, tuple):
                        sec[key] = list(value)
                out[name] = sec
        pert = out["system"]["perturbation"]
        if isinstance(pert, tuple):
            out["system"]["perturbation"] = list(pert)
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def require(self, stage: str):
        section = getattr(self, stage, None)
        if section is None:
            raise ConfigError(f"config has no {stage!r} section")
        return section


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical config dump, recorded in run manifests."""
    canonical = yaml.safe_dump(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
