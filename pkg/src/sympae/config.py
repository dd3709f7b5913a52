"""Experiment configuration: dataclasses, profiles and YAML loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml

from .exceptions import ConfigError

__all__ = [
    "FOMConfig",
    "TimeConfig",
    "ArchitectureConfig",
    "TrainingConfig",
    "EvaluationConfig",
    "ExperimentConfig",
    "PROFILES",
    "load_config",
    "OUTPUT_ENV_VAR",
]

OUTPUT_ENV_VAR = "SYMPAE_OUTPUT_DIR"


@dataclass
class FOMConfig:
    kind: str = "wave"
    n_tilde: int = 32
    mu_count: int = 8
    mu_interval: Tuple[float, float] = (5 / 12, 2 / 3)
    literal_K: bool = False

    def mu_grid(self) -> np.ndarray:
        lo, hi = self.mu_interval
        return np.linspace(lo, hi, self.mu_count)


@dataclass
class TimeConfig:
    """FOM time grid and the solvers used for full and reduced models."""

    step_size: float = 0.01
    n_steps: int = 100
    solver_tolerance: float = 1e-12
    rom_solver: str = "newton"
    rom_tolerance: float = 1e-10
    rom_max_iterations: int = 50
    rom_substeps: int = 2
    rom_max_substeps: int = 16


@dataclass
class ArchitectureConfig:
    hidden_dims: List[int] = field(default_factory=list)
    n_gradient_pairs: int = 2
    width_factor: int = 2
    activation: str = "tanh"
    init: str = "psd"
    a_scale: float = 0.01


@dataclass
class TrainingConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99
    delta: float = 1e-8
    manifold_adam: str = "global"


@dataclass
class EvaluationConfig:
    mu: List[float] = field(default_factory=lambda: [0.47, 0.51, 0.55, 0.625])
    reduced_dims: List[int] = field(default_factory=lambda: [2, 4, 6, 8])
    field_kind: str = "symplectic-inverse"
    strict_heldout: bool = False


@dataclass
class ExperimentConfig:
    fom: FOMConfig = field(default_factory=FOMConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seed: int = 0
    output_dir: str = "runs"
    profile: str = "desk"

    def validate(self) -> "ExperimentConfig":
        f, t, a, tr, ev = self.fom, self.time, self.architecture, self.training, self.evaluation
        if f.kind != "wave":
            raise ConfigError(f"unsupported fom kind {f.kind!r}")
        if f.n_tilde < 4:
            raise ConfigError("fom.n_tilde must be >= 4")
        if f.mu_count < 1:
            raise ConfigError("fom.mu_count must be >= 1")
        lo, hi = f.mu_interval
        if not (0 < lo <= hi):
            raise ConfigError("fom.mu_interval must satisfy 0 < lo <= hi")
        if t.n_steps < 1 or t.step_size <= 0:
            raise ConfigError("time.n_steps and time.step_size must be positive")
        if t.rom_substeps < 1:
            raise ConfigError("time.rom_substeps must be >= 1")
        if t.rom_max_substeps < t.rom_substeps:
            raise ConfigError("time.rom_max_substeps must be >= time.rom_substeps")
        if t.rom_solver not in ("fixed-point", "newton"):
            raise ConfigError("time.rom_solver must be 'fixed-point' or 'newton'")
        full = 2 * (f.n_tilde + 2)
        dims = list(ev.reduced_dims)
        if not dims or any(d < 2 or d % 2 or d >= full for d in dims):
            raise ConfigError(f"evaluation.reduced_dims must be even values in [2, {full})")
        for d in dims:
            chain = [full, *a.hidden_dims, d]
            if any(x % 2 for x in chain) or any(b >= a_ for a_, b in zip(chain, chain[1:])):
                raise ConfigError(f"architecture dimensions {chain} must be even and strictly decreasing")
        if a.activation not in ("tanh", "sigmoid"):
            raise ConfigError("architecture.activation must be 'tanh' or 'sigmoid'")
        if a.init not in ("psd", "random"):
            raise ConfigError("architecture.init must be 'psd' or 'random'")
        if tr.epochs < 0 or tr.batch_size < 1 or tr.learning_rate <= 0:
            raise ConfigError("training.epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if tr.batch_size > f.mu_count * (t.n_steps + 1):
            raise ConfigError("training.batch_size exceeds the number of snapshots")
        if tr.manifold_adam not in ("global", "projected"):
            raise ConfigError("training.manifold_adam must be 'global' or 'projected'")
        if ev.field_kind not in ("pseudo-inverse", "symplectic-inverse", "hamiltonian-pullback"):
            raise ConfigError(f"unknown evaluation.field_kind {ev.field_kind!r}")
        if not ev.mu or any(m <= 0 for m in ev.mu):
            raise ConfigError("evaluation.mu must be a nonempty list of positive values")
        if ev.strict_heldout:
            grid = f.mu_grid()
            clash = [m for m in ev.mu if np.any(np.isclose(grid, m, rtol=0, atol=1e-12))]
            if clash:
                raise ConfigError(f"evaluation mu {clash} coincide with training parameters")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["fom"]["mu_interval"] = list(d["fom"]["mu_interval"])
        return d

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """Overlay ``data`` on ``base`` (default: the desk profile); unknown keys are errors."""
        cfg = base if base is not None else PROFILES["desk"]()
        merged = _merge(cfg.to_dict(), dict(data or {}), "")
        try:
            out = cls(
                fom=FOMConfig(**{**merged["fom"], "mu_interval": tuple(merged["fom"]["mu_interval"])}),
                time=TimeConfig(**merged["time"]),
                architecture=ArchitectureConfig(**merged["architecture"]),
                training=TrainingConfig(**merged["training"]),
                evaluation=EvaluationConfig(**merged["evaluation"]),
                seed=int(merged["seed"]),
                output_dir=str(merged["output_dir"]),
                profile=str(merged["profile"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return out.validate()


def _merge(base: Dict[str, Any], over: Mapping[str, Any], path: str) -> Dict[str, Any]:
    out = dict(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, Mapping):
                raise ConfigError(f"configuration section {where!r} must be a mapping")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _desk() -> ExperimentConfig:
    return ExperimentConfig(profile="desk")


def _paper() -> ExperimentConfig:
    cfg = ExperimentConfig(profile="paper")
    cfg.fom.n_tilde = 128
    cfg.fom.mu_count = 20
    cfg.training.epochs = 100
    cfg.evaluation.reduced_dims = [2, 4, 6, 8, 10, 12]
    return cfg


PROFILES = {"desk": _desk, "paper": _paper}


def load_config(path=None, profile: Optional[str] = None) -> ExperimentConfig:
    """Profile defaults overlaid with a YAML file (either may be omitted).

    A ``profile`` key inside the file is honoured when no profile is passed.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
    name = profile or data.get("profile") or "desk"
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    data = {**data, "profile": name}
    return ExperimentConfig.from_dict(data, PROFILES[name]())
