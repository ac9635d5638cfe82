"""Resolved run configuration: every module default in one structured record.

Profiles: ``desk`` runs end-to-end on a laptop CPU (1D, N=128, 2500
records, frequencies scaled to keep at least ~5 grid points per shortest
wavelength); ``full`` mirrors the reference protocol sizes and is intended
for long runs only.  Values resolve in order defaults < config file <
command-line flags, and the resolved config is echoed into the output
directory before any work starts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class GrfConfig:
    c_bg: float = 1500.0
    sigma_c: float = 300.0
    c_min: float = 1400.0
    c_max: float = 1600.0
    alpha_range: tuple[float, float] = (0.5, 2.5)
    ell_range: tuple[float, float] = (0.35, 0.7)


@dataclass
class GridConfig:
    n: int = 128
    length: float = 1.0

    @property
    def dx(self) -> float:
        return self.length / (self.n - 1)


@dataclass
class SourceConfig:
    center: int = 4
    radius: int = 2
    encoding_levels: int = 4


@dataclass
class DataConfig:
    frequencies: tuple[float, ...] = (4500.0, 7500.0, 15000.0, 22500.0, 30000.0)
    splits: dict = field(default_factory=lambda: {"train": 2000, "val": 250, "test": 250})
    seed: int = 20260810


@dataclass
class TrainSection:
    epochs: int = 120
    batch_size: int = 32
    learning_rate: float = 2e-3
    lr_decay_every: int = 2000
    lr_decay_factor: float = 0.5
    ema_decay: float = 0.999
    seed: int = 7
    t_steps: int = 1000
    schedule_kind: str = "cosine"
    width: int = 32
    blocks: int = 4
    context_dim: int = 64


@dataclass
class SampleSection:
    sampler: str = "ddpm"
    schedule: str = "cosine"
    steps: int = 1000
    eta: float = 0.0
    num_samples: int = 10
    seed: int = 11


@dataclass
class AblationSection:
    samplers: tuple = (("ddpm", "linear"), ("ddpm", "cosine"), ("ddim", "cosine"), ("sde", "cosine"))
    step_budgets: tuple[int, ...] = (10, 50, 100, 1000)
    num_inputs: int = 64
    seed: int = 13


@dataclass
class SensitivitySection:
    directions: int = 64
    s_steps: int = 26
    near_probes: int = 4
    far_probes: int = 4
    far_margin: int = 10
    seed: int = 17
    evaluators: tuple[str, ...] = ("solver",)
    model_steps: int = 100  # reverse steps when a model evaluator is requested


@dataclass
class Solver2dSection:
    n: int = 64
    dx: float = 1e-3
    pml_thickness: int = 12
    pml_sigma_max: float = 2.0e6
    pml_profile_power: int = 2
    source_center: int = 31
    source_radius: int = 10
    frequency_hz: float = 62500.0


@dataclass
class RunConfig:
    profile: str = "desk"
    threads: int = 1
    grf: GrfConfig = field(default_factory=GrfConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainSection = field(default_factory=TrainSection)
    sample: SampleSection = field(default_factory=SampleSection)
    ablation: AblationSection = field(default_factory=AblationSection)
    sensitivity: SensitivitySection = field(default_factory=SensitivitySection)
    solver2d: Solver2dSection = field(default_factory=Solver2dSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def desk_profile() -> RunConfig:
    return RunConfig()


def full_profile() -> RunConfig:
    """Reference-scale settings; hours of compute, listed for completeness."""
    cfg = RunConfig(profile="full")
    cfg.data = DataConfig(
        frequencies=(1.5e5, 2.5e5, 5e5, 7.5e5, 1e6),
        splits={"train": 8190, "val": 1020, "test": 500},
        seed=20260810,
    )
    cfg.train.epochs = 1000
    cfg.sensitivity.directions = 100
    cfg.sensitivity.s_steps = 100
    cfg.solver2d.n = 128
    return cfg


PROFILES = {"desk": desk_profile, "full": full_profile}


def _merge(obj, data: dict):
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            setattr(obj, key, _to_tuple(value))
        else:
            setattr(obj, key, value)


def _to_tuple(value):
    return tuple(_to_tuple(v) if isinstance(v, list) else v for v in value)


def load_config(path=None, profile: str = "desk", overrides: dict | None = None) -> RunConfig:
    """Resolve defaults <- file <- overrides into one RunConfig."""
    try:
        cfg = PROFILES[profile]()
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            _merge(cfg, json.load(fh))
    if overrides:
        _merge(cfg, overrides)
    return cfg
