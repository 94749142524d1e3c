"""Nested dataclass configuration with JSON loading and dot-path overrides."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArraySpec, ImpairmentProfile
from .channel import ChannelConfig
from .learning import LearnConfig
from .measurement import TrainingConfig


class ConfigError(ValueError):
    """Raised for malformed configuration input; the message names the field."""


@dataclass
class SystemConfig:
    geometry: str = "ULA"
    N_t: int = 8
    N_r: int = 4
    N_c: int = 16
    N_tap: int = 16
    N_p: int = 6
    N_ray: int = 1
    K_t: int = 16
    K_r: int = 8
    N_s: int = 2
    rolloff: float = 0.8
    sector_deg: float = 120.0

    def channel_config(self) -> ChannelConfig:
        half = np.deg2rad(self.sector_deg) / 2
        return ChannelConfig(
            tx=ArraySpec(self.geometry, self.N_t, sector=(-half, half)),
            rx=ArraySpec(self.geometry, self.N_r, sector=(-half, half)),
            n_clusters=self.N_p,
            rays_per_cluster=self.N_ray,
            n_taps=self.N_tap,
            n_subcarriers=self.N_c,
            rolloff=self.rolloff,
        )


@dataclass
class ImpairmentConfig:
    enabled: bool = True
    gain_std: float = 0.05
    phase_std_deg: float = 20.0
    spacing_jitter: float = 0.1
    coupling_min: float = 0.01
    coupling_max: float = 0.4

    def profile(self) -> ImpairmentProfile:
        if not self.enabled:
            return ImpairmentProfile(0.0, 0.0, 0.0, (0.0, 0.0))
        return ImpairmentProfile(
            self.gain_std, np.deg2rad(self.phase_std_deg), self.spacing_jitter, (self.coupling_min, self.coupling_max)
        )


@dataclass
class LearnDataConfig:
    """Training data collected at setup time for dictionary learning."""

    N_sa: int = 100
    M: int = 40
    N_rep: int = 10
    snr_db: float = 0.0


@dataclass
class LearnSection:
    w1: float = 0.1
    w2: float = 0.001
    max_iter: int = 20
    rel_tol: float = 1e-4
    coder: str = "swomp"
    sparsity: int = 6
    updater: str = "mod"
    init: str = "iarm"
    rho: float = 1.0
    admm_iter: int = 200
    admm_tol: float = 1e-6

    def learn_config(self, seed: int = 0, sedl: bool = False) -> LearnConfig:
        kw = dataclasses.asdict(self)
        if sedl and kw["updater"] == "ksvd":
            kw["updater"] = "khosvd"
        if not sedl and kw["updater"] == "khosvd":
            kw["updater"] = "ksvd"
        return LearnConfig(seed=seed, **kw)


@dataclass
class GridConfig:
    M: list = field(default_factory=lambda: [10, 20, 40, 60])
    snr_db: list = field(default_factory=lambda: [0.0])
    trials: int = 10
    realizations: int = 1
    cases: list = field(
        default_factory=lambda: ["swomp+iarm", "admm+iarm", "swomp+codl", "admm+codl", "swomp+sedl", "admm+sedl"]
    )


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    impairments: ImpairmentConfig = field(default_factory=ImpairmentConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    learn_data: LearnDataConfig = field(default_factory=LearnDataConfig)
    learning: LearnSection = field(default_factory=LearnSection)
    grid: GridConfig = field(default_factory=GridConfig)
    admm_w1_scale: float = 1.0
    compute_crlb: bool = False
    seed: int = 0
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        g = self.grid
        if not g.M or not g.snr_db or not g.cases:
            raise ConfigError("grid.M, grid.snr_db and grid.cases must be nonempty")
        if g.trials < 1 or g.realizations < 1:
            raise ConfigError("grid.trials and grid.realizations must be >= 1")
        for name in ("N_t", "N_r", "N_c", "N_tap", "N_p", "N_ray", "K_t", "K_r", "N_s"):
            if getattr(self.system, name) < 1:
                raise ConfigError(f"system.{name} must be positive")
        if self.system.K_t < self.system.N_t or self.system.K_r < self.system.N_r:
            raise ConfigError("dictionary sizes must satisfy K_t >= N_t and K_r >= N_r")
        for case in g.cases:
            solver, _, dic = case.partition("+")
            if solver not in ("omp", "swomp", "admm") or dic not in ("iarm", "codl", "sedl"):
                raise ConfigError(f"grid.cases: unknown case {case!r}")
        return self


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return from_dict(tp, value, path)
    if tp in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if tp in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp in (bool, "bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp in (str, "str"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tp in (list, "list") or origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return list(value)
    return value


def from_dict(cls, data: dict, path: str = ""):
    """Build dataclass ``cls`` from ``data``; unknown keys raise ``ConfigError``."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown field '{where}'")
        kw[key] = _coerce(hints[key], value, where)
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def to_dict(obj) -> dict:
    return dataclasses.asdict(obj)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` strings to a nested dict (values parsed as JSON when possible)."""
    data = json.loads(json.dumps(data))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"override {key!r}: '{p}' is not a section")
            node = node[p]
        node[parts[-1]] = value
    return data


def load_experiment_config(path=None, overrides=None) -> ExperimentConfig:
    data = to_dict(ExperimentConfig())
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        data = _merge(data, user, "")
    data = apply_overrides(data, overrides)
    return from_dict(ExperimentConfig, data).validate()


def _merge(base: dict, user: dict, path: str) -> dict:
    out = dict(base)
    for k, v in user.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown field '{where}'")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = v
    return out
