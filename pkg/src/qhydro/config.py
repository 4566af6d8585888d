"""Run configuration: a flat JSON document with per-field validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Grid, GridError, PhysicsConfig, Potential, RealField, make_grid

PRESETS = ("free_gaussian", "harmonic_ground", "skewed_density")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    n_points: int = 1024
    length: float = 40.0
    hbar: float = 1.0
    mass: float = 1.0
    potential: dict = field(default_factory=lambda: {"kind": "free"})
    # kind "gaussian" (sigma0, x0, k0) or "skewed" (sigma0, amplitude)
    initial: dict = field(default_factory=lambda: {"kind": "gaussian", "sigma0": 1.0, "x0": 0.0, "k0": 0.0})
    dt: float = 1e-3
    t_final: float = 2.0
    stride: int = 100
    ensemble_size: int = 100_000
    seed: int = 42
    laws: list = field(default_factory=lambda: ["nelson_diffusion", "bohmian_drift"])
    ensemble_t_final: float = 1.0
    velocity_window: Optional[float] = None
    node_threshold: float = 1e-12
    k_max: int = 6

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            make_grid(self.n_points, self.length)
        except GridError as exc:
            name = "n_points" if "n_points" in str(exc) else "length"
            raise ConfigError(name, str(exc)) from None
        for name in ("hbar", "mass", "dt"):
            if not _positive(getattr(self, name)):
                raise ConfigError(name, "must be a positive number")
        if not (_number(self.t_final) and self.t_final >= 0):
            raise ConfigError("t_final", "must be >= 0")
        if not (_number(self.ensemble_t_final) and 0 < self.ensemble_t_final):
            raise ConfigError("ensemble_t_final", "must be > 0")
        if not (isinstance(self.stride, int) and self.stride >= 1):
            raise ConfigError("stride", "must be an integer >= 1")
        if not (isinstance(self.ensemble_size, int) and self.ensemble_size >= 1):
            raise ConfigError("ensemble_size", "must be an integer >= 1")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ConfigError("seed", "must be a non-negative integer")
        if self.velocity_window is not None and not _positive(self.velocity_window):
            raise ConfigError("velocity_window", "must be positive")
        if not (_number(self.node_threshold) and 0 <= self.node_threshold < 1):
            raise ConfigError("node_threshold", "must lie in [0, 1)")
        if not (isinstance(self.k_max, int) and self.k_max >= 3):
            raise ConfigError("k_max", "must be an integer >= 3")
        for law in self.laws:
            if law not in ("nelson_diffusion", "bohmian_drift"):
                raise ConfigError("laws", f"unknown candidate law {law!r}")
        self._check_potential()
        self._check_initial()

    def _check_potential(self):
        p = self.potential
        kind = p.get("kind") if isinstance(p, dict) else None
        if kind == "harmonic":
            if not (_number(p.get("omega")) and p["omega"] >= 0):
                raise ConfigError("potential.omega", "must be >= 0")
        elif kind == "tabulated":
            vals = p.get("values")
            if not isinstance(vals, list) or len(vals) != self.n_points:
                raise ConfigError("potential.values", f"needs {self.n_points} numbers")
        elif kind != "free":
            raise ConfigError("potential.kind", "must be free, harmonic or tabulated")

    def _check_initial(self):
        ini = self.initial
        kind = ini.get("kind") if isinstance(ini, dict) else None
        if kind not in ("gaussian", "skewed"):
            raise ConfigError("initial.kind", "must be gaussian or skewed")
        if not _positive(ini.get("sigma0", 1.0)):
            raise ConfigError("initial.sigma0", "must be positive")

    @property
    def grid(self) -> Grid:
        return make_grid(self.n_points, self.length)

    @property
    def physics(self) -> PhysicsConfig:
        return PhysicsConfig(self.hbar, self.mass)

    def make_potential(self) -> Potential:
        p = self.potential
        if p["kind"] == "harmonic":
            return Potential.harmonic(p["omega"])
        if p["kind"] == "tabulated":
            return Potential.tabulated(RealField(self.grid, np.asarray(p["values"], float)))
        return Potential.free()

    def to_dict(self) -> dict:
        return asdict(self)


def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _positive(v) -> bool:
    return _number(v) and v > 0


def config_from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return RunConfig(**data)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be an object")
    return config_from_dict(data)


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}")
    text = resources.files("qhydro.presets").joinpath(f"{name}.cfg").read_text()
    return config_from_dict(json.loads(text))
