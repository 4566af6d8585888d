"""Shared value types: physical constants, the periodic grid, fields and potentials."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np


class GridError(ValueError):
    """Raised when a grid is invalid or two objects live on different grids."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhysicsConfig:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with nodes ``x_j = -L/2 + j*dx``."""

    n_points: int
    length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise GridError(f"n_points not a power of two >= 8: {n}")
        if not (self.length > 0 and np.isfinite(self.length)):
            raise GridError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    dx = spacing

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(-0.5 * self.length + self.spacing * np.arange(self.n_points))

    @property
    def x(self) -> np.ndarray:
        return self.nodes

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return _frozen(2 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing))

    def check_same(self, other: "Grid") -> None:
        if (self.n_points, self.length) != (other.n_points, other.length):
            raise GridError(f"grid mismatch: {self} vs {other}")


def make_grid(n_points: int, length: float) -> Grid:
    return Grid(int(n_points) if float(n_points).is_integer() else n_points, float(length))


@dataclass(frozen=True, eq=False)
class RealField:
    """Real values on a grid.

    ``valid`` marks nodes where a derived quantity is meaningful (density
    above the node threshold); ``None`` means every node is valid.
    """

    grid: Grid
    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridError(
                f"field has {values.shape} values, grid has {self.grid.n_points} nodes"
            )
        object.__setattr__(self, "values", _frozen(values))
        if self.valid is not None:
            object.__setattr__(self, "valid", _frozen(np.asarray(self.valid, dtype=bool)))

    @property
    def mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.grid.n_points, dtype=bool)
        return self.valid

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitude on a grid at time ``t``."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise GridError(
                f"wavefunction has {values.shape} values, grid has {self.grid.n_points} nodes"
            )
        object.__setattr__(self, "values", _frozen(values))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.spacing)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


ComplexField = WaveFunction


@dataclass(frozen=True, eq=False)
class Potential:
    """External potential: ``free``, ``harmonic`` (needs ``omega``) or ``tabulated``."""

    kind: str = "free"
    omega: float = 0.0
    table: Optional[RealField] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and not self.omega >= 0:
            raise ValueError(f"harmonic potential needs omega >= 0, got {self.omega}")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated potential needs a table")

    @classmethod
    def free(cls) -> "Potential":
        return cls("free")

    @classmethod
    def harmonic(cls, omega: float) -> "Potential":
        return cls("harmonic", omega=float(omega))

    @classmethod
    def tabulated(cls, table: RealField) -> "Potential":
        return cls("tabulated", table=table)

    def to_dict(self) -> dict:
        if self.kind == "harmonic":
            return {"kind": "harmonic", "omega": self.omega}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "values": self.table.values.tolist()}
        return {"kind": "free"}


def evaluate_potential(p: Potential, grid: Grid, cfg: PhysicsConfig = PhysicsConfig()) -> RealField:
    if p.kind == "free":
        return RealField(grid, np.zeros(grid.n_points))
    if p.kind == "harmonic":
        return RealField(grid, 0.5 * cfg.mass * p.omega**2 * grid.nodes**2)
    p.table.grid.check_same(grid)
    return RealField(grid, p.table.values)


def potential_gradient(p: Potential, grid: Grid, cfg: PhysicsConfig = PhysicsConfig()) -> np.ndarray:
    """dU/dx on the nodes; analytic where possible since x**2 is not periodic."""
    from .spectral import derivative

    if p.kind == "free":
        return np.zeros(grid.n_points)
    if p.kind == "harmonic":
        return cfg.mass * p.omega**2 * grid.nodes
    p.table.grid.check_same(grid)
    return derivative(p.table.values, grid, 1)
