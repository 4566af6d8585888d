"""Closed-form free-particle Gaussian used as ground truth.

The packet is centred, starts with zero mean momentum and spreads as
``σ(t)² = σ0² + (ħt/2mσ0)²``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .core import Grid, GridError, PhysicsConfig, RealField
from .madelung import MadelungFields


@dataclass(frozen=True)
class GaussianParams:
    sigma0: float
    cfg: PhysicsConfig = PhysicsConfig()

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")

    @property
    def spreading_rate(self) -> float:
        """``ħ/(2mσ0)``, the asymptotic growth rate of σ."""
        return self.cfg.hbar / (2 * self.cfg.mass * self.sigma0)


def sigma(params: GaussianParams, t: float) -> float:
    return float(np.sqrt(params.sigma0**2 + (params.spreading_rate * t) ** 2))


def sigma_dot(params: GaussianParams, t: float) -> float:
    return params.spreading_rate**2 * t / sigma(params, t)


def sigma_ddot(params: GaussianParams, t: float) -> float:
    s = sigma(params, t)
    a = params.spreading_rate
    return a**2 / s - a**4 * t**2 / s**3


def drift_velocity(params: GaussianParams, t: float, x):
    """``u = (ħ/2mσ0)² x t/σ² = x t / ((2mσ0²/ħ)² + t²)``."""
    tau = 2 * params.cfg.mass * params.sigma0**2 / params.cfg.hbar
    return np.asarray(x) * t / (tau**2 + t**2)


def osmotic_velocity(params: GaussianParams, t: float, x):
    """``v = ħx / (2mσ²)``."""
    return params.cfg.hbar * np.asarray(x) / (2 * params.cfg.mass * sigma(params, t) ** 2)


def material_acceleration(params: GaussianParams, t: float, x):
    """``Du/Dt = (ħ/2m)² x/σ⁴``."""
    c = params.cfg.hbar / (2 * params.cfg.mass)
    return c**2 * np.asarray(x) / sigma(params, t) ** 4


def density(params: GaussianParams, t: float, x):
    s = sigma(params, t)
    x = np.asarray(x)
    return np.exp(-(x**2) / (2 * s**2)) / (s * np.sqrt(2 * np.pi))


def analytic_fields(params: GaussianParams, t: float, grid: Grid) -> MadelungFields:
    cfg = params.cfg
    m, hbar = cfg.mass, cfg.hbar
    x = grid.nodes
    s = sigma(params, t)
    rho = density(params, t, x)
    u = drift_velocity(params, t, x)
    v = osmotic_velocity(params, t, x)
    # S = m u x / 2 up to a time-dependent constant (u is linear in x)
    S = 0.5 * m * u * x
    p_total = rho / m * (hbar / (2 * s)) ** 2
    p_gas = rho / m * (hbar * x / (2 * s**2)) ** 2
    p_vac = rho / m * (hbar / (2 * s)) ** 2 * (1 - (x / s) ** 2)
    Q = 0.5 * m * v**2 + (hbar / (2 * s)) ** 2 / m * (1 - (x / s) ** 2)
    force = m * material_acceleration(params, t, x) * (3 - (x / s) ** 2)
    ones = np.ones(grid.n_points, dtype=bool)

    def f(a):
        return RealField(grid, a)

    return MadelungFields(t, f(rho), f(S), f(u), f(v), f(Q), f(p_total), f(p_gas), f(p_vac), f(force), ones)


def free_energy(params: GaussianParams) -> float:
    """Mean free energy ``K + I = (m/2)(ħ/2mσ0)²``, constant in time."""
    return 0.5 * params.cfg.mass * params.spreading_rate**2


def compare(
    numeric: MadelungFields,
    analytic: MadelungFields,
    window_sigmas: float,
    params: GaussianParams | None = None,
    fields=("rho", "u", "v", "bohm_Q", "p_total", "p_gas", "p_vacuum", "force_local"),
) -> Dict[str, Dict[str, float]]:
    """∞- and L2-norm of each field difference over ``|x| <= window_sigmas * σ(t)``.

    σ(t) is taken from ``params`` when given, otherwise from the second
    moment of the analytic density.
    """
    numeric.grid.check_same(analytic.grid)
    if not np.isclose(numeric.time, analytic.time, rtol=0, atol=1e-12):
        raise ValueError(f"time mismatch: {numeric.time} vs {analytic.time}")
    grid = numeric.grid
    x = grid.nodes
    if params is not None:
        s = sigma(params, analytic.time)
    else:
        s = float(np.sqrt(np.sum(x**2 * analytic.rho.values) * grid.spacing))
    window = (np.abs(x) <= window_sigmas * s) & numeric.valid
    out = {}
    for name in fields:
        diff = getattr(numeric, name).values[window] - getattr(analytic, name).values[window]
        out[name] = {
            "linf": float(np.max(np.abs(diff))) if diff.size else 0.0,
            "l2": float(np.sqrt(np.sum(diff**2) * grid.spacing)),
        }
    return out
