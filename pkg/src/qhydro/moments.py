"""Global expectation values: position and force moments, energies, characteristic function."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import PhysicsConfig, RealField, WaveFunction
from .madelung import NODE_THRESHOLD, density, drift_velocity, osmotic_velocity
from .spectral import derivative

DECAY_THRESHOLD = 1e-12
# below this fraction of max ρ the spectral ρ''' is roundoff, which x^k would amplify
TAIL_FLOOR = 1e-16


class DecayWarning(UserWarning):
    """Density has not decayed at the domain edge; moment integrals assume it has."""


@dataclass(frozen=True)
class MomentReport:
    time: float
    x_moments: Tuple[float, ...]
    force_moments: Tuple[float, ...]
    ladder_residuals: Tuple[float, ...]

    def ladder_table(self, cfg: PhysicsConfig = PhysicsConfig()):
        """Rows ``(k, lhs, rhs, residual)`` with lhs = <X^{k+3}F>."""
        c = cfg.hbar**2 / (4 * cfg.mass)
        rows = []
        for k, res in enumerate(self.ladder_residuals):
            rhs = -c * (k + 1) * (k + 2) * (k + 3) * self.x_moments[k]
            rows.append((k, self.force_moments[k + 3], rhs, res))
        return rows

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "x_moments": list(self.x_moments),
            "force_moments": list(self.force_moments),
            "ladder_residuals": list(self.ladder_residuals),
        }


@dataclass(frozen=True)
class EnergyReport:
    kinetic_K: float
    internal_I: float
    potential_U: float
    total_E: float
    psi_form_E: float

    @property
    def form_difference(self) -> float:
        return self.psi_form_E - self.total_E

    @property
    def free_energy(self) -> float:
        return self.kinetic_K + self.internal_I

    def to_dict(self) -> dict:
        return {
            "K": self.kinetic_K,
            "I": self.internal_I,
            "U": self.potential_U,
            "E_hydro": self.total_E,
            "E_psi": self.psi_form_E,
            "difference": self.form_difference,
        }


@dataclass(frozen=True)
class HeisenbergSeries:
    times: np.ndarray
    values: np.ndarray
    time_average: float


def _check_decay(rho: RealField, threshold: float = DECAY_THRESHOLD) -> None:
    edge = max(rho.values[0], rho.values[-1], rho.values[1], rho.values[-2])
    if edge > threshold:
        warnings.warn(
            f"density at domain edge is {edge:.3e} > {threshold:.0e}; moment integrals may be inaccurate",
            DecayWarning,
            stacklevel=3,
        )


def global_moment(rho: RealField, k: int) -> float:
    """``∫ x^k ρ dx`` by the periodic rectangle rule."""
    if k < 0:
        raise ValueError("k must be >= 0")
    x = rho.grid.nodes
    return float(np.sum(x**k * rho.values) * rho.grid.spacing)


def force_moment(rho: RealField, cfg: PhysicsConfig, k: int, check_decay: bool = True) -> float:
    """``<X^k F> = ∫ x^k (ħ²/4m) ρ''' dx`` with a spectral third derivative.

    ρ''' is taken from ρ itself rather than via √ρ so densities with true nodes stay accurate.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if check_decay:
        _check_decay(rho)
    rho3 = derivative(rho.values, rho.grid, 3)
    rho3[rho.values <= TAIL_FLOOR * np.max(rho.values)] = 0.0
    x = rho.grid.nodes
    return float(cfg.hbar**2 / (4 * cfg.mass) * np.sum(x**k * rho3) * rho.grid.spacing)


def ladder_rhs(x_moment_k: float, k: int, cfg: PhysicsConfig) -> float:
    """Predicted ``<X^{k+3}F> = -(1/m)(ħ/2)²(k+1)(k+2)(k+3)<X^k>``."""
    return -(cfg.hbar**2) / (4 * cfg.mass) * (k + 1) * (k + 2) * (k + 3) * x_moment_k


def verify_moment_ladder(rho: RealField, cfg: PhysicsConfig, k_max: int = 6, time: float = 0.0) -> MomentReport:
    if k_max < 3:
        raise ValueError("k_max must be >= 3")
    _check_decay(rho)
    xs = tuple(global_moment(rho, k) for k in range(k_max + 1))
    fs = tuple(force_moment(rho, cfg, k, check_decay=False) for k in range(k_max + 1))
    res = tuple(abs(fs[k + 3] - ladder_rhs(xs[k], k, cfg)) for k in range(k_max - 2))
    return MomentReport(time, xs, fs, res)


def characteristic_function(rho: RealField, q: float) -> complex:
    x = rho.grid.nodes
    return complex(np.sum(rho.values * np.exp(-1j * q * x)) * rho.grid.spacing)


def total_energy(
    psi: WaveFunction, potential: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = 0.0
) -> EnergyReport:
    """Energy as ``∫(-ħ²/2m Ψ*Ψ'' + U|Ψ|²)dx`` and as ``∫ρ[(m/2)(u²+v²) + U]dx``.

    The hydrodynamic integrand is bounded wherever ρ > 0 (``ρu² <= (ħ/m)²|Ψ'|²``),
    so by default it is summed over every node with nonzero density.
    """
    grid = psi.grid
    grid.check_same(potential.grid)
    dx = grid.spacing
    rho = density(psi)
    U = float(np.sum(potential.values * rho.values) * dx)

    # Parseval: ∫|Ψ'|² dx = (dx/N) Σ k²|Ψ̂|²
    psi_hat = np.fft.fft(psi.values)
    kin_psi = cfg.hbar**2 / (2 * cfg.mass) * float(np.sum(grid.wavenumbers**2 * np.abs(psi_hat) ** 2)) * dx / grid.n_points

    u = drift_velocity(psi, cfg, threshold)
    v = osmotic_velocity(rho, cfg, threshold)
    K = float(np.sum(rho.values * 0.5 * cfg.mass * u.values**2) * dx)
    I = float(np.sum(rho.values * 0.5 * cfg.mass * v.values**2) * dx)
    return EnergyReport(K, I, U, K + I + U, kin_psi + U)


def mean_square_velocity(psi: WaveFunction, cfg: PhysicsConfig = PhysicsConfig()) -> float:
    """``<Ẋ²> = ∫ρ(u² + v²)dx``."""
    rep = total_energy(psi, _zero(psi), cfg)
    return 2 * (rep.kinetic_K + rep.internal_I) / cfg.mass


def _zero(psi: WaveFunction) -> RealField:
    return RealField(psi.grid, np.zeros(psi.grid.n_points))


def heisenberg_series(results, cfg: PhysicsConfig = PhysicsConfig()) -> HeisenbergSeries:
    """``sqrt(<Ẋ²>) sqrt(<X²>)`` per snapshot plus its trapezoidal time average over the run."""
    snaps = list(results.snapshots)
    if len(snaps) < 2:
        raise ValueError("heisenberg_series needs at least two snapshots")
    times = np.array([t for t, _ in snaps])
    vals = np.array(
        [np.sqrt(mean_square_velocity(psi, cfg)) * np.sqrt(global_moment(density(psi), 2)) for _, psi in snaps]
    )
    avg = float(np.trapezoid(vals, times) / (times[-1] - times[0]))
    return HeisenbergSeries(times, vals, avg)
