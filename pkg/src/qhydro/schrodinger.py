"""Split-step Fourier integration of the 1D Schrödinger equation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import Grid, PhysicsConfig, Potential, RealField, WaveFunction, evaluate_potential


class NumericalAbort(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message if time is None else f"{message} (t = {time!r})")
        self.time = time


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Snapshots and the energy of the stepped (Ψ-form) Hamiltonian at each one."""

    snapshots: Tuple[Tuple[float, WaveFunction], ...]
    energy_series: Tuple[Tuple[float, float], ...]
    potential: Potential
    cfg: PhysicsConfig
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def wavefunctions(self) -> List[WaveFunction]:
        return [psi for _, psi in self.snapshots]

    @property
    def grid(self) -> Grid:
        return self.snapshots[0][1].grid


def init_gaussian(grid: Grid, cfg: PhysicsConfig, sigma0: float, x0: float = 0.0, k0: float = 0.0) -> WaveFunction:
    """Gaussian packet with density of width ``sigma0`` centred at ``x0``, carrier ``exp(i k0 x)``."""
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    if abs(x0) + 5 * sigma0 >= grid.length / 2:
        raise ValueError(
            f"packet too wide for domain: |x0| + 5 sigma0 = {abs(x0) + 5 * sigma0} >= L/2 = {grid.length / 2}"
        )
    x = grid.nodes
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma0**2) + 1j * k0 * x)
    return _normalized(grid, psi)


def init_skewed(grid: Grid, cfg: PhysicsConfig, sigma0: float = 1.0, amplitude: float = 0.3) -> WaveFunction:
    """Real state with density ``∝ exp(-x²/2σ²)(1 + a sin x)²``."""
    if abs(amplitude) >= 1:
        raise ValueError("amplitude must satisfy |a| < 1 so the density has no nodes")
    if 5 * sigma0 >= grid.length / 2:
        raise ValueError("packet too wide for domain")
    x = grid.nodes
    psi = np.exp(-(x**2) / (4 * sigma0**2)) * (1 + amplitude * np.sin(x))
    return _normalized(grid, psi.astype(complex))


def _normalized(grid: Grid, psi: np.ndarray, t: float = 0.0) -> WaveFunction:
    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.spacing)
    return WaveFunction(grid, psi / norm, t)


def _kinetic_phase(grid: Grid, cfg: PhysicsConfig, dt: float) -> np.ndarray:
    k = grid.wavenumbers
    return np.exp(-1j * cfg.hbar * k**2 * dt / (2 * cfg.mass))


def _potential_half_phase(potential: RealField, cfg: PhysicsConfig, dt: float) -> np.ndarray:
    return np.exp(-0.5j * potential.values * dt / cfg.hbar)


def step_split_fourier(psi: WaveFunction, potential: RealField, cfg: PhysicsConfig, dt: float) -> WaveFunction:
    """One Strang step ``exp(-iV dt/2ħ) exp(-iT dt/ħ) exp(-iV dt/2ħ)``.

    A negative ``dt`` runs the step backwards (conjugated phases).
    """
    if dt == 0 or not np.isfinite(dt):
        raise ValueError(f"dt must be finite and nonzero, got {dt}")
    psi.grid.check_same(potential.grid)
    half = _potential_half_phase(potential, cfg, dt)
    out = _strang(psi.values, half, _kinetic_phase(psi.grid, cfg, dt))
    if not np.all(np.isfinite(out)):
        raise NumericalAbort("non-finite wavefunction after split step", psi.t + dt)
    return WaveFunction(psi.grid, out, psi.t + dt)


def _strang(values, half, kinetic):
    return half * np.fft.ifft(kinetic * np.fft.fft(half * values))


def evolve(
    psi0: WaveFunction,
    potential: Potential,
    cfg: PhysicsConfig,
    dt: float,
    t_final: float,
    stride: int = 1,
) -> EvolutionResult:
    """Integrate from ``psi0.t`` over ``t_final``; snapshot every ``stride`` steps and at the end.

    When ``dt`` does not divide ``t_final`` a final partial step lands exactly on it.
    """
    from .moments import total_energy

    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")

    grid = psi0.grid
    V = evaluate_potential(potential, grid, cfg)
    half = _potential_half_phase(V, cfg, dt)
    kinetic = _kinetic_phase(grid, cfg, dt)

    n_full = int(np.floor(t_final / dt + 1e-9))
    remainder = t_final - n_full * dt
    if remainder <= 1e-12 * max(t_final, 1.0):
        remainder = 0.0
    n_steps = n_full + (1 if remainder > 0 else 0)

    t0 = psi0.t
    psi = psi0.values
    snapshots = [(t0, psi0)]
    energies = [(t0, total_energy(psi0, V, cfg).psi_form_E)]
    for i in range(1, n_steps + 1):
        if i <= n_full:
            psi = _strang(psi, half, kinetic)
            t = t0 + i * dt
        else:
            psi = _strang(psi, _potential_half_phase(V, cfg, remainder), _kinetic_phase(grid, cfg, remainder))
            t = t0 + t_final
        if i == n_steps:
            t = t0 + t_final
        if not np.all(np.isfinite(psi)):
            raise NumericalAbort("non-finite wavefunction", t)
        if i % stride == 0 or i == n_steps:
            wf = WaveFunction(grid, psi, t)
            snapshots.append((t, wf))
            energies.append((t, total_energy(wf, V, cfg).psi_form_E))
    return EvolutionResult(tuple(snapshots), tuple(energies), potential, cfg, dt)
