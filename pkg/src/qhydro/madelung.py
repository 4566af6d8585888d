"""Hydrodynamic (Madelung/Bohm) fields extracted from a wavefunction.

Every quantity that divides by the density is evaluated only where
``rho > node_threshold * max(rho)``; elsewhere it is set to 0 and the
``valid`` channel is False.

Derivatives of rho are assembled from spectral derivatives of
``R = sqrt(rho)`` (``rho' = 2RR'``, ``rho'' = 2RR'' + 2R'^2``, ...).  Ratios
such as ``rho''/rho`` then only divide by ``R`` and stay accurate deep in
the tails, where dividing a spectral ``rho''`` by ``rho`` would amplify
round-off by ``1/rho``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, Tuple

import numpy as np

from .core import Grid, GridError, PhysicsConfig, Potential, RealField, WaveFunction, potential_gradient
from .spectral import derivative

NODE_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class MadelungFields:
    time: float
    rho: RealField
    phase_S: RealField
    u: RealField
    v: RealField
    bohm_Q: RealField
    p_total: RealField
    p_gas: RealField
    p_vacuum: RealField
    force_local: RealField
    valid: np.ndarray

    FIELD_NAMES = ("rho", "phase_S", "u", "v", "bohm_Q", "p_total", "p_gas", "p_vacuum", "force_local")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name).values for name in self.FIELD_NAMES}


def node_mask(rho, threshold: float = NODE_THRESHOLD) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    peak = rho.max()
    if not peak > 0:
        return np.zeros(rho.shape, dtype=bool)
    return rho > threshold * peak


@dataclass(frozen=True)
class _RootDerivs:
    R: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray
    mask: np.ndarray

    def ratios(self):
        """R'/R, R''/R, R'''/R on the mask (zeros elsewhere)."""
        out = []
        for d in (self.R1, self.R2, self.R3):
            r = np.zeros_like(d)
            np.divide(d, self.R, out=r, where=self.mask)
            out.append(r)
        return out


def _root_derivs(rho: RealField, threshold: float) -> _RootDerivs:
    values = np.clip(rho.values, 0.0, None)
    R = np.sqrt(values)
    g = rho.grid
    return _RootDerivs(R, derivative(R, g, 1), derivative(R, g, 2), derivative(R, g, 3), node_mask(values, threshold))


def density(psi: WaveFunction) -> RealField:
    return RealField(psi.grid, np.abs(psi.values) ** 2)


def phase(psi: WaveFunction, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    """Action ``S = ħ arg(Ψ)``, unwrapped outward from the density maximum.

    Unwrapping runs over valid (non-node) points only; node points keep the
    principal value and are flagged invalid.
    """
    rho = np.abs(psi.values) ** 2
    if not rho.max() > 0:
        raise ValueError("phase of an all-zero wavefunction is undefined")
    mask = node_mask(rho, threshold)
    raw = np.angle(psi.values)
    S = raw.copy()
    start = int(np.argmax(rho))
    for idx in (np.arange(start, psi.grid.n_points), np.arange(start, -1, -1)):
        sel = idx[mask[idx]]
        S[sel] = np.unwrap(raw[sel])
    return RealField(psi.grid, cfg.hbar * S, mask)


def drift_velocity(psi: WaveFunction, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    """``u = (ħ/m) Im(Ψ* Ψ') / |Ψ|²``, which needs no phase unwrapping."""
    values = psi.values
    rho = np.abs(values) ** 2
    mask = node_mask(rho, threshold)
    current = np.imag(np.conj(values) * derivative(values, psi.grid, 1))
    u = np.zeros_like(rho)
    np.divide(current, rho, out=u, where=mask)
    return RealField(psi.grid, cfg.hbar / cfg.mass * u, mask)


def osmotic_velocity(rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    """``v = -(ħ/2m) ∂ ln ρ/∂x``; the sign follows the diffusive-velocity convention used here."""
    d = _root_derivs(rho, threshold)
    r1, _, _ = d.ratios()
    return RealField(rho.grid, -cfg.hbar / cfg.mass * r1, d.mask)


def bohm_potential(rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    d = _root_derivs(rho, threshold)
    _, r2, _ = d.ratios()
    return RealField(rho.grid, -(cfg.hbar**2) / (2 * cfg.mass) * r2, d.mask)


def pressures(
    rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD
) -> Tuple[RealField, RealField, RealField]:
    """Total, gas and vacuum pressure ``(p, p_g, p_v)`` with ``p = p_g + p_v``.

    ``p_g = ρ m v²`` and ``p_v = -(1/m)(ħ/2)² ρ''``.  Neither divides by rho,
    so both are reported on every node.
    """
    d = _root_derivs(rho, threshold)
    c = cfg.hbar**2 / (4 * cfg.mass)
    rho_xx = 2 * (d.R * d.R2 + d.R1**2)
    # rho v^2 = (ħ/m)^2 R'^2 exactly
    p_gas = cfg.mass * (cfg.hbar / cfg.mass) ** 2 * d.R1**2
    p_vac = -c * rho_xx
    return RealField(rho.grid, p_gas + p_vac), RealField(rho.grid, p_gas), RealField(rho.grid, p_vac)


def pressure_per_density_log_form(
    rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD
) -> RealField:
    """``p/ρ = -(1/m)(ħ/2)² ∂² ln ρ`` with ``∂² ln ρ = 2(R''/R - (R'/R)²)``."""
    d = _root_derivs(rho, threshold)
    r1, r2, _ = d.ratios()
    return RealField(rho.grid, -(cfg.hbar**2) / (4 * cfg.mass) * 2 * (r2 - r1**2), d.mask)


def local_mean_force(rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    """``F̄ = m (ħ/2m)² ρ'''/ρ`` with ``ρ'''/ρ = 2R'''/R + 6 R'R''/R²``."""
    d = _root_derivs(rho, threshold)
    r1, r2, r3 = d.ratios()
    rho3_over_rho = 2 * r3 + 6 * r1 * r2
    return RealField(rho.grid, cfg.mass * (cfg.hbar / (2 * cfg.mass)) ** 2 * rho3_over_rho, d.mask)


def bohm_gradient_partition(
    rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD
) -> Tuple[RealField, RealField, RealField]:
    """Both sides of ``-(1/m)∂Q/∂x = (ħ/2m)² ρ'''/ρ - (1/ρ)∂(ρv²)/∂x``.

    Returns ``(lhs, force_term, gas_term)`` with ``lhs ≈ force_term + gas_term``.
    The left side uses ``Q' = -(ħ²/2m)(R'''/R - R''R'/R²)``; the gas term
    uses ``∂(ρv²)/ρ = 2(ħ/m)² (R'/R)(R''/R)`` from ``ρv² = (ħ/m)² R'²``.
    """
    d = _root_derivs(rho, threshold)
    r1, r2, r3 = d.ratios()
    m, hbar = cfg.mass, cfg.hbar
    dQ = -(hbar**2) / (2 * m) * (r3 - r2 * r1)
    lhs = -dQ / m
    force_term = local_mean_force(rho, cfg, threshold).values / m
    gas_term = -2 * (hbar / m) ** 2 * r1 * r2
    return (
        RealField(rho.grid, lhs, d.mask),
        RealField(rho.grid, force_term, d.mask),
        RealField(rho.grid, gas_term, d.mask),
    )


def bohm_force(rho: RealField, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD) -> RealField:
    """``-∂Q/∂x`` on the mask."""
    lhs, _, _ = bohm_gradient_partition(rho, cfg, threshold)
    return RealField(rho.grid, cfg.mass * lhs.values, lhs.valid)


def madelung_fields(
    psi: WaveFunction, cfg: PhysicsConfig = PhysicsConfig(), threshold: float = NODE_THRESHOLD
) -> MadelungFields:
    rho = density(psi)
    mask = node_mask(rho.values, threshold)
    p, pg, pv = pressures(rho, cfg, threshold)
    return MadelungFields(
        time=psi.t,
        rho=rho,
        phase_S=phase(psi, cfg, threshold),
        u=drift_velocity(psi, cfg, threshold),
        v=osmotic_velocity(rho, cfg, threshold),
        bohm_Q=bohm_potential(rho, cfg, threshold),
        p_total=p,
        p_gas=pg,
        p_vacuum=pv,
        force_local=local_mean_force(rho, cfg, threshold),
        valid=mask,
    )


def enthalpy_residual(fields: MadelungFields, cfg: PhysicsConfig = PhysicsConfig()) -> RealField:
    """``Q - (m/2)v² - p_v/ρ`` on the mask."""
    mask = fields.valid
    rho = fields.rho.values
    pv_over_rho = np.zeros_like(rho)
    np.divide(fields.p_vacuum.values, rho, out=pv_over_rho, where=mask)
    res = fields.bohm_Q.values - 0.5 * cfg.mass * fields.v.values**2 - pv_over_rho
    return RealField(fields.grid, np.where(mask, res, 0.0), mask)


def masked_max(field: RealField, extra_mask=None) -> float:
    mask = field.mask if extra_mask is None else field.mask & extra_mask
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(field.values[mask])))


def _check_pair(psi0: WaveFunction, psi1: WaveFunction) -> float:
    try:
        psi0.grid.check_same(psi1.grid)
    except GridError:
        raise
    dt = psi1.t - psi0.t
    if not dt > 0:
        raise ValueError(f"snapshots must be ordered in time, got t0={psi0.t}, t1={psi1.t}")
    return dt


def momentum_residual(
    psi0: WaveFunction,
    psi1: WaveFunction,
    potential: Potential,
    cfg: PhysicsConfig = PhysicsConfig(),
    threshold: float = NODE_THRESHOLD,
) -> RealField:
    """Residual of ``m(∂u/∂t + u ∂u/∂x) + ∂(Q+U)/∂x`` at the midpoint time.

    ``∂u/∂t`` is the difference quotient of the two snapshots, the spatial
    terms are averaged between them, so the residual is O(dt²) for a
    converged spatial discretization.
    """
    dt = _check_pair(psi0, psi1)
    grid = psi0.grid
    terms = []
    for psi in (psi0, psi1):
        u = drift_velocity(psi, cfg, threshold)
        u_x = _drift_velocity_gradient(psi, cfg, u.mask)
        dQ = -bohm_force(density(psi), cfg, threshold).values
        terms.append((u.values, u_x, dQ, u.mask))
    mask = terms[0][3] & terms[1][3]
    u_t = (terms[1][0] - terms[0][0]) / dt
    advect = 0.5 * (terms[0][0] * terms[0][1] + terms[1][0] * terms[1][1])
    dQ = 0.5 * (terms[0][2] + terms[1][2])
    dU = potential_gradient(potential, grid, cfg)
    res = cfg.mass * (u_t + advect) + dQ + dU
    return RealField(grid, np.where(mask, res, 0.0), mask)


def _drift_velocity_gradient(psi: WaveFunction, cfg: PhysicsConfig, mask) -> np.ndarray:
    # u is typically linear in x (not periodic), so differentiate the quotient analytically
    values = psi.values
    d1 = derivative(values, psi.grid, 1)
    d2 = derivative(values, psi.grid, 2)
    rho = np.abs(values) ** 2
    j = np.imag(np.conj(values) * d1)
    dj = np.imag(np.conj(values) * d2)
    drho = 2 * np.real(np.conj(values) * d1)
    out = np.zeros_like(rho)
    np.divide(dj * rho - j * drho, rho**2, out=out, where=mask)
    return cfg.hbar / cfg.mass * out


def continuity_residual(psi0: WaveFunction, psi1: WaveFunction, cfg: PhysicsConfig = PhysicsConfig()) -> RealField:
    """Residual of ``∂ρ/∂t + ∂(ρu)/∂x`` at the midpoint time (all nodes)."""
    dt = _check_pair(psi0, psi1)
    grid = psi0.grid
    rho_t = (np.abs(psi1.values) ** 2 - np.abs(psi0.values) ** 2) / dt
    flux = 0.0
    for psi in (psi0, psi1):
        j = cfg.hbar / cfg.mass * np.imag(np.conj(psi.values) * derivative(psi.values, grid, 1))
        flux = flux + 0.5 * derivative(j, grid, 1)
    return RealField(grid, rho_t + flux)
