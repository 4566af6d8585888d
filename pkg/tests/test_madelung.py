import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bohm_q, gaussian_rho, lambdify, local_force, skewed_rho, skewed_root
from qhydro import gaussian as oracle
from qhydro.core import GridError, PhysicsConfig, Potential, RealField, WaveFunction, make_grid
from qhydro.madelung import (
    bohm_gradient_partition,
    bohm_potential,
    continuity_residual,
    density,
    drift_velocity,
    enthalpy_residual,
    local_mean_force,
    madelung_fields,
    masked_max,
    momentum_residual,
    node_mask,
    osmotic_velocity,
    phase,
    pressure_per_density_log_form,
    pressures,
)
from qhydro.schrodinger import evolve, init_gaussian, init_skewed


def uniform_psi(grid):
    return WaveFunction(grid, np.full(grid.n_points, 1 / np.sqrt(grid.length), dtype=complex))


def test_uniform_density(grid):
    np.testing.assert_allclose(density(uniform_psi(grid)).values, 1 / grid.length, rtol=1e-14)


def test_density_integrates_to_one(grid, cfg):
    rho = density(init_gaussian(grid, cfg, 0.7, 1.0, 3.0))
    assert np.sum(rho.values) * grid.spacing == pytest.approx(1.0, abs=1e-12)


def test_phase_of_real_positive_state(grid, cfg):
    S = phase(init_gaussian(grid, cfg, 1.0), cfg)
    assert np.all(S.values[S.mask] == 0.0)


def test_phase_unwraps_linear_phase(grid, cfg):
    k0 = 5.0
    psi = init_gaussian(grid, cfg, 1.5, 0.0, k0)
    S = phase(psi, cfg)
    m = S.mask
    slope = np.diff(S.values[m]) / grid.spacing
    np.testing.assert_allclose(slope, cfg.hbar * k0, atol=1e-9)


def test_phase_rejects_zero(grid, cfg):
    with pytest.raises(ValueError):
        phase(WaveFunction(grid, np.zeros(grid.n_points)), cfg)


def test_phase_gradient_matches_oracle_drift(free_run, grid, cfg):
    params = oracle.GaussianParams(1.0, cfg)
    t, psi = free_run.snapshots[10]
    S = phase(psi, cfg)
    inner = np.abs(grid.nodes) < 4 * oracle.sigma(params, t)
    grad = np.gradient(S.values, grid.spacing)  # S is quadratic: central differences are exact
    np.testing.assert_allclose(grad[inner][1:-1] / cfg.mass, oracle.drift_velocity(params, t, grid.nodes)[inner][1:-1], atol=1e-6)


def test_drift_velocity_of_real_state_is_zero(grid, cfg):
    assert np.all(drift_velocity(init_skewed(grid, cfg), cfg).values == 0.0)


def test_drift_velocity_of_plane_wave(cfg):
    g = make_grid(64, 2 * np.pi)
    k = 4.0
    u = drift_velocity(WaveFunction(g, np.exp(1j * k * g.nodes)), cfg)
    np.testing.assert_allclose(u.values, cfg.hbar * k / cfg.mass, atol=1e-12)


def test_drift_velocity_gaussian_t1(free_run, grid, cfg):
    # (ħ/2mσ0)² x t / σ² with σ(1)² = 5/4 gives u = x/5
    t, psi = free_run.snapshots[10]
    assert t == pytest.approx(1.0)
    u = drift_velocity(psi, cfg)
    inner = np.abs(grid.nodes) < 5
    np.testing.assert_allclose(u.values[inner], grid.nodes[inner] / 5, atol=1e-9)


def test_uniform_density_has_no_velocity_or_potential(grid, cfg):
    rho = density(uniform_psi(grid))
    for f in (osmotic_velocity(rho, cfg), bohm_potential(rho, cfg), local_mean_force(rho, cfg), *pressures(rho, cfg)):
        assert np.max(np.abs(f.values)) < 1e-14


def test_osmotic_velocity_spread_gaussian(free_run, grid, cfg):
    # v = ħx/(2mσ²) with σ(2)² = 2
    rho = density(free_run.snapshots[-1][1])
    v = osmotic_velocity(rho, cfg)
    inner = np.abs(grid.nodes) < 6
    np.testing.assert_allclose(v.values[inner], grid.nodes[inner] / 4, atol=1e-9)


@pytest.mark.parametrize("make_expr,sigma", [(gaussian_rho, 1.0), (gaussian_rho, 1.3)])
def test_bohm_potential_against_symbolic(grid, cfg, make_expr, sigma):
    expr = make_expr(sigma)
    rho = RealField(grid, lambdify(expr)(grid.nodes))
    Q = bohm_potential(rho, cfg)
    exact = lambdify(bohm_q(expr))(grid.nodes)
    inner = np.abs(grid.nodes) < 5 * sigma
    np.testing.assert_allclose(Q.values[inner], exact[inner], atol=1e-9)
    closed = cfg.hbar**2 / (4 * cfg.mass * sigma**2) * (1 - grid.nodes**2 / (2 * sigma**2))
    np.testing.assert_allclose(Q.values[inner], closed[inner], atol=1e-9)


def test_bohm_potential_skewed_against_symbolic(grid, cfg):
    expr = skewed_rho()
    rho = RealField(grid, lambdify(expr)(grid.nodes))
    inner = np.abs(grid.nodes) < 5
    np.testing.assert_allclose(bohm_potential(rho, cfg).values[inner], lambdify(bohm_q(expr, root=skewed_root()))(grid.nodes)[inner], atol=1e-8)
    np.testing.assert_allclose(
        local_mean_force(rho, cfg).values[inner], lambdify(local_force(expr))(grid.nodes)[inner], atol=1e-7
    )


def test_pressures_gaussian_t0(grid, cfg):
    rho = density(init_gaussian(grid, cfg, 1.0))
    x, r = grid.nodes, rho.values
    p, pg, pv = pressures(rho, cfg)
    win = np.abs(x) <= 4
    np.testing.assert_allclose(p.values[win], r[win] / 4, atol=1e-12)
    np.testing.assert_allclose(pg.values[win], r[win] * x[win] ** 2 / 4, atol=1e-12)
    np.testing.assert_allclose(pv.values[win], r[win] / 4 * (1 - x[win] ** 2), atol=1e-12)
    np.testing.assert_allclose(p.values, pg.values + pv.values, atol=1e-15)


def test_vacuum_pressure_sign_change_at_sigma(grid, cfg):
    _, _, pv = pressures(density(init_gaussian(grid, cfg, 1.0)), cfg)
    x = grid.nodes
    assert np.all(pv.values[(np.abs(x) < 1 - 1e-9) & (np.abs(x) < 5)] > 0)
    assert np.all(pv.values[(np.abs(x) > 1 + 1e-9) & (np.abs(x) < 5)] < 0)


def test_local_force_gaussian_t0(grid, cfg):
    F = local_mean_force(density(init_gaussian(grid, cfg, 1.0)), cfg)
    x = grid.nodes
    inner = np.abs(x) < 5
    np.testing.assert_allclose(F.values[inner], (x / 4 * (3 - x**2))[inner], atol=1e-8)


def test_force_partition_relation_on_evolved_state(free_run, grid, cfg):
    params = oracle.GaussianParams(1.0, cfg)
    for t, psi in free_run.snapshots[::5]:
        F = local_mean_force(density(psi), cfg)
        s = oracle.sigma(params, t)
        x = grid.nodes
        expect = oracle.material_acceleration(params, t, x) * (3 - (x / s) ** 2)
        win = np.abs(x) <= 4 * s
        np.testing.assert_allclose(F.values[win] / cfg.mass, expect[win], atol=1e-6)


@pytest.mark.parametrize("which", ["gaussian", "skewed", "moving"])
def test_enthalpy_identity(grid, cfg, which):
    psi = {
        "gaussian": lambda: init_gaussian(grid, cfg, 1.0),
        "skewed": lambda: init_skewed(grid, cfg),
        "moving": lambda: init_gaussian(grid, cfg, 0.8, 2.0, 3.0),
    }[which]()
    res = evolve(psi, Potential.free(), cfg, 1e-3, 1.0, 250)
    for _, p in res.snapshots:
        f = madelung_fields(p, cfg)
        assert masked_max(enthalpy_residual(f, cfg), f.rho.values > 1e-8) < 1e-6
        assert masked_max(enthalpy_residual(f, cfg)) < 1e-6


def test_bohm_gradient_partition(free_run, cfg):
    for _, psi in free_run.snapshots[::4]:
        lhs, force_term, gas_term = bohm_gradient_partition(density(psi), cfg)
        assert np.max(np.abs(lhs.values - force_term.values - gas_term.values)[lhs.mask]) < 1e-6


def test_bohm_gradient_partition_skewed(grid, cfg):
    lhs, force_term, gas_term = bohm_gradient_partition(density(init_skewed(grid, cfg)), cfg)
    assert np.max(np.abs(lhs.values - force_term.values - gas_term.values)[lhs.mask]) < 1e-6


def test_pressure_two_ways(free_run, cfg):
    for _, psi in free_run.snapshots[::4]:
        rho = density(psi)
        p, _, _ = pressures(rho, cfg)
        log_form = pressure_per_density_log_form(rho, cfg)
        m = log_form.mask
        assert np.max(np.abs(p.values[m] / rho.values[m] - log_form.values[m])) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_global_phase_invariance(alpha):
    g = make_grid(256, 30.0)
    cfg = PhysicsConfig()
    psi = init_gaussian(g, cfg, 1.0, 0.5, 1.5)
    rotated = WaveFunction(g, np.exp(1j * alpha) * psi.values)
    a, b = madelung_fields(psi, cfg), madelung_fields(rotated, cfg)
    assert np.array_equal(a.valid, b.valid)
    bulk = a.rho.values > 1e-8 * a.rho.values.max()
    for name in ("rho", "u", "v", "bohm_Q", "p_total", "p_gas", "p_vacuum", "force_local"):
        np.testing.assert_allclose(getattr(a, name).values[bulk], getattr(b, name).values[bulk], atol=1e-9)
    sa, sb = phase(psi, cfg), phase(rotated, cfg)
    d = (sb.values - sa.values)[sa.mask] / cfg.hbar
    np.testing.assert_allclose(np.mod(d - d[0] + np.pi, 2 * np.pi) - np.pi, 0.0, atol=1e-9)


def test_fields_match_oracle(free_run, grid, cfg):
    params = oracle.GaussianParams(1.0, cfg)
    for t, psi in free_run.snapshots:
        norms = oracle.compare(madelung_fields(psi, cfg), oracle.analytic_fields(params, t, grid), 4.0, params)
        assert max(v["linf"] for v in norms.values()) < 1e-5


def test_node_masking(cfg):
    g = make_grid(256, 20.0)
    # first harmonic-oscillator excited state has an exact node at x = 0
    x = g.nodes
    psi = WaveFunction(g, x * np.exp(-(x**2) / 2))
    f = madelung_fields(psi, cfg)
    assert not f.valid[g.n_points // 2]
    assert f.u.values[g.n_points // 2] == 0.0
    assert f.force_local.values[g.n_points // 2] == 0.0
    assert np.all(np.isfinite(f.force_local.values))
    assert node_mask(np.zeros(8)).sum() == 0


def _residual_norm(grid, cfg, psi0, potential, dt, window):
    res = evolve(psi0, potential, cfg, dt, 1.0 + dt, 1)
    a, b = res.snapshots[-2][1], res.snapshots[-1][1]
    return (
        np.max(np.abs(momentum_residual(a, b, potential, cfg).values[window])),
        np.max(np.abs(continuity_residual(a, b, cfg).values)),
    )


def test_momentum_residual_converges(grid, cfg):
    psi0 = init_gaussian(grid, cfg, 1.0)
    params = oracle.GaussianParams(1.0, cfg)
    window = np.abs(grid.nodes) <= 3 * oracle.sigma(params, 1.0)
    (m1, c1), (m2, c2) = (_residual_norm(grid, cfg, psi0, Potential.free(), dt, window) for dt in (0.02, 0.01))
    assert 3.0 < m1 / m2 < 5.0
    assert 3.0 < c1 / c2 < 5.0
    assert m2 < 1e-4


def test_momentum_residual_stationary_harmonic(grid, cfg):
    omega = 0.25
    psi0 = init_gaussian(grid, cfg, np.sqrt(1 / (2 * omega)))
    res = evolve(psi0, Potential.harmonic(omega), cfg, 1e-3, 0.01, 1)
    r = momentum_residual(res.snapshots[0][1], res.snapshots[-1][1], Potential.harmonic(omega), cfg)
    window = np.abs(grid.nodes) < 4 * np.sqrt(1 / (2 * omega))
    assert np.max(np.abs(r.values[window])) < 1e-8


def test_residual_rejects_bad_pairs(grid, cfg):
    psi = init_gaussian(grid, cfg, 1.0)
    with pytest.raises(ValueError):
        momentum_residual(psi, psi, Potential.free(), cfg)
    other = WaveFunction(make_grid(512, 40.0), np.ones(512), t=1.0)
    with pytest.raises(GridError):
        continuity_residual(psi, other, cfg)
