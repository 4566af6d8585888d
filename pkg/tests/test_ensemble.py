import numpy as np
import pytest

from qhydro.core import PhysicsConfig, Potential, RealField, WaveFunction, make_grid
from qhydro.ensemble import (
    CandidateLaw,
    EnsembleState,
    kde_density,
    l1_distance,
    local_mean,
    minimal_image,
    run_law_report,
    sample_initial,
    silverman_bandwidth,
    step,
    wrap,
)
from qhydro.madelung import density, madelung_fields
from qhydro.schrodinger import evolve, init_gaussian


@pytest.fixture(scope="module")
def gauss_rho(grid, cfg):
    return density(init_gaussian(grid, cfg, 1.0))


def test_law_parsing():
    assert CandidateLaw.parse("nelson") is CandidateLaw.NELSON
    assert CandidateLaw.parse("bohmian_drift") is CandidateLaw.BOHM
    assert CandidateLaw.parse(CandidateLaw.BOHM) is CandidateLaw.BOHM
    with pytest.raises(ValueError):
        CandidateLaw.parse("langevin")


def test_wrap():
    np.testing.assert_allclose(wrap([-21.0, 19.0, 21.0], 40.0), [19.0, 19.0, -19.0])
    assert minimal_image(39.0, 40.0) == pytest.approx(-1.0)


def test_sample_statistics(gauss_rho):
    n = 100_000
    s = sample_initial(gauss_rho, n, seed=7)
    assert s.n == n and s.time == 0.0 and s.step_count == 0
    assert abs(np.mean(s.positions)) < 3 / np.sqrt(n)
    assert np.var(s.positions) == pytest.approx(1.0, rel=0.05)


def test_sample_is_deterministic(gauss_rho):
    a = sample_initial(gauss_rho, 1000, seed=3)
    b = sample_initial(gauss_rho, 1000, seed=3)
    c = sample_initial(gauss_rho, 1000, seed=4)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_sample_delta_density():
    g = make_grid(64, 16.0)
    vals = np.zeros(64)
    vals[40] = 1 / g.spacing
    s = sample_initial(RealField(g, vals), 5000, seed=1)
    # the piecewise-linear interpolant is supported on the two cells adjacent to the hot node
    x0 = g.nodes[40]
    assert np.all(np.abs(s.positions - x0) <= g.spacing)


def test_sample_rejects_empty(gauss_rho):
    with pytest.raises(ValueError):
        sample_initial(gauss_rho, 0, seed=1)
    with pytest.raises(ValueError):
        sample_initial(RealField(gauss_rho.grid, np.zeros(gauss_rho.grid.n_points)), 10, seed=1)


def test_state_validation():
    with pytest.raises(ValueError):
        EnsembleState(0.0, np.array([]), CandidateLaw.BOHM, 0, 0, 10.0)
    with pytest.raises(ValueError):
        EnsembleState(0.0, np.array([np.nan]), CandidateLaw.BOHM, 0, 0, 10.0)
    s = EnsembleState(0.0, [1.0], CandidateLaw.BOHM, 0, 0, 10.0)
    with pytest.raises(ValueError):
        s.positions[0] = 2.0


def test_bohm_zero_drift_leaves_positions(grid, cfg, gauss_rho):
    fields = madelung_fields(init_gaussian(grid, cfg, 1.0), cfg)
    s0 = sample_initial(gauss_rho, 1000, seed=2, law="bohm")
    s1 = step(s0, fields, cfg, 0.01)
    assert np.array_equal(s0.positions, s1.positions)
    assert s1.time == pytest.approx(0.01) and s1.step_count == 1


def test_step_rejects_bad_dt(grid, cfg, gauss_rho):
    fields = madelung_fields(init_gaussian(grid, cfg, 1.0), cfg)
    s0 = sample_initial(gauss_rho, 10, seed=2)
    with pytest.raises(ValueError):
        step(s0, fields, cfg, 0.0)


def test_brownian_variance_on_uniform_ring():
    cfg = PhysicsConfig(hbar=1.0, mass=2.0)
    g = make_grid(128, 200.0)
    psi = WaveFunction(g, np.full(128, 1 / np.sqrt(g.length), dtype=complex))
    fields = madelung_fields(psi, cfg)
    n, dt, steps = 50_000, 0.01, 100
    s = EnsembleState(0.0, np.zeros(n), CandidateLaw.NELSON, 11, 0, g.length)
    for _ in range(steps):
        s = step(s, fields, cfg, dt)
    expected = cfg.hbar / cfg.mass * dt * steps
    var = np.var(s.positions)
    # sample variance of a normal has relative SE sqrt(2/n)
    assert abs(var / expected - 1) < 4 * np.sqrt(2 / n)


def test_step_determinism(grid, cfg, gauss_rho):
    fields = madelung_fields(init_gaussian(grid, cfg, 1.0), cfg)
    runs = []
    for _ in range(2):
        s = sample_initial(gauss_rho, 2000, seed=5)
        for _ in range(5):
            s = step(s, fields, cfg, 1e-2)
        runs.append(s.positions)
    assert np.array_equal(*runs)


def test_kde_single_particle(grid):
    s = EnsembleState(0.0, [0.0], CandidateLaw.BOHM, 0, 0, grid.length)
    est = kde_density(s, grid, 0.5)
    assert np.sum(est.values) * grid.spacing == pytest.approx(1.0, abs=1e-12)
    assert grid.nodes[np.argmax(est.values)] == 0.0
    np.testing.assert_allclose(est.values, est.values[::-1][np.r_[-1, : grid.n_points - 1]], atol=1e-15)
    assert est.values.max() == pytest.approx(1 / (0.5 * np.sqrt(2 * np.pi)), rel=1e-3)
    with pytest.raises(ValueError):
        kde_density(s, grid, 0.0)


def test_kde_l1(gauss_rho, grid):
    s = sample_initial(gauss_rho, 100_000, seed=42)
    est = kde_density(s, grid, silverman_bandwidth(s.positions))
    assert l1_distance(est, gauss_rho) < 0.02
    assert l1_distance(gauss_rho, gauss_rho) == 0.0


def test_local_mean_identity_and_constant(gauss_rho):
    s = sample_initial(gauss_rho, 50_000, seed=9)
    prof = local_mean(s, s.positions, 20, bounds=(-3, 3))
    ok = prof.occupied
    width = 6 / 20
    assert np.all(np.abs(prof.mean_value[ok] - prof.bin_centers[ok]) < width / 2)
    const = local_mean(s, np.full(s.n, 2.5), 20)
    assert np.all(const.mean_value[const.occupied] == 2.5)
    assert np.all(const.variance_value[const.occupied] == 0)
    with pytest.raises(ValueError):
        local_mean(s, s.positions, 1)
    with pytest.raises(ValueError):
        local_mean(s, s.positions[:10], 5)


def test_local_mean_flags_sparse_bins():
    s = EnsembleState(0.0, np.r_[np.zeros(50), 9.0], CandidateLaw.BOHM, 0, 0, 40.0)
    prof = local_mean(s, np.ones(51), 4, bounds=(-1, 10))
    assert prof.occupied.sum() == 1
    assert np.isnan(prof.mean_value[~prof.occupied]).all()


@pytest.mark.slow
def test_nelson_stationary_on_harmonic_ground_state(grid):
    cfg = PhysicsConfig()
    omega = 0.25
    psi = init_gaussian(grid, cfg, np.sqrt(cfg.hbar / (2 * cfg.mass * omega)))
    fields = madelung_fields(psi, cfg)
    rho = fields.rho
    s = sample_initial(rho, 100_000, seed=42)
    worst = 0.0
    for i in range(10_000):
        s = step(s, fields, cfg, 1e-2)
        if (i + 1) % 2500 == 0:
            worst = max(worst, l1_distance(kde_density(s, grid, silverman_bandwidth(s.positions)), rho))
    assert s.step_count == 10_000
    assert worst < 0.03


@pytest.fixture(scope="module")
def small_reports(dense_free_run):
    return {law: run_law_report(law, dense_free_run, 20_000, seed=1) for law in CandidateLaw}


def test_reports_track_density(small_reports):
    for rep in small_reports.values():
        assert rep.times[-1] == pytest.approx(1.0)
        assert rep.properties["density_tracking"].measured < 0.03
        assert rep.properties["second_moment"].passed


def test_reports_discriminate_laws(small_reports):
    bohm, nelson = small_reports[CandidateLaw.BOHM], small_reports[CandidateLaw.NELSON]
    for p in bohm.panels:
        assert p.weighted(p.forward_variance) < 0.01 * p.summary()["max_v_squared"]
    assert not bohm.variance_w_dependent
    assert nelson.variance_w_dependent
    variances = [p.weighted(p.forward_variance) for p in nelson.panels]
    assert all(v > 0 for v in variances)
    # variance of (ΔX/w) falls as the window grows
    assert variances == sorted(variances, reverse=True)
    for rep in (bohm, nelson):
        assert rep.properties["mean_velocity"].passed
        assert rep.properties["velocity_variance"].passed is None


def test_report_serialization(small_reports):
    rep = small_reports[CandidateLaw.NELSON]
    d = rep.to_dict()
    assert d["law"] == "nelson_diffusion"
    assert set(d["properties"]) >= {"density_tracking", "second_moment", "mean_velocity", "velocity_variance"}
    assert len(d["velocity_panels"]) == len(rep.panels) >= 2
    rows = list(rep.time_series_rows())
    assert len(rows) == rep.times.size and len(rows[0]) == 7
    assert rep.trajectories.shape == (rep.trajectory_times.size, 100)


def test_report_is_deterministic(dense_free_run):
    a = run_law_report("nelson", dense_free_run, 500, seed=3, t_final=0.2)
    b = run_law_report("nelson", dense_free_run, 500, seed=3, t_final=0.2)
    assert np.array_equal(a.trajectories, b.trajectories)
    assert np.array_equal(a.l1_error, b.l1_error)


def test_report_rejects_short_runs(grid, cfg):
    res = evolve(init_gaussian(grid, cfg, 1.0), Potential.free(), cfg, 1e-3, 0.01, 1)
    with pytest.raises(ValueError):
        run_law_report("bohm", res, 100, seed=1)


def test_ensemble_second_moment_at_t2(grid, cfg):
    res = evolve(init_gaussian(grid, cfg, 1.0), Potential.free(), cfg, 1e-3, 2.0, 1)
    rep = run_law_report("nelson", res, 20_000, seed=42)
    assert rep.times[-1] == pytest.approx(2.0)
    assert abs(rep.x2_ensemble[-1] - 2.0) < 3 * rep.x2_standard_error[-1]
