"""Particle ensembles driven by candidate stochastic laws.

Two update rules are provided.  ``nelson_diffusion`` is the forward
stochastic-mechanics diffusion with drift ``u - v`` and diffusion
coefficient ``ħ/2m``.  ``bohmian_drift`` is the deterministic flow
``dX = u dt``.  Both carry the density along the continuity equation.  They
differ in the local velocity spread, which is what the law report exposes.

Random numbers come from a counter-based Philox stream keyed by
``(seed, purpose)`` with the step number in the counter, so a step draws
the same normals regardless of how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import Grid, PhysicsConfig, RealField, WaveFunction
from .madelung import NODE_THRESHOLD, MadelungFields, density, drift_velocity, osmotic_velocity
from .moments import global_moment

_SAMPLE_STREAM = 0
_STEP_STREAM = 1


class CandidateLaw(str, Enum):
    NELSON = "nelson_diffusion"
    BOHM = "bohmian_drift"

    @classmethod
    def parse(cls, name) -> "CandidateLaw":
        aliases = {"nelson": cls.NELSON, "bohm": cls.BOHM}
        if isinstance(name, cls):
            return name
        return aliases.get(name) or cls(name)


@dataclass(frozen=True, eq=False)
class EnsembleState:
    time: float
    positions: np.ndarray
    law: CandidateLaw
    seed: int
    step_count: int
    length: float
    fallback_count: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size < 1:
            raise ValueError("an ensemble needs at least one particle")
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite particle positions")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.size


@dataclass(frozen=True)
class LocalMeanProfile:
    bin_centers: np.ndarray
    bin_counts: np.ndarray
    mean_value: np.ndarray
    variance_value: np.ndarray
    mean_position: np.ndarray
    occupied: np.ndarray


def _rng(seed: int, stream: int, counter: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    ctr = np.array([0, 0, 0, counter], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=ctr))


def wrap(x, length: float):
    return (np.asarray(x) + 0.5 * length) % length - 0.5 * length


def minimal_image(dx, length: float):
    return wrap(dx, length)


def sample_initial(rho: RealField, n: int, seed: int, law=CandidateLaw.NELSON) -> EnsembleState:
    """Inverse-CDF sampling from the piecewise-linear (periodic) interpolant of ``rho``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = rho.grid
    a = np.clip(rho.values, 0.0, None)
    b = np.roll(a, -1)
    mass = 0.5 * (a + b)
    cdf = np.cumsum(mass)
    if not cdf[-1] > 0:
        raise ValueError("density is identically zero")
    cdf /= cdf[-1]
    uniform = _rng(seed, _SAMPLE_STREAM, 0).random(n)
    seg = np.minimum(np.searchsorted(cdf, uniform, side="right"), grid.n_points - 1)
    lower = np.where(seg > 0, cdf[seg - 1], 0.0)
    frac = (uniform - lower) / (cdf[seg] - lower)
    aj, bj = a[seg], b[seg]
    # root of a s + (b - a) s²/2 = f (a + b)/2 in the cancellation-free form
    s = frac * (aj + bj) / (aj + np.sqrt(aj**2 + frac * (bj**2 - aj**2)))
    x = grid.nodes[seg] + s * grid.spacing
    return EnsembleState(0.0, wrap(x, grid.length), CandidateLaw.parse(law), int(seed), 0, grid.length)


def _fill_masked(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace invalid nodes by the nearest valid node (periodic distance)."""
    if valid.all():
        return values
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return np.zeros_like(values)
    n = values.size
    nodes = np.arange(n)
    pos = np.searchsorted(idx, nodes)
    left = idx[(pos - 1) % idx.size]
    right = idx[pos % idx.size]
    dl = (nodes - left) % n
    dr = (right - nodes) % n
    return values[np.where(dl <= dr, left, right)]


def _interpolate(grid: Grid, values: np.ndarray, x: np.ndarray):
    """Periodic linear interpolation; returns values and the left cell index."""
    s = (x + 0.5 * grid.length) / grid.spacing
    i = np.floor(s).astype(np.int64)
    frac = s - i
    i %= grid.n_points
    j = (i + 1) % grid.n_points
    return values[i] * (1 - frac) + values[j] * frac, i


@dataclass(frozen=True)
class _Drive:
    drift: np.ndarray
    invalid: np.ndarray
    noise: bool


def _drive(law: CandidateLaw, u: RealField, v: RealField, valid: np.ndarray) -> _Drive:
    if law is CandidateLaw.NELSON:
        drift = u.values - v.values
    else:
        drift = u.values
    invalid = ~valid
    return _Drive(_fill_masked(drift, valid), invalid | np.roll(invalid, -1), law is CandidateLaw.NELSON)


def _advance(state: EnsembleState, grid: Grid, drive: _Drive, cfg: PhysicsConfig, dt: float) -> EnsembleState:
    x = state.positions
    b, cell = _interpolate(grid, drive.drift, x)
    fallbacks = int(np.count_nonzero(drive.invalid[cell]))
    x = x + b * dt
    if drive.noise:
        xi = _rng(state.seed, _STEP_STREAM, state.step_count).standard_normal(x.size)
        x = x + np.sqrt(cfg.hbar * dt / cfg.mass) * xi
    return replace(
        state,
        time=state.time + dt,
        positions=wrap(x, grid.length),
        step_count=state.step_count + 1,
        fallback_count=state.fallback_count + fallbacks,
    )


def step(state: EnsembleState, fields: MadelungFields, cfg: PhysicsConfig, dt: float) -> EnsembleState:
    """One Euler–Maruyama step of the ensemble's law using ``fields`` at ``state.time``.

    Particles in cells touching a masked node use the nearest valid drift
    value; ``fallback_count`` accumulates how often that happened.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not np.isclose(fields.grid.length, state.length):
        raise ValueError("fields and ensemble live on different domains")
    drive = _drive(state.law, fields.u, fields.v, fields.valid)
    return _advance(state, fields.grid, drive, cfg, dt)


def silverman_bandwidth(positions) -> float:
    positions = np.asarray(positions)
    return 1.06 * float(np.std(positions)) * positions.size ** (-0.2)


def kde_density(state: EnsembleState, grid: Grid, bandwidth: float) -> RealField:
    """Periodic Gaussian-kernel density estimate on the grid.

    Particles are linearly binned onto the nodes, then convolved with the
    wrapped Gaussian kernel in Fourier space.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    s = (state.positions + 0.5 * grid.length) / grid.spacing
    i = np.floor(s).astype(np.int64)
    frac = s - i
    i %= grid.n_points
    n = grid.n_points
    counts = np.bincount(i, weights=1 - frac, minlength=n) + np.bincount((i + 1) % n, weights=frac, minlength=n)
    hist = counts / (state.n * grid.spacing)
    kernel = np.exp(-0.5 * (grid.wavenumbers * bandwidth) ** 2)
    est = np.fft.ifft(np.fft.fft(hist) * kernel).real
    est /= np.sum(est) * grid.spacing
    return RealField(grid, est)


def l1_distance(a: RealField, b: RealField) -> float:
    a.grid.check_same(b.grid)
    return float(np.sum(np.abs(a.values - b.values)) * a.grid.spacing)


def local_mean(
    state: EnsembleState,
    values,
    n_bins: int,
    bounds: Optional[Sequence[float]] = None,
    min_count: int = 10,
) -> LocalMeanProfile:
    """Histogram-binned conditional mean and variance of ``values`` given position.

    Bins with fewer than ``min_count`` particles are flagged unoccupied and
    carry NaN.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    values = np.asarray(values, dtype=float)
    x = state.positions
    if values.shape != x.shape:
        raise ValueError(f"values has shape {values.shape}, ensemble has {x.shape}")
    lo, hi = (float(x.min()), float(x.max())) if bounds is None else map(float, bounds)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    inside = (x >= lo) & (x <= hi)
    idx, vals, xs = idx[inside], values[inside], x[inside]
    counts = np.bincount(idx, minlength=n_bins)
    occupied = counts >= max(min_count, 1)
    safe = np.maximum(counts, 1)
    mean = np.bincount(idx, weights=vals, minlength=n_bins) / safe
    xmean = np.bincount(idx, weights=xs, minlength=n_bins) / safe
    dev = (vals - mean[idx]) ** 2
    var = np.bincount(idx, weights=dev, minlength=n_bins) / np.maximum(counts - 1, 1)
    nan = np.where(occupied, 1.0, np.nan)
    return LocalMeanProfile(
        bin_centers=0.5 * (edges[1:] + edges[:-1]),
        bin_counts=counts,
        mean_value=mean * nan,
        variance_value=var * nan,
        mean_position=xmean * nan,
        occupied=occupied,
    )


@dataclass
class VelocityPanel:
    window: float
    bin_position: np.ndarray
    bin_counts: np.ndarray
    forward_mean: np.ndarray
    forward_variance: np.ndarray
    centered_mean: np.ndarray
    centered_variance: np.ndarray
    u: np.ndarray
    v_squared: np.ndarray

    def weighted(self, a: np.ndarray) -> float:
        ok = np.isfinite(a)
        return float(np.sum(a[ok] * self.bin_counts[ok]) / np.sum(self.bin_counts[ok]))

    def summary(self) -> dict:
        return {
            "window": self.window,
            "mean_forward_variance": self.weighted(self.forward_variance),
            "mean_centered_variance": self.weighted(self.centered_variance),
            "mean_v_squared": self.weighted(self.v_squared),
            "max_forward_variance": float(np.nanmax(self.forward_variance)),
            "max_v_squared": float(np.nanmax(self.v_squared)),
        }

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(z) else float(z) for z in a]

        return {
            "window": self.window,
            "bin_position": clean(self.bin_position),
            "bin_counts": [int(c) for c in self.bin_counts],
            "forward_mean": clean(self.forward_mean),
            "forward_variance": clean(self.forward_variance),
            "centered_mean": clean(self.centered_mean),
            "centered_variance": clean(self.centered_variance),
            "u": clean(self.u),
            "v_squared": clean(self.v_squared),
        }


@dataclass
class PropertyCheck:
    name: str
    passed: Optional[bool]
    measured: float
    tolerance: Optional[float]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "note": self.note,
        }


@dataclass
class LawReport:
    law: CandidateLaw
    n: int
    seed: int
    dt: float
    times: np.ndarray
    l1_error: np.ndarray
    x2_ensemble: np.ndarray
    x2_solver: np.ndarray
    x2_standard_error: np.ndarray
    x1_ensemble: np.ndarray
    x1_solver: np.ndarray
    reference_time: float
    panels: List[VelocityPanel]
    properties: Dict[str, PropertyCheck]
    trajectory_times: np.ndarray
    trajectories: np.ndarray
    fallback_count: int
    bandwidth: float

    @property
    def variance_w_dependent(self) -> bool:
        return bool(self.properties["velocity_variance_window_dependence"].measured > 0.5)

    def to_dict(self) -> dict:
        return {
            "law": self.law.value,
            "n": self.n,
            "seed": self.seed,
            "dt": self.dt,
            "reference_time": self.reference_time,
            "final_time": float(self.times[-1]),
            "final_l1_error": float(self.l1_error[-1]),
            "kde_bandwidth": self.bandwidth,
            "fallback_count": self.fallback_count,
            "properties": {k: p.to_dict() for k, p in self.properties.items()},
            "velocity_panels": [p.to_dict() for p in self.panels],
            "velocity_summary": [p.summary() for p in self.panels],
        }

    def time_series_rows(self):
        for row in zip(self.times, self.l1_error, self.x1_ensemble, self.x1_solver, self.x2_ensemble, self.x2_solver, self.x2_standard_error):
            yield tuple(float(z) for z in row)


def _snapshot_drives(law, wavefunctions: Sequence[WaveFunction], cfg, threshold):
    for psi in wavefunctions:
        rho = density(psi)
        u = drift_velocity(psi, cfg, threshold)
        v = osmotic_velocity(rho, cfg, threshold)
        yield psi, rho, u, v, _drive(law, u, v, u.mask & v.mask)


def run_law_report(
    law,
    evolution,
    n: int,
    seed: int,
    velocity_window: Optional[float] = None,
    t_final: Optional[float] = None,
    cfg: Optional[PhysicsConfig] = None,
    reference_time: Optional[float] = None,
    window_factors: Sequence[float] = (0.1, 0.2, 0.5, 1.0),
    n_bins: int = 40,
    kde_points: int = 20,
    l1_tolerance: float = 0.02,
    moment_sigmas: float = 4.0,
    threshold: float = NODE_THRESHOLD,
    n_trajectories: int = 100,
) -> LawReport:
    """Propagate an ensemble alongside ``evolution`` and test ensemble-mean properties.

    The ensemble takes one Euler–Maruyama step per snapshot interval using
    the fields of the earlier snapshot, so the evolution should be stored
    densely (stride 1).  Velocity panels are binned on the positions at
    ``reference_time`` and built from displacements over windows
    ``factor * velocity_window`` (default window: 50 steps).
    """
    law = CandidateLaw.parse(law)
    cfg = cfg or evolution.cfg
    snaps = list(evolution.snapshots)
    times = np.array([t for t, _ in snaps])
    if t_final is None:
        t_final = times[-1]
    last = int(np.searchsorted(times, t_final + 1e-9 * max(1.0, t_final), side="right")) - 1
    if last < 1:
        raise ValueError("evolution has no snapshot interval inside the ensemble window")
    times = times[: last + 1]
    wavefunctions = [psi for _, psi in snaps[: last + 1]]
    grid = wavefunctions[0].grid
    dt = float(times[1] - times[0])

    if velocity_window is None:
        velocity_window = 50 * dt
    windows = sorted({max(1, int(round(f * velocity_window / dt))) for f in window_factors})
    w_max = windows[-1]
    if reference_time is None:
        ref = last // 2
    else:
        ref = int(np.argmin(np.abs(times - reference_time)))
    if ref - w_max < 0 or ref + w_max > last:
        raise ValueError("velocity windows do not fit inside the ensemble run around the reference time")
    record = {ref + s * w for w in windows for s in (-1, 1)} | {ref}

    kde_steps = set(np.linspace(0, last, min(kde_points, last + 1)).round().astype(int).tolist()) | {last}

    state = sample_initial(RealField(grid, np.abs(wavefunctions[0].values) ** 2), n, seed, law)
    bandwidth = None
    n_traj = min(n_trajectories, n)
    traj = np.empty((last + 1, n_traj))
    recorded = {}
    series = []
    ref_fields = None

    for i, (psi, rho, u, v, drive) in enumerate(_snapshot_drives(law, wavefunctions, cfg, threshold)):
        pos = state.positions
        traj[i] = pos[:n_traj]
        if i in record:
            recorded[i] = pos
        if i == ref:
            ref_fields = (u, v)
        if i in kde_steps:
            bandwidth = silverman_bandwidth(pos)
            est = kde_density(state, grid, bandwidth)
            x2 = pos**2
            series.append(
                (
                    times[i],
                    l1_distance(est, rho),
                    float(np.mean(pos)),
                    global_moment(rho, 1),
                    float(np.mean(x2)),
                    global_moment(rho, 2),
                    float(np.std(x2, ddof=1) / np.sqrt(pos.size)) if pos.size > 1 else np.inf,
                )
            )
        if i < last:
            state = _advance(state, grid, drive, cfg, float(times[i + 1] - times[i]))

    series = np.array(series)
    panels = _velocity_panels(grid, recorded, ref, windows, times, ref_fields, n_bins, state.length)
    properties = _properties(series, panels, l1_tolerance, moment_sigmas)
    return LawReport(
        law=law,
        n=n,
        seed=seed,
        dt=dt,
        times=series[:, 0],
        l1_error=series[:, 1],
        x1_ensemble=series[:, 2],
        x1_solver=series[:, 3],
        x2_ensemble=series[:, 4],
        x2_solver=series[:, 5],
        x2_standard_error=series[:, 6],
        reference_time=float(times[ref]),
        panels=panels,
        properties=properties,
        trajectory_times=times,
        trajectories=traj,
        fallback_count=state.fallback_count,
        bandwidth=float(bandwidth),
    )


def _velocity_panels(grid, recorded, ref, windows, times, ref_fields, n_bins, length):
    u, v = ref_fields
    x_ref = recorded[ref]
    spread = float(np.std(x_ref))
    centre = float(np.mean(x_ref))
    bounds = (centre - 3 * spread, centre + 3 * spread)
    ref_state = EnsembleState(times[ref], x_ref, CandidateLaw.BOHM, 0, 0, length)
    valid = u.mask & v.mask
    u_vals = _fill_masked(u.values, valid)
    v2_vals = _fill_masked(v.values**2, valid)
    panels = []
    for w in windows:
        fwd_dt = times[ref + w] - times[ref]
        ctr_dt = times[ref + w] - times[ref - w]
        fwd = minimal_image(recorded[ref + w] - x_ref, length) / fwd_dt
        ctr = minimal_image(recorded[ref + w] - recorded[ref - w], length) / ctr_dt
        pf = local_mean(ref_state, fwd, n_bins, bounds)
        pc = local_mean(ref_state, ctr, n_bins, bounds)
        xm = pf.mean_position
        at = np.where(np.isfinite(xm), xm, 0.0)
        nan = np.where(pf.occupied, 1.0, np.nan)
        panels.append(
            VelocityPanel(
                window=float(fwd_dt),
                bin_position=xm,
                bin_counts=pf.bin_counts * pf.occupied,
                forward_mean=pf.mean_value,
                forward_variance=pf.variance_value,
                centered_mean=pc.mean_value,
                centered_variance=pc.variance_value,
                u=_interpolate(grid, u_vals, at)[0] * nan,
                v_squared=_interpolate(grid, v2_vals, at)[0] * nan,
            )
        )
    return panels


def _properties(series, panels, l1_tolerance, moment_sigmas) -> Dict[str, PropertyCheck]:
    props = {}
    final = series[-1]
    props["density_tracking"] = PropertyCheck(
        "density_tracking", bool(final[1] < l1_tolerance), float(final[1]), l1_tolerance,
        "L1 distance between the ensemble KDE and the solver density at the final time",
    )
    z = abs(final[4] - final[5]) / final[6]
    props["second_moment"] = PropertyCheck(
        "second_moment", bool(z <= moment_sigmas), float(z), moment_sigmas,
        "|<X^2>_ensemble - <X^2>_solver| in standard errors at the final time",
    )

    panel = panels[-1]
    ok = np.isfinite(panel.centered_mean)
    counts = panel.bin_counts[ok]
    se = np.sqrt(panel.centered_variance[ok] / counts)
    floor = 0.01 * float(np.max(np.abs(panel.u[ok])))
    z = (panel.centered_mean[ok] - panel.u[ok]) / np.sqrt(se**2 + floor**2)
    rms = float(np.sqrt(np.mean(z**2))) if z.size else np.inf
    props["mean_velocity"] = PropertyCheck(
        "mean_velocity", bool(rms <= 2.0), rms, 2.0,
        "RMS over bins of (centred-window velocity mean - u) / sqrt(SE^2 + (1% max|u|)^2)",
    )
    fwd_err = np.abs(panel.forward_mean[ok] - panel.u[ok])
    props["mean_velocity_forward"] = PropertyCheck(
        "mean_velocity_forward", None, float(np.max(fwd_err)) if fwd_err.size else np.nan, None,
        "max over bins of |forward-window velocity mean - u|; informational",
    )

    ratios = [p.weighted(p.forward_variance) / p.weighted(p.v_squared) for p in panels]
    props["velocity_variance"] = PropertyCheck(
        "velocity_variance", None, float(ratios[-1]), None,
        "weighted local forward-velocity variance / weighted v^2 at the default window; "
        "not asserted because a diffusion has no pointwise velocity",
    )
    variances = [p.weighted(p.forward_variance) for p in panels]
    spread = (max(variances) - min(variances)) / max(max(variances), 1e-300)
    props["velocity_variance_window_dependence"] = PropertyCheck(
        "velocity_variance_window_dependence", None, float(spread), None,
        "relative spread of the weighted local velocity variance across windows",
    )
    return props
