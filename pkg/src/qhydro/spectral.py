"""Derivatives on the periodic grid.

Spectral differentiation is the default.  The fourth-order centered finite
difference stencils exist to cross-validate it.
"""

import numpy as np

from .core import Grid

# 4th-order centered stencils, offsets -2..2 (first) and -3..3 (third)
_FD4 = {
    1: (np.array([1, -8, 0, 8, -1]) / 12.0, 2),
    2: (np.array([-1, 16, -30, 16, -1]) / 12.0, 2),
    3: (np.array([1, -8, 13, 0, -13, 8, -1]) / 8.0, 3),
}


def derivative(values, grid: Grid, order: int = 1, method: str = "spectral") -> np.ndarray:
    """``order``-th derivative of periodic samples ``values``.

    Real input gives real output.  For even orders the Nyquist mode is kept
    (its derivative is real); for odd orders it is dropped.
    """
    values = np.asarray(values)
    if method == "fd4":
        return _fd4(values, grid.spacing, order)
    if method != "spectral":
        raise ValueError(f"unknown derivative method {method!r}")
    if np.iscomplexobj(values):
        # real and imaginary parts separately, so a real-valued field has an exactly real derivative
        return _spectral_real(values.real, grid, order) + 1j * _spectral_real(values.imag, grid, order)
    return _spectral_real(values, grid, order)


def _spectral_real(values, grid: Grid, order: int) -> np.ndarray:
    n = grid.n_points
    k = 2 * np.pi * np.fft.rfftfreq(n, d=grid.spacing)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(values), n)


def _fd4(values, dx, order):
    if order not in _FD4:
        raise ValueError(f"fd4 derivative of order {order} not available")
    coeffs, half = _FD4[order]
    out = np.zeros_like(values, dtype=np.result_type(values, float))
    for offset, c in zip(range(-half, half + 1), coeffs):
        out = out + c * np.roll(values, -offset)
    return out / dx**order


def interpolate(values, grid: Grid, points) -> np.ndarray:
    """Trigonometric interpolant of real periodic samples evaluated at arbitrary ``points``.

    The Nyquist mode enters as a cosine so the interpolant is real and
    reproduces the samples at the nodes.
    """
    values = np.asarray(values, dtype=float)
    n = grid.n_points
    coeffs = np.fft.rfft(values) / n
    k = 2 * np.pi * np.fft.rfftfreq(n, d=grid.spacing)
    s = np.atleast_1d(np.asarray(points, dtype=float)) - grid.nodes[0]
    inner = (np.exp(1j * np.outer(s, k[1:-1])) @ coeffs[1:-1]).real
    out = coeffs[0].real + 2 * inner + coeffs[-1].real * np.cos(k[-1] * s)
    return out if np.ndim(points) else float(out[0])
