"""Named initial-data profiles."""

from __future__ import annotations

import numpy as np

from .spectral import RadialField, RadialGrid, WaveState


def _even_gaussian(r, width, center):
    # G(r - c) + G(r + c) is even in r, hence a smooth radial function in 3D.
    g = np.exp(-(((r - center) / width) ** 2)) + np.exp(-(((r + center) / width) ** 2))
    return g / (1.0 + np.exp(-((2.0 * center / width) ** 2)))


def gaussian_bump(grid: RadialGrid, amplitude=1.0, width=1.0, center=0.0,
                  velocity=0.0) -> WaveState:
    """Bump of peak ``amplitude`` at r = center; u_t = velocity * u."""
    u = amplitude * _even_gaussian(grid.nodes, width, center)
    field = RadialField.from_values(u, grid)
    return WaveState(field, velocity * field)


def eigenmode(grid: RadialGrid, n=1, amplitude=1.0) -> WaveState:
    """u_0 = amplitude * sin(k_n r) / r, u_1 = 0."""
    a = np.zeros(grid.N, dtype=complex)
    a[n - 1] = amplitude
    return WaveState(RadialField.from_coeffs(a, grid), RadialField.zeros(grid))


def random_smooth(grid: RadialGrid, seed=0, scale=1.0, n_bumps=3,
                  max_center=5.0) -> WaveState:
    """Sum of a few random complex even-Gaussian shells for u_0 and u_1.

    Bit-reproducible for a given seed.
    """
    rng = np.random.default_rng(seed)
    r = grid.nodes
    fields = []
    for _ in range(2):
        total = np.zeros(grid.N, dtype=complex)
        for _ in range(n_bumps):
            amp = rng.normal() + 1j * rng.normal()
            width = rng.uniform(0.5, 1.5)
            center = rng.uniform(0.0, max_center)
            total += amp * _even_gaussian(r, width, center)
        fields.append(RadialField.from_values(scale * total, grid))
    return WaveState(*fields)
