"""Shared builders for the test suite.

These construct fields directly from numpy RNG draws (not through the
config layer) so low-level tests do not depend on config semantics.
"""

from __future__ import annotations

import numpy as np

from npflow.models import (DarcyFluid, EulerFluid, IonSpecies, make_state)
from npflow.spectral import (SpectralField, SpectralGrid, conjugate_reflection,
                             make_grid)


def band_field(grid: SpectralGrid, *, seed: int, kmax: int, scale: float = 1.0,
               decay: float = 1.0, mean: float = 0.0) -> SpectralField:
    """Random real field supported on shells 1..kmax with e^{-decay|k|} envelope."""
    rng = np.random.default_rng(seed)
    n = grid.n
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    band = (grid.kmag >= 0.5) & (grid.kmag <= kmax) & grid.dealias_mask
    c *= band * scale * np.exp(-decay * grid.kmag)
    c = 0.5 * (c + conjugate_reflection(c))
    c[0, 0] = mean
    return SpectralField(grid, c)


def npd_state(n: int = 16, *, seed: int = 3, kmax: int = 3, scale: float = 0.6,
              means=(1.5, 1.5), diffusivities=(0.5, 1.0), valences=(1.0, -1.0),
              time: float = 0.0):
    grid = make_grid(n)
    species = tuple(
        IonSpecies(z=z, D=d, c=band_field(grid, seed=seed + i, kmax=kmax,
                                          scale=scale, mean=mu))
        for i, (z, d, mu) in enumerate(zip(valences, diffusivities, means)))
    return make_state(grid, species, DarcyFluid(), time)


def npe_state(n: int = 32, *, seed: int = 11, kmax: int = 4, scale: float = 0.8,
              means=(2.0, 2.0), diffusivities=(0.5, 1.0), valences=(1.0, -1.0),
              omega_scale: float = 0.5, time: float = 0.0):
    grid = make_grid(n)
    species = tuple(
        IonSpecies(z=z, D=d, c=band_field(grid, seed=seed + i, kmax=kmax,
                                          scale=scale, mean=mu))
        for i, (z, d, mu) in enumerate(zip(valences, diffusivities, means)))
    omega = band_field(grid, seed=seed + len(species), kmax=kmax,
                       scale=omega_scale, mean=0.0)
    return make_state(grid, species, EulerFluid(omega), time)


def embed_on_finer_grid(f: SpectralField, n_fine: int) -> SpectralField:
    """Re-index band-limited coefficients onto a finer lattice."""
    n = f.grid.n
    fine = make_grid(n_fine)
    out = np.zeros((n_fine, n_fine), dtype=np.complex128)
    for i in range(n):
        k1 = i if i <= n // 2 else i - n
        for j in range(n):
            k2 = j if j <= n // 2 else j - n
            if f.coeffs[i, j] != 0.0:
                out[k1 % n_fine, k2 % n_fine] = f.coeffs[i, j]
    return SpectralField(fine, out)


def restrict_to_coarser_grid(f: SpectralField, n_coarse: int) -> np.ndarray:
    """Collect the coarse-lattice modes of a fine-grid coefficient array."""
    n_fine = f.grid.n
    out = np.zeros((n_coarse, n_coarse), dtype=np.complex128)
    for i in range(n_coarse):
        k1 = i if i <= n_coarse // 2 else i - n_coarse
        for j in range(n_coarse):
            k2 = j if j <= n_coarse // 2 else j - n_coarse
            out[i, j] = f.coeffs[k1 % n_fine, k2 % n_fine]
    return out
