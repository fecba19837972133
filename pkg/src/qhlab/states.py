"""Benchmark initial states, normalized on their grid at construction."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .fields import Grid, PhysicalConstants
from .madelung import Wavefunction, normalized_wavefunction


def _per_axis(value, grid: Grid) -> tuple[float, ...]:
    if np.isscalar(value):
        return tuple(float(value) for _ in range(grid.dims))
    vals = tuple(float(v) for v in value)
    if len(vals) != grid.dims:
        raise ConfigurationError(f"expected {grid.dims} per-axis values, got {len(vals)}")
    return vals


def plane_wave(grid: Grid, k, constants: PhysicalConstants = PhysicalConstants()) -> Wavefunction:
    """exp(i k.x) / sqrt(volume); k must sit on the reciprocal lattice."""
    ks = _per_axis(k, grid)
    for kx, L in zip(ks, grid.extent):
        mode = kx * L / (2.0 * np.pi)
        if abs(mode - round(mode)) > 1e-9:
            raise ConfigurationError(
                f"plane-wave k={kx} is not a multiple of 2*pi/L for extent {L}"
            )
    coords = grid.meshgrid()
    phase = sum(kx * x for kx, x in zip(ks, coords))
    return normalized_wavefunction(grid, np.exp(1j * phase), constants)


def gaussian_packet(grid: Grid, center=0.0, sigma=1.0, k0=0.0,
                    constants: PhysicalConstants = PhysicalConstants()) -> Wavefunction:
    """Gaussian with amplitude width sigma (|psi|^2 has std sigma) and carrier k0."""
    centers = _per_axis(center, grid)
    sigmas = _per_axis(sigma, grid)
    ks = _per_axis(k0, grid)
    for s in sigmas:
        if not s > 0:
            raise ConfigurationError(f"sigma must be positive, got {s}")
    coords = grid.meshgrid()
    exponent = np.zeros(grid.shape, dtype=np.complex128)
    for x, c, s, kx in zip(coords, centers, sigmas, ks):
        exponent = exponent - (x - c) ** 2 / (4.0 * s * s) + 1j * kx * x
    return normalized_wavefunction(grid, np.exp(exponent), constants)


def ho_ground(grid: Grid, omega: float = 1.0,
              constants: PhysicalConstants = PhysicalConstants()) -> Wavefunction:
    """Harmonic-oscillator ground state, width sigma^2 = hbar / (2 m omega)."""
    if not omega > 0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    sigma = np.sqrt(constants.hbar / (2.0 * constants.mass * omega))
    return gaussian_packet(grid, center=0.0, sigma=sigma, k0=0.0, constants=constants)


def ho_coherent(grid: Grid, omega: float = 1.0, displacement=2.0,
                constants: PhysicalConstants = PhysicalConstants()) -> Wavefunction:
    """Displaced ground state; the center oscillates classically under the trap."""
    if not omega > 0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    sigma = np.sqrt(constants.hbar / (2.0 * constants.mass * omega))
    return gaussian_packet(grid, center=displacement, sigma=sigma, k0=0.0,
                           constants=constants)


def superpose(components: Sequence[tuple[complex, Wavefunction]]) -> Wavefunction:
    """Weighted sum of states on a shared grid, renormalized."""
    if not components:
        raise ConfigurationError("superposition needs at least one component")
    weights = [complex(w) for w, _ in components]
    states = [s for _, s in components]
    grid = states[0].grid
    constants = states[0].constants
    for s in states[1:]:
        if s.grid != grid:
            raise ConfigurationError("superposition components live on different grids")
        if s.constants != constants:
            raise ConfigurationError("superposition components use different constants")
    total = np.zeros(grid.shape, dtype=np.complex128)
    for w, s in zip(weights, states):
        total = total + w * s.psi.values
    return normalized_wavefunction(grid, total, constants)


def two_gaussian_superposition(grid: Grid, separation: float = 4.0, sigma: float = 1.0,
                               relative_weight: complex = -1.0,
                               constants: PhysicalConstants = PhysicalConstants()) -> Wavefunction:
    """Two opposed Gaussians; the default antisymmetric weight pins a node at 0."""
    half = separation / 2.0
    left = gaussian_packet(grid, center=[-half] + [0.0] * (grid.dims - 1)
                           if grid.dims > 1 else -half, sigma=sigma, constants=constants)
    right = gaussian_packet(grid, center=[half] + [0.0] * (grid.dims - 1)
                            if grid.dims > 1 else half, sigma=sigma, constants=constants)
    return superpose([(1.0, right), (relative_weight, left)])
