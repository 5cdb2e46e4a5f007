"""
Periodic one-dimensional grids and the wave functions that live on them.

A wave function is normalized so that Σ|ψ|²dx = 1.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    length: float
    points: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        m = int(self.points)
        if m < 16 or m & (m - 1):
            raise ValueError(f"grid needs a power of two of at least 16 points, got {self.points}")
        object.__setattr__(self, "points", m)
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self):
        return self.length / self.points

    @cached_property
    def x(self):
        return -0.5 * self.length + self.dx * np.arange(self.points)

    @cached_property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.dx)

    def displacement(self):
        """Periodic distances from the first grid point, in FFT order."""
        offsets = self.dx * np.arange(self.points)
        return np.minimum(offsets, self.length - offsets)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid1D
    psi: np.ndarray

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (self.grid.points,):
            raise ValueError(f"wave function has shape {psi.shape}, grid has {self.grid.points} points")
        object.__setattr__(self, "psi", psi)

    @property
    def mass(self):
        return mass(self)

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.psi)))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.psi)))

    def normalized(self):
        return WaveFunction(self.grid, self.psi / np.sqrt(self.mass))

    def scaled(self, factor):
        return WaveFunction(self.grid, self.psi * factor)

    def distance(self, other):
        """Discrete L² distance."""
        return float(np.sqrt(np.sum(np.abs(self.psi - other.psi) ** 2) * self.grid.dx))


def mass(wave):
    return float(np.sum(np.abs(wave.psi) ** 2) * wave.grid.dx)


def gradient(wave):
    grid = wave.grid
    return np.fft.ifft(1j * grid.k * np.fft.fft(wave.psi))


def kinetic_energy(wave):
    return float(0.5 * np.sum(np.abs(gradient(wave)) ** 2) * wave.grid.dx)


def convolve(grid, pair_potential, density):
    """(V ∗ ρ)(x) = Σ_y V(x − y) ρ(y) dx with V indexed by periodic displacement."""
    return np.fft.ifft(np.fft.fft(pair_potential) * np.fft.fft(density)).real * grid.dx


def dirac_potential(grid):
    """Unit Dirac mass: weight 1/dx at zero displacement."""
    v = np.zeros(grid.points)
    v[0] = 1.0 / grid.dx
    return v


def energy(wave, pair_potential=None):
    """
    Σ(½|∇ψ|² + ½(V∗|ψ|²)|ψ|²)dx; without a potential the cubic term ½|ψ|⁴ is used.
    """
    grid = wave.grid
    density = np.abs(wave.psi) ** 2
    if pair_potential is None:
        interaction = 0.5 * np.sum(density ** 2)
    else:
        interaction = 0.5 * np.sum(convolve(grid, pair_potential, density) * density)
    return kinetic_energy(wave) + float(interaction * grid.dx)


def gaussian_packet(grid, sigma, center=0.0, momentum=0.0):
    """Normalized packet with position variance σ²."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    offset = grid.x - center
    psi = np.exp(-offset ** 2 / (4.0 * sigma ** 2) + 1j * momentum * grid.x)
    return WaveFunction(grid, psi).normalized()


def plane_wave(grid, mode, amplitude=None):
    """A e^{ikx} with k = 2π·mode/L; the default amplitude gives unit mass."""
    if amplitude is None:
        amplitude = 1.0 / np.sqrt(grid.length)
    k = 2.0 * np.pi * mode / grid.length
    return WaveFunction(grid, amplitude * np.exp(1j * k * grid.x))


def position_variance(wave):
    density = np.abs(wave.psi) ** 2 * wave.grid.dx
    mean = np.sum(wave.grid.x * density) / np.sum(density)
    return float(np.sum((wave.grid.x - mean) ** 2 * density) / np.sum(density))
