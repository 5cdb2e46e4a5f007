"""
Strang split-step solvers for the pure-state limit equations

    Hartree:  i∂ψ/∂t = −½Δψ + (V ∗ |ψ|²)ψ
    NLS:      i∂ψ/∂t = −½Δψ + |ψ|²ψ
    GP-type:  i∂ψ/∂t = −½Δψ + ψ*(q) Σ B_t[q, q′, q″] ψ(q′) ψ(q″)

The kinetic half steps are spectral multiplications by e^{−ik²dt/4}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from hierarchy.kinetic import uniform_step

from .exceptions import NumericalBlowup
from .grid import WaveFunction, convolve, dirac_potential, energy, kinetic_energy
from .kernels import KernelEvolution

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "mass", "energy", "max_abs_psi")


@dataclass
class ContinuumTrajectory:
    times: list
    waves: list
    energy_of: object = field(repr=False, default=None)

    @property
    def final(self):
        return self.waves[-1]

    def masses(self):
        return [wave.mass for wave in self.waves]

    def energies(self):
        return [self.energy_of(wave, t) for t, wave in zip(self.times, self.waves)]

    def rows(self):
        """(t, mass, energy, max|ψ|) per grid point."""
        return [
            (float(t), wave.mass, self.energy_of(wave, t), wave.max_abs)
            for t, wave in zip(self.times, self.waves)
        ]

    def max_step_mass_change(self):
        masses = self.masses()
        return max((abs(b - a) for a, b in zip(masses, masses[1:])), default=0.0)

    def energy_drift(self):
        energies = self.energies()
        return max(abs(e - energies[0]) for e in energies)


def _finite(psi, what, t):
    if not np.all(np.isfinite(psi)):
        logger.error("%s produced non-finite values at t=%g", what, t)
        raise NumericalBlowup(f"{what} blew up at t = {t:g}")
    return psi


def kinetic_step(wave, dt):
    """Exact free evolution over dt: multiplication by e^{−ik²dt/2} in wavenumber space."""
    phases = np.exp(-0.5j * dt * wave.grid.k ** 2)
    return WaveFunction(wave.grid, np.fft.ifft(phases * np.fft.fft(wave.psi)))


def _strang(wave, dt, nonlinear):
    half = kinetic_step(wave, dt / 2)
    return kinetic_step(WaveFunction(wave.grid, nonlinear(half.psi)), dt / 2)


def hartree_step(wave, pair_potential, dt, t=0.0):
    if not dt > 0:
        raise ValueError("the time step must be positive")

    def phase(psi):
        mean_field = convolve(wave.grid, pair_potential, np.abs(psi) ** 2)
        return _finite(psi * np.exp(-1j * mean_field * dt), "Hartree step", t)

    return _strang(wave, dt, phase)


def nls_step(wave, dt, t=0.0):
    if not dt > 0:
        raise ValueError("the time step must be positive")
    return _strang(wave, dt, lambda psi: _finite(psi * np.exp(-1j * np.abs(psi) ** 2 * dt), "NLS step", t))


def _march(wave0, t_grid, step, energy_of):
    t_grid, dt = uniform_step(t_grid)
    waves = [wave0]
    wave = wave0
    for t in t_grid[:-1]:
        wave = step(wave, float(t), dt)
        waves.append(wave)
    return ContinuumTrajectory([float(t) for t in t_grid], waves, energy_of)


def hartree_solve(wave0, t_grid, pair_potential):
    trajectory = _march(
        wave0,
        t_grid,
        lambda wave, t, dt: hartree_step(wave, pair_potential, dt, t),
        lambda wave, t: energy(wave, pair_potential),
    )
    logger.info("Hartree run: %d steps, mass drift %.3e", len(t_grid) - 1, trajectory.max_step_mass_change())
    return trajectory


def nls_solve(wave0, t_grid):
    trajectory = _march(wave0, t_grid, lambda wave, t, dt: nls_step(wave, dt, t), lambda wave, t: energy(wave))
    logger.info("NLS run: %d steps, energy drift %.3e", len(t_grid) - 1, trajectory.energy_drift())
    return trajectory


def nls_reference(wave0, t_grid):
    """The NLS trajectory through the Hartree step with the grid Dirac potential."""
    return hartree_solve(wave0, t_grid, dirac_potential(wave0.grid))


# ---------------------------------------------------------
# Nonlocal coupling
# ---------------------------------------------------------

def gp_step(wave, kernel, dt, t=0.0):
    """One Strang step whose nonlinear part is an explicit midpoint step of ψ' = −i·kernel(ψ)."""
    if not dt > 0:
        raise ValueError("the time step must be positive")

    def midpoint(psi):
        middle = psi - 0.5j * dt * kernel.apply(psi)
        return _finite(psi - 1j * dt * kernel.apply(middle), "GP step", t)

    return _strang(wave, dt, midpoint)


def gp_energy(wave, kernel):
    interaction = 0.5 * np.real(np.sum(np.conj(wave.psi) * kernel.apply(wave.psi)))
    return kinetic_energy(wave) + float(interaction * wave.grid.dx)


def gp_solve(wave0, t_grid, b0, evolve_kernel=True):
    """
    Integrate the GP-type equation with the kernel of b0 carried by the free pair
    motion, evaluated at the middle of every step. With ``evolve_kernel=False``
    the kernel is held at b0. Mass is tracked, not enforced.
    """
    evolution = KernelEvolution(wave0.grid, b0)

    def kernel_at(t):
        return evolution.at(t if evolve_kernel else 0.0)

    trajectory = _march(
        wave0,
        t_grid,
        lambda wave, t, dt: gp_step(wave, kernel_at(t + dt / 2), dt, t),
        lambda wave, t: gp_energy(wave, kernel_at(t)),
    )
    logger.info(
        "GP run: %d steps, mass drift %.3e (diagnostic)", len(trajectory.times) - 1, trajectory.max_step_mass_change()
    )
    return trajectory
