"""Reduction and accuracy checks for the continuum solvers."""

import logging

import numpy as np

from .grid import WaveFunction, plane_wave
from .kernels import delta_pair_operator
from .solvers import gp_solve, nls_solve

logger = logging.getLogger(__name__)


def time_grid(t_end, dt):
    steps = int(round(t_end / dt))
    if steps < 1:
        raise ValueError("the run needs at least one step")
    return np.linspace(0.0, steps * dt, steps + 1)


def plane_wave_phase_error(grid, mode, t_end, dt, amplitude=None):
    """
    Largest phase deviation of the NLS run from A e^{i(kx − ωt)}, ω = k²/2 + |A|².
    """
    wave0 = plane_wave(grid, mode, amplitude)
    a = abs(wave0.psi[0])
    k = 2.0 * np.pi * mode / grid.length
    omega = 0.5 * k ** 2 + a ** 2
    trajectory = nls_solve(wave0, time_grid(t_end, dt))
    worst = 0.0
    for t, wave in zip(trajectory.times, trajectory.waves):
        exact = wave0.psi * np.exp(-1j * omega * t)
        worst = max(worst, float(np.max(np.abs(np.angle(wave.psi / exact)))))
    return worst


def dirac_reduction_gap(wave0, t_end, dt):
    """L² distance at t_end between the Dirac-kernel GP run and the NLS run."""
    grid = time_grid(t_end, dt)
    gp = gp_solve(wave0, grid, delta_pair_operator(wave0.grid), evolve_kernel=False)
    nls = nls_solve(wave0, grid)
    return gp.final.distance(nls.final)


def dirac_halving_ratio(wave0, t_end, dt):
    """gap(dt) / gap(dt/2); second-order agreement gives about 4."""
    coarse = dirac_reduction_gap(wave0, t_end, dt)
    fine = dirac_reduction_gap(wave0, t_end, dt / 2)
    logger.debug("Dirac reduction gaps %.3e -> %.3e", coarse, fine)
    return coarse / fine if fine else float("inf"), coarse, fine


def small_amplitude_departure(wave0, b0, dt, amplitude):
    """One-step distance between the GP step and free motion for ψ scaled by ``amplitude``."""
    scaled = WaveFunction(wave0.grid, wave0.psi * amplitude)
    grid = time_grid(dt, dt)
    free = gp_solve(scaled, grid, b0 * 0.0, evolve_kernel=False).final
    coupled = gp_solve(scaled, grid, b0, evolve_kernel=False).final
    return coupled.distance(free)
