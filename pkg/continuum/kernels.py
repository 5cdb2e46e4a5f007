"""
Time-dependent coupling kernels for the Gross–Pitaevskii-type equation.

A pair operator b on the grid is an m²×m² matrix in the orthonormal grid basis,
stored as a two-slot ``LabeledOperator`` with one-particle dimension m. Its free
evolution is [G₁(−t)⊗G₁(−t)] b [G₁(t)⊗G₁(t)] with the spectral one-particle
propagator e^{−itk²/2}. The coupling coefficients of the cubic term are

    B_t[q, q′, q″] = dx · M_t[(q, q), (q′, q″)].
"""

import logging
import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from django.conf import settings

from tensorcore.operators import LabeledOperator, conjugate

logger = logging.getLogger(__name__)


def check_kernel_grid(grid):
    limit = settings.WORKBENCH["MAX_KERNEL_POINTS"]
    if grid.points > limit:
        raise ValueError(f"dense pair kernels are limited to {limit} grid points, got {grid.points}")


def free_unitary(grid, t):
    """e^{−itk²/2} as an m×m matrix in the grid basis."""
    phases = np.exp(-0.5j * t * grid.k ** 2)
    return np.fft.ifft(phases[:, None] * np.fft.fft(np.eye(grid.points), axis=0), axis=0)


def pair_operator(grid, matrix):
    check_kernel_grid(grid)
    return LabeledOperator((1, 2), matrix, grid.points)


def delta_pair_operator(grid):
    """Multiplication by the grid Dirac mass δ(q₁ − q₂): 1/dx on every (q, q) entry."""
    m = grid.points
    check_kernel_grid(grid)
    diagonal = np.zeros(m * m)
    diagonal[np.arange(m) * (m + 1)] = 1.0 / grid.dx
    return pair_operator(grid, np.diag(diagonal))


def default_pair_operator(grid, strength, correlation):
    """
    strength · g₂ with g₂ the multiplication by a normalized Gaussian profile of
    the periodic pair distance, of width ``correlation``. Narrow widths approach
    ``strength`` times the Dirac pair operator.
    """
    if not correlation > 0:
        raise ValueError("correlation length must be positive")
    m = grid.points
    offsets = np.abs(np.subtract.outer(np.arange(m), np.arange(m))) * grid.dx
    distance = np.minimum(offsets, grid.length - offsets)
    profile = np.exp(-distance ** 2 / (2.0 * correlation ** 2))
    profile /= np.sum(profile[0]) * grid.dx
    return pair_operator(grid, np.diag(strength * profile.ravel()))


@dataclass(frozen=True, eq=False)
class CouplingKernel:
    grid: object
    t: float
    pair: LabeledOperator

    @cached_property
    def coefficients(self):
        m = self.grid.points
        blocks = self.pair.matrix.reshape(m, m, m, m)
        idx = np.arange(m)
        return self.grid.dx * blocks[idx, idx, :, :]

    def apply(self, psi):
        """ψ*(q) Σ_{q′,q″} B_t[q, q′, q″] ψ(q′) ψ(q″)."""
        return np.conj(psi) * np.einsum("qab,a,b->q", self.coefficients, psi, psi)

    def trace(self):
        return self.pair.trace()


class KernelEvolution:
    """Free evolution of one initial pair operator, cached per time."""

    def __init__(self, grid, b0):
        check_kernel_grid(grid)
        if b0.labels != (1, 2) or b0.dim != grid.points:
            raise ValueError("the initial pair operator must act on two grid slots")
        self.grid = grid
        self.b0 = b0
        self._cache = {}
        self._lock = threading.Lock()

    def at(self, t):
        t = float(t)
        cached = self._cache.get(t)
        if cached is None:
            pair = self.b0
            if t != 0.0:
                u = free_unitary(self.grid, t)
                pair = conjugate(conjugate(pair, u, (1,)), u, (2,))
            cached = CouplingKernel(self.grid, t, pair)
            with self._lock:
                cached = self._cache.setdefault(t, cached)
        return cached


def coupling_kernel(grid, b0, t):
    return KernelEvolution(grid, b0).at(t)


def rescaled_kernel(grid, b0, t, scale):
    """The coupling kernel at the macroscopic time t/scale."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return coupling_kernel(grid, b0, t / scale)
