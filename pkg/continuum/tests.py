import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings
from django.conf import settings

from .checks import (
    dirac_halving_ratio,
    plane_wave_phase_error,
    small_amplitude_departure,
    time_grid,
)
from .exceptions import NumericalBlowup
from .grid import (
    Grid1D,
    WaveFunction,
    dirac_potential,
    energy,
    gaussian_packet,
    plane_wave,
    position_variance,
)
from .kernels import (
    KernelEvolution,
    coupling_kernel,
    default_pair_operator,
    delta_pair_operator,
    pair_operator,
    rescaled_kernel,
)
from .output import read_snapshots, write_snapshots, write_trajectory_csv
from .solvers import (
    gp_solve,
    hartree_solve,
    hartree_step,
    kinetic_step,
    nls_solve,
    nls_step,
)


def workbench(**changes):
    return {**settings.WORKBENCH, **changes}


class GridTests(SimpleTestCase):

    def test_points_must_be_power_of_two(self):
        for points in (8, 48, 100):
            with self.assertRaises(ValueError):
                Grid1D(10.0, points)
        with self.assertRaises(ValueError):
            Grid1D(0.0, 16)

    def test_wavenumbers(self):
        grid = Grid1D(2 * np.pi, 16)
        np.testing.assert_allclose(grid.k[:3], [0.0, 1.0, 2.0])
        self.assertEqual(grid.k[8], -8.0)

    def test_normalized_profiles(self):
        grid = Grid1D(48.0, 64)
        self.assertAlmostEqual(gaussian_packet(grid, 3.0).mass, 1.0, delta=1e-12)
        self.assertAlmostEqual(plane_wave(grid, 2).mass, 1.0, delta=1e-12)

    def test_plane_wave_energy(self):
        grid = Grid1D(48.0, 64)
        k = 2 * np.pi * 2 / 48.0
        expected = 0.5 * k ** 2 + 0.5 / 48.0
        self.assertAlmostEqual(energy(plane_wave(grid, 2)), expected, delta=1e-12)

    def test_dirac_convolution_energy(self):
        grid = Grid1D(48.0, 64)
        wave = gaussian_packet(grid, 3.0)
        self.assertAlmostEqual(energy(wave, dirac_potential(grid)), energy(wave), delta=1e-12)


class SplitStepTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid1D(48.0, 64)
        self.wave = gaussian_packet(self.grid, 3.0, momentum=0.5)

    def test_kinetic_steps_compose(self):
        twice = kinetic_step(kinetic_step(self.wave, 0.01), 0.01)
        once = kinetic_step(self.wave, 0.02)
        self.assertLess(np.max(np.abs(twice.psi - once.psi)), 1e-13)

    def test_mass_per_step(self):
        stepped = hartree_step(self.wave, dirac_potential(self.grid), 1e-3)
        self.assertLess(abs(stepped.mass - self.wave.mass), 1e-12)

    def test_dirac_potential_is_nls(self):
        hartree = hartree_step(self.wave, dirac_potential(self.grid), 1e-2)
        nls = nls_step(self.wave, 1e-2)
        self.assertLess(np.max(np.abs(hartree.psi - nls.psi)), 1e-13)

    def test_free_dispersion(self):
        grid = Grid1D(64.0, 256)
        wave = gaussian_packet(grid, 2.0)
        run = hartree_solve(wave, time_grid(2.0, 0.05), np.zeros(grid.points))
        self.assertAlmostEqual(position_variance(run.final), 4.0 + 4.0 / 16.0, delta=1e-8)

    def test_rejects_bad_steps(self):
        with self.assertRaises(ValueError):
            nls_step(self.wave, 0.0)
        with self.assertRaises(ValueError):
            hartree_step(self.wave, dirac_potential(self.grid), -1e-3)

    def test_blowup(self):
        psi = self.wave.psi.copy()
        psi[3] = np.nan
        with self.assertRaises(NumericalBlowup):
            nls_step(WaveFunction(self.grid, psi), 1e-3)


class NlsTests(SimpleTestCase):

    def test_plane_wave_is_exact(self):
        self.assertLess(plane_wave_phase_error(Grid1D(48.0, 64), 2, 1.0, 1e-3), 1e-8)

    def test_zero_solution(self):
        grid = Grid1D(48.0, 64)
        zero = WaveFunction(grid, np.zeros(grid.points))
        run = nls_solve(zero, time_grid(0.1, 1e-2))
        self.assertEqual(np.max(np.abs(run.final.psi)), 0.0)

    def test_conservation(self):
        grid = Grid1D(48.0, 64)
        run = nls_solve(gaussian_packet(grid, 3.0), time_grid(1.0, 1e-3))
        self.assertLess(run.max_step_mass_change(), 1e-12)
        self.assertLess(run.energy_drift(), 1e-7)

    def test_rows(self):
        grid = Grid1D(48.0, 64)
        run = nls_solve(plane_wave(grid, 1), time_grid(0.05, 1e-2))
        rows = run.rows()
        self.assertEqual(len(rows), 6)
        t, mass, _, peak = rows[-1]
        self.assertAlmostEqual(t, 0.05)
        self.assertAlmostEqual(mass, 1.0, delta=1e-12)
        self.assertAlmostEqual(peak, 1 / np.sqrt(48.0), delta=1e-12)


class KernelTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid1D(24.0, 16)
        self.rng = np.random.default_rng(7)

    def test_origin(self):
        b0 = default_pair_operator(self.grid, 0.5, 1.5)
        self.assertIs(coupling_kernel(self.grid, b0, 0.0).pair, b0)

    def test_identity_is_invariant(self):
        b0 = pair_operator(self.grid, np.eye(self.grid.points ** 2))
        kernel = coupling_kernel(self.grid, b0, 0.7)
        np.testing.assert_allclose(kernel.pair.matrix, b0.matrix, atol=1e-12)

    def test_projector_trace(self):
        phi = self.rng.normal(size=256) + 1j * self.rng.normal(size=256)
        phi /= np.linalg.norm(phi)
        b0 = pair_operator(self.grid, np.outer(phi, phi.conj()))
        kernel = coupling_kernel(self.grid, b0, 0.4)
        self.assertAlmostEqual(kernel.trace(), 1.0, delta=1e-10)

    def test_rescaling(self):
        b0 = default_pair_operator(self.grid, 0.5, 1.5)
        np.testing.assert_array_equal(
            rescaled_kernel(self.grid, b0, 0.3, 1.0).coefficients,
            coupling_kernel(self.grid, b0, 0.3).coefficients,
        )
        np.testing.assert_allclose(
            rescaled_kernel(self.grid, b0, 0.3, 0.5).coefficients,
            coupling_kernel(self.grid, b0, 0.6).coefficients,
            atol=1e-14,
        )
        with self.assertRaises(ValueError):
            rescaled_kernel(self.grid, b0, 0.3, 0.0)

    def test_commuting_operator_ignores_scale(self):
        energies = 0.5 * np.add.outer(self.grid.k ** 2, self.grid.k ** 2).ravel()
        fourier = np.fft.ifft(np.eye(16), axis=0, norm="ortho")
        pair = np.kron(fourier, fourier) @ np.diag(np.cos(energies)) @ np.kron(fourier, fourier).conj().T
        b0 = pair_operator(self.grid, pair)
        for scale in (1.0, 0.5, 0.1):
            np.testing.assert_allclose(
                rescaled_kernel(self.grid, b0, 0.3, scale).pair.matrix, pair, atol=1e-12
            )

    def test_dirac_coefficients(self):
        kernel = coupling_kernel(self.grid, delta_pair_operator(self.grid), 0.0)
        b = kernel.coefficients
        idx = np.arange(16)
        np.testing.assert_allclose(b[idx, idx, idx], 1.0)
        self.assertAlmostEqual(np.abs(b).sum(), 16.0)

    def test_evolution_cache(self):
        evolution = KernelEvolution(self.grid, delta_pair_operator(self.grid))
        self.assertIs(evolution.at(0.25), evolution.at(0.25))

    def test_dense_kernel_limit(self):
        with override_settings(WORKBENCH=workbench(MAX_KERNEL_POINTS=16)):
            with self.assertRaises(ValueError):
                delta_pair_operator(Grid1D(24.0, 32))


class GrossPitaevskiiTests(SimpleTestCase):

    def setUp(self):
        self.grid = Grid1D(24.0, 32)
        self.wave = gaussian_packet(self.grid, 3.0)

    def test_dirac_reduction_is_second_order(self):
        ratio, coarse, fine = dirac_halving_ratio(self.wave, 0.2, 0.01)
        self.assertLess(fine, coarse)
        self.assertAlmostEqual(ratio, 4.0, delta=0.8)

    def test_zero_kernel_is_free_motion(self):
        b0 = pair_operator(self.grid, np.zeros((1024, 1024)))
        run = gp_solve(self.wave, time_grid(0.1, 0.01), b0)
        self.assertLess(np.max(np.abs(run.final.psi - kinetic_step(self.wave, 0.1).psi)), 1e-13)

    def test_small_amplitude_scaling(self):
        b0 = default_pair_operator(self.grid, 1.0, 1.0)
        large = small_amplitude_departure(self.wave, b0, 0.01, 0.1)
        small = small_amplitude_departure(self.wave, b0, 0.01, 0.05)
        self.assertAlmostEqual(large / small, 8.0, delta=0.1)

    def test_mass_is_tracked(self):
        b0 = default_pair_operator(self.grid, 0.5, 1.5)
        run = gp_solve(self.wave, time_grid(0.05, 0.01), b0)
        self.assertEqual(len(run.masses()), 6)
        self.assertTrue(all(np.isfinite(run.masses())))


class OutputTests(SimpleTestCase):

    def setUp(self):
        grid = Grid1D(48.0, 64)
        self.run = nls_solve(gaussian_packet(grid, 3.0), time_grid(0.02, 1e-2))
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_trajectory_table(self):
        path = write_trajectory_csv(Path(self.tmp.name) / "nested" / "trajectory.csv", self.run)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "t,mass,energy,max_abs_psi")
        self.assertEqual(len(lines), 4)

    def test_snapshots(self):
        path = write_snapshots(Path(self.tmp.name) / "psi.bin", self.run, every=2)
        times, waves = read_snapshots(path)
        self.assertEqual(times, [0.0, 0.02])
        np.testing.assert_array_equal(waves[1].psi, self.run.final.psi)
        self.assertEqual(path.stat().st_size, 8 * (3 + 2 + 2 * 64 * 2))

    def test_truncated_snapshots(self):
        path = write_snapshots(Path(self.tmp.name) / "psi.bin", self.run)
        path.write_bytes(path.read_bytes()[:-8])
        with self.assertRaises(ValueError):
            read_snapshots(path)
