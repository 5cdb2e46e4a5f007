import math
import warnings
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from dynamics.hamiltonian import HamiltonianSpec, Propagators
from scenarios.config import load_fixture
from tensorcore.exceptions import ConvergenceRadiusWarning, LabelError, SymmetryError
from tensorcore.operators import (
    LabeledOperator,
    commutator,
    embed,
    partial_trace,
    product_state,
    propagator,
    symmetry_report,
    tensor,
    trace_norm,
)

from .correlations import CorrelationFamily, InitialDatum, check_radius, radius
from .exceptions import IntegrationError
from .kinetic import (
    collision_integral,
    equivalence_residual,
    gke_integrate,
    marginal_functional,
    substeps_for,
)
from .series import (
    SeriesTruncation,
    bbgky_marginals,
    bbgky_series,
    generator_rate_residual,
    gke_series,
    hierarchy_residual,
    initial_marginals,
)

KINETIC = np.diag([0.0, 1.0]).astype(complex)
COHERENT = np.array([[0.005, 0.0025], [0.0025, 0.005]], dtype=complex)


@contextmanager
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceRadiusWarning)
        yield


def workbench(**changes):
    return {**settings.WORKBENCH, **changes}


def free_propagators():
    return Propagators(HamiltonianSpec(KINETIC, np.zeros((4, 4), dtype=complex), 1.0))


def chaos_datum(matrix=COHERENT):
    return InitialDatum(LabeledOperator((1,), matrix, 2), CorrelationFamily.chaos(2))


def radius_warnings(call):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        call()
    return [w for w in caught if issubclass(w.category, ConvergenceRadiusWarning)]


class HierarchyTestCase(SimpleTestCase):

    def setUp(self):
        self.enterContext(quiet())
        self.scenario = load_fixture("standard_a")
        self.datum = self.scenario.datum
        self.propagators = Propagators(self.scenario.spec)
        self.trunc = SeriesTruncation(self.scenario.n_max)


class CorrelationFamilyTests(SimpleTestCase):

    def setUp(self):
        self.correlations = load_fixture("standard_a").correlations

    def test_closure_of_third_order(self):
        g2 = self.correlations.order(2)
        connected = g2 - LabeledOperator((1, 2), np.eye(4), 2)
        labels = (1, 2, 3)
        expected = LabeledOperator(labels, np.eye(8), 2)
        for pair in ((1, 2), (1, 3), (2, 3)):
            expected = expected + embed(connected.relabel(dict(zip((1, 2), pair))), labels)
        self.assertLess(trace_norm(self.correlations.order(3) - expected), 1e-12)

    def test_first_order_is_identity(self):
        np.testing.assert_allclose(self.correlations.order(1).matrix, np.eye(2))

    def test_chaos_family(self):
        chaos = CorrelationFamily.chaos(2)
        self.assertTrue(chaos.is_chaos)
        self.assertFalse(self.correlations.is_chaos)
        np.testing.assert_allclose(chaos.order(3).matrix, np.eye(8))

    def test_rejects_asymmetric_correlation(self):
        g2 = LabeledOperator((1, 2), np.kron(np.diag([1.0, 2.0]), np.eye(2)), 2)
        with self.assertRaises(SymmetryError):
            CorrelationFamily({2: g2}, 2)

    def test_rejects_wrong_labels(self):
        g2 = LabeledOperator((1, 3), np.eye(4), 2)
        with self.assertRaises(LabelError):
            CorrelationFamily({2: g2}, 2)

    def test_cluster_relabels(self):
        self.assertEqual(self.correlations.cluster((4, 2)).labels, (2, 4))
        self.assertAlmostEqual(self.correlations.max_operator_norm, 1.18, delta=1e-2)


class RadiusTests(SimpleTestCase):

    def test_thresholds(self):
        self.assertAlmostEqual(radius("bbgky"), math.exp(-1))
        self.assertAlmostEqual(radius("collision"), math.exp(-8))
        self.assertAlmostEqual(radius("kinetic"), math.exp(-10) / (1 + math.exp(-9)))
        self.assertAlmostEqual(radius("functional", 2), math.exp(-8))

    def test_both_sides(self):
        for name, s in (("bbgky", None), ("collision", None), ("kinetic", None), ("functional", 1), ("functional", 3)):
            bound = radius(name, s)
            self.assertEqual(radius_warnings(lambda: check_radius(name, 0.99 * bound, s)), [])
            found = radius_warnings(lambda: check_radius(name, bound, s))
            self.assertEqual(len(found), 1, name)

    def test_warning_is_logged(self):
        with self.assertLogs("hierarchy.correlations", level="WARNING"):
            with quiet():
                check_radius("bbgky", 1.0)


class SeriesTruncationTests(SimpleTestCase):

    def test_geometric_tail(self):
        self.assertAlmostEqual(SeriesTruncation(2, (1.0, 0.5, 0.25)).tail_estimate, 0.25)

    def test_ratio_is_clamped(self):
        truncation = SeriesTruncation(1, (1.0, 2.0))
        self.assertEqual(truncation.ratio, 0.9)
        self.assertAlmostEqual(truncation.tail_estimate, 18.0)

    @override_settings(WORKBENCH=workbench(TAIL_RATIO_CLAMP=0.5))
    def test_clamp_from_settings(self):
        self.assertEqual(SeriesTruncation(1, (1.0, 2.0)).ratio, 0.5)

    def test_degenerate_tails(self):
        self.assertEqual(SeriesTruncation(0, (0.3,)).tail_estimate, 0.0)
        self.assertEqual(SeriesTruncation(1, (0.0, 0.0)).tail_estimate, 0.0)
        self.assertEqual(SeriesTruncation(2).tail_estimate, 0.0)

    def test_negative_order(self):
        with self.assertRaises(ValueError):
            SeriesTruncation(-1)


class InitialMarginalTests(HierarchyTestCase):

    def test_one_particle(self):
        sequence = initial_marginals(self.datum, 1)
        np.testing.assert_allclose(sequence[1].matrix, self.datum.f1_0.matrix)

    def test_chaos_gives_products(self):
        datum = chaos_datum()
        sequence = initial_marginals(datum, 3)
        np.testing.assert_allclose(sequence[3].matrix, np.kron(np.kron(COHERENT, COHERENT), COHERENT))

    def test_pair_against_multiplication(self):
        f = self.datum.f1_0.matrix
        g2 = self.scenario.correlations.order(2).matrix
        sequence = initial_marginals(self.datum, 2)
        np.testing.assert_allclose(sequence[2].matrix, g2 @ np.kron(f, f), atol=1e-15)
        self.assertLess(sequence.symmetry_deviation(), 1e-14)

    def test_needs_a_marginal(self):
        with self.assertRaises(ValueError):
            initial_marginals(self.datum, 0)


class SolutionSeriesTests(HierarchyTestCase):

    def test_origin_reproduces_initial_data(self):
        for name in ("standard_a", "chaos_b"):
            scenario = load_fixture(name)
            propagators = Propagators(scenario.spec)
            initial = initial_marginals(scenario.datum, 3)
            for s in (1, 2, 3):
                value = bbgky_series(scenario.datum, propagators, 0.0, s, self.trunc).value
                self.assertLess(trace_norm(value - initial[s]), 1e-12, (name, s))

    def test_free_chaos_is_free_product(self):
        datum = chaos_datum()
        propagators = free_propagators()
        evolved = propagators.evolve(datum.f1_0, 0.7)
        value = bbgky_series(datum, propagators, 0.7, 2, self.trunc).value
        self.assertLess(trace_norm(value - product_state(evolved, (1, 2))), 1e-12)

    def test_terms_decay(self):
        result = bbgky_series(self.datum, self.propagators, 0.5, 1, SeriesTruncation(3))
        norms = result.term_norms
        self.assertEqual(len(norms), 4)
        self.assertTrue(all(b < a for a, b in zip(norms, norms[1:])))
        self.assertLess(result.truncation.ratio, 1.0)

    def test_hermitian_and_trace(self):
        sequence = bbgky_marginals(self.datum, self.propagators, 0.5, 3, self.trunc)
        initial = initial_marginals(self.datum, 3)
        for s in (1, 2, 3):
            self.assertLess(sequence[s].hermiticity_defect(), 1e-10)
            drift = abs(sequence[s].trace() - initial[s].trace())
            self.assertLessEqual(drift, sequence.tail(s) + 1e-12)
        self.assertLess(sequence.symmetry_deviation(), 1e-10)

    def test_kinetic_solution_at_origin(self):
        value = gke_series(self.datum, self.propagators, 0.0, self.trunc).value
        self.assertLess(trace_norm(value - self.datum.f1_0), 1e-12)

    def test_kinetic_solution_is_positive(self):
        result = gke_series(self.datum, self.propagators, 0.5, self.trunc)
        self.assertLess(result.value.hermiticity_defect(), 1e-10)
        self.assertGreater(result.value.eigenvalues()[0], -result.tail - 1e-12)

    def test_series_radius_warnings(self):
        small = self.datum
        large = self.datum.scaled(50.0)
        series = SeriesTruncation(0)
        self.assertEqual(radius_warnings(lambda: bbgky_series(small, self.propagators, 0.1, 1, series)), [])
        self.assertEqual(len(radius_warnings(lambda: bbgky_series(large, self.propagators, 0.1, 1, series))), 1)
        tiny = self.datum.scaled(1e-3)
        self.assertEqual(radius_warnings(lambda: gke_series(tiny, self.propagators, 0.1, series)), [])
        self.assertEqual(len(radius_warnings(lambda: gke_series(small, self.propagators, 0.1, series))), 1)

    @override_settings(WORKBENCH=workbench(THREADS=3))
    def test_threads_do_not_change_the_sum(self):
        threaded = bbgky_series(self.datum, self.propagators, 0.5, 2, self.trunc).value
        with self.settings(WORKBENCH=workbench(THREADS=1)):
            serial = bbgky_series(self.datum, self.propagators, 0.5, 2, self.trunc).value
        np.testing.assert_array_equal(threaded.matrix, serial.matrix)


class HierarchyCheckTests(HierarchyTestCase):

    def test_first_equation_by_finite_difference(self):
        residual, tail = hierarchy_residual(self.datum, self.propagators, 0.25, self.trunc)
        self.assertLess(residual, tail + 1e-8)

    def test_generator_quotient_is_second_order(self):
        f = load_fixture("standard_a_dense").datum.f1_0
        f = tensor(f, LabeledOperator((2,), COHERENT, 2))
        coarse = generator_rate_residual(self.propagators, f, 2e-3)
        fine = generator_rate_residual(self.propagators, f, 1e-3)
        self.assertAlmostEqual(coarse / fine, 4.0, delta=0.4)


class CollisionIntegralTests(HierarchyTestCase):

    def test_vanishes_without_interaction(self):
        f1 = LabeledOperator((1,), COHERENT, 2)
        value = collision_integral(f1, free_propagators(), 0.4, self.scenario.correlations, self.trunc).value
        self.assertEqual(trace_norm(value), 0.0)

    def test_traceless(self):
        value = collision_integral(self.datum.f1_0, self.propagators, 0.4, self.scenario.correlations, self.trunc).value
        self.assertLess(abs(value.trace()), 1e-11)

    def test_zeroth_order_mean_field_term(self):
        f1 = LabeledOperator((1,), COHERENT, 2)
        spec = self.scenario.spec
        t = 0.4
        backward = free_propagators().evolve(product_state(f1, (1, 2)), -t)
        forward = self.propagators.evolve(backward, t)
        expected = partial_trace(commutator(spec.potential_on(1, 2), forward), (1,)) * spec.epsilon
        value = collision_integral(f1, self.propagators, t, CorrelationFamily.chaos(2), SeriesTruncation(0)).value
        self.assertLess(trace_norm(value - expected), 1e-14)

    def test_radius_warning(self):
        chaos = CorrelationFamily.chaos(2)
        below = LabeledOperator((1,), np.diag([1e-4, 1e-4]), 2)
        above = LabeledOperator((1,), np.diag([2e-4, 2e-4]), 2)
        series = SeriesTruncation(0)
        self.assertEqual(radius_warnings(lambda: collision_integral(below, self.propagators, 0.1, chaos, series)), [])
        self.assertEqual(len(radius_warnings(lambda: collision_integral(above, self.propagators, 0.1, chaos, series))), 1)


class MarginalFunctionalTests(HierarchyTestCase):

    def test_uncorrelated_origin(self):
        f1 = LabeledOperator((1,), COHERENT, 2)
        value = marginal_functional(f1, self.propagators, 0.0, 3, CorrelationFamily.chaos(2), SeriesTruncation(0)).value
        self.assertLess(trace_norm(value - product_state(f1, (1, 2, 3))), 1e-15)

    def test_correlated_origin(self):
        f1 = self.datum.f1_0
        value = marginal_functional(f1, self.propagators, 0.0, 2, self.scenario.correlations, self.trunc).value
        expected = initial_marginals(self.datum, 2)[2]
        self.assertLess(trace_norm(value - expected), 1e-12)

    def test_symmetric_output(self):
        f1 = gke_series(self.datum, self.propagators, 0.5, self.trunc).value
        value = marginal_functional(f1, self.propagators, 0.5, 2, self.scenario.correlations, self.trunc).value
        self.assertLess(symmetry_report(value).max_deviation, 1e-10)

    def test_radius_warning(self):
        chaos = CorrelationFamily.chaos(2)
        series = SeriesTruncation(0)
        bound = radius("functional", 1)
        below = LabeledOperator((1,), np.diag([0.4, 0.4]) * bound, 2)
        above = LabeledOperator((1,), np.diag([0.5, 0.5]) * bound, 2)
        self.assertEqual(radius_warnings(lambda: marginal_functional(below, self.propagators, 0.1, 1, chaos, series)), [])
        self.assertEqual(
            len(radius_warnings(lambda: marginal_functional(above, self.propagators, 0.1, 1, chaos, series))), 1
        )


class KineticIntegrationTests(HierarchyTestCase):

    def test_free_equation_is_free_conjugation(self):
        datum = chaos_datum()
        propagators = free_propagators()
        grid = np.linspace(0.0, 0.5, 11)
        trajectory = gke_integrate(datum, propagators, grid, self.trunc)
        for t, state in zip(trajectory.times, trajectory.states):
            u = propagator(LabeledOperator((1,), KINETIC, 2), t)
            exact = u.matrix @ COHERENT @ u.matrix.conj().T
            self.assertLess(trace_norm(state.matrix - exact), 1e-9)

    def test_standard_scenario(self):
        trajectory = gke_integrate(self.datum, self.propagators, self.scenario.time_grid, self.trunc)
        self.assertEqual(len(trajectory.states), self.scenario.steps + 1)
        self.assertLess(trajectory.trace_drift, 1e-10)
        for defect, tail in zip(trajectory.defects, trajectory.tails):
            self.assertLessEqual(defect, tail + self.scenario.tolerance("defect"))
        t, trace, norm, smallest = trajectory.rows()[-1]
        self.assertAlmostEqual(t, self.scenario.t_end)
        self.assertAlmostEqual(trace, 0.01, delta=1e-10)

    @override_settings(WORKBENCH=workbench(RK_STEP_BUDGET=1e6))
    def test_coarse_steps_are_rejected(self):
        with self.assertRaises(IntegrationError) as raised:
            gke_integrate(chaos_datum(), free_propagators(), [0.0, 2.0, 4.0], SeriesTruncation(0))
        self.assertIn("defect", raised.exception.diagnostics)

    def test_non_uniform_grid(self):
        with self.assertRaises(ValueError):
            gke_integrate(chaos_datum(), free_propagators(), [0.0, 0.1, 0.3], self.trunc)

    def test_substep_budget(self):
        self.assertEqual(substeps_for(0.05, 0.0), 1)
        m = substeps_for(0.05, 1.0)
        self.assertLess((0.05 / m) ** 4, 1e-10)
        self.assertGreaterEqual((0.05 / (m - 1)) ** 4, 1e-10)


class EquivalenceTests(HierarchyTestCase):

    def test_free_uncorrelated(self):
        result = equivalence_residual(chaos_datum(), free_propagators(), 0.5, 2, self.trunc)
        self.assertLess(result.residual, 1e-11)

    def test_standard_scenario_within_tails(self):
        for t in self.scenario.times:
            result = equivalence_residual(self.datum, self.propagators, t, 2, self.trunc)
            self.assertTrue(result.passed, (t, result))

    def test_order_two_sized_defect_fails(self):
        result = equivalence_residual(self.datum, self.propagators, 0.5, 2, self.trunc)
        self.assertLess(result.tolerance, 1e-14)
        self.assertFalse(replace(result, residual=result.residual + 1e-10).passed)

    def test_improves_with_order(self):
        first = equivalence_residual(self.datum, self.propagators, 0.5, 2, SeriesTruncation(1))
        second = equivalence_residual(self.datum, self.propagators, 0.5, 2, SeriesTruncation(2))
        self.assertLess(second.residual, first.residual)

    def test_needs_pairs(self):
        with self.assertRaises(ValueError):
            equivalence_residual(self.datum, self.propagators, 0.5, 1, self.trunc)
