import math
import warnings

import numpy as np
from django.test import SimpleTestCase

from dynamics.cumulants import probe_basis, product_probes
from dynamics.hamiltonian import HamiltonianSpec, Propagators
from hierarchy.correlations import CorrelationFamily
from hierarchy.series import SeriesTruncation
from scenarios.config import load_fixture
from tensorcore.exceptions import ConvergenceRadiusWarning
from tensorcore.operators import LabeledOperator, product_state, propagator, trace_norm

from .exceptions import HorizonError
from .studies import (
    ScaledFamily,
    correlation_propagation_residual,
    first_generator_limit_study,
    higher_order_vanishing_study,
    meanfield_convergence_study,
    propagated_correlation,
    strictly_decreasing,
)
from .vlasov import (
    VlasovState,
    hartree_integrate,
    hartree_rhs,
    horizon,
    pair_coefficient,
    quadrature_gap,
    series_ode_gap,
    term_bound,
    vlasov_integrate,
    vlasov_rhs,
    vlasov_series,
)

KINETIC = np.diag([0.0, 1.0]).astype(complex)
COHERENT = np.array([[0.006, 0.002 - 0.001j], [0.002 + 0.001j, 0.004]], dtype=complex)


class MeanFieldTestCase(SimpleTestCase):

    def setUp(self):
        self.enterContext(warnings.catch_warnings())
        warnings.simplefilter("ignore", ConvergenceRadiusWarning)
        self.scenario = load_fixture("standard_a_ladder")
        self.spec = self.scenario.spec
        self.propagators = Propagators(self.spec)
        self.correlations = self.scenario.correlations
        self.chaos = CorrelationFamily.chaos(2)
        self.f1 = LabeledOperator((1,), COHERENT, 2)
        self.family = ScaledFamily(self.scenario.eps_ladder, self.scenario.one_particle_operator)


class ScaledFamilyTests(MeanFieldTestCase):

    def test_exact_scaling(self):
        datum = self.family.datum(0.25, self.correlations)
        self.assertEqual(trace_norm(datum.f1_0 * 0.25 - self.family.f1_limit), 0.0)

    def test_ladder_must_decrease(self):
        with self.assertRaises(ValueError):
            ScaledFamily((0.25, 0.5), self.family.f1_limit)
        with self.assertRaises(ValueError):
            ScaledFamily((0.5, 0.5), self.family.f1_limit)
        with self.assertRaises(ValueError):
            ScaledFamily((0.5, -0.1), self.family.f1_limit)


class HorizonTests(MeanFieldTestCase):

    def test_value(self):
        t0 = horizon(self.spec, self.f1)
        self.assertAlmostEqual(t0.t0, 1.0 / (2 * self.spec.potential_norm * trace_norm(self.f1)))
        self.assertTrue(t0.contains(0.99 * t0.t0))
        self.assertFalse(t0.contains(t0.t0))

    def test_free_motion_has_no_horizon(self):
        spec = HamiltonianSpec(KINETIC, np.zeros((4, 4)), 1.0)
        self.assertEqual(horizon(spec, self.f1).t0, math.inf)

    def test_series_refuses_late_times(self):
        t0 = horizon(self.spec, self.f1).t0
        with self.assertRaisesMessage(HorizonError, "outside convergence horizon"):
            vlasov_series(self.f1, self.propagators, t0, 1, self.correlations)
        vlasov_series(self.f1, self.propagators, 0.99 * t0, 0, self.correlations)


class VlasovRhsTests(MeanFieldTestCase):

    def test_uncorrelated_reduction(self):
        state = VlasovState(self.f1, 0.3)
        gap = trace_norm(vlasov_rhs(state, self.propagators, self.chaos) - hartree_rhs(self.f1, self.spec))
        self.assertLess(gap, 1e-13)

    def test_traceless(self):
        rhs = vlasov_rhs(VlasovState(self.f1, 0.3), self.propagators, self.correlations)
        self.assertLess(abs(rhs.trace()), 1e-12)

    def test_coefficient_at_origin(self):
        coefficient = pair_coefficient(self.propagators, self.correlations, 0.0)
        np.testing.assert_array_equal(coefficient.matrix, self.correlations.order(2).matrix)

    def test_coefficient_follows_free_motion(self):
        coefficient = pair_coefficient(self.propagators, self.correlations, 0.4)
        u = np.kron(*(propagator(self.spec.kinetic_on(1), 0.4).matrix,) * 2)
        expected = u @ self.correlations.order(2).matrix @ u.conj().T
        np.testing.assert_allclose(coefficient.matrix, expected, atol=1e-14)


class VlasovIntegrationTests(MeanFieldTestCase):

    def test_free_motion(self):
        spec = HamiltonianSpec(KINETIC, np.zeros((4, 4)), 1.0)
        trajectory = vlasov_integrate(self.f1, Propagators(spec), np.linspace(0.0, 0.5, 11), self.correlations)
        for t, state in zip(trajectory.times, trajectory.states):
            u = propagator(spec.kinetic_on(1), t).matrix
            self.assertLess(trace_norm(state.matrix - u @ COHERENT @ u.conj().T), 1e-9)

    def test_conservation(self):
        trajectory = vlasov_integrate(self.f1, self.propagators, self.scenario.time_grid, self.correlations)
        self.assertLess(trajectory.trace_drift, 1e-10)
        self.assertLess(trajectory.hermiticity_defect, 1e-10)

    def test_uncorrelated_matches_hartree(self):
        grid = self.scenario.time_grid
        vlasov = vlasov_integrate(self.f1, self.propagators, grid, self.chaos)
        hartree = hartree_integrate(self.f1, self.spec, grid)
        self.assertLess(trace_norm(vlasov.states[-1] - hartree.states[-1]), 1e-12)


class VlasovSeriesTests(MeanFieldTestCase):

    def test_zeroth_order_is_free_motion(self):
        value = vlasov_series(self.f1, self.propagators, 0.5, 0, self.correlations).value
        u = propagator(self.spec.kinetic_on(1), 0.5).matrix
        self.assertLess(trace_norm(value.matrix - u @ COHERENT @ u.conj().T), 1e-14)

    def test_origin(self):
        value = vlasov_series(self.f1, self.propagators, 0.0, 2, self.correlations).value
        self.assertLess(trace_norm(value - self.f1), 1e-15)

    def test_terms_within_envelope(self):
        t0 = horizon(self.spec, self.f1).t0
        result = vlasov_series(self.f1, self.propagators, 0.5, 3, self.correlations)
        for n, norm in enumerate(result.term_norms):
            self.assertLessEqual(norm, term_bound(self.f1, 0.5, n, t0, self.correlations) * (1 + 1e-9))

    def test_agrees_with_integration_without_correlations(self):
        gap, allowance = series_ode_gap(self.f1, self.propagators, 0.5, 2, self.chaos)
        self.assertLessEqual(gap, allowance)
        self.assertLess(allowance, 1e-11)

    def test_correlated_gap_is_the_closure_mismatch(self):
        second, allowance = series_ode_gap(self.f1, self.propagators, 0.5, 2, self.correlations)
        third, _ = series_ode_gap(self.f1, self.propagators, 0.5, 3, self.correlations)
        self.assertGreater(second, allowance)
        self.assertGreater(third, 0.5 * second)


    def test_quadrature_self_check(self):
        self.assertLess(quadrature_gap(self.f1, self.propagators, 0.5, 2, self.correlations), 1e-12)


class ConvergenceStudyTests(MeanFieldTestCase):

    def test_distances_decrease_down_the_ladder(self):
        rows = meanfield_convergence_study(self.family, 0.5, self.spec, self.correlations, SeriesTruncation(2))
        self.assertEqual([row.epsilon for row in rows], list(self.scenario.eps_ladder))
        self.assertTrue(strictly_decreasing(row.distance for row in rows), rows)

    def test_deterministic(self):
        family = ScaledFamily((0.25,), self.family.f1_limit)
        first = meanfield_convergence_study(family, 0.5, self.spec, self.correlations, SeriesTruncation(2))
        second = meanfield_convergence_study(family, 0.5, self.spec, self.correlations, SeriesTruncation(2))
        self.assertEqual(first[0].distance, second[0].distance)

    def test_correlations_propagate(self):
        rows = correlation_propagation_residual(
            self.family, 0.5, 2, self.spec, self.correlations, SeriesTruncation(2)
        )
        self.assertTrue(strictly_decreasing(row.distance for row in rows), rows)

    def test_propagation_at_origin(self):
        rows = correlation_propagation_residual(
            self.family, 0.0, 2, self.spec, self.correlations, SeriesTruncation(2), steps=1
        )
        for row in rows:
            self.assertLess(row.distance, 1e-12)

    def test_chaos_control(self):
        limit = propagated_correlation(self.propagators, self.chaos, self.f1, 0.5, 2)
        np.testing.assert_allclose(limit.matrix, product_state(self.f1, (1, 2)).matrix, atol=1e-15)
        rows = correlation_propagation_residual(self.family, 0.5, 2, self.spec, self.chaos, SeriesTruncation(2))
        self.assertTrue(strictly_decreasing(row.distance for row in rows), rows)

    def test_needs_pairs(self):
        with self.assertRaises(ValueError):
            correlation_propagation_residual(self.family, 0.5, 1, self.spec, self.correlations, SeriesTruncation(1))


class GeneratedLimitTests(MeanFieldTestCase):

    def test_first_generator_approaches_free_carriage(self):
        rng = self.scenario.rng()
        probes = probe_basis(2, (1, 2), rng, 4)
        rows = first_generator_limit_study(self.scenario.eps_ladder, 0.5, 2, self.spec, self.correlations, probes)
        self.assertTrue(strictly_decreasing(norm for _, norm in rows), rows)

    def test_higher_orders_vanish(self):
        rng = self.scenario.rng()
        probes = {n: product_probes(2, 2, n, rng, 3) for n in (1, 2)}
        rows = higher_order_vanishing_study(self.scenario.eps_ladder, 0.5, 2, 2, self.spec, self.correlations, probes)
        for n in (1, 2):
            norms = [norm for _, order, norm in rows if order == n]
            self.assertTrue(strictly_decreasing(norms), (n, norms))
